//! Post-hoc spike removal: explicit phase arcs, LFP-timed inhibition, and a
//! random control.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spike::{spike_phase, Spike, SpikeTrain};

#[derive(Debug, Error, PartialEq)]
pub enum SparsifyError {
    #[error("invalid sparsifier parameter: {0}")]
    BadParameter(String),
    #[error("sparsified train is not a subset of the original")]
    NotSubset,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SparsifyMethod {
    /// Remove spikes whose phase lies in an arc of `arc`·π radians centred on 0.
    Explicit { arc: f64, offset: f64 },
    /// Silence the layer for `window` seconds around each LFP onset peak.
    Inhibitory { window: f64, kernel_tau: f64, bin_dt: f64 },
    /// Remove each spike independently with probability `p`.
    Random { p: f64, seed: u64 },
}

impl SparsifyMethod {
    pub fn validate(&self, period: f64) -> Result<(), SparsifyError> {
        let bad = |m: String| Err(SparsifyError::BadParameter(m));
        match *self {
            SparsifyMethod::Explicit { arc, offset } => {
                if !(0.0..=2.0).contains(&arc) {
                    return bad(format!("arc {arc} outside [0, 2]"));
                }
                if !offset.is_finite() {
                    return bad(format!("offset {offset}"));
                }
            }
            SparsifyMethod::Inhibitory {
                window,
                kernel_tau,
                bin_dt,
            } => {
                if !(0.0..=period).contains(&window) {
                    return bad(format!("window {window} outside [0, {period}]"));
                }
                if !(kernel_tau > 0.0 && kernel_tau.is_finite() && bin_dt > 0.0 && bin_dt.is_finite()) {
                    return bad(format!("kernel_tau {kernel_tau} and bin_dt {bin_dt} must be positive"));
                }
            }
            SparsifyMethod::Random { p, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("p {p} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, train: &SpikeTrain, period: f64) -> Result<SpikeTrain, SparsifyError> {
        self.validate(period)?;
        Ok(match *self {
            SparsifyMethod::Explicit { arc, offset } => sparsify_explicit(train, arc, offset, period),
            SparsifyMethod::Inhibitory {
                window,
                kernel_tau,
                bin_dt,
            } => sparsify_inhibitory(train, window, kernel_tau, bin_dt, period),
            SparsifyMethod::Random { p, seed } => sparsify_random(train, p, seed),
        })
    }
}

/// Removes spikes with decoded phase `|φ| < arc/2`; `arc = 2` removes all.
pub fn sparsify_explicit(train: &SpikeTrain, arc: f64, offset: f64, period: f64) -> SpikeTrain {
    if arc >= 2.0 {
        // the full circle, including the φ = −1 boundary point
        return train.retain(|_| false);
    }
    let half = arc / 2.0;
    train.retain(|s| spike_phase(s.time, offset, period, false).abs() >= half)
}

/// Causal exponential field of a train sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LfpSeries {
    pub t0: f64,
    pub bin_dt: f64,
    pub field: Vec<f64>,
    /// Forward difference `(f[i+1] − f[i]) / bin_dt`, 0 at the last sample.
    pub derivative: Vec<f64>,
}

impl LfpSeries {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.bin_dt
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }
}

pub fn compute_lfp(train: &SpikeTrain, kernel_tau: f64, bin_dt: f64) -> LfpSeries {
    let (t0, t1) = train.t_span();
    let n = ((t1 - t0) / bin_dt).floor() as usize + 1;
    let step_decay = (-bin_dt / kernel_tau).exp();
    let mut field = vec![0.0; n];
    let events = train.events();
    let mut next = 0;
    let mut acc = 0.0;
    for (i, f) in field.iter_mut().enumerate() {
        let t = t0 + i as f64 * bin_dt;
        acc *= step_decay;
        while next < events.len() && events[next].time <= t {
            acc += (-(t - events[next].time) / kernel_tau).exp();
            next += 1;
        }
        *f = acc;
    }
    let mut derivative: Vec<f64> = field.windows(2).map(|w| (w[1] - w[0]) / bin_dt).collect();
    derivative.push(0.0);
    LfpSeries {
        t0,
        bin_dt,
        field,
        derivative,
    }
}

/// Onset peaks: local maxima of the positive LFP derivative, at least `T/2`
/// apart and at most one per cycle, larger peaks taking precedence.
/// Returned in time order.
///
/// A peak is reported at the midpoint of its forward-difference bin.
pub fn detect_inhibition_peaks(series: &LfpSeries, period: f64) -> Vec<f64> {
    let d = &series.derivative;
    let mut candidates: Vec<(f64, f64)> = (0..d.len())
        .filter(|&i| {
            let left = if i == 0 { 0.0 } else { d[i - 1] };
            let right = d.get(i + 1).copied().unwrap_or(0.0);
            d[i] > 0.0 && d[i] > left && d[i] >= right
        })
        .map(|i| (series.time(i) + series.bin_dt / 2.0, d[i]))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let min_sep = period / 2.0;
    let cycle = |t: f64| cycle_of(t, series.t0, period);
    let mut kept: Vec<f64> = Vec::new();
    for (t, _) in candidates {
        if kept.iter().all(|&k| (k - t).abs() >= min_sep && cycle(k) != cycle(t)) {
            kept.push(t);
        }
    }
    kept.sort_by(f64::total_cmp);
    kept
}

/// Cycle of `t` counted from the start of the train's span.
fn cycle_of(t: f64, t0: f64, period: f64) -> i64 {
    ((t - t0) / period).floor() as i64
}

/// Distance between two times on the circle of circumference `period`.
fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Removes spikes falling in an inhibitory window of width `window` centred
/// on a peak of the same cycle.
///
/// The window is measured on the oscillation's circle, so `window = T`
/// silences every cycle that has a peak. Cycles without a peak are untouched.
pub fn sparsify_inhibitory(train: &SpikeTrain, window: f64, kernel_tau: f64, bin_dt: f64, period: f64) -> SpikeTrain {
    if window <= 0.0 || train.is_empty() {
        return train.clone();
    }
    let peaks = detect_inhibition_peaks(&compute_lfp(train, kernel_tau, bin_dt), period);
    inhibit_around(train, &peaks, window, period)
}

/// The removal step of [`sparsify_inhibitory`] for given peak times.
pub fn inhibit_around(train: &SpikeTrain, peaks: &[f64], window: f64, period: f64) -> SpikeTrain {
    if window <= 0.0 {
        return train.clone();
    }
    let t0 = train.t_span().0;
    let half = window / 2.0;
    train.retain(|s| {
        let c = cycle_of(s.time, t0, period);
        !peaks
            .iter()
            .any(|&p| cycle_of(p, t0, period) == c && circular_distance(s.time, p, period) <= half)
    })
}

/// Bernoulli(p) removal with a ChaCha8 stream seeded by `seed`.
pub fn sparsify_random(train: &SpikeTrain, p: f64, seed: u64) -> SpikeTrain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    train.retain(|_: &Spike| rng.random::<f64>() >= p)
}

/// Spike counts before and after removal; sums across layers and images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SparsifyStats {
    pub spikes_before: usize,
    pub spikes_after: usize,
}

impl SparsifyStats {
    pub fn fraction_removed(&self) -> f64 {
        if self.spikes_before == 0 {
            0.0
        } else {
            1.0 - self.spikes_after as f64 / self.spikes_before as f64
        }
    }
}

impl std::ops::Add for SparsifyStats {
    type Output = SparsifyStats;
    fn add(self, o: SparsifyStats) -> SparsifyStats {
        SparsifyStats {
            spikes_before: self.spikes_before + o.spikes_before,
            spikes_after: self.spikes_after + o.spikes_after,
        }
    }
}

impl std::iter::Sum for SparsifyStats {
    fn sum<I: Iterator<Item = SparsifyStats>>(iter: I) -> Self {
        iter.fold(SparsifyStats::default(), |a, b| a + b)
    }
}

pub fn stats(before: &SpikeTrain, after: &SpikeTrain) -> Result<SparsifyStats, SparsifyError> {
    if !after.is_subset_of(before) {
        return Err(SparsifyError::NotSubset);
    }
    Ok(SparsifyStats {
        spikes_before: before.len(),
        spikes_after: after.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: f64 = 1.0;

    fn train(times: &[(usize, f64)], span: (f64, f64)) -> SpikeTrain {
        let n = times.iter().map(|s| s.0 + 1).max().unwrap_or(1);
        SpikeTrain::new(
            n,
            span,
            times.iter().map(|&(channel, time)| Spike { channel, time }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn explicit_examples() {
        // phases −0.6, −0.1, 0.05, 0.3 at offset 0
        let tr = train(&[(0, 0.7), (1, 0.95), (2, 0.025), (3, 0.15)], (0.0, 1.0));
        let out = sparsify_explicit(&tr, 0.4, 0.0, T);
        let kept: Vec<usize> = out.events().iter().map(|s| s.channel).collect();
        assert_eq!(kept, vec![3, 0]);
        assert_eq!(sparsify_explicit(&tr, 0.0, 0.0, T), tr);
        assert!(sparsify_explicit(&tr, 2.0, 0.0, T).is_empty());
        // the anti-phase point itself goes at arc = 2
        let anti = train(&[(0, 0.5)], (0.0, 1.0));
        assert!(sparsify_explicit(&anti, 2.0, 0.0, T).is_empty());
        assert_eq!(sparsify_explicit(&anti, 1.99, 0.0, T), anti);
    }

    #[test]
    fn lfp_kernel() {
        let empty = SpikeTrain::empty(1, (0.0, 1.0));
        let l = compute_lfp(&empty, 0.05, 0.005);
        assert!(l.field.iter().all(|&f| f == 0.0));
        assert!(detect_inhibition_peaks(&l, T).is_empty());

        let one = train(&[(0, 0.25)], (0.0, 1.0));
        let l = compute_lfp(&one, 0.05, 0.005);
        assert_eq!(l.len(), 201);
        assert!((l.field[50] - 1.0).abs() < 1e-9);
        assert_eq!(l.field[49], 0.0);
        assert!((l.field[60] - (-1.0f64).exp()).abs() < 1e-9);
    }

    fn bursts() -> SpikeTrain {
        let mut ev = Vec::new();
        for c in 0..3 {
            for k in 0..20 {
                ev.push((k, c as f64 + 0.1 + 0.001 * k as f64));
            }
            // stragglers at phase about ±0.6
            ev.push((20, c as f64 + 0.1 + 0.3));
            ev.push((21, c as f64 + 0.1 + 0.7));
        }
        train(&ev, (0.0, 3.0))
    }

    #[test]
    fn burst_peaks() {
        let l = compute_lfp(&bursts(), T / 20.0, T / 200.0);
        let peaks = detect_inhibition_peaks(&l, T);
        assert_eq!(peaks.len(), 3);
        for (c, p) in peaks.iter().enumerate() {
            let onset = c as f64 + 0.1;
            assert!(*p >= onset - 0.01 && *p <= onset + 0.03, "{p}");
        }
    }

    #[test]
    fn peak_locations_are_scale_invariant() {
        let a = compute_lfp(&bursts(), T / 20.0, T / 200.0);
        let mut doubled = a.clone();
        doubled.derivative.iter_mut().for_each(|d| *d *= 2.0);
        assert_eq!(detect_inhibition_peaks(&a, T), detect_inhibition_peaks(&doubled, T));
    }

    #[test]
    fn inhibitory_examples() {
        let b = bursts();
        assert_eq!(sparsify_inhibitory(&b, 0.0, T / 20.0, T / 200.0, T), b);
        assert!(sparsify_inhibitory(&b, T, T / 20.0, T / 200.0, T).is_empty());
        let out = sparsify_inhibitory(&b, T / 4.0, T / 20.0, T / 200.0, T);
        let mut kept: Vec<usize> = out.events().iter().map(|s| s.channel).collect();
        kept.dedup();
        assert_eq!(kept, vec![20, 21, 20, 21, 20, 21]);
    }

    #[test]
    fn random_examples() {
        let events: Vec<(usize, f64)> = (0..10_000).map(|i| (i % 7, i as f64 * 1e-4)).collect();
        let tr = train(&events, (0.0, 1.0));
        assert_eq!(sparsify_random(&tr, 0.0, 3), tr);
        assert!(sparsify_random(&tr, 1.0, 3).is_empty());
        let half = sparsify_random(&tr, 0.5, 3);
        let f = stats(&tr, &half).unwrap().fraction_removed();
        assert!((f - 0.5).abs() < 0.02);
        assert_eq!(half, sparsify_random(&tr, 0.5, 3));
        assert_ne!(half, sparsify_random(&tr, 0.5, 4));
    }

    #[test]
    fn stats_examples() {
        let tr = train(&[(0, 0.1), (0, 0.2), (0, 0.3), (0, 0.4)], (0.0, 1.0));
        assert_eq!(stats(&tr, &tr).unwrap().fraction_removed(), 0.0);
        assert_eq!(stats(&tr, &tr.retain(|_| false)).unwrap().fraction_removed(), 1.0);
        let three = tr.retain(|s| s.time > 0.15);
        assert_eq!(stats(&tr, &three).unwrap().fraction_removed(), 0.25);
        assert_eq!(stats(&three, &tr), Err(SparsifyError::NotSubset));
        let empty = SpikeTrain::empty(1, (0.0, 1.0));
        assert_eq!(stats(&empty, &empty).unwrap().fraction_removed(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(SparsifyMethod::Explicit { arc: 2.1, offset: 0.0 }.validate(T).is_err());
        assert!(SparsifyMethod::Random { p: -0.1, seed: 0 }.validate(T).is_err());
        assert!(SparsifyMethod::Inhibitory {
            window: 1.5,
            kernel_tau: 0.05,
            bin_dt: 0.005
        }
        .validate(T)
        .is_err());
    }

    fn arb_train() -> impl Strategy<Value = SpikeTrain> {
        proptest::collection::vec((0usize..8, 0.0f64..4.0), 0..120).prop_map(|v| {
            let ev = v.into_iter().map(|(channel, time)| Spike { channel, time }).collect();
            SpikeTrain::new(8, (0.0, 4.0), ev).unwrap()
        })
    }

    proptest! {
        #[test]
        fn explicit_subset_monotone_idempotent(tr in arb_train(), a in 0.0f64..2.0, b in 0.0f64..2.0, off in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = sparsify_explicit(&tr, lo, off, T);
            let large = sparsify_explicit(&tr, hi, off, T);
            prop_assert!(small.is_subset_of(&tr));
            prop_assert!(large.is_subset_of(&small));
            prop_assert_eq!(small.n_channels(), tr.n_channels());
            prop_assert_eq!(small.t_span(), tr.t_span());
            prop_assert_eq!(sparsify_explicit(&small, lo, off, T), small);
        }

        #[test]
        fn inhibitory_subset_monotone(tr in arb_train(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = sparsify_inhibitory(&tr, lo, T / 20.0, T / 200.0, T);
            let large = sparsify_inhibitory(&tr, hi, T / 20.0, T / 200.0, T);
            prop_assert!(small.is_subset_of(&tr));
            prop_assert!(large.is_subset_of(&small));
        }

        #[test]
        fn random_subset_and_deterministic(tr in arb_train(), p in 0.0f64..1.0, seed in any::<u64>()) {
            let out = sparsify_random(&tr, p, seed);
            prop_assert!(out.is_subset_of(&tr));
            prop_assert_eq!(out, sparsify_random(&tr, p, seed));
        }

        #[test]
        fn lfp_is_additive(a in arb_train(), b in arb_train()) {
            let merged = a.merge(&b).unwrap();
            let (la, lb, lm) = (compute_lfp(&a, 0.05, 0.005), compute_lfp(&b, 0.05, 0.005), compute_lfp(&merged, 0.05, 0.005));
            // merge dedups coincident events, which the additive law does not
            prop_assume!(merged.len() == a.len() + b.len());
            for i in 0..lm.len() {
                prop_assert!((la.field[i] + lb.field[i] - lm.field[i]).abs() < 1e-9);
            }
        }
    }
}

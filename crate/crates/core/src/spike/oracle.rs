//! Fixed-step reference simulator, used only to cross-check [`simulate_layer`].
//!
//! [`simulate_layer`]: super::simulate_layer

use num_complex::Complex64;

use super::rf::RfParams;
use super::sim::Schedule;
use super::train::{Spike, SpikeTrain};
use super::SimError;
use crate::phasor::PhasorLayer;

/// Grid simulation with step `dt`.
///
/// Injections land on the grid point at or before their true time. A neuron
/// spikes at grid point `n` when its voltage is a strict local maximum
/// (`v[n−1] < v[n] ≥ v[n+1]`) with `|z| ≥ θ`, unless an injection landed on
/// `n` itself: such maxima are kinks from the current jump, not maxima of the
/// free dynamics.
pub fn fixed_step_oracle(
    input: &SpikeTrain,
    layer: &PhasorLayer,
    params: &RfParams,
    schedule: &Schedule,
    dt: f64,
) -> Result<SpikeTrain, SimError> {
    params.validate()?;
    if !(dt > 0.0 && dt <= params.period / 100.0) {
        return Err(SimError::BadConfig(format!("oracle dt {dt} must be in (0, T/100]")));
    }
    if input.n_channels() != layer.in_width() {
        return Err(SimError::ChannelCount {
            expected: layer.in_width(),
            got: input.n_channels(),
        });
    }
    let (t0, t1) = schedule.t_span;
    let steps = ((t1 - t0) / dt).floor() as usize;
    let n = layer.out_width();

    // injections[i] = (grid index, weights source); bias uses channel in_width
    let mut injections: Vec<(usize, usize)> = input
        .events()
        .iter()
        .map(|s| (s.time, s.channel))
        .chain(schedule.bias_times.iter().map(|&t| (t, layer.in_width())))
        .filter(|&(t, _)| t >= t0 && t <= t1)
        .map(|(t, ch)| ((((t - t0) / dt) + 1e-9).floor() as usize, ch))
        .collect();
    injections.sort();

    let step = (params.generator() * dt).exp();
    let mut z = vec![Complex64::ZERO; n];
    let mut prev_v = vec![f64::NEG_INFINITY; n];
    // candidate maxima wait one step for v[n+1]
    let mut candidate: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut out = Vec::new();
    let mut next = 0;
    for i in 0..=steps {
        if i > 0 {
            for zk in z.iter_mut() {
                *zk *= step;
            }
        }
        let mut kink = false;
        while next < injections.len() && injections[next].0 == i {
            let ch = injections[next].1;
            for (k, zk) in z.iter_mut().enumerate() {
                *zk += if ch == layer.in_width() {
                    layer.bias[k]
                } else {
                    layer.weights[[k, ch]]
                };
            }
            kink = true;
            next += 1;
        }
        let t = t0 + i as f64 * dt;
        for k in 0..n {
            let v = z[k].im;
            if let Some((vm, tm)) = candidate[k].take() {
                if vm >= v {
                    out.push(Spike { channel: k, time: tm });
                }
            }
            if prev_v[k] < v && !kink && z[k].norm() >= params.threshold {
                candidate[k] = Some((v, t));
            }
            prev_v[k] = v;
        }
    }
    SpikeTrain::new(n, schedule.t_span, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spike::simulate_layer;
    use ndarray::array;

    #[test]
    fn agrees_on_a_simple_scenario() {
        let params = RfParams::default();
        let layer = PhasorLayer::new(array![[0.8]], array![0.0], true).unwrap();
        let input = SpikeTrain::new(1, (0.0, 4.0), vec![Spike { channel: 0, time: 0.3 }]).unwrap();
        let sched = Schedule {
            bias_times: vec![],
            t_span: (0.0, 4.0),
        };
        let dt = 1.0 / 2000.0;
        let a = simulate_layer(&input, &layer, &params, &sched).unwrap();
        let b = fixed_step_oracle(&input, &layer, &params, &sched, dt).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.events().iter().zip(b.events()) {
            assert!((x.time - y.time).abs() <= 2.0 * dt);
        }
    }

    #[test]
    fn subthreshold_is_silent() {
        let params = RfParams::default();
        let layer = PhasorLayer::new(array![[0.01]], array![0.0], true).unwrap();
        let input = SpikeTrain::new(1, (0.0, 2.0), vec![Spike { channel: 0, time: 0.5 }]).unwrap();
        let sched = Schedule {
            bias_times: vec![],
            t_span: (0.0, 2.0),
        };
        assert!(fixed_step_oracle(&input, &layer, &params, &sched, 1e-3).unwrap().is_empty());
        assert!(simulate_layer(&input, &layer, &params, &sched).unwrap().is_empty());
    }

    #[test]
    fn rejects_coarse_steps() {
        let layer = PhasorLayer::new(array![[1.0]], array![0.0], true).unwrap();
        let sched = Schedule {
            bias_times: vec![],
            t_span: (0.0, 1.0),
        };
        let input = SpikeTrain::empty(1, (0.0, 1.0));
        assert!(fixed_step_oracle(&input, &layer, &RfParams::default(), &sched, 0.1).is_err());
    }
}

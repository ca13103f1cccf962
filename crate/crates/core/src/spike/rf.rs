//! Resonate-and-fire neuron: `z' = (−λ + iω)z` between inputs, with
//! `Re z` the current and `Im z` the voltage.
//!
//! The neuron spikes at each maximum of the voltage under free evolution.
//! Since `dv/dt = Im((−λ + iω)z)`, that maximum sits at the fixed angle
//! `atan2(ω, λ)` (a quarter turn when λ = 0), so spike times follow from the
//! current angle in closed form.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RfParams {
    /// Resonant period T, seconds.
    pub period: f64,
    /// Decay rate λ, 1/seconds.
    pub decay: f64,
    /// Minimum |z| at a voltage maximum for a spike to be emitted.
    pub threshold: f64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            period: 1.0,
            decay: 1.0,
            threshold: 0.05,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.period.is_finite()
            && self.period > 0.0
            && self.decay.is_finite()
            && self.decay >= 0.0
            && self.threshold.is_finite()
            && self.threshold > 0.0;
        if !ok {
            return Err(SimError::BadParams(format!("{self:?}")));
        }
        Ok(())
    }

    /// ω = 2π/T.
    pub fn omega(&self) -> f64 {
        TAU / self.period
    }

    /// `−λ + iω`.
    pub fn generator(&self) -> Complex64 {
        Complex64::new(-self.decay, self.omega())
    }

    /// Angle of z at which the free voltage peaks.
    pub fn spike_angle(&self) -> f64 {
        self.omega().atan2(self.decay)
    }

    /// Lag from a phase-0 input impulse to the first voltage maximum.
    pub fn response_lag(&self) -> f64 {
        self.spike_angle() / self.omega()
    }
}

/// Complex current/voltage state of one neuron.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RfState {
    pub z: Complex64,
}

impl RfState {
    pub fn new(current: f64, voltage: f64) -> Self {
        Self {
            z: Complex64::new(current, voltage),
        }
    }

    pub fn current(&self) -> f64 {
        self.z.re
    }

    pub fn voltage(&self) -> f64 {
        self.z.im
    }
}

/// Exact free evolution over `delta` seconds.
pub fn rf_advance(state: RfState, delta: f64, params: &RfParams) -> RfState {
    RfState {
        z: state.z * (params.generator() * delta).exp(),
    }
}

/// An input spike adds its synaptic weight to the current axis.
pub fn rf_inject(state: RfState, weight: f64) -> RfState {
    RfState {
        z: state.z + weight,
    }
}

/// Time from `state` until its angle next reaches the spike angle, strictly
/// in the future, and the magnitude it will have then.
#[inline]
pub(crate) fn time_to_crossing(z: Complex64, params: &RfParams) -> Option<(f64, f64)> {
    let mag = z.norm();
    if mag == 0.0 {
        return None;
    }
    let mut dtheta = (params.spike_angle() - z.arg()).rem_euclid(TAU);
    if dtheta <= 0.0 || dtheta >= TAU {
        dtheta = TAU;
    }
    let dt = dtheta / params.omega();
    Some((dt, mag * (-params.decay * dt).exp()))
}

/// Next spike time in `(t_now, t_horizon]` under free evolution, if any.
///
/// Returns `None` when the magnitude will have decayed below threshold by the
/// crossing or the crossing lies past the horizon.
pub fn rf_next_spike(state: RfState, t_now: f64, t_horizon: f64, params: &RfParams) -> Option<f64> {
    let (dt, mag) = time_to_crossing(state.z, params)?;
    let t = t_now + dt;
    (mag >= params.threshold && t <= t_horizon).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn undamped() -> RfParams {
        RfParams {
            period: 1.0,
            decay: 0.0,
            threshold: 0.05,
        }
    }

    #[test]
    fn advance_examples() {
        let p = RfParams {
            decay: 1.0,
            ..RfParams::default()
        };
        let z = RfState::new(0.3, -0.2);
        assert_eq!(rf_advance(z, 0.0, &p), z);
        let q = rf_advance(RfState::new(1.0, 0.0), 0.25, &p);
        assert!(q.z.re.abs() < 1e-12);
        assert!((q.z.im - (-0.25f64).exp()).abs() < 1e-12);
        assert!((q.z.im - 0.7788).abs() < 1e-4);
    }

    #[test]
    fn inject_examples() {
        let z = RfState::new(0.3, -0.2);
        assert_eq!(rf_inject(z, 0.0), z);
        let p = RfParams::default();
        let w = -0.7;
        let q = rf_advance(rf_inject(RfState::default(), w), 0.4, &p);
        assert!((q.z.norm() - w.abs() * (-p.decay * 0.4).exp()).abs() < 1e-12);

        // contributions injected δ apart differ in angle by ωδ when observed later
        let (t1, delta, t_obs) = (0.1, 0.17, 0.9);
        let a = rf_advance(rf_inject(RfState::default(), 1.0), t_obs - t1, &p);
        let b = rf_advance(rf_inject(RfState::default(), 1.0), t_obs - t1 - delta, &p);
        let diff = (a.z.arg() - b.z.arg()).rem_euclid(TAU);
        assert!((diff - p.omega() * delta).abs() < 1e-12);
    }

    #[test]
    fn next_spike_examples() {
        let p = undamped();
        let t = rf_next_spike(RfState::new(10.0, 0.0), 2.0, 10.0, &p).unwrap();
        assert!((t - 2.25).abs() < 1e-12);
        assert_eq!(rf_next_spike(RfState::new(0.01, 0.0), 0.0, 10.0, &p), None);
        // already at the peak angle: the next peak is a full period away
        let t = rf_next_spike(RfState::new(0.0, 1.0), 0.0, 10.0, &p).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert_eq!(rf_next_spike(RfState::new(10.0, 0.0), 2.0, 2.2, &p), None);

        // with decay the peak comes slightly before the quarter turn
        let d = RfParams::default();
        let t = rf_next_spike(RfState::new(10.0, 0.0), 0.0, 10.0, &d).unwrap();
        assert!((t - d.response_lag()).abs() < 1e-12);
        let expected = TAU.atan2(d.decay * d.period) / TAU * d.period;
        assert!((t - expected).abs() < 1e-12 && t < 0.25);

        // decays below threshold before reaching the peak
        let strong_decay = RfParams {
            decay: 20.0,
            ..d
        };
        assert_eq!(rf_next_spike(RfState::new(0.06, 0.0), 0.0, 10.0, &strong_decay), None);
    }

    #[test]
    fn spike_angle_is_voltage_maximum() {
        let p = RfParams {
            decay: 1.3,
            ..RfParams::default()
        };
        let z0 = RfState::new(2.0, 0.5);
        let t = rf_next_spike(z0, 0.0, 5.0, &p).unwrap();
        let v = |s: f64| rf_advance(z0, s, &p).voltage();
        let h = 1e-5;
        assert!(v(t) > v(t - h) && v(t) > v(t + h));
    }

    proptest! {
        #[test]
        fn semigroup_and_linear_angle(re in -2.0f64..2.0, im in -2.0f64..2.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let p = RfParams::default();
            let z = RfState::new(re, im);
            prop_assume!(z.z.norm() > 1e-3);
            let ab = rf_advance(rf_advance(z, a, &p), b, &p);
            let direct = rf_advance(z, a + b, &p);
            prop_assert!((ab.z - direct.z).norm() < 1e-12);
            let turned = (rf_advance(z, a, &p).z.arg() - z.z.arg() - p.omega() * a).rem_euclid(TAU);
            prop_assert!(turned.min(TAU - turned) < 1e-12);
        }
    }
}

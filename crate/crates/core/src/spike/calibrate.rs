use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{relay, run_layer, LayerOffsets};
use super::rf::RfParams;
use super::sim::{encode_presentations, spike_phase, SimConfig};
use super::train::SpikeTrain;
use super::SimError;
use crate::phasor::{phasor_forward, wrap, PhaseVector, PhasorLayer, PhasorNetwork};

/// Measured decoding convention of a spiking network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub offsets: LayerOffsets,
    pub conjugate_decode: bool,
    /// Resultant length of the output-layer phase errors, 1 = perfectly
    /// consistent lag.
    pub resultant: f64,
}

/// Circular statistics of `decoded − sign·expected` in units of π.
#[derive(Clone, Copy, Debug, Default)]
struct LagAccumulator {
    direct: Complex64,
    conjugate: Complex64,
    n: usize,
}

impl LagAccumulator {
    /// Adds the spikes of `train` in `window`, decoded against a clock at
    /// `origin`, paired with the expected phase of their channel.
    fn add(&mut self, train: &SpikeTrain, expected: &PhaseVector, origin: f64, window: (f64, f64), period: f64) {
        let mut latest: Vec<Option<f64>> = vec![None; train.n_channels()];
        for s in train.events() {
            if s.time >= window.0 && s.time < window.1 {
                latest[s.channel] = Some(s.time);
            }
        }
        for (t, &y) in latest.iter().zip(expected.as_slice()) {
            if let Some(t) = *t {
                let phi = spike_phase(t, origin, period, false);
                self.direct += Complex64::from_polar(1.0, PI * (phi - y));
                self.conjugate += Complex64::from_polar(1.0, PI * (phi + y));
                self.n += 1;
            }
        }
    }

    fn resultant(&self, conjugate: bool) -> f64 {
        let z = if conjugate { self.conjugate } else { self.direct };
        z.norm() / self.n as f64
    }

    /// Mean lag in seconds within `[0, T)`.
    fn lag(&self, conjugate: bool, period: f64) -> f64 {
        let z = if conjugate { self.conjugate } else { self.direct };
        (wrap(z.arg() / PI) * period / 2.0).rem_euclid(period)
    }
}

fn fail() -> SimError {
    SimError::CalibrationFailed("no spikes".into())
}

/// Random probe phases for a layer of `width` inputs.
pub fn random_probes(width: usize, n_probes: usize, seed: u64) -> Vec<PhaseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_probes)
        .map(|_| PhaseVector::new((0..width).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite"))
        .collect()
}

/// Lag of a single layer driven with presented probe phases.
///
/// Returns the offset, in seconds after `input_offset`, at which decoded
/// output phases best match [`phasor_forward`].
pub fn calibrate_layer(
    layer: &PhasorLayer,
    params: &RfParams,
    config: &SimConfig,
    input_offset: f64,
    probes: &[PhaseVector],
) -> Result<f64, SimError> {
    let mut acc = LagAccumulator::default();
    let span = config.t_span(params);
    let window = config.readout_window(input_offset + config.per_layer_offset, params);
    for x in probes {
        let input = encode_presentations(x, 0..config.presentations, input_offset, params.period, span)?;
        let out = run_layer(config, params, &input, layer, input_offset)?;
        acc.add(&out, &phasor_forward(layer, x)?, input_offset, window, params.period);
    }
    if acc.n == 0 {
        return Err(fail());
    }
    Ok(acc.lag(false, params.period))
}

/// Calibrates the hidden then the output layer on `probes` (projection
/// phases), the output lag being measured end to end against the phasor
/// network's output phases so that the two offsets accumulate.
pub fn calibrate_with_probes(
    net: &PhasorNetwork,
    params: &RfParams,
    config: &SimConfig,
    probes: &[PhaseVector],
) -> Result<Calibration, SimError> {
    params.validate()?;
    config.validate()?;
    if probes.is_empty() {
        return Err(SimError::BadConfig("calibration needs at least one probe".into()));
    }
    let span = config.t_span(params);
    let period = params.period;
    let guess = LayerOffsets::uncalibrated(config);

    let mut hidden_acc = LagAccumulator::default();
    let mut hidden_trains = Vec::with_capacity(probes.len());
    for x in probes {
        let input = encode_presentations(x, 0..config.presentations, 0.0, period, span)?;
        let h = run_layer(config, params, &input, &net.hidden, 0.0)?;
        let window = config.readout_window(guess.hidden, params);
        hidden_acc.add(&h, &phasor_forward(&net.hidden, x)?, 0.0, window, period);
        hidden_trains.push(h);
    }
    if hidden_acc.n == 0 {
        return Err(fail());
    }
    let hidden = hidden_acc.lag(false, period);
    let hidden_trains: Vec<SpikeTrain> = hidden_trains.iter().map(|h| relay(config, params, h, hidden)).collect();

    let mut out_acc = LagAccumulator::default();
    let window = config.readout_window(hidden + config.per_layer_offset, params);
    for (x, h) in probes.iter().zip(&hidden_trains) {
        let expected = phasor_forward(&net.output, &phasor_forward(&net.hidden, x)?)?;
        let o = run_layer(config, params, h, &net.output, hidden)?;
        out_acc.add(&o, &expected, 0.0, window, period);
    }
    if out_acc.n == 0 {
        return Err(fail());
    }
    let conjugate = out_acc.resultant(true) > out_acc.resultant(false);
    let mut output = out_acc.lag(conjugate, period);
    // the output layer lags the hidden one; keep its offset on the later clock
    while output < hidden {
        output += period;
    }
    Ok(Calibration {
        offsets: LayerOffsets { hidden, output },
        conjugate_decode: conjugate,
        resultant: out_acc.resultant(conjugate),
    })
}

/// [`calibrate_with_probes`] on `n_probes` uniformly random projection phases.
pub fn calibrate_offsets(
    net: &PhasorNetwork,
    params: &RfParams,
    config: &SimConfig,
    n_probes: usize,
    seed: u64,
) -> Result<Calibration, SimError> {
    if n_probes == 0 {
        return Err(SimError::BadConfig("n_probes must be at least 1".into()));
    }
    let probes = random_probes(net.hidden.in_width(), n_probes, seed);
    calibrate_with_probes(net, params, config, &probes)
}

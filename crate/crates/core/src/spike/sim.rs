//! Phase↔spike-time coding and event-driven layer simulation.

use num_complex::Complex64;

use super::rf::{time_to_crossing, RfParams};
use super::train::{Spike, SpikeTrain};
use super::SimError;
use crate::phasor::{wrap, PhaseVector, PhasorLayer};

/// Which cycles carry the bias reference spike.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiasSchedule {
    /// Phase 0 of every simulated cycle.
    EveryCycle,
    /// Only the input presentation cycles.
    Presentations,
    /// Every cycle in which the layer receives at least one input spike.
    InputCycles,
}

/// Run protocol for spiking inference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Number of cycles the input phases are presented, and the number of
    /// cycles each spiking layer relays its output downstream.
    pub presentations: usize,
    /// Cycles a layer's output settles before it is relayed downstream.
    pub settle_cycles: usize,
    /// 1-based cycle of the output layer that is decoded.
    pub readout_cycle: usize,
    pub total_cycles: usize,
    /// Seconds of decoding lag per spiking layer, absent calibration.
    pub per_layer_offset: f64,
    pub oracle_dt: f64,
    /// Negate decoded phases.
    pub conjugate_decode: bool,
    pub bias_schedule: BiasSchedule,
}

impl SimConfig {
    pub fn new(params: &RfParams) -> Self {
        Self {
            presentations: 3,
            settle_cycles: 1,
            readout_cycle: 5,
            total_cycles: 6,
            per_layer_offset: params.period / 4.0,
            oracle_dt: params.period / 2000.0,
            conjugate_decode: false,
            bias_schedule: BiasSchedule::EveryCycle,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if self.readout_cycle == 0 || self.readout_cycle > self.total_cycles {
            return bad("readout_cycle must be in 1..=total_cycles");
        }
        if self.presentations == 0 || self.presentations > self.total_cycles {
            return bad("presentations must be in 1..=total_cycles");
        }
        if self.settle_cycles + self.presentations > self.total_cycles {
            return bad("settle_cycles + presentations must not exceed total_cycles");
        }
        if !(self.per_layer_offset.is_finite() && self.per_layer_offset >= 0.0) {
            return bad("per_layer_offset must be finite and non-negative");
        }
        if !(self.oracle_dt.is_finite() && self.oracle_dt > 0.0) {
            return bad("oracle_dt must be positive");
        }
        Ok(())
    }

    pub fn t_span(&self, params: &RfParams) -> (f64, f64) {
        (0.0, self.total_cycles as f64 * params.period)
    }

    /// Drive schedule for a layer whose inputs are phase-coded at `input_offset`.
    /// `InputCycles` depends on the input train and is resolved by the network
    /// runner; here it falls back to every cycle.
    pub fn layer_schedule(&self, input_offset: f64, params: &RfParams) -> Schedule {
        let cycles = match self.bias_schedule {
            BiasSchedule::EveryCycle | BiasSchedule::InputCycles => self.total_cycles,
            BiasSchedule::Presentations => self.presentations,
        };
        let t_span = self.t_span(params);
        Schedule {
            bias_times: (0..cycles)
                .map(|c| c as f64 * params.period + input_offset)
                .filter(|&t| t <= t_span.1)
                .collect(),
            t_span,
        }
    }

    /// Span of a layer's own clock, starting at `offset`, during which its
    /// spikes are relayed to the next layer.
    pub fn relay_window(&self, offset: f64, params: &RfParams) -> (f64, f64) {
        let t0 = self.settle_cycles as f64 * params.period + offset;
        (t0, t0 + self.presentations as f64 * params.period)
    }

    /// Readout window `[(readout_cycle − 1)·T, readout_cycle·T)` shifted by `offset`.
    pub fn readout_window(&self, offset: f64, params: &RfParams) -> (f64, f64) {
        let t0 = (self.readout_cycle - 1) as f64 * params.period + offset;
        (t0, t0 + params.period)
    }
}

/// Bias reference times and the span a layer is simulated over.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub bias_times: Vec<f64>,
    pub t_span: (f64, f64),
}

/// One spike per channel at `cycle·T + offset + u·T/2` with `u = φ mod 2`.
pub fn encode_spikes(phases: &PhaseVector, cycle: usize, offset: f64, period: f64) -> SpikeTrain {
    let start = cycle as f64 * period + offset;
    let events = phases
        .as_slice()
        .iter()
        .enumerate()
        .map(|(channel, phi)| Spike {
            channel,
            time: start + phi.rem_euclid(2.0) * period / 2.0,
        })
        .collect();
    SpikeTrain::new(phases.len(), (start, start + period), events).expect("encoded spikes lie within their cycle")
}

/// The same phases presented in each of `cycles`, over `t_span`.
pub fn encode_presentations(
    phases: &PhaseVector,
    cycles: std::ops::Range<usize>,
    offset: f64,
    period: f64,
    t_span: (f64, f64),
) -> Result<SpikeTrain, SimError> {
    let events = cycles
        .flat_map(|c| encode_spikes(phases, c, offset, period).events().to_vec())
        .filter(|s| s.time <= t_span.1)
        .collect();
    SpikeTrain::new(phases.len(), t_span, events)
}

/// Phase of a spike at time `t` in a clock starting at `offset`.
#[inline]
pub fn spike_phase(t: f64, offset: f64, period: f64, conjugate: bool) -> f64 {
    let phi = wrap((t - offset).rem_euclid(period) * 2.0 / period);
    if conjugate {
        wrap(-phi)
    } else {
        phi
    }
}

/// Decodes the latest spike of each channel in `[t0, t1)`; silent channels
/// decode to phase 0.
pub fn decode_spikes(train: &SpikeTrain, offset: f64, window: (f64, f64), period: f64, conjugate: bool) -> PhaseVector {
    let mut out = vec![0.0; train.n_channels()];
    for s in train.events() {
        if s.time >= window.0 && s.time < window.1 {
            // events are time-ordered, so later spikes overwrite earlier ones
            out[s.channel] = spike_phase(s.time, offset, period, conjugate);
        }
    }
    PhaseVector::from_canonical(out)
}

#[derive(Clone, Copy)]
struct Pending {
    time: f64,
    magnitude: f64,
}

const NONE_PENDING: Pending = Pending {
    time: f64::INFINITY,
    magnitude: 0.0,
};

/// Emits the pending crossings of one neuron up to `limit`.
#[inline]
fn drain(p: &mut Pending, channel: usize, limit: f64, inclusive: bool, params: &RfParams, per_period: f64, out: &mut Vec<Spike>) {
    while p.time < limit || (inclusive && p.time == limit) {
        if p.magnitude < params.threshold {
            *p = NONE_PENDING;
            return;
        }
        out.push(Spike { channel, time: p.time });
        p.time += params.period;
        p.magnitude *= per_period;
    }
}

/// Event-driven simulation of one layer of resonate-and-fire neurons.
///
/// Each input spike on channel `j` adds `weights[k][j]` to the current of
/// every neuron `k`; each bias reference time adds `bias[k]`. Between events
/// states evolve in closed form and emit a spike at every voltage maximum
/// above threshold. Spiking does not reset the state.
pub fn simulate_layer(
    input: &SpikeTrain,
    layer: &PhasorLayer,
    params: &RfParams,
    schedule: &Schedule,
) -> Result<SpikeTrain, SimError> {
    params.validate()?;
    if input.n_channels() != layer.in_width() {
        return Err(SimError::ChannelCount {
            expected: layer.in_width(),
            got: input.n_channels(),
        });
    }
    let (t0, t1) = schedule.t_span;
    let n = layer.out_width();
    let bias_channel = layer.in_width();

    let mut events: Vec<(f64, usize)> = input
        .events()
        .iter()
        .map(|s| (s.time, s.channel))
        .chain(schedule.bias_times.iter().map(|&t| (t, bias_channel)))
        .filter(|&(t, _)| t >= t0 && t <= t1)
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // input-major weights so each event reads a contiguous row
    let by_input = layer.weights.t().as_standard_layout().into_owned();
    let generator = params.generator();
    let per_period = (-params.decay * params.period).exp();

    let mut z = vec![Complex64::ZERO; n];
    let mut pending = vec![NONE_PENDING; n];
    let mut out = Vec::new();
    let mut t_prev = t0;

    for (t, ch) in events {
        for (k, p) in pending.iter_mut().enumerate() {
            drain(p, k, t, true, params, per_period, &mut out);
        }
        let step = (generator * (t - t_prev)).exp();
        let weights = if ch == bias_channel {
            layer.bias.as_slice().expect("contiguous bias")
        } else {
            by_input.row(ch).to_slice().expect("standard layout")
        };
        for k in 0..n {
            z[k] *= step;
            let w = weights[k];
            if w != 0.0 {
                z[k] += w;
                pending[k] = match time_to_crossing(z[k], params) {
                    Some((dt, magnitude)) if magnitude >= params.threshold => Pending { time: t + dt, magnitude },
                    _ => NONE_PENDING,
                };
            }
        }
        t_prev = t;
    }
    for (k, p) in pending.iter_mut().enumerate() {
        drain(p, k, t1, false, params, per_period, &mut out);
    }
    SpikeTrain::new(n, schedule.t_span, out)
}

use super::rf::RfParams;
use super::sim::{decode_spikes, encode_presentations, simulate_layer, BiasSchedule, Schedule, SimConfig};
use super::train::SpikeTrain;
use super::SimError;
use crate::phasor::{LabelCode, PhaseVector, PhasorLayer, PhasorNetwork};
use crate::sparsify::{stats, SparsifyMethod, SparsifyStats};

/// Clock offset, in seconds, of each spiking layer's output phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerOffsets {
    pub hidden: f64,
    pub output: f64,
}

impl LayerOffsets {
    /// `per_layer_offset` per depth.
    pub fn uncalibrated(config: &SimConfig) -> Self {
        Self {
            hidden: config.per_layer_offset,
            output: 2.0 * config.per_layer_offset,
        }
    }
}

/// Optional sparsifier at the output of each trainable layer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LayerSparsifiers {
    pub hidden: Option<SparsifyMethod>,
    pub output: Option<SparsifyMethod>,
}

#[derive(Clone, Debug)]
pub struct NetworkRun {
    pub hidden_raw: SpikeTrain,
    pub hidden: SpikeTrain,
    pub output_raw: SpikeTrain,
    pub output: SpikeTrain,
    pub phases: PhaseVector,
    pub prediction: usize,
    pub hidden_stats: SparsifyStats,
    pub output_stats: SparsifyStats,
}

impl NetworkRun {
    /// Both sparsified layers together.
    pub fn total_stats(&self) -> SparsifyStats {
        self.hidden_stats + self.output_stats
    }
}

/// A trained phasor network executed with resonate-and-fire neurons.
#[derive(Clone, Debug)]
pub struct SpikingNetwork {
    pub net: PhasorNetwork,
    pub params: RfParams,
    pub config: SimConfig,
    pub offsets: LayerOffsets,
    pub label_code: LabelCode,
}

impl SpikingNetwork {
    pub fn new(net: PhasorNetwork, params: RfParams, config: SimConfig, offsets: LayerOffsets) -> Result<Self, SimError> {
        params.validate()?;
        config.validate()?;
        Ok(Self {
            net,
            params,
            config,
            offsets,
            label_code: LabelCode::default(),
        })
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.config.t_span(&self.params)
    }

    /// Projection phases (computed non-spiking) presented as spikes.
    pub fn input_train(&self, pixels: &[f64]) -> Result<SpikeTrain, SimError> {
        let phases = self.net.project(pixels)?;
        self.encode_input(&phases)
    }

    pub fn encode_input(&self, phases: &PhaseVector) -> Result<SpikeTrain, SimError> {
        encode_presentations(
            phases,
            0..self.config.presentations,
            0.0,
            self.params.period,
            self.t_span(),
        )
    }

    /// Bias times for a layer fed by `input`, whose phases are clocked at `input_offset`.
    pub fn schedule_for(&self, input: &SpikeTrain, input_offset: f64) -> Schedule {
        layer_schedule(&self.config, &self.params, input, input_offset)
    }

    /// Hidden-layer spikes as relayed to the output layer.
    pub fn hidden_train(&self, input: &SpikeTrain) -> Result<SpikeTrain, SimError> {
        let full = run_layer(&self.config, &self.params, input, &self.net.hidden, 0.0)?;
        Ok(relay(&self.config, &self.params, &full, self.offsets.hidden))
    }

    /// Output layer, sparsification and readout for a recorded hidden train.
    pub fn finish(&self, hidden_raw: &SpikeTrain, sparsifiers: &LayerSparsifiers) -> Result<NetworkRun, SimError> {
        let period = self.params.period;
        let hidden = match &sparsifiers.hidden {
            Some(m) => m.apply(hidden_raw, period)?,
            None => hidden_raw.clone(),
        };
        let output_raw = run_layer(&self.config, &self.params, &hidden, &self.net.output, self.offsets.hidden)?;
        let output = match &sparsifiers.output {
            Some(m) => m.apply(&output_raw, period)?,
            None => output_raw.clone(),
        };
        let window = self.config.readout_window(self.offsets.output, &self.params);
        let phases = decode_spikes(&output, self.offsets.output, window, period, self.config.conjugate_decode);
        let prediction = self.label_code.classify(phases.as_slice())?;
        Ok(NetworkRun {
            hidden_stats: stats(hidden_raw, &hidden)?,
            output_stats: stats(&output_raw, &output)?,
            hidden_raw: hidden_raw.clone(),
            hidden,
            output_raw,
            output,
            phases,
            prediction,
        })
    }

    pub fn run(&self, pixels: &[f64], sparsifiers: &LayerSparsifiers) -> Result<NetworkRun, SimError> {
        let input = self.input_train(pixels)?;
        let hidden = self.hidden_train(&input)?;
        self.finish(&hidden, sparsifiers)
    }

    pub fn predict(&self, pixels: &[f64]) -> Result<usize, SimError> {
        Ok(self.run(pixels, &LayerSparsifiers::default())?.prediction)
    }
}

pub(crate) fn layer_schedule(config: &SimConfig, params: &RfParams, input: &SpikeTrain, input_offset: f64) -> Schedule {
    match config.bias_schedule {
        BiasSchedule::InputCycles => {
            let t_span = config.t_span(params);
            let mut bias_times: Vec<f64> = input
                .events()
                .iter()
                .map(|s| ((s.time - input_offset) / params.period).floor())
                .map(|c| c * params.period + input_offset)
                .filter(|&t| t >= t_span.0 && t <= t_span.1)
                .collect();
            bias_times.dedup();
            Schedule { bias_times, t_span }
        }
        _ => config.layer_schedule(input_offset, params),
    }
}

/// The part of a layer's output train that is passed downstream.
pub(crate) fn relay(config: &SimConfig, params: &RfParams, train: &SpikeTrain, offset: f64) -> SpikeTrain {
    let (t0, t1) = config.relay_window(offset, params);
    train.retain(|s| s.time >= t0 && s.time < t1)
}

pub(crate) fn run_layer(
    config: &SimConfig,
    params: &RfParams,
    input: &SpikeTrain,
    layer: &PhasorLayer,
    input_offset: f64,
) -> Result<SpikeTrain, SimError> {
    let schedule = layer_schedule(config, params, input, input_offset);
    simulate_layer(input, layer, params, &schedule)
}

/// Convenience wrapper over [`SpikingNetwork::run`].
pub fn simulate_network(
    net: &PhasorNetwork,
    pixels: &[f64],
    params: &RfParams,
    config: &SimConfig,
    offsets: LayerOffsets,
    sparsifiers: &LayerSparsifiers,
) -> Result<NetworkRun, SimError> {
    SpikingNetwork::new(net.clone(), *params, *config, offsets)?.run(pixels, sparsifiers)
}

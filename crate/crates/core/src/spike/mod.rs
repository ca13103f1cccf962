//! Spiking execution of phasor networks with resonate-and-fire neurons.
//!
//! Phase `φ` in a layer's clock corresponds to a spike at
//! `cycle·T + offset + (φ mod 2)·T/2`.

mod calibrate;
mod network;
mod oracle;
mod rf;
mod sim;
mod train;

pub use calibrate::{calibrate_layer, calibrate_offsets, calibrate_with_probes, random_probes, Calibration};
pub use network::{simulate_network, LayerOffsets, LayerSparsifiers, NetworkRun, SpikingNetwork};
pub use oracle::fixed_step_oracle;
pub use rf::{rf_advance, rf_inject, rf_next_spike, RfParams, RfState};
pub use sim::{
    decode_spikes, encode_presentations, encode_spikes, simulate_layer, spike_phase, BiasSchedule, Schedule, SimConfig,
};
pub use train::{Spike, SpikeTrain};

use thiserror::Error;

use crate::phasor::PhasorError;
use crate::sparsify::SparsifyError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid time span ({0}, {1})")]
    BadSpan(f64, f64),
    #[error("channel {channel} out of range for {n_channels} channels")]
    ChannelOutOfRange { channel: usize, n_channels: usize },
    #[error("spike time {time} outside span ({t0}, {t1})")]
    TimeOutOfSpan { time: f64, t0: f64, t1: f64 },
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("spike dump line {line}: {msg}")]
    Dump { line: usize, msg: String },
    #[error("invalid neuron parameters {0}")]
    BadParams(String),
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error(transparent)]
    Phasor(#[from] PhasorError),
    #[error(transparent)]
    Sparsify(#[from] SparsifyError),
}

//! Backpropagation through phasor layers, RMSProp, and checkpoints.

mod checkpoint;
mod grad;
mod rmsprop;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, FORMAT_VERSION, MAGIC};
pub use grad::{backprop_gradients, batch_loss, Gradients};
pub use rmsprop::{rmsprop_step, RmsPropState};

use thiserror::Error;

use crate::data::{make_batches, Dataset};
use crate::phasor::{LabelCode, PhasorError, PhasorNetwork, HIDDEN_WIDTH, N_CLASSES, N_PIXELS, PROJECTION_WIDTH};
use crate::seed::mix_seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("{images} images but {labels} labels")]
    LabelCount { images: usize, labels: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("non-finite loss {loss}: {detail}")]
    NonFiniteLoss { loss: f64, detail: String },
    #[error("non-finite gradient {0}")]
    NonFiniteGradient(f64),
    #[error("gradient shapes do not match the network")]
    ShapeMismatch,
    #[error("invalid optimizer hyperparameters: {0}")]
    BadHyperparameter(String),
    #[error("dataset has {have} examples, fewer than one batch of {batch_size}")]
    DatasetTooSmall { have: usize, batch_size: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Phasor(#[from] PhasorError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batches: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub n_pixels: usize,
    pub proj_width: usize,
    pub hidden_width: usize,
    pub n_classes: usize,
    pub learning_rate: f64,
    pub label_code: LabelCode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batches: 1000,
            batch_size: 128,
            seed: 0,
            n_pixels: N_PIXELS,
            proj_width: PROJECTION_WIDTH,
            hidden_width: HIDDEN_WIDTH,
            n_classes: N_CLASSES,
            learning_rate: 1e-3,
            label_code: LabelCode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::Config(format!("learning_rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    /// The trained parameters at storage (f32) precision.
    pub checkpoint: Checkpoint,
    /// Mean loss of each batch, before that batch's update.
    pub losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Runs exactly `config.batches` RMSProp steps over shuffled batches,
/// reshuffling on every pass through the data.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if dataset.len() < config.batch_size {
        return Err(TrainError::DatasetTooSmall {
            have: dataset.len(),
            batch_size: config.batch_size,
        });
    }
    if dataset.n_pixels() != config.n_pixels {
        return Err(TrainError::Config(format!(
            "dataset has {} pixels per image, config expects {}",
            dataset.n_pixels(),
            config.n_pixels
        )));
    }
    let mut net = PhasorNetwork::new(
        config.n_pixels,
        config.proj_width,
        config.hidden_width,
        config.n_classes,
        config.seed,
    )?;
    let mut opt = RmsPropState::with_hyperparameters(&net, config.learning_rate, 0.9, 1e-8);
    let mut losses = Vec::with_capacity(config.batches);
    let mut pass = 0u64;
    'outer: while losses.len() < config.batches {
        for (pixels, labels) in make_batches(dataset, config.batch_size, mix_seed(config.seed, pass)) {
            if losses.len() == config.batches {
                break 'outer;
            }
            let (loss, grads) = backprop_gradients(&net, pixels.view(), &labels, &config.label_code)?;
            rmsprop_step(&mut net, &grads, &mut opt)?;
            losses.push(loss);
        }
        pass += 1;
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint::from_network(&net),
        losses,
    })
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::phasor::{LabelCode, HIDDEN_WIDTH, N_CLASSES, N_PIXELS, PROJECTION_WIDTH};
use crate::spike::{BiasSchedule, RfParams, SimConfig};
use crate::trainer::TrainConfig;

/// Every key of a run, loaded from TOML. Missing keys take their defaults;
/// unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the IDX files.
    pub data_dir: PathBuf,
    /// Pinned download list used by `fetch`.
    pub manifest: PathBuf,
    /// Directory for checkpoints, CSVs, calibration and plots.
    pub out_dir: PathBuf,
    pub seed: u64,
    pub train: TrainSection,
    pub neuron: NeuronSection,
    pub sim: SimSection,
    pub eval: EvalSection,
    pub calibrate: CalibrateSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: "data/fashion".into(),
            manifest: "data/fashion.manifest".into(),
            out_dir: "runs/default".into(),
            seed: 0,
            train: TrainSection::default(),
            neuron: NeuronSection::default(),
            sim: SimSection::default(),
            eval: EvalSection::default(),
            calibrate: CalibrateSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batches: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub proj_width: usize,
    pub hidden_width: usize,
    pub label_on: f64,
    pub label_off: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let code = LabelCode::default();
        Self {
            batches: 1000,
            batch_size: 128,
            learning_rate: 1e-3,
            proj_width: PROJECTION_WIDTH,
            hidden_width: HIDDEN_WIDTH,
            label_on: code.on,
            label_off: code.off,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronSection {
    pub period: f64,
    /// Defaults to `1/period`.
    pub decay: Option<f64>,
    pub threshold: f64,
}

impl Default for NeuronSection {
    fn default() -> Self {
        Self {
            period: 1.0,
            decay: None,
            threshold: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasScheduleName {
    EveryCycle,
    Presentations,
    InputCycles,
}

impl From<BiasScheduleName> for BiasSchedule {
    fn from(b: BiasScheduleName) -> Self {
        match b {
            BiasScheduleName::EveryCycle => BiasSchedule::EveryCycle,
            BiasScheduleName::Presentations => BiasSchedule::Presentations,
            BiasScheduleName::InputCycles => BiasSchedule::InputCycles,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub presentations: usize,
    pub settle_cycles: usize,
    pub readout_cycle: usize,
    pub total_cycles: usize,
    /// Seconds; defaults to `period/4`.
    pub per_layer_offset: Option<f64>,
    /// Seconds; defaults to `period/2000`.
    pub oracle_dt: Option<f64>,
    pub bias_schedule: BiasScheduleName,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::new(&RfParams::default());
        Self {
            presentations: d.presentations,
            settle_cycles: d.settle_cycles,
            readout_cycle: d.readout_cycle,
            total_cycles: d.total_cycles,
            per_layer_offset: None,
            oracle_dt: None,
            bias_schedule: BiasScheduleName::EveryCycle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Phasor,
    Spiking,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Leading test images to evaluate.
    pub subset: usize,
    pub mode: EvalMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            subset: 10_000,
            mode: EvalMode::Both,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub probes: usize,
    /// Optional (λ, θ) grid scanned for cross-mode agreement after calibration.
    pub scan_decays: Vec<f64>,
    pub scan_thresholds: Vec<f64>,
    /// Leading test images used by the scan.
    pub scan_subset: usize,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            probes: 64,
            scan_decays: Vec::new(),
            scan_thresholds: Vec::new(),
            scan_subset: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepChoice {
    Explicit,
    Inhibitory,
    Random,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub method: SweepChoice,
    pub subset: usize,
    /// Evenly spaced points from 0 to the method's maximum.
    pub points: usize,
    /// Explicit grid overriding `points`.
    pub grid: Option<Vec<f64>>,
    /// LFP kernel time constant in seconds; defaults to `period/20`.
    pub kernel_tau: Option<f64>,
    /// LFP sampling step in seconds; defaults to `period/200`.
    pub bin_dt: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            method: SweepChoice::All,
            subset: 1000,
            points: 11,
            grid: None,
            kernel_tau: None,
            bin_dt: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.train_config().validate()?;
        self.rf_params().validate()?;
        self.sim_config().validate()?;
        self.label_code().encode(0, N_CLASSES)?;
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.train.batches == 0 {
            return bad("train.batches must be positive");
        }
        if self.train.proj_width == 0 || self.train.hidden_width == 0 {
            return bad("layer widths must be positive");
        }
        if self.eval.subset == 0 {
            return bad("eval.subset must be at least 1");
        }
        if self.sweep.subset == 0 {
            return bad("sweep.subset must be at least 1");
        }
        if self.sweep.points < 2 && self.sweep.grid.is_none() {
            return bad("sweep.points must be at least 2");
        }
        if self.calibrate.probes == 0 {
            return bad("calibrate.probes must be at least 1");
        }
        let period = self.neuron.period;
        for (name, v) in [("sweep.kernel_tau", self.sweep.kernel_tau), ("sweep.bin_dt", self.sweep.bin_dt)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(HarnessError::Config(format!("{name} must be positive")));
                }
            }
        }
        if let Some(grid) = &self.sweep.grid {
            if grid.is_empty() || grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return bad("sweep.grid must be a non-empty list of non-negative numbers");
            }
        }
        if self.calibrate.scan_decays.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || self.calibrate.scan_thresholds.iter().any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("calibrate scan values must be finite; thresholds positive");
        }
        if period <= 0.0 {
            return bad("neuron.period must be positive");
        }
        Ok(())
    }

    pub fn label_code(&self) -> LabelCode {
        LabelCode {
            on: self.train.label_on,
            off: self.train.label_off,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batches: self.train.batches,
            batch_size: self.train.batch_size,
            seed: self.seed,
            n_pixels: N_PIXELS,
            proj_width: self.train.proj_width,
            hidden_width: self.train.hidden_width,
            n_classes: N_CLASSES,
            learning_rate: self.train.learning_rate,
            label_code: self.label_code(),
        }
    }

    pub fn rf_params(&self) -> RfParams {
        let period = self.neuron.period;
        RfParams {
            period,
            decay: self.neuron.decay.unwrap_or(1.0 / period),
            threshold: self.neuron.threshold,
        }
    }

    /// Simulation protocol before calibration is applied.
    pub fn sim_config(&self) -> SimConfig {
        let params = self.rf_params();
        let base = SimConfig::new(&params);
        SimConfig {
            presentations: self.sim.presentations,
            settle_cycles: self.sim.settle_cycles,
            readout_cycle: self.sim.readout_cycle,
            total_cycles: self.sim.total_cycles,
            per_layer_offset: self.sim.per_layer_offset.unwrap_or(base.per_layer_offset),
            oracle_dt: self.sim.oracle_dt.unwrap_or(base.oracle_dt),
            conjugate_decode: false,
            bias_schedule: self.sim.bias_schedule.into(),
        }
    }

    pub fn kernel_tau(&self) -> f64 {
        self.sweep.kernel_tau.unwrap_or(self.neuron.period / 20.0)
    }

    pub fn bin_dt(&self) -> f64 {
        self.sweep.bin_dt.unwrap_or(self.neuron.period / 200.0)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("checkpoint.phzr")
    }

    pub fn calibration_path(&self) -> PathBuf {
        self.out_dir.join("calibration.toml")
    }
}

//! The six subcommands. Each takes a validated [`RunConfig`] and reports
//! progress on stderr and results on stdout.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{CalibrateSection, EvalMode, NeuronSection, RunConfig, SimSection, SweepChoice};
use super::csvio::{read_csv, write_csv, EvalRow, LossRow, SweepRecord, EVAL_HEADER, LOSS_HEADER, SWEEP_HEADER};
use super::experiment::{
    agreement, accuracy, hidden_trains, phasor_predictions, run_sweep, spiking_outcomes, LfpSettings, SweepMethod,
};
use super::plot::render_svg;
use super::HarnessError;
use crate::data::{fetch_dataset, load_split, Dataset, FetchedFile, Manifest, Split};
use crate::phasor::PhasorNetwork;
use crate::spike::{calibrate_offsets, LayerOffsets, RfParams, SpikingNetwork};
use crate::trainer::{load_checkpoint, save_checkpoint, train};

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<String>,
    pub subset: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Fetch,
    Train,
    Eval,
    Calibrate,
    Sweep,
    Plot,
}

impl Overrides {
    /// Applies the overrides that `command` understands and revalidates.
    /// `--method` and `--subset` are rejected where they mean nothing.
    pub fn apply(&self, mut cfg: RunConfig, command: Command) -> Result<RunConfig, HarnessError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(m) = &self.method {
            match command {
                Command::Eval => {
                    cfg.eval.mode = match m.as_str() {
                        "phasor" => EvalMode::Phasor,
                        "spiking" => EvalMode::Spiking,
                        "both" => EvalMode::Both,
                        _ => return Err(usage(format!("eval --method must be phasor, spiking or both, not {m:?}"))),
                    }
                }
                Command::Sweep => {
                    cfg.sweep.method = match m.as_str() {
                        "explicit" => SweepChoice::Explicit,
                        "inhibitory" => SweepChoice::Inhibitory,
                        "random" => SweepChoice::Random,
                        "all" => SweepChoice::All,
                        _ => {
                            return Err(usage(format!(
                                "sweep --method must be explicit, inhibitory, random or all, not {m:?}"
                            )))
                        }
                    }
                }
                _ => return Err(usage("--method applies to eval and sweep only".into())),
            }
        }
        if let Some(n) = self.subset {
            if n == 0 {
                return Err(usage("--subset must be at least 1".into()));
            }
            match command {
                Command::Eval => cfg.eval.subset = n,
                Command::Sweep => cfg.sweep.subset = n,
                Command::Calibrate => cfg.calibrate.scan_subset = n,
                _ => return Err(usage("--subset applies to eval, calibrate and sweep only".into())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn usage(msg: String) -> HarnessError {
    HarnessError::Usage(msg)
}

pub fn cmd_fetch(cfg: &RunConfig) -> Result<Vec<FetchedFile>, HarnessError> {
    let manifest = Manifest::load(&cfg.manifest)?;
    let files = fetch_dataset(&manifest, &cfg.data_dir)?;
    for (f, e) in files.iter().zip(&manifest.entries) {
        println!(
            "{}\t{}\t{}\t{}",
            e.filename,
            e.length,
            &e.sha256[..16],
            if f.downloaded { "downloaded" } else { "present" }
        );
    }
    Ok(files)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    let data = load_split(&cfg.data_dir, Split::Train)?;
    eprintln!("training on {} images", data.len());
    let outcome = train(&data, &cfg.train_config())?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    let path = cfg.checkpoint_path();
    save_checkpoint(&outcome.checkpoint, &path).map_err(|e| match e {
        crate::trainer::CheckpointError::Io(io) => HarnessError::io(&path, io),
        other => other.into(),
    })?;
    let rows: Vec<LossRow> = outcome
        .losses
        .iter()
        .enumerate()
        .map(|(batch, &loss)| LossRow { batch, loss })
        .collect();
    write_csv(&cfg.out_dir.join("loss.csv"), &rows, LOSS_HEADER)?;
    println!(
        "checkpoint {} after {} batches, final loss {:.6}",
        path.display(),
        rows.len(),
        outcome.final_loss().unwrap_or(f64::NAN)
    );
    Ok(path)
}

pub fn load_network(cfg: &RunConfig) -> Result<PhasorNetwork, HarnessError> {
    let path = cfg.checkpoint_path();
    if !path.exists() {
        return Err(HarnessError::MissingCheckpoint(path));
    }
    Ok(load_checkpoint(&path)?.to_network()?)
}

fn test_subset(cfg: &RunConfig, n: usize) -> Result<Dataset, HarnessError> {
    Ok(load_split(&cfg.data_dir, Split::Test)?.head(n))
}

/// Calibration results plus the neuron and protocol settings they were
/// measured under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub hidden_offset: f64,
    pub output_offset: f64,
    pub conjugate_decode: bool,
    pub resultant: f64,
    pub probes: usize,
    pub seed: u64,
    pub neuron: NeuronSection,
    pub sim: SimSection,
}

impl CalibrationFile {
    pub fn load(cfg: &RunConfig) -> Result<Self, HarnessError> {
        let path = cfg.calibration_path();
        if !path.exists() {
            return Err(HarnessError::MissingCalibration(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let file: CalibrationFile =
            toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {}", path.display(), e.message())))?;
        if file.neuron != cfg.neuron || file.sim != cfg.sim {
            return Err(HarnessError::Config(format!(
                "{} was measured with different [neuron] or [sim] settings; rerun `calibrate`",
                path.display()
            )));
        }
        Ok(file)
    }

    pub fn offsets(&self) -> LayerOffsets {
        LayerOffsets {
            hidden: self.hidden_offset,
            output: self.output_offset,
        }
    }
}

pub fn spiking_network(
    cfg: &RunConfig,
    net: PhasorNetwork,
    params: RfParams,
    offsets: LayerOffsets,
    conjugate_decode: bool,
) -> Result<SpikingNetwork, HarnessError> {
    let mut sim = cfg.sim_config();
    sim.conjugate_decode = conjugate_decode;
    let mut snn = SpikingNetwork::new(net, params, sim, offsets)?;
    snn.label_code = cfg.label_code();
    Ok(snn)
}

fn calibrated_network(cfg: &RunConfig, net: PhasorNetwork) -> Result<SpikingNetwork, HarnessError> {
    let cal = CalibrationFile::load(cfg)?;
    spiking_network(cfg, net, cfg.rf_params(), cal.offsets(), cal.conjugate_decode)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<EvalRow>, HarnessError> {
    let net = load_network(cfg)?;
    // fail before any long computation
    let snn = match cfg.eval.mode {
        EvalMode::Phasor => None,
        _ => Some(calibrated_network(cfg, net.clone())?),
    };
    let data = test_subset(cfg, cfg.eval.subset)?;
    let phasor = phasor_predictions(&net, &cfg.label_code(), &data)?;
    let mut rows = Vec::new();
    if cfg.eval.mode != EvalMode::Spiking {
        rows.push(EvalRow {
            mode: "phasor".into(),
            n_images: data.len(),
            accuracy: accuracy(&phasor, &data),
            spikes_hidden: 0,
            spikes_output: 0,
        });
    }
    if let Some(snn) = &snn {
        eprintln!("spiking evaluation of {} images", data.len());
        let outcomes = spiking_outcomes(snn, &data)?;
        let preds: Vec<usize> = outcomes.iter().map(|o| o.prediction).collect();
        rows.push(EvalRow {
            mode: "spiking".into(),
            n_images: data.len(),
            accuracy: accuracy(&preds, &data),
            spikes_hidden: outcomes.iter().map(|o| o.spikes_hidden).sum(),
            spikes_output: outcomes.iter().map(|o| o.spikes_output).sum(),
        });
        println!("agreement with phasor mode: {:.4}", agreement(&preds, &phasor));
    }
    for r in &rows {
        println!(
            "{}\t{} images\taccuracy {:.4}\tspikes hidden {} output {}",
            r.mode, r.n_images, r.accuracy, r.spikes_hidden, r.spikes_output
        );
    }
    write_csv(&cfg.out_dir.join("eval.csv"), &rows, EVAL_HEADER)?;
    Ok(rows)
}

/// One cell of the optional (λ, θ) scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub decay: f64,
    pub threshold: f64,
    pub hidden_offset: f64,
    pub output_offset: f64,
    pub agreement: f64,
    pub spiking_accuracy: f64,
    pub n_images: usize,
}

pub const SCAN_HEADER: &[&str] = &[
    "decay",
    "threshold",
    "hidden_offset",
    "output_offset",
    "agreement",
    "spiking_accuracy",
    "n_images",
];

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<CalibrationFile, HarnessError> {
    let net = load_network(cfg)?;
    let CalibrateSection {
        probes,
        scan_decays,
        scan_thresholds,
        scan_subset,
    } = &cfg.calibrate;
    let params = cfg.rf_params();
    let cal = calibrate_offsets(&net, &params, &cfg.sim_config(), *probes, cfg.seed)?;
    let file = CalibrationFile {
        hidden_offset: cal.offsets.hidden,
        output_offset: cal.offsets.output,
        conjugate_decode: cal.conjugate_decode,
        resultant: cal.resultant,
        probes: *probes,
        seed: cfg.seed,
        neuron: cfg.neuron.clone(),
        sim: cfg.sim.clone(),
    };
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    let path = cfg.calibration_path();
    let text = toml::to_string(&file).expect("calibration serializes");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    println!(
        "offsets hidden {:.6} output {:.6} (T = {}), conjugate_decode {}, resultant {:.4}",
        file.hidden_offset, file.output_offset, params.period, file.conjugate_decode, file.resultant
    );

    if !scan_decays.is_empty() || !scan_thresholds.is_empty() {
        let decays = if scan_decays.is_empty() { vec![params.decay] } else { scan_decays.clone() };
        let thresholds = if scan_thresholds.is_empty() {
            vec![params.threshold]
        } else {
            scan_thresholds.clone()
        };
        let data = test_subset(cfg, *scan_subset)?;
        let phasor = phasor_predictions(&net, &cfg.label_code(), &data)?;
        let mut rows = Vec::new();
        for &decay in &decays {
            for &threshold in &thresholds {
                let p = RfParams { decay, threshold, ..params };
                let c = calibrate_offsets(&net, &p, &cfg.sim_config(), *probes, cfg.seed)?;
                let snn = spiking_network(cfg, net.clone(), p, c.offsets, c.conjugate_decode)?;
                let preds: Vec<usize> = spiking_outcomes(&snn, &data)?.iter().map(|o| o.prediction).collect();
                let row = ScanRow {
                    decay,
                    threshold,
                    hidden_offset: c.offsets.hidden,
                    output_offset: c.offsets.output,
                    agreement: agreement(&preds, &phasor),
                    spiking_accuracy: accuracy(&preds, &data),
                    n_images: data.len(),
                };
                eprintln!("scan decay {decay} threshold {threshold}: agreement {:.4}", row.agreement);
                rows.push(row);
            }
        }
        write_csv(&cfg.out_dir.join("calibration_scan.csv"), &rows, SCAN_HEADER)?;
    }
    Ok(file)
}

pub fn sweep_methods(choice: SweepChoice) -> Vec<SweepMethod> {
    match choice {
        SweepChoice::Explicit => vec![SweepMethod::Explicit],
        SweepChoice::Inhibitory => vec![SweepMethod::Inhibitory],
        SweepChoice::Random => vec![SweepMethod::Random],
        SweepChoice::All => SweepMethod::ALL.to_vec(),
    }
}

pub fn sweep_path(cfg: &RunConfig, method: SweepMethod) -> PathBuf {
    cfg.out_dir.join(format!("sweep_{}.csv", method.name()))
}

/// Runs the configured sweeps, writing one CSV per method. Returns the
/// unsparsified baseline accuracy and the records of each method.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<(f64, Vec<(SweepMethod, Vec<SweepRecord>)>), HarnessError> {
    let net = load_network(cfg)?;
    let snn = calibrated_network(cfg, net)?;
    let data = test_subset(cfg, cfg.sweep.subset)?;
    let period = snn.params.period;
    let lfp = LfpSettings {
        kernel_tau: cfg.kernel_tau(),
        bin_dt: cfg.bin_dt(),
    };
    eprintln!("simulating hidden layer for {} images", data.len());
    let hidden = hidden_trains(&snn, &data)?;
    let mut baseline = f64::NAN;
    let mut all = Vec::new();
    for method in sweep_methods(cfg.sweep.method) {
        let grid = match &cfg.sweep.grid {
            Some(g) => g.clone(),
            None => method.default_grid(cfg.sweep.points, period),
        };
        let (base, records) = run_sweep(&snn, &data, &hidden, method, &grid, lfp, cfg.seed)?;
        baseline = base;
        write_csv(&sweep_path(cfg, method), &records, SWEEP_HEADER)?;
        println!("{} (baseline accuracy {:.4})", method.name(), base);
        for r in &records {
            println!(
                "  parameter {:.3}\tremoved {:.3}\taccuracy {:.4}\trelative {:.4}",
                r.parameter, r.fraction_removed, r.accuracy, r.relative_accuracy
            );
        }
        all.push((method, records));
    }
    Ok((baseline, all))
}

/// Plots the given sweep CSVs, or every `sweep_<method>.csv` present in
/// the output directory, into `fig4.svg` there.
pub fn cmd_plot(cfg: &RunConfig, csvs: &[PathBuf]) -> Result<PathBuf, HarnessError> {
    let paths: Vec<PathBuf> = if csvs.is_empty() {
        SweepMethod::ALL
            .iter()
            .map(|&m| sweep_path(cfg, m))
            .filter(|p| p.exists())
            .collect()
    } else {
        csvs.to_vec()
    };
    if paths.is_empty() {
        return Err(usage(format!("no sweep CSVs in {}; run `sweep` first", cfg.out_dir.display())));
    }
    let mut series = Vec::new();
    for p in &paths {
        let rows: Vec<SweepRecord> = read_csv(p, SWEEP_HEADER)?;
        if rows.is_empty() {
            return Err(HarnessError::Csv {
                file: p.display().to_string(),
                line: 2,
                msg: "no data rows".into(),
            });
        }
        series.push((series_name(p, &rows), rows));
    }
    let svg = render_svg(&series)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    let out = cfg.out_dir.join("fig4.svg");
    std::fs::write(&out, svg).map_err(|e| HarnessError::io(&out, e))?;
    println!("{}", out.display());
    Ok(out)
}

fn series_name(path: &Path, rows: &[SweepRecord]) -> String {
    match rows.first() {
        Some(r) if !r.method.is_empty() => r.method.clone(),
        _ => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    }
}

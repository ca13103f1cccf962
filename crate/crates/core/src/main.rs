use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phasor_snn::harness::commands::Command;
use phasor_snn::harness::{
    cmd_calibrate, cmd_eval, cmd_fetch, cmd_plot, cmd_sweep, cmd_train, HarnessError, Overrides, RunConfig,
};

#[derive(Parser)]
#[command(name = "phasor-snn", version, about = "Train phasor networks, run them as spiking networks, sparsify their spikes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Download and verify the dataset listed in the manifest
    Fetch(Common),
    /// Train and write checkpoint.phzr and loss.csv
    Train(Common),
    /// Evaluate phasor and/or spiking accuracy, writing eval.csv
    Eval(Common),
    /// Measure per-layer spike offsets, writing calibration.toml
    Calibrate(Common),
    /// Run sparsification sweeps, writing sweep_<method>.csv
    Sweep(Common),
    /// Render sweep CSVs into fig4.svg
    Plot {
        #[command(flatten)]
        common: Common,
        /// Sweep CSVs to plot (default: every sweep_*.csv in the output dir)
        csv: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run config; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// eval: phasor|spiking|both; sweep: explicit|inhibitory|random|all
    #[arg(long)]
    method: Option<String>,
    /// Number of leading test images
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, command: Command) -> Result<RunConfig, HarnessError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Overrides {
            method: self.method.clone(),
            subset: self.subset,
            seed: self.seed,
            out: self.out.clone(),
        }
        .apply(base, command)
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Cmd::Fetch(c) => cmd_fetch(&c.resolve(Command::Fetch)?).map(drop),
        Cmd::Train(c) => cmd_train(&c.resolve(Command::Train)?).map(drop),
        Cmd::Eval(c) => cmd_eval(&c.resolve(Command::Eval)?).map(drop),
        Cmd::Calibrate(c) => cmd_calibrate(&c.resolve(Command::Calibrate)?).map(drop),
        Cmd::Sweep(c) => cmd_sweep(&c.resolve(Command::Sweep)?).map(drop),
        Cmd::Plot { common, csv } => cmd_plot(&common.resolve(Command::Plot)?, &csv).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

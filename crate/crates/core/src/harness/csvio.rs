use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub batch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub mode: String,
    pub n_images: usize,
    pub accuracy: f64,
    /// Totals over all evaluated images; 0 in phasor mode.
    pub spikes_hidden: u64,
    pub spikes_output: u64,
}

/// One grid point of a sparsification sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: String,
    pub parameter: f64,
    pub fraction_removed: f64,
    pub accuracy: f64,
    /// `accuracy / baseline`, the baseline being the unsparsified spiking
    /// accuracy on the same images.
    pub relative_accuracy: f64,
    pub n_images: usize,
    pub seed: u64,
}

pub const LOSS_HEADER: &[&str] = &["batch", "loss"];
pub const EVAL_HEADER: &[&str] = &["mode", "n_images", "accuracy", "spikes_hidden", "spikes_output"];
pub const SWEEP_HEADER: &[&str] = &[
    "method",
    "parameter",
    "fraction_removed",
    "accuracy",
    "relative_accuracy",
    "n_images",
    "seed",
];

pub fn to_csv_string<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, to_csv_string(rows, header)).map_err(|e| HarnessError::io(path, e))
}

/// Parses CSV text whose first line must equal `header` exactly.
pub fn parse_csv<T: DeserializeOwned>(text: &str, header: &[&str], source: &str) -> Result<Vec<T>, HarnessError> {
    let err = |line: u64, msg: String| HarnessError::Csv {
        file: source.to_string(),
        line,
        msg,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = r.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(err(1, format!("header {:?}, expected {:?}", got.iter().collect::<Vec<_>>(), header)));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: T = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, e.to_string())
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text, header, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: f64) -> SweepRecord {
        SweepRecord {
            method: "explicit".into(),
            parameter: p,
            fraction_removed: 0.1 * p,
            accuracy: 0.8,
            relative_accuracy: 0.8 / 0.85,
            n_images: 1000,
            seed: 0,
        }
    }

    #[test]
    fn sweep_round_trip() {
        let rows = vec![rec(0.0), rec(0.2), rec(1.0 / 3.0)];
        let text = to_csv_string(&rows, SWEEP_HEADER);
        assert!(text.starts_with("method,parameter,fraction_removed,accuracy,relative_accuracy,n_images,seed\n"));
        let back: Vec<SweepRecord> = parse_csv(&text, SWEEP_HEADER, "mem").unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn loss_and_eval_round_trip() {
        let loss = vec![LossRow { batch: 0, loss: 0.51 }, LossRow { batch: 1, loss: 0.25 }];
        let text = to_csv_string(&loss, LOSS_HEADER);
        assert_eq!(text, "batch,loss\n0,0.51\n1,0.25\n");
        assert_eq!(parse_csv::<LossRow>(&text, LOSS_HEADER, "mem").unwrap(), loss);
        let eval = vec![EvalRow {
            mode: "spiking".into(),
            n_images: 500,
            accuracy: 0.85,
            spikes_hidden: 1234,
            spikes_output: 56,
        }];
        let text = to_csv_string(&eval, EVAL_HEADER);
        assert_eq!(parse_csv::<EvalRow>(&text, EVAL_HEADER, "mem").unwrap(), eval);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let text = "batch,loss\n0,0.5\n1,oops\n";
        match parse_csv::<LossRow>(text, LOSS_HEADER, "loss.csv") {
            Err(HarnessError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv::<LossRow>("step,loss\n", LOSS_HEADER, "x").is_err());
    }
}

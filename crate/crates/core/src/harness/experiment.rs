//! Evaluation loops shared by `eval`, `calibrate` and `sweep`.
//!
//! Per-image work runs on the rayon pool; every result vector is collected
//! in image order, so outputs do not depend on scheduling.

use rayon::prelude::*;

use super::csvio::SweepRecord;
use super::HarnessError;
use crate::data::Dataset;
use crate::phasor::{LabelCode, PhasorNetwork};
use crate::seed::mix_seed;
use crate::sparsify::{SparsifyMethod, SparsifyStats};
use crate::spike::{LayerSparsifiers, SpikeTrain, SpikingNetwork};

const PHASOR_CHUNK: usize = 500;

pub fn accuracy(predictions: &[usize], data: &Dataset) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .enumerate()
        .filter(|&(i, &p)| p == data.label(i) as usize)
        .count();
    correct as f64 / predictions.len() as f64
}

pub fn agreement(a: &[usize], b: &[usize]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    same as f64 / a.len().max(1) as f64
}

pub fn phasor_predictions(net: &PhasorNetwork, code: &LabelCode, data: &Dataset) -> Result<Vec<usize>, HarnessError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let chunks: Vec<Result<Vec<usize>, HarnessError>> = idx
        .par_chunks(PHASOR_CHUNK)
        .map(|chunk| {
            let out = net.forward_batch(data.gather(chunk).view());
            out.rows()
                .into_iter()
                .map(|row| Ok(code.classify(row.as_slice().expect("row-major"))?))
                .collect()
        })
        .collect();
    let mut preds = Vec::with_capacity(data.len());
    for c in chunks {
        preds.extend(c?);
    }
    Ok(preds)
}

/// Unsparsified spiking run of one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpikingOutcome {
    pub prediction: usize,
    pub spikes_hidden: u64,
    pub spikes_output: u64,
}

pub fn spiking_outcomes(snn: &SpikingNetwork, data: &Dataset) -> Result<Vec<SpikingOutcome>, HarnessError> {
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let run = snn.run(&data.pixels(i), &LayerSparsifiers::default())?;
            Ok(SpikingOutcome {
                prediction: run.prediction,
                spikes_hidden: run.hidden.len() as u64,
                spikes_output: run.output.len() as u64,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMethod {
    Explicit,
    Inhibitory,
    Random,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 3] = [SweepMethod::Explicit, SweepMethod::Inhibitory, SweepMethod::Random];

    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Explicit => "explicit",
            SweepMethod::Inhibitory => "inhibitory",
            SweepMethod::Random => "random",
        }
    }

    /// Largest meaningful parameter: a full arc, a full period, certainty.
    pub fn max_parameter(self, period: f64) -> f64 {
        match self {
            SweepMethod::Explicit => 2.0,
            SweepMethod::Inhibitory => period,
            SweepMethod::Random => 1.0,
        }
    }

    /// `points` evenly spaced values from 0 to [`Self::max_parameter`].
    pub fn default_grid(self, points: usize, period: f64) -> Vec<f64> {
        let max = self.max_parameter(period);
        let n = points.max(2) - 1;
        (0..=n).map(|i| max * i as f64 / n as f64).collect()
    }
}

/// Inhibitory sweep settings that are not swept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LfpSettings {
    pub kernel_tau: f64,
    pub bin_dt: f64,
}

/// Sparsifiers for both trainable layers of image `image`.
///
/// The explicit arc is measured on each layer's own clock. Random removal
/// draws an independent stream per image and layer, shared across `p`, so
/// larger `p` removes a superset.
pub fn sparsifiers_for(
    method: SweepMethod,
    parameter: f64,
    snn: &SpikingNetwork,
    lfp: LfpSettings,
    seed: u64,
    image: usize,
) -> LayerSparsifiers {
    let layer = |depth: u64, offset: f64| match method {
        SweepMethod::Explicit => SparsifyMethod::Explicit { arc: parameter, offset },
        SweepMethod::Inhibitory => SparsifyMethod::Inhibitory {
            window: parameter,
            kernel_tau: lfp.kernel_tau,
            bin_dt: lfp.bin_dt,
        },
        SweepMethod::Random => SparsifyMethod::Random {
            p: parameter,
            seed: mix_seed(mix_seed(seed, image as u64), depth),
        },
    };
    LayerSparsifiers {
        hidden: Some(layer(0, snn.offsets.hidden)),
        output: Some(layer(1, snn.offsets.output)),
    }
}

/// Hidden trains as relayed to the output layer, one per image.
pub fn hidden_trains(snn: &SpikingNetwork, data: &Dataset) -> Result<Vec<SpikeTrain>, HarnessError> {
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let input = snn.input_train(&data.pixels(i))?;
            Ok(snn.hidden_train(&input)?)
        })
        .collect()
}

/// Accuracy of recorded hidden trains under optional sparsification, with
/// removal counts summed over both layers and all images.
pub fn sparsified_accuracy(
    snn: &SpikingNetwork,
    data: &Dataset,
    hidden: &[SpikeTrain],
    make: impl Fn(usize) -> LayerSparsifiers + Sync,
) -> Result<(f64, SparsifyStats), HarnessError> {
    let per_image: Vec<Result<(bool, SparsifyStats), HarnessError>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let run = snn.finish(&hidden[i], &make(i))?;
            Ok((run.prediction == data.label(i) as usize, run.total_stats()))
        })
        .collect();
    let mut correct = 0usize;
    let mut total = SparsifyStats::default();
    for r in per_image {
        let (ok, s) = r?;
        correct += ok as usize;
        total = total + s;
    }
    Ok((correct as f64 / data.len().max(1) as f64, total))
}

/// One record per grid point. The baseline is the unsparsified spiking
/// accuracy on the same images; returns it alongside the records.
pub fn run_sweep(
    snn: &SpikingNetwork,
    data: &Dataset,
    hidden: &[SpikeTrain],
    method: SweepMethod,
    grid: &[f64],
    lfp: LfpSettings,
    seed: u64,
) -> Result<(f64, Vec<SweepRecord>), HarnessError> {
    if data.is_empty() {
        return Err(HarnessError::Usage("sweep needs at least one image".into()));
    }
    let (baseline, _) = sparsified_accuracy(snn, data, hidden, |_| LayerSparsifiers::default())?;
    if baseline == 0.0 {
        return Err(HarnessError::Usage("baseline spiking accuracy is 0; relative accuracy undefined".into()));
    }
    let mut records = Vec::with_capacity(grid.len());
    for &parameter in grid {
        let (acc, stats) = sparsified_accuracy(snn, data, hidden, |i| {
            sparsifiers_for(method, parameter, snn, lfp, seed, i)
        })?;
        records.push(SweepRecord {
            method: method.name().to_string(),
            parameter,
            fraction_removed: stats.fraction_removed(),
            accuracy: acc,
            relative_accuracy: acc / baseline,
            n_images: data.len(),
            seed,
        });
    }
    Ok((baseline, records))
}

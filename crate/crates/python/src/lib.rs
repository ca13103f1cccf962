//! `phasor_snn` Python module: phasor networks, spike trains, the spiking
//! executor and the sparsifiers. Arrays cross the boundary as lists.

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use phasor_snn::data::{self, DataError};
use phasor_snn::phasor::{self as ph, LabelCode, PhaseVector};
use phasor_snn::sparsify::{self as sp, SparsifyMethod};
use phasor_snn::spike::{self as sk, LayerOffsets, LayerSparsifiers, RfParams, SimConfig};
use phasor_snn::trainer::{self, CheckpointError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn phases(values: Vec<f64>) -> PyResult<PhaseVector> {
    PhaseVector::new(values).map_err(value_err)
}

/// Time-sorted `(channel, time)` events over a fixed channel set and span.
#[pyclass(name = "SpikeTrain", module = "phasor_snn", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySpikeTrain(sk::SpikeTrain);

#[pymethods]
impl PySpikeTrain {
    #[new]
    #[pyo3(signature = (n_channels, t_span, events = Vec::new()))]
    fn new(n_channels: usize, t_span: (f64, f64), events: Vec<(usize, f64)>) -> PyResult<Self> {
        let events = events.into_iter().map(|(channel, time)| sk::Spike { channel, time }).collect();
        Ok(Self(sk::SpikeTrain::new(n_channels, t_span, events).map_err(value_err)?))
    }

    #[staticmethod]
    fn from_dump(text: &str) -> PyResult<Self> {
        Ok(Self(sk::SpikeTrain::from_dump(text).map_err(value_err)?))
    }

    fn to_dump(&self) -> String {
        self.0.to_dump()
    }

    fn events(&self) -> Vec<(usize, f64)> {
        self.0.events().iter().map(|s| (s.channel, s.time)).collect()
    }

    #[getter]
    fn n_channels(&self) -> usize {
        self.0.n_channels()
    }

    #[getter]
    fn t_span(&self) -> (f64, f64) {
        self.0.t_span()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        let (t0, t1) = self.0.t_span();
        format!("SpikeTrain(channels={}, spikes={}, span=({t0}, {t1}))", self.0.n_channels(), self.0.len())
    }
}

/// Phasor network: fixed random projection, then two trainable layers.
#[pyclass(name = "PhasorNetwork", module = "phasor_snn", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPhasorNetwork(ph::PhasorNetwork);

#[pymethods]
impl PyPhasorNetwork {
    #[new]
    #[pyo3(signature = (n_pixels = ph::N_PIXELS, proj_width = ph::PROJECTION_WIDTH, hidden_width = ph::HIDDEN_WIDTH, n_classes = ph::N_CLASSES, seed = 0))]
    fn new(n_pixels: usize, proj_width: usize, hidden_width: usize, n_classes: usize, seed: u64) -> PyResult<Self> {
        Ok(Self(
            ph::PhasorNetwork::new(n_pixels, proj_width, hidden_width, n_classes, seed).map_err(value_err)?,
        ))
    }

    /// Rebuilds a network from a PHZR checkpoint.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let c = trainer::load_checkpoint(path).map_err(checkpoint_err)?;
        Ok(Self(c.to_network().map_err(checkpoint_err)?))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        trainer::save_checkpoint(&trainer::Checkpoint::from_network(&self.0), path).map_err(checkpoint_err)
    }

    /// Output phases for one image with pixels in [0, 1].
    fn forward(&self, pixels: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(ph::network_forward(&self.0, &pixels).map_err(value_err)?.into_vec())
    }

    fn predict(&self, pixels: Vec<f64>) -> PyResult<usize> {
        ph::classify(&ph::network_forward(&self.0, &pixels).map_err(value_err)?).map_err(value_err)
    }

    #[getter]
    fn n_pixels(&self) -> usize {
        self.0.n_pixels()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.0.n_classes()
    }
}

fn checkpoint_err(e: CheckpointError) -> PyErr {
    match e {
        CheckpointError::Io(io) => PyIOError::new_err(io.to_string()),
        other => value_err(other),
    }
}

/// A phasor network executed with resonate-and-fire neurons.
#[pyclass(name = "SpikingNetwork", module = "phasor_snn", frozen, skip_from_py_object)]
pub struct PySpikingNetwork(sk::SpikingNetwork);

#[pymethods]
impl PySpikingNetwork {
    /// Offsets default to a quarter period per layer; see `calibrate`.
    #[new]
    #[pyo3(signature = (net, period = 1.0, decay = None, threshold = 0.05, hidden_offset = None, output_offset = None, conjugate_decode = false))]
    fn new(
        net: &PyPhasorNetwork,
        period: f64,
        decay: Option<f64>,
        threshold: f64,
        hidden_offset: Option<f64>,
        output_offset: Option<f64>,
        conjugate_decode: bool,
    ) -> PyResult<Self> {
        let params = RfParams {
            period,
            decay: decay.unwrap_or(1.0 / period),
            threshold,
        };
        let mut config = SimConfig::new(&params);
        config.conjugate_decode = conjugate_decode;
        let base = LayerOffsets::uncalibrated(&config);
        let offsets = LayerOffsets {
            hidden: hidden_offset.unwrap_or(base.hidden),
            output: output_offset.unwrap_or(base.output),
        };
        Ok(Self(sk::SpikingNetwork::new(net.0.clone(), params, config, offsets).map_err(value_err)?))
    }

    /// Measures per-layer offsets with random probes and returns a
    /// calibrated copy of this network.
    #[pyo3(signature = (n_probes = 64, seed = 0))]
    fn calibrate(&self, n_probes: usize, seed: u64) -> PyResult<Self> {
        let s = &self.0;
        let cal = sk::calibrate_offsets(&s.net, &s.params, &s.config, n_probes, seed).map_err(value_err)?;
        let mut config = s.config;
        config.conjugate_decode = cal.conjugate_decode;
        let mut out = sk::SpikingNetwork::new(s.net.clone(), s.params, config, cal.offsets).map_err(value_err)?;
        out.label_code = s.label_code;
        Ok(Self(out))
    }

    #[getter]
    fn offsets(&self) -> (f64, f64) {
        (self.0.offsets.hidden, self.0.offsets.output)
    }

    #[getter]
    fn conjugate_decode(&self) -> bool {
        self.0.config.conjugate_decode
    }

    fn predict(&self, pixels: Vec<f64>) -> PyResult<usize> {
        self.0.predict(&pixels).map_err(value_err)
    }

    /// Full run: `(prediction, output phases, hidden train, output train)`.
    fn run(&self, pixels: Vec<f64>) -> PyResult<(usize, Vec<f64>, PySpikeTrain, PySpikeTrain)> {
        let r = self.0.run(&pixels, &LayerSparsifiers::default()).map_err(value_err)?;
        Ok((r.prediction, r.phases.into_vec(), PySpikeTrain(r.hidden), PySpikeTrain(r.output)))
    }
}

/// A loaded IDX split with pixels scaled to [0, 1].
#[pyclass(name = "Dataset", module = "phasor_snn", frozen, skip_from_py_object)]
pub struct PyDataset(data::Dataset);

#[pymethods]
impl PyDataset {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn pixels(&self, i: usize) -> PyResult<Vec<f64>> {
        self.check(i)?;
        Ok(self.0.pixels(i))
    }

    fn label(&self, i: usize) -> PyResult<u8> {
        self.check(i)?;
        Ok(self.0.label(i))
    }
}

impl PyDataset {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.0.len() {
            return Err(PyIndexError::new_err(format!("image {i} of {}", self.0.len())));
        }
        Ok(())
    }
}

/// Loads `"train"` or `"test"` from a directory of IDX files or archives.
#[pyfunction]
fn load_split(dir: &str, split: &str) -> PyResult<PyDataset> {
    let split = match split {
        "train" => data::Split::Train,
        "test" => data::Split::Test,
        other => return Err(PyValueError::new_err(format!("split must be 'train' or 'test', not {other:?}"))),
    };
    data::load_split(dir, split).map(PyDataset).map_err(|e| match e {
        DataError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    })
}

#[pyfunction]
fn pixel_to_phase(pixels: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(ph::pixel_to_phase(&pixels).map_err(value_err)?.into_vec())
}

#[pyfunction]
#[pyo3(signature = (class_, on = 0.5, off = 0.0, n_classes = ph::N_CLASSES))]
fn label_phases(class_: usize, on: f64, off: f64, n_classes: usize) -> PyResult<Vec<f64>> {
    Ok(LabelCode { on, off }.encode(class_, n_classes).map_err(value_err)?.into_vec())
}

#[pyfunction]
#[pyo3(signature = (phases, cycle, offset = 0.0, period = 1.0))]
fn encode_spikes(phases: Vec<f64>, cycle: usize, offset: f64, period: f64) -> PyResult<PySpikeTrain> {
    Ok(PySpikeTrain(sk::encode_spikes(&self::phases(phases)?, cycle, offset, period)))
}

/// First spike per channel inside `window`, as phases; silent channels are 0.
#[pyfunction]
#[pyo3(signature = (train, offset, window, period = 1.0, conjugate = false))]
fn decode_spikes(train: &PySpikeTrain, offset: f64, window: (f64, f64), period: f64, conjugate: bool) -> Vec<f64> {
    sk::decode_spikes(&train.0, offset, window, period, conjugate).into_vec()
}

fn apply(train: &PySpikeTrain, method: SparsifyMethod, period: f64) -> PyResult<PySpikeTrain> {
    Ok(PySpikeTrain(method.apply(&train.0, period).map_err(value_err)?))
}

#[pyfunction]
#[pyo3(signature = (train, arc, offset = 0.0, period = 1.0))]
fn sparsify_explicit(train: &PySpikeTrain, arc: f64, offset: f64, period: f64) -> PyResult<PySpikeTrain> {
    apply(train, SparsifyMethod::Explicit { arc, offset }, period)
}

#[pyfunction]
#[pyo3(signature = (train, window, period = 1.0, kernel_tau = None, bin_dt = None))]
fn sparsify_inhibitory(
    train: &PySpikeTrain,
    window: f64,
    period: f64,
    kernel_tau: Option<f64>,
    bin_dt: Option<f64>,
) -> PyResult<PySpikeTrain> {
    let method = SparsifyMethod::Inhibitory {
        window,
        kernel_tau: kernel_tau.unwrap_or(period / 20.0),
        bin_dt: bin_dt.unwrap_or(period / 200.0),
    };
    apply(train, method, period)
}

#[pyfunction]
#[pyo3(signature = (train, p, seed = 0))]
fn sparsify_random(train: &PySpikeTrain, p: f64, seed: u64) -> PyResult<PySpikeTrain> {
    apply(train, SparsifyMethod::Random { p, seed }, 1.0)
}

/// Fraction of `before`'s spikes missing from `after`.
#[pyfunction]
fn fraction_removed(before: &PySpikeTrain, after: &PySpikeTrain) -> PyResult<f64> {
    Ok(sp::stats(&before.0, &after.0).map_err(value_err)?.fraction_removed())
}

#[pymodule]
#[pyo3(name = "phasor_snn")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpikeTrain>()?;
    m.add_class::<PyPhasorNetwork>()?;
    m.add_class::<PySpikingNetwork>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(load_split, m)?)?;
    m.add_function(wrap_pyfunction!(pixel_to_phase, m)?)?;
    m.add_function(wrap_pyfunction!(label_phases, m)?)?;
    m.add_function(wrap_pyfunction!(encode_spikes, m)?)?;
    m.add_function(wrap_pyfunction!(decode_spikes, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify_explicit, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify_inhibitory, m)?)?;
    m.add_function(wrap_pyfunction!(sparsify_random, m)?)?;
    m.add_function(wrap_pyfunction!(fraction_removed, m)?)?;
    Ok(())
}

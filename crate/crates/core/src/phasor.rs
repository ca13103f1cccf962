//! Phase algebra and the non-spiking phasor network.
//!
//! Phases are stored in units of π radians and canonicalized into `[-1, 1)`:
//! `0` is in phase with the reference oscillation, `±0.5` is a quarter cycle
//! out of phase and `-1` is anti-phase.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Width of the fixed random projection.
pub const PROJECTION_WIDTH: usize = 1024;
/// Hidden phasor layer width.
pub const HIDDEN_WIDTH: usize = 128;
/// Number of FashionMNIST classes.
pub const N_CLASSES: usize = 10;
/// 28×28 pixels per image.
pub const N_PIXELS: usize = 784;

/// Superpositions with a smaller magnitude have no defined angle.
pub(crate) const MAGNITUDE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PhasorError {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pixel {index} = {value} is outside [0, 1]")]
    PixelOutOfRange { index: usize, value: f64 },
    #[error("class {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("empty phase vector")]
    Empty,
    #[error("layer dimensions must be non-zero")]
    ZeroDimension,
}

pub type Result<T> = std::result::Result<T, PhasorError>;

/// An angle in units of π radians, always in `[-1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Angle in radians.
    pub fn radians(self) -> f64 {
        self.0 * PI
    }
}

impl From<Phase> for f64 {
    fn from(p: Phase) -> f64 {
        p.0
    }
}

/// Unchecked reduction into `[-1, 1)`.
#[inline]
pub(crate) fn wrap(x: f64) -> f64 {
    if (-1.0..1.0).contains(&x) {
        return x;
    }
    let r = (x + 1.0).rem_euclid(2.0) - 1.0;
    // rem_euclid can round up to exactly 2.0 for tiny negative inputs
    if r >= 1.0 {
        r - 2.0
    } else {
        r
    }
}

/// Reduce `x` modulo 2 into `[-1, 1)`.
pub fn wrap_phase(x: f64) -> Result<Phase> {
    if !x.is_finite() {
        return Err(PhasorError::NonFinite(x));
    }
    Ok(Phase(wrap(x)))
}

/// A vector of canonical phases, one per neuron of a layer.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    /// Wraps every value into `[-1, 1)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut values = values;
        for v in values.iter_mut() {
            *v = wrap_phase(*v)?.value();
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Caller guarantees every value is already canonical.
    pub(crate) fn from_canonical(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| (-1.0..1.0).contains(v)));
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<Phase> {
        self.0.get(i).copied().map(Phase)
    }

    pub fn iter(&self) -> impl Iterator<Item = Phase> + '_ {
        self.0.iter().copied().map(Phase)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Adds `shift` to every phase and re-wraps.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v + shift).collect())
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(PhasorError::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Mean cosine of the elementwise phase differences, in `[-1, 1]`.
pub fn similarity(a: &PhaseVector, b: &PhaseVector) -> Result<f64> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(PhasorError::Empty);
    }
    let sum: f64 = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (PI * (x - y)).cos())
        .sum();
    Ok(sum / a.len() as f64)
}

/// `1 - similarity`, zero exactly when the phases coincide.
pub fn loss(output: &PhaseVector, target: &PhaseVector) -> Result<f64> {
    Ok(1.0 - similarity(output, target)?)
}

/// A dense layer of phasor neurons with real weights and a real bias.
///
/// Each output is the angle of `Σ_j w[k][j]·e^{iπ x_j} + b[k]`; the bias acts
/// as an input from a reference at phase 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasorLayer {
    /// `out_width × in_width`, row-major.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub trainable: bool,
}

impl PhasorLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, trainable: bool) -> Result<Self> {
        let (out_w, in_w) = weights.dim();
        if out_w == 0 || in_w == 0 {
            return Err(PhasorError::ZeroDimension);
        }
        check_len(out_w, bias.len())?;
        if let Some(&bad) = weights.iter().chain(bias.iter()).find(|v| !v.is_finite()) {
            return Err(PhasorError::NonFinite(bad));
        }
        Ok(Self {
            weights,
            bias,
            trainable,
        })
    }

    pub fn in_width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_width(&self) -> usize {
        self.weights.nrows()
    }

    /// Complex pre-activations for a batch of input phases (`batch × in`).
    /// Returns `(re, im)`, each `batch × out`.
    pub(crate) fn superpose(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let cos = x.mapv(|v| (PI * v).cos());
        let sin = x.mapv(|v| (PI * v).sin());
        let wt = self.weights.t();
        let mut re = cos.dot(&wt);
        re += &self.bias.view().insert_axis(Axis(0));
        let im = sin.dot(&wt);
        (re, im)
    }

    /// Batched forward pass over rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (re, im) = self.superpose(x);
        angle_of(&re, &im)
    }
}

pub(crate) fn angle_of(re: &Array2<f64>, im: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(re.dim());
    ndarray::Zip::from(&mut out)
        .and(re)
        .and(im)
        .for_each(|o, &u, &v| *o = angle(u, v));
    out
}

#[inline]
pub(crate) fn angle(u: f64, v: f64) -> f64 {
    if u * u + v * v < MAGNITUDE_FLOOR * MAGNITUDE_FLOOR {
        0.0
    } else {
        wrap(v.atan2(u) / PI)
    }
}

/// Forward pass of one phasor layer.
pub fn phasor_forward(layer: &PhasorLayer, x: &PhaseVector) -> Result<PhaseVector> {
    check_len(layer.in_width(), x.len())?;
    let (sin, cos): (Vec<f64>, Vec<f64>) = x.as_slice().iter().map(|xj| (PI * xj).sin_cos()).unzip();
    let out = (0..layer.out_width())
        .map(|k| {
            let row = layer.weights.row(k);
            let (mut u, mut v) = (layer.bias[k], 0.0);
            for ((w, c), s) in row.iter().zip(&cos).zip(&sin) {
                u += w * c;
                v += w * s;
            }
            angle(u, v)
        })
        .collect();
    Ok(PhaseVector::from_canonical(out))
}

/// Largest phase strictly below 1; where a saturated pixel lands.
pub const MAX_PIXEL_PHASE: f64 = 0.999_999_999_999_999_9;

/// Intensities in `[0, 1]` are used directly as phases on the upper half circle.
pub fn pixel_to_phase(pixels: &[f64]) -> Result<PhaseVector> {
    let mut out = Vec::with_capacity(pixels.len());
    for (index, &value) in pixels.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(PhasorError::PixelOutOfRange { index, value });
        }
        out.push(pixel_phase(value));
    }
    Ok(PhaseVector::from_canonical(out))
}

#[inline]
pub(crate) fn pixel_phase(p: f64) -> f64 {
    p.min(MAX_PIXEL_PHASE)
}

fn normal_matrix(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("std is positive and finite");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn layer_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fixed random projection: `N(0, 1/√n_pixels)` weights, zero bias.
pub fn init_random_projection(n_pixels: usize, width: usize, seed: u64) -> Result<PhasorLayer> {
    if n_pixels == 0 || width == 0 {
        return Err(PhasorError::ZeroDimension);
    }
    let mut rng = layer_rng(seed, 0);
    let weights = normal_matrix(width, n_pixels, 1.0 / (n_pixels as f64).sqrt(), &mut rng);
    PhasorLayer::new(weights, Array1::zeros(width), false)
}

/// Bias given to freshly initialized trainable layers.
pub const INITIAL_BIAS: f64 = 0.1;

/// Trainable layer with `N(0, 1/√fan_in)` weights and a small positive bias.
pub fn init_trainable(in_width: usize, out_width: usize, seed: u64, stream: u64) -> Result<PhasorLayer> {
    if in_width == 0 || out_width == 0 {
        return Err(PhasorError::ZeroDimension);
    }
    let mut rng = layer_rng(seed, stream);
    let weights = normal_matrix(out_width, in_width, 1.0 / (in_width as f64).sqrt(), &mut rng);
    PhasorLayer::new(weights, Array1::from_elem(out_width, INITIAL_BIAS), true)
}

/// Random projection followed by two trainable phasor layers.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasorNetwork {
    pub projection: PhasorLayer,
    pub hidden: PhasorLayer,
    pub output: PhasorLayer,
    pub seed: u64,
}

impl PhasorNetwork {
    /// Freshly initialized network; every layer is derived from `seed`.
    pub fn new(n_pixels: usize, proj_width: usize, hidden_width: usize, n_classes: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            projection: init_random_projection(n_pixels, proj_width, seed)?,
            hidden: init_trainable(proj_width, hidden_width, seed, 1)?,
            output: init_trainable(hidden_width, n_classes, seed, 2)?,
            seed,
        })
    }

    /// 784 → 1024 → 128 → 10.
    pub fn default_architecture(seed: u64) -> Result<Self> {
        Self::new(N_PIXELS, PROJECTION_WIDTH, HIDDEN_WIDTH, N_CLASSES, seed)
    }

    /// Assembles a network from parts, checking that the widths chain.
    pub fn from_layers(projection: PhasorLayer, hidden: PhasorLayer, output: PhasorLayer, seed: u64) -> Result<Self> {
        check_len(projection.out_width(), hidden.in_width())?;
        check_len(hidden.out_width(), output.in_width())?;
        Ok(Self {
            projection,
            hidden,
            output,
            seed,
        })
    }

    pub fn n_pixels(&self) -> usize {
        self.projection.in_width()
    }

    pub fn n_classes(&self) -> usize {
        self.output.out_width()
    }

    /// Projection-layer phases for one image; the input to the spiking layers.
    pub fn project(&self, pixels: &[f64]) -> Result<PhaseVector> {
        check_len(self.n_pixels(), pixels.len())?;
        phasor_forward(&self.projection, &pixel_to_phase(pixels)?)
    }

    /// Batched projection of normalized pixel rows.
    pub fn project_batch(&self, pixels: ArrayView2<f64>) -> Array2<f64> {
        self.projection.forward_batch(pixels.mapv(pixel_phase).view())
    }

    /// Output phases for a batch of normalized pixel rows.
    pub fn forward_batch(&self, pixels: ArrayView2<f64>) -> Array2<f64> {
        let p = self.project_batch(pixels);
        let h = self.hidden.forward_batch(p.view());
        self.output.forward_batch(h.view())
    }
}

/// Full non-spiking inference for one image with pixels in `[0, 1]`.
pub fn network_forward(net: &PhasorNetwork, pixels: &[f64]) -> Result<PhaseVector> {
    let p = net.project(pixels)?;
    let h = phasor_forward(&net.hidden, &p)?;
    phasor_forward(&net.output, &h)
}

/// Phase-shift keyed label symbols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelCode {
    /// Phase of the channel matching the class.
    pub on: f64,
    /// Phase of every other channel.
    pub off: f64,
}

impl Default for LabelCode {
    /// On at +90°, off in phase with the reference.
    fn default() -> Self {
        Self { on: 0.5, off: 0.0 }
    }
}

impl LabelCode {
    pub fn encode(&self, class: usize, n_classes: usize) -> Result<PhaseVector> {
        if class >= n_classes {
            return Err(PhasorError::ClassOutOfRange { class, n_classes });
        }
        PhaseVector::new(
            (0..n_classes)
                .map(|k| if k == class { self.on } else { self.off })
                .collect(),
        )
    }

    /// Channel closest to the on-symbol, lowest index on ties.
    pub fn classify(&self, output: &[f64]) -> Result<usize> {
        if output.is_empty() {
            return Err(PhasorError::Empty);
        }
        let mut best = (0, f64::INFINITY);
        for (k, &v) in output.iter().enumerate() {
            let d = wrap(v - self.on).abs();
            if d < best.1 {
                best = (k, d);
            }
        }
        Ok(best.0)
    }
}

pub fn encode_labels_psk(class: usize, n_classes: usize) -> Result<PhaseVector> {
    LabelCode::default().encode(class, n_classes)
}

pub fn classify(output: &PhaseVector) -> Result<usize> {
    LabelCode::default().classify(output.as_slice())
}

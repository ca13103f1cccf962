//! Binary checkpoint format.
//!
//! Little-endian layout:
//!
//! ```text
//! "PHZR"  u32 version  u32 n_pixels  u32 proj_width  u32 hidden_width  u32 n_classes
//! u64 projection_seed
//! f32 hidden_w[hidden_width × proj_width]   (row-major, out × in)
//! f32 hidden_b[hidden_width]
//! f32 output_w[n_classes × hidden_width]
//! f32 output_b[n_classes]
//! u32 crc32 of every preceding byte
//! ```
//!
//! The projection layer is not stored; it is regenerated from its seed.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::phasor::{init_random_projection, PhasorError, PhasorLayer, PhasorNetwork};

pub const MAGIC: &[u8; 4] = b"PHZR";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 5 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0} (expected {FORMAT_VERSION})")]
    VersionMismatch(u32),
    #[error("truncated checkpoint: {got} bytes, need {need}")]
    Truncated { got: usize, need: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Phasor(#[from] PhasorError),
}

/// Everything needed to rebuild a trained [`PhasorNetwork`], at f32 precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub n_pixels: u32,
    pub proj_width: u32,
    pub hidden_width: u32,
    pub n_classes: u32,
    pub projection_seed: u64,
    pub hidden_w: Vec<f32>,
    pub hidden_b: Vec<f32>,
    pub output_w: Vec<f32>,
    pub output_b: Vec<f32>,
}

fn to_f32(values: impl Iterator<Item = f64>) -> Vec<f32> {
    values.map(|v| v as f32).collect()
}

impl Checkpoint {
    pub fn from_network(net: &PhasorNetwork) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n_pixels: net.n_pixels() as u32,
            proj_width: net.projection.out_width() as u32,
            hidden_width: net.hidden.out_width() as u32,
            n_classes: net.n_classes() as u32,
            projection_seed: net.seed,
            hidden_w: to_f32(net.hidden.weights.iter().copied()),
            hidden_b: to_f32(net.hidden.bias.iter().copied()),
            output_w: to_f32(net.output.weights.iter().copied()),
            output_b: to_f32(net.output.bias.iter().copied()),
        }
    }

    fn check_dims(&self) -> Result<(), CheckpointError> {
        let (p, h, c) = (self.proj_width as usize, self.hidden_width as usize, self.n_classes as usize);
        if self.n_pixels == 0 || p == 0 || h == 0 || c == 0 {
            return Err(CheckpointError::DimensionMismatch("zero-sized layer".into()));
        }
        let expect = [("hidden_w", h * p), ("hidden_b", h), ("output_w", c * h), ("output_b", c)];
        let got = [self.hidden_w.len(), self.hidden_b.len(), self.output_w.len(), self.output_b.len()];
        for ((name, e), g) in expect.iter().zip(got) {
            if *e != g {
                return Err(CheckpointError::DimensionMismatch(format!("{name} has {g} values, expected {e}")));
            }
        }
        Ok(())
    }

    /// Rebuilds the network, regenerating the projection from its seed.
    pub fn to_network(&self) -> Result<PhasorNetwork, CheckpointError> {
        self.check_dims()?;
        let (p, h, c) = (self.proj_width as usize, self.hidden_width as usize, self.n_classes as usize);
        let widen = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let shape_err = |e: ndarray::ShapeError| CheckpointError::DimensionMismatch(e.to_string());
        let projection = init_random_projection(self.n_pixels as usize, p, self.projection_seed)?;
        let hidden = PhasorLayer::new(
            Array2::from_shape_vec((h, p), widen(&self.hidden_w)).map_err(shape_err)?,
            Array1::from(widen(&self.hidden_b)),
            true,
        )?;
        let output = PhasorLayer::new(
            Array2::from_shape_vec((c, h), widen(&self.output_w)).map_err(shape_err)?,
            Array1::from(widen(&self.output_b)),
            true,
        )?;
        Ok(PhasorNetwork::from_layers(projection, hidden, output, self.projection_seed)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        self.check_dims()?;
        let n_floats = self.hidden_w.len() + self.hidden_b.len() + self.output_w.len() + self.output_b.len();
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * n_floats + 4);
        out.extend_from_slice(MAGIC);
        for v in [
            self.format_version,
            self.n_pixels,
            self.proj_width,
            self.hidden_width,
            self.n_classes,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.projection_seed.to_le_bytes());
        for t in [&self.hidden_w, &self.hidden_b, &self.output_w, &self.output_b] {
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 {
            return Err(CheckpointError::Truncated { got: bytes.len(), need: HEADER_LEN + 4 });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic(magic));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        if bytes.len() < 8 {
            return Err(CheckpointError::Truncated { got: bytes.len(), need: HEADER_LEN + 4 });
        }
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch(version));
        }
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Truncated { got: bytes.len(), need: HEADER_LEN + 4 });
        }
        let (n_pixels, p, h, c) = (u32_at(8), u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
        if n_pixels == 0 || p == 0 || h == 0 || c == 0 {
            return Err(CheckpointError::DimensionMismatch("zero-sized layer".into()));
        }
        let seed = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
        let lens = [h * p, h, c * h, c];
        let need = HEADER_LEN + 4 * lens.iter().sum::<usize>() + 4;
        if bytes.len() < need {
            return Err(CheckpointError::Truncated { got: bytes.len(), need });
        }
        if bytes.len() > need {
            return Err(CheckpointError::DimensionMismatch(format!(
                "{} bytes present but header dimensions imply {need}",
                bytes.len()
            )));
        }
        let stored = u32_at(need - 4);
        let computed = crc32fast::hash(&bytes[..need - 4]);
        if stored != computed {
            return Err(CheckpointError::Checksum { stored, computed });
        }
        let mut pos = HEADER_LEN;
        let mut tensors = lens.iter().map(|&n| {
            let t: Vec<f32> = bytes[pos..pos + 4 * n]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            pos += 4 * n;
            t
        });
        Ok(Self {
            format_version: version,
            n_pixels,
            proj_width: p as u32,
            hidden_width: h as u32,
            n_classes: c as u32,
            projection_seed: seed,
            hidden_w: tensors.next().unwrap(),
            hidden_b: tensors.next().unwrap(),
            output_w: tensors.next().unwrap(),
            output_b: tensors.next().unwrap(),
        })
    }
}

pub fn save_checkpoint(c: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, c.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

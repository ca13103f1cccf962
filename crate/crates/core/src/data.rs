//! FashionMNIST acquisition and IDX parsing.
//!
//! The IDX containers are big-endian: a `u32` magic (2051 for images, 2049
//! for labels), `u32` dimensions, then raw unsigned bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;
/// Largest label value accepted by the parser is `MAX_CLASSES - 1`.
pub const MAX_CLASSES: u8 = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic {got} (expected {expected})")]
    BadMagic { expected: u32, got: u32 },
    #[error("truncated IDX data: {got} bytes, need {need}")]
    Truncated { got: usize, need: usize },
    #[error("{extra} trailing bytes after IDX payload")]
    TrailingBytes { extra: usize },
    #[error("label at index {index} is {value}, outside 0..{MAX_CLASSES}")]
    LabelOutOfRange { index: usize, value: u8 },
    #[error("{images} images paired with {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("sha256 mismatch for {file}: expected {expected}, got {got}")]
    DigestMismatch { file: String, expected: String, got: String },
    #[error("length mismatch for {file}: expected {expected} bytes, got {got}")]
    LengthMismatch { file: String, expected: u64, got: u64 },
    #[error("download of {url} failed (retriable): {msg}")]
    Network { url: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl DataError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, DataError::Network { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageSet {
    pub n_images: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major intensities, `n_images × rows × cols`.
    pub pixels: Vec<u8>,
}

impl ImageSet {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<u8>,
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn need(bytes: &[u8], n: usize) -> Result<(), DataError> {
    if bytes.len() < n {
        return Err(DataError::Truncated { got: bytes.len(), need: n });
    }
    Ok(())
}

fn exact(bytes: &[u8], n: usize) -> Result<(), DataError> {
    need(bytes, n)?;
    if bytes.len() > n {
        return Err(DataError::TrailingBytes { extra: bytes.len() - n });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageSet, DataError> {
    need(bytes, 4)?;
    let magic = be_u32(bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(DataError::BadMagic { expected: IMAGES_MAGIC, got: magic });
    }
    need(bytes, 16)?;
    let (n, rows, cols) = (be_u32(bytes, 4) as usize, be_u32(bytes, 8) as usize, be_u32(bytes, 12) as usize);
    exact(bytes, 16 + n * rows * cols)?;
    Ok(ImageSet {
        n_images: n,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelSet, DataError> {
    need(bytes, 4)?;
    let magic = be_u32(bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(DataError::BadMagic { expected: LABELS_MAGIC, got: magic });
    }
    need(bytes, 8)?;
    let n = be_u32(bytes, 4) as usize;
    exact(bytes, 8 + n)?;
    let labels = bytes[8..].to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v >= MAX_CLASSES) {
        return Err(DataError::LabelOutOfRange { index, value });
    }
    Ok(LabelSet { labels })
}

pub fn serialize_idx_images(set: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.pixels.len());
    for v in [IMAGES_MAGIC, set.n_images as u32, set.rows as u32, set.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&set.pixels);
    out
}

pub fn serialize_idx_labels(set: &LabelSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + set.labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(set.labels.len() as u32).to_be_bytes());
    out.extend_from_slice(&set.labels);
    out
}

/// Intensities scaled to `[0, 1]`, one image per row.
pub fn normalize(images: &ImageSet) -> Array2<f64> {
    Array2::from_shape_fn((images.n_images, images.image_len()), |(i, j)| {
        images.pixels[i * images.image_len() + j] as f64 / 255.0
    })
}

/// Images paired with their labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: ImageSet,
    pub labels: LabelSet,
}

impl Dataset {
    pub fn new(images: ImageSet, labels: LabelSet) -> Result<Self, DataError> {
        if images.n_images != labels.len() {
            return Err(DataError::CountMismatch {
                images: images.n_images,
                labels: labels.len(),
            });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_pixels(&self) -> usize {
        self.images.image_len()
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels.labels[i]
    }

    /// Normalized pixels of image `i`.
    pub fn pixels(&self, i: usize) -> Vec<f64> {
        self.images.image(i).iter().map(|&p| p as f64 / 255.0).collect()
    }

    /// Normalized pixel rows for the given indices.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        let n = self.n_pixels();
        Array2::from_shape_fn((indices.len(), n), |(r, j)| self.images.image(indices[r])[j] as f64 / 255.0)
    }

    /// The first `n` examples.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: ImageSet {
                n_images: n,
                rows: self.images.rows,
                cols: self.images.cols,
                pixels: self.images.pixels[..n * self.n_pixels()].to_vec(),
            },
            labels: LabelSet {
                labels: self.labels.labels[..n].to_vec(),
            },
        }
    }
}

/// One shuffled pass over a dataset in fixed-size batches.
pub struct Batches<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches<'_> {
    /// Indices of every full batch this pass will yield, in order.
    pub fn index_batches(&self) -> impl Iterator<Item = &[usize]> {
        self.order.chunks_exact(self.batch_size)
    }
}

impl Iterator for Batches<'_> {
    type Item = (Array2<f64>, Vec<u8>);

    fn next(&mut self) -> Option<Self::Item> {
        let end = self.pos + self.batch_size;
        if self.batch_size == 0 || end > self.order.len() {
            return None;
        }
        let idx = &self.order[self.pos..end];
        self.pos = end;
        Some((self.data.gather(idx), idx.iter().map(|&i| self.data.label(i)).collect()))
    }
}

/// A uniformly shuffled pass; the final partial batch is dropped.
pub fn make_batches(data: &Dataset, batch_size: usize, seed: u64) -> Batches<'_> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Batches {
        data,
        order,
        batch_size,
        pos: 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

fn read_maybe_gz(dir: &Path, stem: &str) -> Result<Vec<u8>, DataError> {
    let raw = dir.join(stem);
    if raw.exists() {
        return fs::read(&raw).map_err(io_err(&raw));
    }
    let gz = dir.join(format!("{stem}.gz"));
    let compressed = fs::read(&gz).map_err(io_err(&gz))?;
    gunzip(&compressed).map_err(io_err(&gz))
}

/// Loads a split from `dir`, reading decompressed IDX files or their `.gz` archives.
pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<Dataset, DataError> {
    let dir = dir.as_ref();
    let images = parse_idx_images(&read_maybe_gz(dir, &format!("{}-images-idx3-ubyte", split.prefix()))?)?;
    let labels = parse_idx_labels(&read_maybe_gz(dir, &format!("{}-labels-idx1-ubyte", split.prefix()))?)?;
    Dataset::new(images, labels)
}

pub fn gunzip(bytes: &[u8]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    GzDecoder::new(bytes).read_to_end(&mut out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub filename: String,
    pub url: String,
    /// Lowercase hex SHA-256 of the file as downloaded.
    pub sha256: String,
    pub length: u64,
}

/// Pinned download list, one `filename<TAB>url<TAB>sha256<TAB>length` per line.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |msg: String| DataError::Manifest { line: line_no, msg };
            let fields: Vec<&str> = trimmed.split('\t').collect();
            let [filename, url, sha256, length] = fields[..] else {
                return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
            };
            if sha256.len() != 64 || !sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(err(format!("digest {sha256:?} is not 64 hex characters")));
            }
            if filename.is_empty() || filename.contains('/') || filename.contains("..") {
                return Err(err(format!("bad filename {filename:?}")));
            }
            let length = length.parse().map_err(|_| err(format!("bad length {length:?}")))?;
            entries.push(ManifestEntry {
                filename: filename.to_string(),
                url: url.to_string(),
                sha256: sha256.to_ascii_lowercase(),
                length,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\t{}\n", e.filename, e.url, e.sha256, e.length))
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn verify(entry: &ManifestEntry, bytes: &[u8]) -> Result<(), DataError> {
    if bytes.len() as u64 != entry.length {
        return Err(DataError::LengthMismatch {
            file: entry.filename.clone(),
            expected: entry.length,
            got: bytes.len() as u64,
        });
    }
    let got = sha256_hex(bytes);
    if got != entry.sha256 {
        return Err(DataError::DigestMismatch {
            file: entry.filename.clone(),
            expected: entry.sha256.clone(),
            got,
        });
    }
    Ok(())
}

fn download(url: &str) -> Result<Vec<u8>, DataError> {
    if let Some(path) = url.strip_prefix("file://") {
        return fs::read(path).map_err(|e| DataError::Network {
            url: url.to_string(),
            msg: e.to_string(),
        });
    }
    let net_err = |e: ureq::Error| DataError::Network {
        url: url.to_string(),
        msg: e.to_string(),
    };
    let mut resp = ureq::get(url).call().map_err(net_err)?;
    resp.body_mut()
        .with_config()
        .limit(512 * 1024 * 1024)
        .read_to_vec()
        .map_err(net_err)
}

/// What [`fetch_dataset`] did for one manifest entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchedFile {
    pub archive: PathBuf,
    /// Decompressed IDX file, or the archive itself when it is not gzip.
    pub decompressed: PathBuf,
    pub downloaded: bool,
}

/// Makes every manifest entry present and verified under `dir`.
///
/// Files already present with a matching digest are not downloaded again.
/// A present file with the wrong digest is an error and is left untouched;
/// a freshly downloaded file that fails verification is discarded.
pub fn fetch_dataset(manifest: &Manifest, dir: impl AsRef<Path>) -> Result<Vec<FetchedFile>, DataError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let archive = dir.join(&entry.filename);
        let (bytes, downloaded) = if archive.exists() {
            let bytes = fs::read(&archive).map_err(io_err(&archive))?;
            verify(entry, &bytes)?;
            (bytes, false)
        } else {
            let bytes = download(&entry.url)?;
            verify(entry, &bytes)?;
            let tmp = dir.join(format!("{}.part", entry.filename));
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&bytes).map_err(io_err(&tmp))?;
            drop(f);
            fs::rename(&tmp, &archive).map_err(io_err(&archive))?;
            (bytes, true)
        };
        let decompressed = match entry.filename.strip_suffix(".gz") {
            Some(stem) => {
                let path = dir.join(stem);
                let raw = gunzip(&bytes).map_err(io_err(&archive))?;
                fs::write(&path, raw).map_err(io_err(&path))?;
                path
            }
            None => archive.clone(),
        };
        out.push(FetchedFile {
            archive,
            decompressed,
            downloaded,
        });
    }
    Ok(out)
}

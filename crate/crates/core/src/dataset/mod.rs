//! Image-classification datasets in IDX format (MNIST, Fashion-MNIST,
//! KMNIST and EMNIST letters).

mod fetch;
pub mod idx;

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use thiserror::Error;

pub use fetch::{fetch_dataset, FetchReport, Fetcher, Manifest};
pub use idx::{parse_idx, IdxTensor};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown IDX magic number {0:#010x}")]
    BadMagic(u32),
    #[error("IDX data truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("IDX payload has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("IDX dimensions overflow")]
    DimensionOverflow,
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Box<DatasetError> },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("download of {url} failed: {reason}")]
    DownloadFailed { url: String, reason: String },
    #[error("checksum mismatch for {file}: expected {expected}, got {actual}")]
    ChecksumMismatch { file: String, expected: String, actual: String },
    #[error("bad checksum manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four supported datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Kmnist,
    EmnistLetters,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] =
        [DatasetName::Mnist, DatasetName::FashionMnist, DatasetName::Kmnist, DatasetName::EmnistLetters];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion-mnist",
            DatasetName::Kmnist => "kmnist",
            DatasetName::EmnistLetters => "emnist-letters",
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            DatasetName::EmnistLetters => 26,
            _ => 10,
        }
    }

    /// (train, test) sizes of the published splits.
    pub fn official_sizes(self) -> (usize, usize) {
        match self {
            DatasetName::EmnistLetters => (124_800, 20_800),
            _ => (60_000, 10_000),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion-mnist" | "fashionmnist" => Ok(DatasetName::FashionMnist),
            "kmnist" => Ok(DatasetName::Kmnist),
            "emnist-letters" | "emnistletters" => Ok(DatasetName::EmnistLetters),
            _ => Err(DatasetError::UnknownDataset(s.to_string())),
        }
    }
}

/// File names of one split pair, as stored under `<root>/<dataset>/`.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";
pub const FILE_NAMES: [&str; 4] = [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS];

/// Flattened 28×28 images with pixel values in `[0, 1]` and class labels.
///
/// Pixels are stored as `f32` (each value is `byte / 255`), which halves the
/// memory of a 60k-image set; batches are widened to `f64` on extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Vec<f32>,
    labels: Vec<u8>,
    class_count: usize,
}

impl LabeledImageSet {
    pub fn new(images: Vec<f32>, labels: Vec<u8>, class_count: usize) -> Result<Self, DatasetError> {
        if labels.is_empty() {
            return Err(DatasetError::Invalid("empty image set".into()));
        }
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(DatasetError::Invalid(format!("{} pixel values for {} labels", images.len(), labels.len())));
        }
        if class_count == 0 || class_count > 256 {
            return Err(DatasetError::Invalid(format!("class count {class_count}")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(DatasetError::Invalid(format!("label {bad} outside [0, {class_count})")));
        }
        if images.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(DatasetError::Invalid("pixel value outside [0, 1]".into()));
        }
        Ok(Self { images, labels, class_count })
    }

    /// Build from raw bytes, scaling by 1/255.
    pub fn from_bytes(pixels: &[u8], labels: Vec<u8>, class_count: usize) -> Result<Self, DatasetError> {
        let images = pixels.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(images, labels, class_count)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Copy of the samples at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let mut images = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Self::new(images, labels, self.class_count)
    }

    /// First `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len()).max(1);
        Self {
            images: self.images[..n * IMAGE_PIXELS].to_vec(),
            labels: self.labels[..n].to_vec(),
            class_count: self.class_count,
        }
    }

    /// Samples at `indices` as a `batch × 784` matrix.
    pub fn batch(&self, indices: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((indices.len(), IMAGE_PIXELS));
        for (row, &i) in m.rows_mut().into_iter().zip(indices) {
            for (dst, &src) in row.into_iter().zip(self.image(i)) {
                *dst = src as f64;
            }
        }
        m
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.label(i)).collect()
    }

    /// Number of samples per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// Load the train and test splits of `name` from `<root>/<name>/`.
///
/// Each file may be stored raw or gzip-compressed with a `.gz` suffix.
pub fn load_dataset(name: DatasetName, root: &Path) -> Result<(LabeledImageSet, LabeledImageSet), DatasetError> {
    let dir = root.join(name.as_str());
    let train = load_split(name, &dir, TRAIN_IMAGES, TRAIN_LABELS)?;
    let test = load_split(name, &dir, TEST_IMAGES, TEST_LABELS)?;
    let (n_train, n_test) = name.official_sizes();
    if train.len() != n_train || test.len() != n_test {
        log::warn!("{name}: split sizes {}/{} differ from the published {n_train}/{n_test}", train.len(), test.len());
    }
    Ok((train, test))
}

/// Resolve a dataset name and load it.
pub fn load_named(name: &str, root: &Path) -> Result<(LabeledImageSet, LabeledImageSet), DatasetError> {
    load_dataset(name.parse()?, root)
}

fn load_split(name: DatasetName, dir: &Path, images: &str, labels: &str) -> Result<LabeledImageSet, DatasetError> {
    let img = read_idx(&dir.join(images))?;
    let lab = read_idx(&dir.join(labels))?;
    if img.dims.len() != 3 || img.dims[1] != IMAGE_SIDE || img.dims[2] != IMAGE_SIDE {
        return Err(DatasetError::Invalid(format!("{images}: expected N×28×28 images, got {:?}", img.dims)));
    }
    if lab.dims.len() != 1 {
        return Err(DatasetError::Invalid(format!("{labels}: expected a label vector, got {:?}", lab.dims)));
    }
    if img.len() != lab.len() {
        return Err(DatasetError::Invalid(format!("{} images but {} labels", img.len(), lab.len())));
    }
    let mut pixels = img.data;
    let mut labels = lab.data;
    if name == DatasetName::EmnistLetters {
        transpose_images(&mut pixels);
        for l in &mut labels {
            if *l == 0 || *l > 26 {
                return Err(DatasetError::Invalid(format!("EMNIST letter label {l} outside 1..=26")));
            }
            *l -= 1;
        }
    }
    LabeledImageSet::from_bytes(&pixels, labels, name.class_count())
}

/// EMNIST ships column-major images; swap to row-major in place.
fn transpose_images(pixels: &mut [u8]) {
    for img in pixels.chunks_exact_mut(IMAGE_PIXELS) {
        for r in 0..IMAGE_SIDE {
            for c in (r + 1)..IMAGE_SIDE {
                img.swap(r * IMAGE_SIDE + c, c * IMAGE_SIDE + r);
            }
        }
    }
}

fn read_idx(path: &Path) -> Result<IdxTensor, DatasetError> {
    let bytes = if path.exists() {
        fs::read(path)?
    } else {
        let gz = path.with_file_name(format!("{}.gz", path.file_name().unwrap_or_default().to_string_lossy()));
        if !gz.exists() {
            return Err(DatasetError::MissingFile(path.to_path_buf()));
        }
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(fs::File::open(&gz)?).read_to_end(&mut out)?;
        out
    };
    parse_idx(&bytes).map_err(|e| DatasetError::Parse { path: path.to_path_buf(), source: Box::new(e) })
}

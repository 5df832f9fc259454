//! MNIST ingestion: the flat `MNIST.bin` / `MNIST.target` pair and the
//! canonical big-endian IDX containers.
//!
//! Pixels are passed through untouched. The split between training and test
//! records is positional: the first `train_count` records train the network.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const IMAGE_SIDE: usize = 28;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const CLASSES: usize = 10;

/// Training images in the full MNIST distribution.
pub const MNIST_TRAIN: usize = 60_000;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: length {len} is not a multiple of {PIXELS} bytes")]
    TruncatedImages { path: PathBuf, len: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}:{line}: label {value} outside 0..=9")]
    LabelOutOfRange { path: PathBuf, line: usize, value: i64 },
    #[error("{path}:{line}: unparsable label {text:?}")]
    BadLabel { path: PathBuf, line: usize, text: String },
    #[error("{path}: bad IDX magic {found:#010x} (expected {expected:#010x})")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: image dimensions {rows}x{cols} do not give {PIXELS} pixels")]
    BadDimensions { path: PathBuf, rows: u32, cols: u32 },
    #[error("{path}: IDX payload truncated")]
    TruncatedIdx { path: PathBuf },
    #[error("train count {train} exceeds record count {total}")]
    TrainCount { train: usize, total: usize },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// One 28x28 grayscale image and its class.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pixels: Box<[u8; PIXELS]>,
    label: u8,
}

impl ImageRecord {
    /// Returns `None` if `label` is not a valid class index.
    pub fn new(pixels: [u8; PIXELS], label: u8) -> Option<Self> {
        (usize::from(label) < CLASSES).then(|| Self { pixels: Box::new(pixels), label })
    }

    pub fn from_slice(pixels: &[u8], label: u8) -> Option<Self> {
        let pixels: [u8; PIXELS] = pixels.try_into().ok()?;
        Self::new(pixels, label)
    }

    pub fn pixels(&self) -> &[u8; PIXELS] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

impl std::fmt::Debug for ImageRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lit = self.pixels.iter().filter(|&&p| p > 0).count();
        f.debug_struct("ImageRecord").field("label", &self.label).field("lit_pixels", &lit).finish()
    }
}

/// Ordered records plus the number of leading records used for training.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    train_count: usize,
}

impl Dataset {
    pub fn new(records: Vec<ImageRecord>, train_count: usize) -> Result<Self, DataError> {
        if train_count > records.len() {
            return Err(DataError::TrainCount { train: train_count, total: records.len() });
        }
        Ok(Self { records, train_count })
    }

    /// Uses the MNIST convention: the first 60,000 records train, the rest
    /// test. Smaller datasets are treated as training-only.
    pub fn with_mnist_split(records: Vec<ImageRecord>) -> Self {
        let train_count = records.len().min(MNIST_TRAIN);
        Self { records, train_count }
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn train_count(&self) -> usize {
        self.train_count
    }

    pub fn train(&self) -> &[ImageRecord] {
        &self.records[..self.train_count]
    }

    pub fn test(&self) -> &[ImageRecord] {
        &self.records[self.train_count..]
    }

    /// Builds the timeline for a reduced experiment: the first `train`
    /// training records followed by the first `test` test records.
    pub fn subset(&self, train: usize, test: usize) -> Dataset {
        let train = train.min(self.train_count);
        let test = test.min(self.records.len() - self.train_count);
        let mut records = Vec::with_capacity(train + test);
        records.extend_from_slice(&self.records[..train]);
        records.extend_from_slice(&self.records[self.train_count..self.train_count + test]);
        Dataset { records, train_count: train }
    }
}

fn parse_labels(path: &Path, text: &str) -> Result<Vec<u8>, DataError> {
    let lines: Vec<&str> = text.lines().collect();
    // trailing blank lines are tolerated, interior ones are not
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    let mut labels = Vec::with_capacity(end);
    for (i, raw) in lines[..end].iter().enumerate() {
        let line = raw.trim();
        let value: i64 = line.parse().map_err(|_| DataError::BadLabel {
            path: path.to_path_buf(),
            line: i + 1,
            text: raw.to_string(),
        })?;
        if !(0..CLASSES as i64).contains(&value) {
            return Err(DataError::LabelOutOfRange { path: path.to_path_buf(), line: i + 1, value });
        }
        labels.push(value as u8);
    }
    Ok(labels)
}

fn zip_records(pixels: &[u8], labels: &[u8]) -> Result<Vec<ImageRecord>, DataError> {
    let images = pixels.len() / PIXELS;
    if images != labels.len() {
        return Err(DataError::CountMismatch { images, labels: labels.len() });
    }
    Ok(pixels
        .chunks_exact(PIXELS)
        .zip(labels)
        .map(|(chunk, &label)| ImageRecord::from_slice(chunk, label).expect("validated label"))
        .collect())
}

/// Reads the flat pair: raw 784-byte images back to back, and one decimal
/// label per line.
pub fn load_flat(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let bytes = fs::read(images_path).map_err(io_err(images_path))?;
    if bytes.len() % PIXELS != 0 {
        return Err(DataError::TruncatedImages { path: images_path.to_path_buf(), len: bytes.len() });
    }
    let text = fs::read_to_string(labels_path).map_err(io_err(labels_path))?;
    let labels = parse_labels(labels_path, &text)?;
    Ok(Dataset::with_mnist_split(zip_records(&bytes, &labels)?))
}

/// Inverse of [`load_flat`].
pub fn write_flat(
    dataset: &Dataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let file = fs::File::create(images_path).map_err(io_err(images_path))?;
    let mut out = BufWriter::new(file);
    for record in dataset.records() {
        out.write_all(record.pixels()).map_err(io_err(images_path))?;
    }
    out.flush().map_err(io_err(images_path))?;

    let file = fs::File::create(labels_path).map_err(io_err(labels_path))?;
    let mut out = BufWriter::new(file);
    for record in dataset.records() {
        writeln!(out, "{}", record.label).map_err(io_err(labels_path))?;
    }
    out.flush().map_err(io_err(labels_path))
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| DataError::TruncatedIdx { path: path.to_path_buf() })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<(), DataError> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(DataError::BadMagic { path: path.to_path_buf(), found, expected });
    }
    Ok(())
}

/// Decodes an IDX image file (`idx3-ubyte`) into its raw pixel payload.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<u8>, DataError> {
    check_magic(bytes, IDX_IMAGES_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)?;
    let cols = be_u32(bytes, 12, path)?;
    if rows as usize * cols as usize != PIXELS {
        return Err(DataError::BadDimensions { path: path.to_path_buf(), rows, cols });
    }
    bytes
        .get(16..16 + count * PIXELS)
        .map(<[u8]>::to_vec)
        .ok_or_else(|| DataError::TruncatedIdx { path: path.to_path_buf() })
}

/// Decodes an IDX label file (`idx1-ubyte`).
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>, DataError> {
    check_magic(bytes, IDX_LABELS_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let labels = bytes.get(8..8 + count).ok_or_else(|| DataError::TruncatedIdx { path: path.to_path_buf() })?;
    if let Some((i, &value)) = labels.iter().enumerate().find(|(_, &l)| usize::from(l) >= CLASSES) {
        return Err(DataError::LabelOutOfRange { path: path.to_path_buf(), line: i + 1, value: value.into() });
    }
    Ok(labels.to_vec())
}

/// Loads one IDX image/label pair.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_idx_parts(&[(images_path.as_ref(), labels_path.as_ref())])
}

/// Concatenates several IDX pairs in order, e.g. the training files followed
/// by the `t10k` files to obtain the 70,000-image timeline.
pub fn load_idx_parts(parts: &[(&Path, &Path)]) -> Result<Dataset, DataError> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for &(images_path, labels_path) in parts {
        let img = fs::read(images_path).map_err(io_err(images_path))?;
        let lab = fs::read(labels_path).map_err(io_err(labels_path))?;
        let part_pixels = parse_idx_images(&img, images_path)?;
        let part_labels = parse_idx_labels(&lab, labels_path)?;
        if part_pixels.len() / PIXELS != part_labels.len() {
            return Err(DataError::CountMismatch { images: part_pixels.len() / PIXELS, labels: part_labels.len() });
        }
        pixels.extend_from_slice(&part_pixels);
        labels.extend_from_slice(&part_labels);
    }
    Ok(Dataset::with_mnist_split(zip_records(&pixels, &labels)?))
}

/// File names of the IDX distribution, training pair first.
pub const IDX_FILES: [(&str, &str); 2] =
    [("train-images-idx3-ubyte", "train-labels-idx1-ubyte"), ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")];

/// Loads the 70,000-image timeline from a directory holding either the
/// flat `MNIST.bin` / `MNIST.target` pair or the four IDX files.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let dir = dir.as_ref();
    let (bin, target) = (dir.join("MNIST.bin"), dir.join("MNIST.target"));
    if bin.exists() && target.exists() {
        return load_flat(bin, target);
    }
    let paths: Vec<_> = IDX_FILES.iter().map(|(i, l)| (dir.join(i), dir.join(l))).collect();
    let parts: Vec<(&Path, &Path)> = paths.iter().map(|(i, l)| (i.as_path(), l.as_path())).collect();
    load_idx_parts(&parts)
}

/// Serializes records as an IDX pair. Used for fixtures and the web demo.
pub fn encode_idx(records: &[ImageRecord]) -> (Vec<u8>, Vec<u8>) {
    let n = records.len() as u32;
    let mut images = Vec::with_capacity(16 + records.len() * PIXELS);
    for word in [IDX_IMAGES_MAGIC, n, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    let mut labels = Vec::with_capacity(8 + records.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    for r in records {
        images.extend_from_slice(r.pixels());
        labels.push(r.label);
    }
    (images, labels)
}

//! MNIST IDX ingestion, binary digit tasks, a binary cache format, and
//! synthetic samplers.
//!
//! Cache format (`.bdrd`, all integers little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"BDRD"`               |
//! | 4      | 4    | version (u32, currently 1)    |
//! | 8      | 8    | row count N (u64)             |
//! | 16     | 4    | column count (u32)            |
//! | 20     | N    | labels, one byte each         |
//! | 20 + N | 8·N·cols | features, f64 row-major   |

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distributions::{DiscreteDistribution, DistributionError, Label, SamplePoint};
use crate::rng::SplitMix64;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CACHE_MAGIC: &[u8; 4] = b"BDRD";
pub const CACHE_VERSION: u32 = 1;

/// File-name pairs looked up by [`load_mnist_dir`], in pooling order.
pub const MNIST_FILES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: truncated, need {expected} bytes but file has {got}")]
    Truncated { path: PathBuf, expected: u64, got: u64 },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at row {row} is not a digit")]
    BadLabel { row: usize, label: u8 },
    #[error("no MNIST files found in {dir}; expected {}", expected.join(", "))]
    MissingFiles { dir: PathBuf, expected: Vec<String> },
    #[error("digit {0} does not occur in the dataset")]
    DigitAbsent(u8),
    #[error("digit {digit}: requested {requested} rows, only {available} available")]
    NotEnoughRows { digit: u8, requested: usize, available: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("unsupported cache version {0}")]
    CacheVersion(u32),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Images with digit labels. Features are stored row-major, scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    cols: usize,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub sources: Vec<PathBuf>,
    /// SHA-256 over the source files' bytes, in order, as lowercase hex.
    pub digest: String,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, cols: usize, provenance: Provenance) -> Result<Self, DataError> {
        if cols == 0 || features.len() != labels.len() * cols {
            return Err(DataError::Invalid(format!(
                "{} feature values do not form {} rows of {cols}",
                features.len(),
                labels.len()
            )));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(DataError::BadLabel { row, label });
        }
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::Invalid(format!("feature value {v} outside [0, 1]")));
        }
        Ok(Self {
            features,
            labels,
            cols,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.cols..(i + 1) * self.cols]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn concat(parts: Vec<Dataset>) -> Result<Self, DataError> {
        let cols = parts[0].cols;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut sources = Vec::new();
        let mut hasher = Sha256::new();
        for p in parts {
            if p.cols != cols {
                return Err(DataError::Invalid(format!("column counts {cols} and {} differ", p.cols)));
            }
            features.extend(p.features);
            labels.extend(p.labels);
            sources.extend(p.provenance.sources);
            hasher.update(p.provenance.digest.as_bytes());
        }
        Ok(Self {
            features,
            labels,
            cols,
            provenance: Provenance {
                sources,
                digest: hex(&hasher.finalize()),
            },
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn check_len(path: &Path, bytes: &[u8], expected: u64) -> Result<(), DataError> {
    if (bytes.len() as u64) < expected {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected,
            got: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Reads an IDX image file and its label file. Pixels are divided by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let img = fs::read(images_path).map_err(io_err(images_path))?;
    let lab = fs::read(labels_path).map_err(io_err(labels_path))?;

    check_len(images_path, &img, 16)?;
    let magic = be_u32(&img, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            path: images_path.to_path_buf(),
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = be_u32(&img, 4) as usize;
    let cols = be_u32(&img, 8) as usize * be_u32(&img, 12) as usize;
    check_len(images_path, &img, 16 + (count * cols) as u64)?;

    check_len(labels_path, &lab, 8)?;
    let magic = be_u32(&lab, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic {
            path: labels_path.to_path_buf(),
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let label_count = be_u32(&lab, 4) as usize;
    if label_count != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    check_len(labels_path, &lab, 8 + count as u64)?;

    let features = img[16..16 + count * cols].iter().map(|&p| p as f64 / 255.0).collect();
    let labels = lab[8..8 + count].to_vec();
    let mut hasher = Sha256::new();
    hasher.update(&img);
    hasher.update(&lab);
    Dataset::new(
        features,
        labels,
        cols,
        Provenance {
            sources: vec![images_path.to_path_buf(), labels_path.to_path_buf()],
            digest: hex(&hasher.finalize()),
        },
    )
}

/// Loads and pools every MNIST file pair present in `dir` (train first, then
/// test). Fails if none is present.
pub fn load_mnist_dir(dir: &Path) -> Result<Dataset, DataError> {
    let mut parts = Vec::new();
    for (images, labels) in MNIST_FILES {
        let (ip, lp) = (dir.join(images), dir.join(labels));
        if ip.exists() && lp.exists() {
            parts.push(load_idx(&ip, &lp)?);
        }
    }
    if parts.is_empty() {
        return Err(DataError::MissingFiles {
            dir: dir.to_path_buf(),
            expected: MNIST_FILES
                .iter()
                .flat_map(|(a, b)| [dir.join(a), dir.join(b)])
                .map(|p| p.display().to_string())
                .collect(),
        });
    }
    Dataset::concat(parts)
}

/// Writes the dataset in the cache format described in the module docs.
pub fn write_cache(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut buf = Vec::with_capacity(20 + ds.len() * (1 + 8 * ds.cols));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(ds.cols as u32).to_le_bytes());
    buf.extend_from_slice(&ds.labels);
    for v in &ds.features {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

pub fn read_cache(path: &Path) -> Result<Dataset, DataError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    check_len(path, &bytes, 20)?;
    if &bytes[0..4] != CACHE_MAGIC {
        return Err(DataError::BadMagic {
            path: path.to_path_buf(),
            found: u32::from_be_bytes(bytes[0..4].try_into().unwrap()),
            expected: u32::from_be_bytes(*CACHE_MAGIC),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(DataError::CacheVersion(version));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    check_len(path, &bytes, (20 + n + 8 * n * cols) as u64)?;
    let labels = bytes[20..20 + n].to_vec();
    let features = bytes[20 + n..20 + n + 8 * n * cols]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Dataset::new(
        features,
        labels,
        cols,
        Provenance {
            sources: vec![path.to_path_buf()],
            digest: hex(&hasher.finalize()),
        },
    )
}

/// A two-digit classification task: `positive` maps to +1, `negative` to −1.
/// Indices refer to dataset rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryTask {
    pub positive: u8,
    pub negative: u8,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl BinaryTask {
    pub fn label(&self, ds: &Dataset, row: usize) -> Label {
        if ds.labels[row] == self.positive {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    /// `(features row-major, labels)` for the given rows.
    pub fn matrix(&self, ds: &Dataset, rows: &[usize]) -> (Vec<f64>, Vec<Label>) {
        let mut feats = Vec::with_capacity(rows.len() * ds.cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            feats.extend_from_slice(ds.row(r));
            labels.push(self.label(ds, r));
        }
        (feats, labels)
    }
}

/// Splits each digit's rows separately: shuffles them with the seed and puts
/// the first `round(train_fraction · count)` in the training list. Both lists
/// are shuffled again so the classes interleave.
pub fn make_binary_task(
    ds: &Dataset,
    pos: u8,
    neg: u8,
    train_fraction: f64,
    seed: u64,
) -> Result<BinaryTask, DataError> {
    if pos == neg || pos > 9 || neg > 9 {
        return Err(DataError::Invalid(format!("digits {pos} and {neg} must be distinct digits")));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(DataError::Invalid(format!("train_fraction {train_fraction} not in (0, 1]")));
    }
    for d in [pos, neg] {
        if !ds.labels.contains(&d) {
            return Err(DataError::DigitAbsent(d));
        }
    }
    let mut g = SplitMix64::new(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for d in [pos, neg] {
        let mut rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == d).collect();
        g.shuffle(&mut rows);
        let n_train = (train_fraction * rows.len() as f64).round() as usize;
        test.extend(rows.split_off(n_train));
        train.extend(rows);
    }
    g.shuffle(&mut train);
    g.shuffle(&mut test);
    Ok(BinaryTask {
        positive: pos,
        negative: neg,
        train,
        test,
    })
}

fn draw_per_class(
    ds: &Dataset,
    task: &BinaryTask,
    rows: &[usize],
    per_class: usize,
    g: &mut SplitMix64,
) -> Result<Vec<usize>, DataError> {
    let mut out = Vec::with_capacity(2 * per_class);
    for digit in [task.positive, task.negative] {
        let mut pool: Vec<usize> = rows.iter().copied().filter(|&r| ds.labels[r] == digit).collect();
        if pool.len() < per_class {
            return Err(DataError::NotEnoughRows {
                digit,
                requested: per_class,
                available: pool.len(),
            });
        }
        g.shuffle(&mut pool);
        pool.truncate(per_class);
        out.extend(pool);
    }
    out.sort_unstable();
    Ok(out)
}

/// Keeps `per_class` training rows of each digit, drawn without replacement.
/// The test list is unchanged.
pub fn subsample(ds: &Dataset, task: &BinaryTask, per_class: usize, seed: u64) -> Result<BinaryTask, DataError> {
    let mut g = SplitMix64::new(seed);
    Ok(BinaryTask {
        train: draw_per_class(ds, task, &task.train, per_class, &mut g)?,
        ..task.clone()
    })
}

/// As [`subsample`], and also keeps `test_per_class` test rows of each digit.
pub fn subsample_with_test(
    ds: &Dataset,
    task: &BinaryTask,
    per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<BinaryTask, DataError> {
    let mut g = SplitMix64::new(seed);
    let train = draw_per_class(ds, task, &task.train, per_class, &mut g)?;
    let test = draw_per_class(ds, task, &task.test, test_per_class, &mut g)?;
    Ok(BinaryTask {
        train,
        test,
        ..task.clone()
    })
}

/// Infinite i.i.d. stream from a discrete distribution, by inverse CDF on
/// SplitMix64 uniforms.
#[derive(Debug, Clone)]
pub struct SyntheticSampler {
    dist: DiscreteDistribution,
    cumulative: Vec<f64>,
    rng: SplitMix64,
}

impl SyntheticSampler {
    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.dist
    }

    /// Index of the atom drawn next.
    pub fn next_index(&mut self) -> usize {
        let u = self.rng.next_f64();
        let last = self.cumulative.len() - 1;
        self.cumulative.iter().position(|&c| u < c).unwrap_or(last)
    }

    pub fn sample(&mut self, n: usize) -> Vec<SamplePoint> {
        (0..n).map(|_| self.next().unwrap()).collect()
    }
}

impl Iterator for SyntheticSampler {
    type Item = SamplePoint;

    fn next(&mut self) -> Option<SamplePoint> {
        let i = self.next_index();
        Some(self.dist.atoms()[i].clone())
    }
}

pub fn synthetic_sampler(atoms: Vec<SamplePoint>, weights: Vec<f64>, seed: u64) -> Result<SyntheticSampler, DataError> {
    let dist = DiscreteDistribution::new(atoms, weights)?;
    let mut acc = 0.0;
    let cumulative = dist
        .weights()
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    Ok(SyntheticSampler {
        dist,
        cumulative,
        rng: SplitMix64::new(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let labels: Vec<u8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { 7 }).collect();
        let features = (0..n * 4).map(|i| (i % 256) as f64 / 255.0).collect();
        Dataset::new(features, labels, 4, Provenance::default()).unwrap()
    }

    #[test]
    fn split_fraction() {
        let ds = toy(10);
        let t = make_binary_task(&ds, 1, 7, 0.8, 3).unwrap();
        assert_eq!((t.train.len(), t.test.len()), (8, 2));
        assert!(t.train.iter().all(|r| !t.test.contains(r)));
        assert!(matches!(make_binary_task(&ds, 1, 3, 0.8, 3), Err(DataError::DigitAbsent(3))));
    }

    #[test]
    fn subsample_counts_and_determinism() {
        let ds = toy(40);
        let t = make_binary_task(&ds, 1, 7, 0.8, 1).unwrap();
        let s = subsample(&ds, &t, 1, 9).unwrap();
        assert_eq!(s.train.len(), 2);
        assert_eq!(s, subsample(&ds, &t, 1, 9).unwrap());
        let counts = |rows: &[usize], d: u8| rows.iter().filter(|&&r| ds.labels()[r] == d).count();
        let s = subsample_with_test(&ds, &t, 5, 2, 4).unwrap();
        assert_eq!((counts(&s.train, 1), counts(&s.train, 7)), (5, 5));
        assert_eq!((counts(&s.test, 1), counts(&s.test, 7)), (2, 2));
        assert!(matches!(subsample(&ds, &t, 100, 9), Err(DataError::NotEnoughRows { .. })));
    }

    #[test]
    fn sampler_frequencies() {
        let dirac = synthetic_sampler(vec![SamplePoint::scalar(0.3)], vec![1.0], 5).unwrap();
        assert!(dirac.take(100).all(|p| p.coords[0] == 0.3));
        let mut s = synthetic_sampler(vec![SamplePoint::scalar(0.0), SamplePoint::scalar(1.0)], vec![0.5, 0.5], 11).unwrap();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| s.next_index() == 1).count();
        let f = ones as f64 / n as f64;
        assert!((0.498..=0.502).contains(&f), "{f}");
        assert!(synthetic_sampler(vec![SamplePoint::scalar(0.0)], vec![0.9], 1).is_err());
    }
}

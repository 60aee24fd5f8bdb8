//! IDX parsing, the binary cache, and task construction.

use std::fs;
use std::path::{Path, PathBuf};

use bdr_core::data::{load_idx, load_mnist_dir, make_binary_task, read_cache, subsample_with_test, write_cache, DataError};

fn write_idx(dir: &Path, prefix: &str, images: &[[u8; 4]], labels: &[u8]) -> (PathBuf, PathBuf) {
    let mut img = Vec::new();
    img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&2u32.to_be_bytes());
    img.extend_from_slice(&2u32.to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::new();
    lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    let ip = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let lp = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    fs::write(&ip, img).unwrap();
    fs::write(&lp, lab).unwrap();
    (ip, lp)
}

#[test]
fn idx_round_trip_and_pooling() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = write_idx(dir.path(), "train", &[[0, 255, 51, 0], [255, 255, 0, 0]], &[1, 7]);
    let ds = load_idx(&ip, &lp).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.cols(), 4);
    assert_eq!(ds.row(0), &[0.0, 1.0, 0.2, 0.0]);
    assert_eq!(ds.labels(), &[1, 7]);
    assert_eq!(ds.provenance().digest.len(), 64);

    write_idx(dir.path(), "t10k", &[[1, 2, 3, 4]], &[1]);
    let pooled = load_mnist_dir(dir.path()).unwrap();
    assert_eq!(pooled.labels(), &[1, 7, 1]);
    assert_eq!(pooled.row(2)[3], 4.0 / 255.0);
}

#[test]
fn idx_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = write_idx(dir.path(), "train", &[[0; 4]], &[3]);
    let mut bad = fs::read(&ip).unwrap();
    bad[3] = 0x01;
    fs::write(&ip, &bad).unwrap();
    assert!(matches!(load_idx(&ip, &lp), Err(DataError::BadMagic { .. })));
    bad[3] = 0x03;
    bad.truncate(18);
    fs::write(&ip, &bad).unwrap();
    assert!(matches!(load_idx(&ip, &lp), Err(DataError::Truncated { .. })));

    let (ip, lp) = write_idx(dir.path(), "t10k", &[[0; 4], [0; 4]], &[3]);
    assert!(matches!(load_idx(&ip, &lp), Err(DataError::CountMismatch { images: 2, labels: 1 })));
    let (ip, lp) = write_idx(dir.path(), "x", &[[0; 4]], &[12]);
    assert!(matches!(load_idx(&ip, &lp), Err(DataError::BadLabel { row: 0, label: 12 })));

    let empty = tempfile::tempdir().unwrap();
    match load_mnist_dir(empty.path()) {
        Err(DataError::MissingFiles { expected, .. }) => assert_eq!(expected.len(), 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = write_idx(dir.path(), "train", &[[9, 8, 7, 6], [0, 0, 0, 255]], &[4, 2]);
    let ds = load_idx(&ip, &lp).unwrap();
    let cache = dir.path().join("ds.bdrd");
    write_cache(&ds, &cache).unwrap();
    let back = read_cache(&cache).unwrap();
    assert_eq!(back.features(), ds.features());
    assert_eq!(back.labels(), ds.labels());
    let mut bytes = fs::read(&cache).unwrap();
    assert_eq!(&bytes[..4], b"BDRD");
    bytes[4] = 9;
    fs::write(&cache, &bytes).unwrap();
    assert!(matches!(read_cache(&cache), Err(DataError::CacheVersion(9))));
}

/// Runs only when the bundled IDX files are present.
#[test]
fn bundled_subset_shapes() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    let Ok(ds) = load_mnist_dir(&dir) else {
        eprintln!("no IDX files under {}; skipped", dir.display());
        return;
    };
    assert_eq!(ds.cols(), 784);
    let ones = ds.labels().iter().filter(|&&l| l == 1).count();
    let sevens = ds.labels().iter().filter(|&&l| l == 7).count();
    let task = make_binary_task(&ds, 1, 7, 0.8, 11).unwrap();
    assert_eq!(task.train.len() + task.test.len(), ones + sevens);
    assert_eq!(task.train.len(), (0.8 * (ones + sevens) as f64).round() as usize);
    let sub = subsample_with_test(&ds, &task, 500, 200, 3).unwrap();
    assert_eq!((sub.train.len(), sub.test.len()), (1000, 400));
    assert!(sub.train.iter().all(|r| task.train.contains(r)));
    assert!(sub.test.iter().all(|r| task.test.contains(r)));
}

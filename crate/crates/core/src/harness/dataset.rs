//! Builtin synthetic datasets and IDX ingestion.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{DatasetKind, DatasetSpec};
use super::idx;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::net::InputShape;

pub fn load_dataset(spec: &DatasetSpec) -> Result<Split> {
    match spec.kind {
        DatasetKind::Blobs => synthetic(spec, blobs_sampler(spec)),
        DatasetKind::Rings => synthetic(spec, rings_sampler(spec)),
        DatasetKind::Idx => load_idx(spec),
    }
}

type Sampler = Box<dyn FnMut(usize, &mut ChaCha8Rng) -> Vec<f64>>;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn blobs_sampler(spec: &DatasetSpec) -> Sampler {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.features).map(|_| spec.separation * gaussian(&mut rng)).collect())
        .collect();
    let spread = spec.spread;
    Box::new(move |class, rng| centers[class].iter().map(|c| c + spread * gaussian(rng)).collect())
}

fn rings_sampler(spec: &DatasetSpec) -> Sampler {
    let features = spec.features;
    let spread = spec.spread;
    Box::new(move |class, rng| {
        let mut dir: Vec<f64> = (0..features).map(|_| gaussian(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let radius = (class + 1) as f64 + spread * 0.25 * gaussian(rng);
        for v in dir.iter_mut() {
            *v *= radius / norm;
        }
        dir
    })
}

fn synthetic(spec: &DatasetSpec, mut sample: Sampler) -> Result<Split> {
    let n = spec.n_train + spec.n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut rng);
    let rows: Vec<Vec<f64>> = labels.iter().map(|&c| sample(c, &mut rng)).collect();

    // Standardize every feature with training-split statistics.
    let d = spec.features;
    let train = &rows[..spec.n_train];
    let mut mean = vec![0.0; d];
    for r in train {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / spec.n_train as f64;
        }
    }
    let mut std = vec![0.0; d];
    for r in train {
        for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2) / spec.n_train as f64;
        }
    }
    for s in std.iter_mut() {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let flatten = |rows: &[Vec<f64>]| -> Vec<f64> {
        rows.iter()
            .flat_map(|r| r.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s))
            .collect()
    };
    let shape = InputShape::flat(d);
    Ok(Split {
        train: Dataset::new(shape, spec.classes, flatten(train), labels[..spec.n_train].to_vec())?,
        test: Dataset::new(shape, spec.classes, flatten(&rows[spec.n_train..]), labels[spec.n_train..].to_vec())?,
    })
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a std::path::Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("dataset.{key} is required for IDX data")))
}

fn idx_split(
    images_path: &std::path::Path,
    labels_path: &std::path::Path,
    limit: usize,
) -> Result<(InputShape, Vec<f64>, Vec<usize>)> {
    let images = idx::read_images(images_path)?;
    let labels = idx::read_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(Error::Ingest {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!("{} labels for {} images in {}", labels.len(), images.count, images_path.display()),
        });
    }
    let keep = if limit == 0 { images.count } else { limit.min(images.count) };
    let dim = images.rows * images.cols;
    let shape = InputShape {
        channels: 1,
        height: images.rows,
        width: images.cols,
    };
    let inputs = images.pixels[..keep * dim].iter().map(|&b| b as f64 / 255.0).collect();
    let labels = labels[..keep].iter().map(|&l| l as usize).collect();
    Ok((shape, inputs, labels))
}

fn load_idx(spec: &DatasetSpec) -> Result<Split> {
    let (train_shape, train_x, train_y) = idx_split(
        required(&spec.train_images, "train_images")?,
        required(&spec.train_labels, "train_labels")?,
        spec.limit_train,
    )?;
    let (test_shape, test_x, test_y) = idx_split(
        required(&spec.test_images, "test_images")?,
        required(&spec.test_labels, "test_labels")?,
        spec.limit_test,
    )?;
    if train_shape != test_shape {
        return Err(Error::Shape("train and test images differ in size".into()));
    }
    let classes = train_y.iter().chain(&test_y).max().map_or(0, |m| m + 1).max(2);
    let mut train = Dataset::new(train_shape, classes, train_x, train_y)?;
    train.augment = spec.augment;
    let test = Dataset::new(test_shape, classes, test_x, test_y)?;
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn blobs_are_deterministic_and_standardized() {
        let spec = DatasetSpec {
            n_train: 2000,
            n_test: 500,
            seed: 7,
            ..Default::default()
        };
        let a = load_dataset(&spec).unwrap();
        let b = load_dataset(&spec).unwrap();
        let bytes = |s: &Split| -> Vec<u8> { s.train.inputs.iter().flat_map(|v| v.to_le_bytes()).collect() };
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(a.train.labels, b.train.labels);
        let d = a.train.dim();
        for f in 0..d {
            let col: Vec<f64> = (0..a.train.len()).map(|i| a.train.row(i)[f]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rings_have_balanced_classes() {
        let spec = DatasetSpec {
            kind: DatasetKind::Rings,
            features: 2,
            classes: 3,
            n_train: 300,
            n_test: 30,
            ..Default::default()
        };
        let s = load_dataset(&spec).unwrap();
        let total: usize = s.train.len() + s.test.len();
        assert_eq!(total, 330);
        for c in 0..3 {
            let n = s.train.labels.iter().chain(&s.test.labels).filter(|&&l| l == c).count();
            assert_eq!(n, 110);
        }
    }

    fn write_idx(dir: &std::path::Path, name: &str, count: usize, labels: usize) -> (std::path::PathBuf, std::path::PathBuf) {
        let images = idx::IdxImages {
            count,
            rows: 4,
            cols: 4,
            pixels: (0..count * 16).map(|i| (i % 256) as u8).collect(),
        };
        let img = dir.join(format!("{name}-images.idx"));
        let lab = dir.join(format!("{name}-labels.idx"));
        fs::write(&img, idx::encode_images(&images)).unwrap();
        fs::write(&lab, idx::encode_labels(&(0..labels).map(|i| (i % 3) as u8).collect::<Vec<_>>())).unwrap();
        (img, lab)
    }

    #[test]
    fn idx_pairs_load_and_scale() {
        let dir = tempfile::tempdir().unwrap();
        let (ti, tl) = write_idx(dir.path(), "train", 6, 6);
        let (vi, vl) = write_idx(dir.path(), "test", 3, 3);
        let spec = DatasetSpec {
            kind: DatasetKind::Idx,
            train_images: Some(ti),
            train_labels: Some(tl),
            test_images: Some(vi),
            test_labels: Some(vl),
            limit_train: 4,
            ..Default::default()
        };
        let s = load_dataset(&spec).unwrap();
        assert_eq!(s.train.len(), 4);
        assert_eq!(s.test.len(), 3);
        assert_eq!(s.train.shape, InputShape { channels: 1, height: 4, width: 4 });
        assert_eq!(s.train.classes, 3);
        assert!(s.train.inputs.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(s.train.inputs[1], 1.0 / 255.0);
    }

    #[test]
    fn idx_count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ti, tl) = write_idx(dir.path(), "train", 6, 5);
        let spec = DatasetSpec {
            kind: DatasetKind::Idx,
            train_images: Some(ti.clone()),
            train_labels: Some(tl),
            test_images: Some(ti),
            test_labels: Some(dir.path().join("missing")),
            ..Default::default()
        };
        assert!(matches!(load_dataset(&spec), Err(Error::Ingest { .. })));
    }
}

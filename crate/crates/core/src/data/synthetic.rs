use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{self, Stream};

pub const SYNTHETIC_SIGMA: f64 = 0.08;
const CENTER_RANGE: (f64, f64) = (0.2, 0.8);

/// Isotropic Gaussian blobs, one per class, clamped to `[0, 1]`.
///
/// Examples are interleaved by class (`label = i % classes`), so every
/// prefix of `k * classes` rows is balanced.
pub fn generate_synthetic(
    classes: usize,
    per_class: usize,
    dim: usize,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 || per_class < 1 || dim < 1 {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs classes >= 2, per_class >= 1, dim >= 1 (got {classes}, {per_class}, {dim})"
        )));
    }
    let mut center_rng = rng::for_stream(seed, Stream::SyntheticCenters);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| center_rng.random_range(CENTER_RANGE.0..=CENTER_RANGE.1))
                .collect()
        })
        .collect();

    let noise = Normal::new(0.0, SYNTHETIC_SIGMA).expect("valid sigma");
    let mut rng = rng::for_stream(seed, Stream::SyntheticSamples);
    let n = classes * per_class;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for (class, center) in centers.iter().enumerate() {
            features.extend(
                center
                    .iter()
                    .map(|&c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0)),
            );
            labels.push(class);
        }
    }
    Dataset::new(Matrix::new(n, dim, features)?, labels, classes)
}

/// Train and test sets drawn from the same blobs.
pub fn generate_synthetic_split(
    classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    dim: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if test_per_class == 0 {
        return Err(Error::InvalidArgument(
            "test split needs at least one example per class".into(),
        ));
    }
    let all = generate_synthetic(classes, train_per_class + test_per_class, dim, seed)?;
    let cut = train_per_class * classes;
    let train: Vec<usize> = (0..cut).collect();
    let test: Vec<usize> = (cut..all.len()).collect();
    Ok((
        all.subset(&train)?.to_dataset()?,
        all.subset(&test)?.to_dataset()?,
    ))
}

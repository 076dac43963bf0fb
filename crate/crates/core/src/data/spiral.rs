//! Synthetic spiral datasets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DatasetMeta, DatasetSplit};
use crate::kv::fmt_f64;
use crate::nn::Batch;
use crate::{Error, Result};

pub const SPIRAL_NOISE_STD: f64 = 0.1;

/// Point on arm `label` at radius `r`: angle `2r + pi*label`, plus `noise`.
pub fn spiral_point(r: f64, label: usize, noise: (f64, f64)) -> [f64; 2] {
    let theta = 2.0 * r + PI * label as f64;
    [r * theta.cos() + noise.0, r * theta.sin() + noise.1]
}

/// `sin(theta - 2r)` in polar coordinates; the origin maps to 0.
pub fn spiral_regression_target(x1: f64, x2: f64) -> f64 {
    let r = x1.hypot(x2);
    let theta = if r == 0.0 { 0.0 } else { x2.atan2(x1) };
    (theta - 2.0 * r).sin()
}

/// Train and test streams of one seed.
fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut train = ChaCha8Rng::seed_from_u64(seed);
    train.set_stream(0);
    let mut test = ChaCha8Rng::seed_from_u64(seed);
    test.set_stream(1);
    (train, test)
}

/// Two interleaved spiral arms, `n_per_class` points each in both splits.
pub fn gen_spiral_classification(n_per_class: usize, seed: u64) -> Result<DatasetSplit> {
    gen_spiral_classification_with(n_per_class, seed, SPIRAL_NOISE_STD)
}

pub fn gen_spiral_classification_with(
    n_per_class: usize,
    seed: u64,
    noise_std: f64,
) -> Result<DatasetSplit> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig("n_per_class must be >= 1".into()));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
    }
    let (mut train_rng, mut test_rng) = streams(seed);
    let train = spiral_classification_batch(n_per_class, noise_std, &mut train_rng)?;
    let test = spiral_classification_batch(n_per_class, noise_std, &mut test_rng)?;
    let mut meta = DatasetMeta::new("spiral-classification", seed, crate::nn::Task::Classification { num_classes: 2 });
    meta.params.set("n_per_class", n_per_class);
    meta.params.set("noise_std", fmt_f64(noise_std));
    meta.params.set("radius_range", "1..5");
    Ok(DatasetSplit { train, test, meta })
}

fn spiral_classification_batch(n: usize, noise_std: f64, rng: &mut ChaCha8Rng) -> Result<Batch> {
    let mut inputs = Vec::with_capacity(4 * n);
    let mut labels = Vec::with_capacity(2 * n);
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    for _ in 0..n {
        for label in 0..2 {
            let r = rng.random_range(1.0..=5.0);
            let noise = if noise_std > 0.0 {
                (normal.sample(rng), normal.sample(rng))
            } else {
                (0.0, 0.0)
            };
            inputs.extend_from_slice(&spiral_point(r, label, noise));
            labels.push(label);
        }
    }
    Batch::classification(inputs, 2, labels)
}

/// `n_points` uniform points on `[-5, 5]^2` per split with target
/// [`spiral_regression_target`].
pub fn gen_spiral_regression(n_points: usize, seed: u64) -> Result<DatasetSplit> {
    if n_points == 0 {
        return Err(Error::InvalidConfig("n_points must be >= 1".into()));
    }
    let (mut train_rng, mut test_rng) = streams(seed);
    let train = spiral_regression_batch(n_points, &mut train_rng)?;
    let test = spiral_regression_batch(n_points, &mut test_rng)?;
    let mut meta = DatasetMeta::new("spiral-regression", seed, crate::nn::Task::Regression);
    meta.params.set("n_points", n_points);
    meta.params.set("coordinate_range", "-5..5");
    Ok(DatasetSplit { train, test, meta })
}

fn spiral_regression_batch(n: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
    let mut inputs = Vec::with_capacity(2 * n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.random_range(-5.0..5.0);
        let x2 = rng.random_range(-5.0..5.0);
        inputs.push(x1);
        inputs.push(x2);
        targets.push(spiral_regression_target(x1, x2));
    }
    Batch::regression(inputs, 2, targets)
}

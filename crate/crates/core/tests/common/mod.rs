#![allow(dead_code)]

use std::path::PathBuf;

use energy_cpd::MultiSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random series with `2 <= len`, piecewise shifts so splits are not all noise.
pub fn random_series(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> MultiSeries {
    let shift_at = rng.random_range(0..len);
    let shift: f64 = rng.random_range(-3.0..3.0);
    let rows = (0..len)
        .map(|t| {
            (0..dim).map(|_| rng.random_range(-1.0..1.0) * 2.0 + if t >= shift_at { shift } else { 0.0 }).collect()
        })
        .collect();
    MultiSeries::from_rows(rows).unwrap()
}

/// Small-integer series; with alpha 1 (univariate) or alpha 2 every pairwise
/// term and partial sum is an exactly representable integer.
pub fn integer_series(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> MultiSeries {
    let rows = (0..len).map(|_| (0..dim).map(|_| rng.random_range(-20..=20) as f64).collect()).collect();
    MultiSeries::from_rows(rows).unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

//! Seeded piecewise-distribution generators with known change points, and a
//! brute-force split search used as a test oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::energy::SplitCandidate;
use crate::error::{Error, Result};
use crate::series::MultiSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Distribution {
    Gaussian,
    /// Student-t noise scaled by the segment scale; `df >= 3`.
    HeavyTailed {
        df: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub length: usize,
    pub mean: Vec<f64>,
    pub scale: f64,
    pub distribution: Distribution,
}

impl SegmentSpec {
    pub fn gaussian(length: usize, mean: Vec<f64>, scale: f64) -> Self {
        Self { length, mean, scale, distribution: Distribution::Gaussian }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub series: MultiSeries,
    /// 1-based index of the last observation of every segment but the final one.
    pub change_points: Vec<usize>,
}

pub fn generate(specs: &[SegmentSpec], seed: u64) -> Result<SyntheticTruth> {
    let first = specs.first().ok_or_else(|| Error::InvalidSpec("at least one segment is required".into()))?;
    let dim = first.mean.len();
    if dim == 0 {
        return Err(Error::InvalidSpec("mean vector must be non-empty".into()));
    }
    for (k, spec) in specs.iter().enumerate() {
        if spec.mean.len() != dim {
            return Err(Error::InvalidSpec(format!("segment {k} has dimension {}, expected {dim}", spec.mean.len())));
        }
        if spec.length == 0 {
            return Err(Error::InvalidSpec(format!("segment {k} has zero length")));
        }
        if !(spec.scale > 0.0 && spec.scale.is_finite()) {
            return Err(Error::InvalidSpec(format!("segment {k} scale must be positive")));
        }
        if let Distribution::HeavyTailed { df } = spec.distribution {
            if !(df >= 3.0 && df.is_finite()) {
                return Err(Error::InvalidSpec(format!("segment {k} needs at least 3 degrees of freedom, got {df}")));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut change_points = Vec::new();
    for spec in specs {
        for _ in 0..spec.length {
            let row = spec
                .mean
                .iter()
                .map(|&mu| {
                    let noise = match spec.distribution {
                        Distribution::Gaussian => Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng),
                        Distribution::HeavyTailed { df } => StudentT::new(df).expect("df checked").sample(&mut rng),
                    };
                    mu + spec.scale * noise
                })
                .collect();
            rows.push(row);
        }
        change_points.push(rows.len());
    }
    change_points.pop();
    Ok(SyntheticTruth { series: MultiSeries::from_rows(rows)?, change_points })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt()
}

/// Evaluates the energy statistic by explicit summation over raw rows for
/// every admissible split and returns the Q maximiser (smallest split on
/// ties). Shares no arithmetic with [`crate::energy`].
pub fn brute_force_best_split(series: &MultiSeries, alpha: f64, min_segment: usize) -> Option<SplitCandidate> {
    let z: Vec<&[f64]> = series.rows().collect();
    let n = z.len();
    let min_segment = min_segment.max(2);
    if n < 2 * min_segment {
        return None;
    }
    let dist = |i: usize, j: usize| euclidean(z[i], z[j]).powf(alpha);

    let mut best: Option<SplitCandidate> = None;
    for t in min_segment..=(n - min_segment) {
        let m = n - t;
        let mut cross = 0.0;
        for i in 0..t {
            for j in t..n {
                cross += dist(i, j);
            }
        }
        let mut left = 0.0;
        for i in 1..t {
            for j in 0..i {
                left += dist(i, j);
            }
        }
        let mut right = 0.0;
        for i in (t + 1)..n {
            for j in t..i {
                right += dist(i, j);
            }
        }
        let (tf, mf) = (t as f64, m as f64);
        let e = 2.0 / (tf * mf) * cross - left / (tf * (tf - 1.0) / 2.0) - right / (mf * (mf - 1.0) / 2.0);
        let q = tf * mf / n as f64 * e;
        match best {
            Some(b) if q <= b.q_value => {}
            _ => best = Some(SplitCandidate { split: t, q_value: q }),
        }
    }
    best
}

//! Divisive multi-change-point estimation.
//!
//! Starting from one cluster spanning the series, each iteration finds the
//! best split inside every current cluster, keeps the one with the largest Q
//! and accepts it only when a within-cluster permutation test rejects the
//! "no further change" null at `sig_level`. The first rejection ends the run.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{alpha_distance_matrix, best_split_ordered, DistanceMatrix, EnergyParams, SegmentView};
use crate::error::{Error, Result};
use crate::series::MultiSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub energy: EnergyParams,
    /// Number of permutation replicates per significance test.
    pub permutations: usize,
    pub sig_level: f64,
    pub seed: u64,
    pub max_points: Option<usize>,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { energy: EnergyParams::default(), permutations: 499, sig_level: 0.05, seed: 1, max_points: None }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        self.energy.validate()?;
        if self.permutations < 1 {
            return Err(Error::InvalidParams("permutations must be at least 1".into()));
        }
        if !(self.sig_level > 0.0 && self.sig_level < 1.0) {
            return Err(Error::InvalidParams(format!("significance level must lie in (0, 1), got {}", self.sig_level)));
        }
        if self.max_points == Some(0) {
            return Err(Error::InvalidParams("max_points must be at least 1 when set".into()));
        }
        Ok(())
    }
}

/// An accepted change point. `index` is the 1-based position of the last
/// observation before the change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub index: usize,
    pub label: String,
    pub q_value: f64,
    pub p_value: f64,
    /// 1-based iteration of the divisive loop that found this point.
    pub iteration: usize,
    /// Cluster that was split, 0-based half-open.
    pub segment: SegmentView,
}

/// Best candidate of the final iteration when it failed the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub index: usize,
    pub label: String,
    pub q_value: f64,
    pub p_value: f64,
    pub segment: SegmentView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// 1-based cluster number in time order.
    pub id: usize,
    /// 1-based inclusive bounds.
    pub first: usize,
    pub last: usize,
    pub first_label: String,
    pub last_label: String,
}

impl Cluster {
    pub fn segment(&self) -> SegmentView {
        SegmentView { start: self.first - 1, end: self.last }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The best remaining candidate was not significant.
    NotSignificant,
    /// No cluster is long enough to split.
    NoAdmissibleSplit,
    MaxPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub params: DetectParams,
    pub mean_difference_mode: bool,
    pub series_len: usize,
    pub dim_labels: Vec<String>,
    /// Accepted points sorted by index.
    pub change_points: Vec<ChangePoint>,
    /// Indices of accepted points in the order they were found.
    pub discovery_order: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub rejected: Option<RejectedCandidate>,
    pub stop_reason: StopReason,
}

impl ChangePointReport {
    pub fn indices(&self) -> Vec<usize> {
        self.change_points.iter().map(|cp| cp.index).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.change_points.iter().map(|cp| cp.label.as_str()).collect()
    }
}

/// Contiguous clusters covering `1..=len`, each ending at a change point.
pub fn assign_clusters(len: usize, change_points: &[usize]) -> Result<Vec<SegmentView>> {
    if len == 0 {
        return Err(Error::InvalidInput("series length must be positive".into()));
    }
    let mut clusters = Vec::with_capacity(change_points.len() + 1);
    let mut start = 0;
    for &cp in change_points {
        if cp <= start || cp >= len {
            return Err(Error::InvalidInput(format!(
                "change points must be strictly increasing within 1..{}; got {change_points:?}",
                len - 1
            )));
        }
        clusters.push(SegmentView { start, end: cp });
        start = cp;
    }
    clusters.push(SegmentView { start, end: len });
    Ok(clusters)
}

/// Relative slack under which a replicate's maximum counts as reaching the
/// observed Q. Shuffles that leave both sides of the best split unchanged
/// reproduce the observed value up to summation order.
const TIE_TOLERANCE: f64 = 1e-10;

fn replicate_rng(seed: u64, test_index: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((test_index << 32) | (replicate & 0xffff_ffff));
    rng
}

/// Permutation p-value for `observed_q`, the largest Q over `clusters`.
///
/// Each replicate shuffles observations inside every cluster independently,
/// rescans all clusters and records the largest Q; values within
/// [`TIE_TOLERANCE`] of `observed_q` count as exceedances. Replicate `r` of test
/// `test_index` draws from its own ChaCha stream, so the result does not
/// depend on how replicates are scheduled across threads.
pub fn permutation_pvalue(
    d: &DistanceMatrix,
    clusters: &[SegmentView],
    observed_q: f64,
    params: &DetectParams,
    test_index: u64,
) -> f64 {
    assert!(params.permutations >= 1, "permutations must be at least 1");
    assert!(
        clusters.iter().all(|c| c.start < c.end && c.end <= d.len()),
        "clusters must lie inside the distance matrix"
    );
    let min_segment = params.energy.min_segment;
    let threshold = observed_q - TIE_TOLERANCE * observed_q.abs();
    let exceedances = (0..params.permutations as u64)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = replicate_rng(params.seed, test_index, r);
            let mut max_q = f64::NEG_INFINITY;
            for seg in clusters {
                let mut order: Vec<usize> = (seg.start..seg.end).collect();
                order.shuffle(&mut rng);
                if let Some(c) = best_split_ordered(d, &order, min_segment) {
                    max_q = max_q.max(c.q_value);
                }
            }
            max_q >= threshold
        })
        .count();
    (1 + exceedances) as f64 / (params.permutations + 1) as f64
}

pub fn detect(series: &MultiSeries, params: &DetectParams) -> Result<ChangePointReport> {
    params.validate()?;
    let n = series.len();
    let d = alpha_distance_matrix(series, params.energy.alpha)?;
    let labels = series.time_labels();

    let mut clusters = vec![SegmentView::whole(n)];
    let mut candidates = vec![best_split_ordered(&d, &(0..n).collect::<Vec<_>>(), params.energy.min_segment)];
    let mut accepted: Vec<ChangePoint> = Vec::new();
    let mut rejected = None;

    let stop_reason = loop {
        if params.max_points.is_some_and(|m| accepted.len() >= m) {
            break StopReason::MaxPoints;
        }
        let mut pick: Option<(usize, f64)> = None;
        for (k, cand) in candidates.iter().enumerate() {
            if let Some(c) = cand {
                if pick.is_none_or(|(_, q)| c.q_value > q) {
                    pick = Some((k, c.q_value));
                }
            }
        }
        let Some((k, observed_q)) = pick else {
            break StopReason::NoAdmissibleSplit;
        };
        let seg = clusters[k];
        let cand = candidates[k].expect("picked candidate exists");
        let index = cand.global_index(seg);
        let iteration = accepted.len() + 1;
        let p_value = permutation_pvalue(&d, &clusters, observed_q, params, iteration as u64);

        if p_value > params.sig_level {
            rejected = Some(RejectedCandidate {
                index,
                label: labels[index - 1].clone(),
                q_value: observed_q,
                p_value,
                segment: seg,
            });
            break StopReason::NotSignificant;
        }

        accepted.push(ChangePoint {
            index,
            label: labels[index - 1].clone(),
            q_value: observed_q,
            p_value,
            iteration,
            segment: seg,
        });
        let left = SegmentView { start: seg.start, end: index };
        let right = SegmentView { start: index, end: seg.end };
        let scan =
            |s: SegmentView| best_split_ordered(&d, &(s.start..s.end).collect::<Vec<_>>(), params.energy.min_segment);
        clusters.splice(k..=k, [left, right]);
        candidates.splice(k..=k, [scan(left), scan(right)]);
    };

    let discovery_order = accepted.iter().map(|cp| cp.index).collect();
    accepted.sort_by_key(|cp| cp.index);
    let sorted: Vec<usize> = accepted.iter().map(|cp| cp.index).collect();
    let clusters = assign_clusters(n, &sorted)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| Cluster {
            id: i + 1,
            first: s.first(),
            last: s.last(),
            first_label: labels[s.start].clone(),
            last_label: labels[s.end - 1].clone(),
        })
        .collect();

    Ok(ChangePointReport {
        params: *params,
        mean_difference_mode: params.energy.is_mean_difference_mode(),
        series_len: n,
        dim_labels: series.dim_labels().to_vec(),
        change_points: accepted,
        discovery_order,
        clusters,
        rejected,
        stop_reason,
    })
}

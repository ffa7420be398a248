//! Energy-distance kernel: pairwise α-powered distances, the two-sample
//! energy statistic, its size-weighted Q form, and the single-split search.
//!
//! Every statistic is evaluated through an index slice into a shared
//! [`DistanceMatrix`]. A contiguous segment uses the identity ordering; the
//! permutation test passes a shuffled ordering of the same observations, so
//! the matrix is built once per series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::MultiSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Exponent on Euclidean distances, `0 < alpha <= 2`.
    pub alpha: f64,
    /// Smallest admissible cluster length, at least 2.
    pub min_segment: usize,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { alpha: 1.0, min_segment: 2 }
    }
}

impl EnergyParams {
    pub fn new(alpha: f64, min_segment: usize) -> Result<Self> {
        let params = Self { alpha, min_segment };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if self.min_segment < 2 {
            return Err(Error::InvalidParams(format!("min_segment must be at least 2, got {}", self.min_segment)));
        }
        Ok(())
    }

    /// With `alpha == 2` the statistic only sees differences in mean.
    pub fn is_mean_difference_mode(&self) -> bool {
        self.alpha == 2.0
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidParams(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    Ok(())
}

/// Symmetric `T x T` matrix of `|Z_i - Z_j|^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// Half-open interval `start..end` of 0-based observation indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentView {
    pub start: usize,
    pub end: usize,
}

impl SegmentView {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidInput(format!("empty segment {start}..{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn whole(len: usize) -> Self {
        Self { start: 0, end: len }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// 1-based index of the first observation.
    pub fn first(&self) -> usize {
        self.start + 1
    }

    /// 1-based index of the last observation.
    pub fn last(&self) -> usize {
        self.end
    }

    fn check_within(&self, n: usize) -> Result<()> {
        if self.start >= self.end || self.end > n {
            return Err(Error::InvalidInput(format!(
                "segment {}..{} out of range for {n} observations",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    /// Length of the left cluster, i.e. the 1-based position of its last
    /// observation within the segment.
    pub split: usize,
    pub q_value: f64,
}

impl SplitCandidate {
    /// 1-based global index of the last observation of the left cluster.
    pub fn global_index(&self, seg: SegmentView) -> usize {
        seg.start + self.split
    }
}

pub fn alpha_distance_matrix(series: &MultiSeries, alpha: f64) -> Result<DistanceMatrix> {
    validate_alpha(alpha)?;
    let n = series.len();
    for (row, obs) in series.rows().enumerate() {
        if let Some(col) = obs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let zi = series.row(i);
        for j in (i + 1)..n {
            let sq: f64 = zi.iter().zip(series.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            let dist = if alpha == 2.0 { sq } else { sq.sqrt().powf(alpha) };
            entries[i * n + j] = dist;
            entries[j * n + i] = dist;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

fn check_split(seg: SegmentView, split: usize) -> Result<()> {
    let left = split;
    let right = seg.len().saturating_sub(split);
    if split > seg.len() || left < 2 || right < 2 {
        return Err(Error::DegenerateSplit { left, right });
    }
    Ok(())
}

/// Two-sample energy statistic between `seg[..split]` and `seg[split..]`.
pub fn energy_stat(d: &DistanceMatrix, seg: SegmentView, split: usize) -> Result<f64> {
    seg.check_within(d.len())?;
    check_split(seg, split)?;
    let order: Vec<usize> = (seg.start..seg.end).collect();
    Ok(energy_ordered(d, &order, split))
}

/// Energy statistic weighted by `t* m / (t* + m)`, with the segment length
/// playing the role of the sample size.
pub fn q_stat(d: &DistanceMatrix, seg: SegmentView, split: usize) -> Result<f64> {
    let e = energy_stat(d, seg, split)?;
    Ok(q_weight(split, seg.len() - split) * e)
}

/// Admissible split maximising Q; ties go to the smallest split. `None` when
/// the segment is shorter than `2 * min_segment`.
pub fn best_split(d: &DistanceMatrix, seg: SegmentView, params: &EnergyParams) -> Option<SplitCandidate> {
    if seg.check_within(d.len()).is_err() {
        return None;
    }
    let order: Vec<usize> = (seg.start..seg.end).collect();
    best_split_ordered(d, &order, params.min_segment)
}

#[inline]
fn q_weight(left: usize, right: usize) -> f64 {
    (left as f64 * right as f64) / (left + right) as f64
}

#[inline]
fn energy_from_sums(between: f64, within_left: f64, within_right: f64, left: usize, right: usize) -> f64 {
    let (l, r) = (left as f64, right as f64);
    2.0 * between / (l * r) - within_left / (l * (l - 1.0) / 2.0) - within_right / (r * (r - 1.0) / 2.0)
}

/// Energy statistic of the observations listed in `order`, split after the
/// first `split` entries. Summation runs in index order.
pub(crate) fn energy_ordered(d: &DistanceMatrix, order: &[usize], split: usize) -> f64 {
    let (left, right) = order.split_at(split);
    let mut between = 0.0;
    for &i in left {
        let row = d.row(i);
        for &j in right {
            between += row[j];
        }
    }
    let within = |part: &[usize]| {
        let mut acc = 0.0;
        for (a, &i) in part.iter().enumerate() {
            let row = d.row(i);
            for &j in &part[..a] {
                acc += row[j];
            }
        }
        acc
    };
    energy_from_sums(between, within(left), within(right), left.len(), right.len())
}

/// Sliding scan over every admissible split of `order`.
///
/// Keeps the between sum and both within sums up to date as one observation
/// at a time moves from the right cluster to the left, so the whole scan is
/// quadratic in the segment length.
pub(crate) fn best_split_ordered(d: &DistanceMatrix, order: &[usize], min_segment: usize) -> Option<SplitCandidate> {
    let len = order.len();
    let min_segment = min_segment.max(2);
    if len < 2 * min_segment {
        return None;
    }

    let mut between = 0.0;
    let mut within_left = 0.0;
    let mut within_right = 0.0;
    for (a, &i) in order.iter().enumerate() {
        let row = d.row(i);
        for &j in &order[..a] {
            within_right += row[j];
        }
    }

    let mut best: Option<SplitCandidate> = None;
    // Move order[t] from the right cluster to the left for t = 0, 1, ...
    for t in 0..(len - min_segment) {
        let x = order[t];
        let row = d.row(x);
        let mut to_left = 0.0;
        for &j in &order[..t] {
            to_left += row[j];
        }
        let mut to_right = 0.0;
        for &j in &order[t + 1..] {
            to_right += row[j];
        }
        within_left += to_left;
        within_right -= to_right;
        between += to_right - to_left;

        let left = t + 1;
        if left < min_segment {
            continue;
        }
        let right = len - left;
        let q = q_weight(left, right) * energy_from_sums(between, within_left, within_right, left, right);
        if best.is_none_or(|b| q > b.q_value) {
            best = Some(SplitCandidate { split: left, q_value: q });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn univariate(z: &[f64]) -> MultiSeries {
        MultiSeries::univariate(z).unwrap()
    }

    #[test]
    fn distance_matrix_binary_sequence() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 0.0, 1.0, 1.0]), 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i < 2) == (j < 2) { 0.0 } else { 1.0 };
                assert_eq!(d.get(i, j), expected);
            }
        }
    }

    #[test]
    fn distance_matrix_euclidean_norm() {
        let s = MultiSeries::from_rows(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = alpha_distance_matrix(&s, 1.0).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn distance_matrix_fractional_alpha() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 2.0]), 0.5).unwrap();
        assert!((d.get(0, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let s = univariate(&[0.0, 1.0]);
        assert!(alpha_distance_matrix(&s, 0.0).is_err());
        assert!(alpha_distance_matrix(&s, 2.5).is_err());
        assert!(alpha_distance_matrix(&s, f64::NAN).is_err());
        assert!(alpha_distance_matrix(&s, 2.0).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(EnergyParams::new(1.0, 1).is_err());
        assert!(EnergyParams::new(1.0, 2).is_ok());
        assert!(EnergyParams::new(2.0, 2).unwrap().is_mean_difference_mode());
    }

    #[test]
    fn energy_binary_sequence() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 0.0, 1.0, 1.0]), 1.0).unwrap();
        let seg = SegmentView::whole(4);
        assert!((energy_stat(&d, seg, 2).unwrap() - 2.0).abs() < 1e-12);
        assert!((q_stat(&d, seg, 2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn energy_step_sequence() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0]), 1.0).unwrap();
        let seg = SegmentView::whole(6);
        assert!((energy_stat(&d, seg, 2).unwrap() - 10.0).abs() < 1e-12);
        assert!((energy_stat(&d, seg, 3).unwrap() - 20.0).abs() < 1e-12);
        assert!((q_stat(&d, seg, 3).unwrap() - 30.0).abs() < 1e-12);
        assert!((q_stat(&d, seg, 2).unwrap() - 40.0 / 3.0).abs() < 1e-12);
        assert!((q_stat(&d, seg, 4).unwrap() - 40.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_sequence_is_zero() {
        let d = alpha_distance_matrix(&univariate(&[4.2; 10]), 1.0).unwrap();
        let seg = SegmentView::whole(10);
        for split in 2..=8 {
            assert_eq!(energy_stat(&d, seg, split).unwrap(), 0.0);
            assert_eq!(q_stat(&d, seg, split).unwrap(), 0.0);
        }
        let best = best_split(&d, seg, &EnergyParams::default()).unwrap();
        assert_eq!(best.split, 2);
        assert_eq!(best.q_value, 0.0);
    }

    #[test]
    fn degenerate_split_rejected() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 1.0, 2.0, 3.0, 4.0]), 1.0).unwrap();
        let seg = SegmentView::whole(5);
        assert_eq!(energy_stat(&d, seg, 1), Err(Error::DegenerateSplit { left: 1, right: 4 }));
        assert_eq!(energy_stat(&d, seg, 4), Err(Error::DegenerateSplit { left: 4, right: 1 }));
        assert!(energy_stat(&d, seg, 0).is_err());
        assert!(energy_stat(&d, seg, 7).is_err());
        assert!(energy_stat(&d, SegmentView { start: 2, end: 9 }, 2).is_err());
    }

    #[test]
    fn best_split_step_sequence() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0]), 1.0).unwrap();
        let best = best_split(&d, SegmentView::whole(6), &EnergyParams::default()).unwrap();
        assert_eq!(best.split, 3);
        assert!((best.q_value - 30.0).abs() < 1e-12);
    }

    #[test]
    fn best_split_short_segment_is_none() {
        let d = alpha_distance_matrix(&univariate(&[0.0, 1.0, 2.0, 3.0, 4.0]), 1.0).unwrap();
        let params = EnergyParams::new(1.0, 3).unwrap();
        assert!(best_split(&d, SegmentView::whole(5), &params).is_none());
        assert!(best_split(&d, SegmentView::new(1, 4).unwrap(), &EnergyParams::default()).is_none());
    }

    #[test]
    fn best_split_on_subsegment_uses_local_split() {
        let z = [7.0, 7.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, -3.0];
        let d = alpha_distance_matrix(&univariate(&z), 1.0).unwrap();
        let seg = SegmentView::new(2, 8).unwrap();
        let best = best_split(&d, seg, &EnergyParams::default()).unwrap();
        assert_eq!(best.split, 3);
        assert_eq!(best.global_index(seg), 5);
        assert!((best.q_value - 30.0).abs() < 1e-12);
    }

    #[test]
    fn sliding_scan_matches_direct_evaluation() {
        let z = [0.3, -1.2, 2.5, 0.0, 4.4, 3.9, 5.1, 4.0, -0.7, 1.1];
        let d = alpha_distance_matrix(&univariate(&z), 0.5).unwrap();
        let seg = SegmentView::whole(z.len());
        let best = best_split(&d, seg, &EnergyParams::new(0.5, 2).unwrap()).unwrap();
        let direct = (2..=8).map(|t| (t, q_stat(&d, seg, t).unwrap())).fold((0, f64::NEG_INFINITY), |acc, (t, q)| {
            if q > acc.1 {
                (t, q)
            } else {
                acc
            }
        });
        assert_eq!(best.split, direct.0);
        assert!((best.q_value - direct.1).abs() < 1e-12);
    }

    #[test]
    fn two_point_masses_give_twice_the_gap() {
        let z = [1.5, 1.5, 1.5, 4.5, 4.5];
        let d = alpha_distance_matrix(&univariate(&z), 1.0).unwrap();
        assert_eq!(energy_stat(&d, SegmentView::whole(5), 3).unwrap(), 6.0);
        let d = alpha_distance_matrix(&univariate(&z), 2.0).unwrap();
        assert_eq!(energy_stat(&d, SegmentView::whole(5), 3).unwrap(), 18.0);
    }
}

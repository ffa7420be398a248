use std::collections::HashSet;

use crate::error::{Error, Result};

/// A time-ordered `T x d` matrix of finite reals with labels on both axes.
///
/// Values are stored row-major; row `t` is the observation at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeries {
    values: Vec<f64>,
    dim: usize,
    time_labels: Vec<String>,
    dim_labels: Vec<String>,
}

impl MultiSeries {
    pub fn new(rows: Vec<Vec<f64>>, time_labels: Vec<String>, dim_labels: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("series must contain at least one observation".into()));
        }
        let dim = dim_labels.len();
        if dim == 0 {
            return Err(Error::InvalidInput("series must have at least one dimension".into()));
        }
        if time_labels.len() != rows.len() {
            return Err(Error::InvalidInput(format!(
                "{} time labels for {} observations",
                time_labels.len(),
                rows.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &dim_labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate dimension label '{label}'")));
            }
        }
        let mut seen = HashSet::new();
        for label in &time_labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate time label '{label}'")));
            }
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (row, obs) in rows.into_iter().enumerate() {
            if obs.len() != dim {
                return Err(Error::InvalidInput(format!("row {row} has {} values, expected {dim}", obs.len())));
            }
            for (col, v) in obs.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                values.push(v);
            }
        }
        Ok(Self { values, dim, time_labels, dim_labels })
    }

    /// Univariate series labelled `1..=T` with a single dimension `"x"`.
    pub fn univariate(values: &[f64]) -> Result<Self> {
        Self::from_rows(values.iter().map(|&v| vec![v]).collect())
    }

    /// Rows labelled `1..=T`, dimensions labelled `x1..xd`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let time_labels = (1..=rows.len()).map(|t| t.to_string()).collect();
        let dim_labels = if dim == 1 { vec!["x".to_string()] } else { (1..=dim).map(|j| format!("x{j}")).collect() };
        Self::new(rows, time_labels, dim_labels)
    }

    pub fn len(&self) -> usize {
        self.time_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn dim_labels(&self) -> &[String] {
        &self.dim_labels
    }

    /// Copy of rows `start..end` (0-based, half-open).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidInput(format!(
                "slice {start}..{end} out of range for series of length {}",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
            time_labels: self.time_labels[start..end].to_vec(),
            dim_labels: self.dim_labels.clone(),
        })
    }

    /// Applies `f` to every entry, keeping labels.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let rows = self.rows().map(|r| r.iter().enumerate().map(|(j, &v)| f(j, v)).collect()).collect();
        Self::new(rows, self.time_labels.clone(), self.dim_labels.clone())
    }

    /// Reorders observations; `order[k]` is the source row of new row `k`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let rows = order.iter().map(|&t| self.row(t).to_vec()).collect();
        let labels = order.iter().map(|&t| self.time_labels[t].clone()).collect();
        Self::new(rows, labels, self.dim_labels.clone())
    }
}

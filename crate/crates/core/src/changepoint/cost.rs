// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CpError;

/// Which segment parameters are allowed to change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// Gaussian contrast with a common variance: within-segment SSE.
    MeanOnly,
    /// Gaussian contrast with segment-specific variance: `n log(var)`.
    MeanAndVariance,
}

impl CostMode {
    /// Shortest segment the contrast is defined on.
    pub fn min_defined_len(self) -> usize {
        match self {
            CostMode::MeanOnly => 1,
            CostMode::MeanAndVariance => 2,
        }
    }

    /// Default shortest segment. Mean-variance segments of two to four
    /// points can have a near-zero variance and an unbounded likelihood
    /// gain, so that mode defaults to five.
    pub fn default_min_seg_len(self) -> usize {
        match self {
            CostMode::MeanOnly => 1,
            CostMode::MeanAndVariance => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CostMode::MeanOnly => "mean",
            CostMode::MeanAndVariance => "mean_variance",
        }
    }
}

/// Default ratio of the variance floor to the global series variance.
pub const VARIANCE_FLOOR_RATIO: f64 = 1e-12;

/// `variance_floor_ratio` times the biased variance of the whole series, or
/// the smallest normal float when the series is constant.
pub fn variance_floor(series: &[f64], variance_floor_ratio: f64) -> f64 {
    let (_, m2) = mean_m2(series);
    let floor = variance_floor_ratio * m2 / series.len().max(1) as f64;
    if floor > 0.0 && floor.is_finite() {
        floor
    } else {
        f64::MIN_POSITIVE
    }
}

/// Welford's running mean and sum of squared deviations.
fn mean_m2(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &v) in values.iter().enumerate() {
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    (mean, m2.max(0.0))
}

fn contrast(mode: CostMode, n: usize, m2: f64, floor: f64) -> f64 {
    match mode {
        CostMode::MeanOnly => m2,
        CostMode::MeanAndVariance => n as f64 * (m2 / n as f64).max(floor).ln(),
    }
}

/// Contrast of `series[i..j]` (the observations `y_{i+1}, ..., y_j`) as a
/// single segment. `floor` bounds the variance from below in
/// [`CostMode::MeanAndVariance`].
pub fn segment_cost(
    series: &[f64],
    i: usize,
    j: usize,
    mode: CostMode,
    floor: f64,
) -> Result<f64, CpError> {
    let min = mode.min_defined_len();
    if j > series.len() || i >= j || j - i < min {
        return Err(CpError::SegmentTooShort {
            start: i,
            end: j,
            min_seg_len: min,
        });
    }
    let (_, m2) = mean_m2(&series[i..j]);
    Ok(contrast(mode, j - i, m2, floor))
}

/// Contrast of every admissible segment `series[i..j]`, packed row by row
/// (row `i` holds `j = i + 1 ..= T`). Segments shorter than `min_seg_len`
/// are stored as `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegCostTable {
    pub mode: CostMode,
    pub len: usize,
    pub min_seg_len: usize,
    pub variance_floor: f64,
    costs: Vec<f64>,
}

impl SegCostTable {
    pub fn build(
        series: &[f64],
        mode: CostMode,
        min_seg_len: usize,
        variance_floor_ratio: f64,
    ) -> Result<Self, CpError> {
        if series.is_empty() {
            return Err(CpError::Empty);
        }
        if let Some(index) = series.iter().position(|v| !v.is_finite()) {
            return Err(CpError::NonFinite { index });
        }
        if min_seg_len < mode.min_defined_len() {
            return Err(CpError::InvalidConfig(format!(
                "min_seg_len {min_seg_len} is below {} for {} mode",
                mode.min_defined_len(),
                mode.name()
            )));
        }
        let t = series.len();
        let floor = variance_floor(series, variance_floor_ratio);
        let rows: Vec<Vec<f64>> = (0..t)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(t - i);
                let (mut mean, mut m2) = (0.0, 0.0);
                for (k, &v) in series[i..].iter().enumerate() {
                    let n = k + 1;
                    let d = v - mean;
                    mean += d / n as f64;
                    m2 += d * (v - mean);
                    row.push(if n < min_seg_len {
                        f64::INFINITY
                    } else {
                        contrast(mode, n, m2.max(0.0), floor)
                    });
                }
                row
            })
            .collect();
        Ok(Self {
            mode,
            len: t,
            min_seg_len,
            variance_floor: floor,
            costs: rows.concat(),
        })
    }

    fn offset(&self, i: usize) -> usize {
        i * self.len - i * (i.saturating_sub(1)) / 2
    }

    /// Contrast of `series[i..j]`; `+inf` when shorter than `min_seg_len`.
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < j && j <= self.len);
        self.costs[self.offset(i) + (j - i - 1)]
    }

    /// Costs `cost(i, j)` for `j = i + 1 ..= T`.
    pub fn row(&self, i: usize) -> &[f64] {
        let start = self.offset(i);
        &self.costs[start..start + (self.len - i)]
    }
}

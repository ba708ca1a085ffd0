// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple change-point detection in mean or in mean and variance by exact
//! dynamic programming over a segment-cost table, with adaptive selection of
//! the number of segments.

mod cost;
mod dp;
mod select;

use serde::{Deserialize, Serialize};

pub use cost::{segment_cost, variance_floor, CostMode, SegCostTable, VARIANCE_FLOOR_RATIO};
pub use dp::SuffixCosts;
pub use select::{
    select_from_contrast, select_with_scheme, BicCheck, PenaltyScheme, SelectionDiagnostics,
    DEFAULT_THRESHOLD,
};

#[derive(Debug, thiserror::Error)]
pub enum CpError {
    #[error("empty series")]
    Empty,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("segment {start}..{end} is shorter than the minimum length {min_seg_len}")]
    SegmentTooShort {
        start: usize,
        end: usize,
        min_seg_len: usize,
    },
    #[error("{k} segments of length >= {min_seg_len} do not fit in {len} observations")]
    Infeasible {
        k: usize,
        len: usize,
        min_seg_len: usize,
    },
    #[error("invalid change-point configuration: {0}")]
    InvalidConfig(String),
    #[error("{len} labels given for a series of length {series_len}")]
    LabelCount { len: usize, series_len: usize },
}

/// Settings shared by selection and detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpConfig {
    /// Largest number of segments considered.
    pub k_max: usize,
    /// Threshold on the normalized second difference of the contrast curve.
    pub threshold: f64,
    pub scheme: PenaltyScheme,
    /// Overrides the mode's default minimum segment length (1 in mean, 5 in
    /// mean and variance). Must be at least 2 in mean and variance mode.
    pub min_seg_len: Option<usize>,
    pub variance_floor_ratio: f64,
}

impl Default for CpConfig {
    fn default() -> Self {
        Self {
            k_max: 15,
            threshold: DEFAULT_THRESHOLD,
            scheme: PenaltyScheme::default(),
            min_seg_len: None,
            variance_floor_ratio: VARIANCE_FLOOR_RATIO,
        }
    }
}

impl CpConfig {
    pub fn min_seg_len(&self, mode: CostMode) -> usize {
        self.min_seg_len.unwrap_or_else(|| mode.default_min_seg_len())
    }

    fn validate(&self) -> Result<(), CpError> {
        if self.k_max == 0 {
            return Err(CpError::InvalidConfig("k_max must be at least 1".into()));
        }
        if !self.threshold.is_finite() {
            return Err(CpError::InvalidConfig("threshold must be finite".into()));
        }
        if !(self.variance_floor_ratio > 0.0 && self.variance_floor_ratio.is_finite()) {
            return Err(CpError::InvalidConfig(
                "variance_floor_ratio must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Estimates for one segment `series[start..end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEstimate {
    pub start: usize,
    pub end: usize,
    pub mean: Vec<f64>,
    /// Biased (maximum-likelihood) covariance; 1x1 for a scalar series.
    pub covariance: Vec<Vec<f64>>,
}

impl SegmentEstimate {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub mode: CostMode,
    pub series_len: usize,
    pub min_seg_len: usize,
    /// Change-points: index of the first observation of each new segment,
    /// strictly increasing, never 0 or `series_len`.
    pub tau: Vec<usize>,
    /// Calendar labels of the change-points when attached.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau_labels: Vec<String>,
    pub segments: Vec<SegmentEstimate>,
    /// Total contrast of the segmentation.
    pub contrast: f64,
    /// Threshold of the adaptive rule, unset for a fixed segment count.
    pub penalty_used: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionDiagnostics>,
}

impl Segmentation {
    pub fn n_segments(&self) -> usize {
        self.tau.len() + 1
    }

    pub fn n_change_points(&self) -> usize {
        self.tau.len()
    }

    /// Boundaries `0, tau_1, ..., T`.
    pub fn boundaries(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain(self.tau.iter().copied())
            .chain(std::iter::once(self.series_len))
            .collect()
    }

    /// 0/1 indicator of length `series_len`, 1 at each change-point.
    pub fn indicator(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.series_len];
        for &t in &self.tau {
            out[t] = 1;
        }
        out
    }

    /// Attaches `labels[tau_k]` for each change-point.
    pub fn attach_labels(&mut self, labels: &[String]) -> Result<(), CpError> {
        if labels.len() != self.series_len {
            return Err(CpError::LabelCount {
                len: labels.len(),
                series_len: self.series_len,
            });
        }
        self.tau_labels = self.tau.iter().map(|&t| labels[t].clone()).collect();
        Ok(())
    }
}

fn estimates(series: &[f64], boundaries: &[usize]) -> Vec<SegmentEstimate> {
    boundaries
        .windows(2)
        .map(|w| {
            let seg = &series[w[0]..w[1]];
            let n = seg.len() as f64;
            let mean = seg.iter().sum::<f64>() / n;
            let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            SegmentEstimate {
                start: w[0],
                end: w[1],
                mean: vec![mean],
                covariance: vec![vec![var]],
            }
        })
        .collect()
}

fn assemble(
    series: &[f64],
    table: &SegCostTable,
    dp: &SuffixCosts,
    k: usize,
    selection: Option<SelectionDiagnostics>,
) -> Segmentation {
    let tau = dp.change_points(table, k);
    let mut boundaries = vec![0];
    boundaries.extend(&tau);
    boundaries.push(series.len());
    let contrast = boundaries.windows(2).map(|w| table.cost(w[0], w[1])).sum();
    Segmentation {
        mode: table.mode,
        series_len: series.len(),
        min_seg_len: table.min_seg_len,
        tau,
        tau_labels: Vec::new(),
        segments: estimates(series, &boundaries),
        contrast,
        penalty_used: selection.as_ref().map(|s| s.threshold),
        selection,
    }
}

/// Minimum-contrast segmentation of `series` into exactly `k` segments.
pub fn optimal_segmentation_for_k(
    series: &[f64],
    k: usize,
    mode: CostMode,
    config: &CpConfig,
) -> Result<Segmentation, CpError> {
    config.validate()?;
    let table = SegCostTable::build(series, mode, config.min_seg_len(mode), config.variance_floor_ratio)?;
    let dp = SuffixCosts::compute(&table, k)?;
    Ok(assemble(series, &table, &dp, k, None))
}

/// Optimal contrasts `J_1..J_{k_max}` and the adaptive choice of `K*`.
pub fn select_num_segments(
    series: &[f64],
    mode: CostMode,
    config: &CpConfig,
) -> Result<SelectionDiagnostics, CpError> {
    config.validate()?;
    let table = SegCostTable::build(series, mode, config.min_seg_len(mode), config.variance_floor_ratio)?;
    let dp = SuffixCosts::compute(&table, config.k_max)?;
    let curve: Vec<f64> = (1..=config.k_max).map(|k| dp.total(k)).collect();
    Ok(select_with_scheme(&curve, config.threshold, config.scheme, mode, series.len()))
}

/// Selects the number of segments and returns the optimal segmentation for
/// it. `k_max` is lowered to the largest feasible count on short series.
pub fn detect(series: &[f64], mode: CostMode, config: &CpConfig) -> Result<Segmentation, CpError> {
    config.validate()?;
    let table = SegCostTable::build(series, mode, config.min_seg_len(mode), config.variance_floor_ratio)?;
    let k_max = config.k_max.min(series.len() / table.min_seg_len);
    let dp = SuffixCosts::compute(&table, k_max)?;
    let curve: Vec<f64> = (1..=k_max).map(|k| dp.total(k)).collect();
    let selection = select_with_scheme(&curve, config.threshold, config.scheme, mode, series.len());
    let k = selection.k_star;
    Ok(assemble(series, &table, &dp, k, Some(selection)))
}

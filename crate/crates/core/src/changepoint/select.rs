// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::cost::CostMode;

/// Default threshold on the normalized second difference of `J_K`.
pub const DEFAULT_THRESHOLD: f64 = 0.75;

/// How the number of segments is chosen from the contrast curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyScheme {
    /// Last large normalized second difference of `J_K`.
    Adaptive,
    /// The adaptive choice, kept only if its likelihood gain over a single
    /// segment exceeds a BIC penalty; otherwise one segment.
    #[default]
    AdaptiveBicChecked,
}

/// Likelihood comparison of the adaptive choice against one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicCheck {
    /// Segment count proposed by the adaptive rule.
    pub proposed: usize,
    /// Twice the log-likelihood gain of the proposal over one segment.
    pub gain: f64,
    /// `(proposed - 1) * params_per_segment * ln T`.
    pub penalty: f64,
    pub accepted: bool,
}

/// The contrast curve and the quantities the adaptive rule looked at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    pub k_max: usize,
    pub threshold: f64,
    /// `J_K` for `K = 1..=k_max`.
    pub contrast: Vec<f64>,
    /// `J_K` rescaled so that `J_1` maps to `k_max` and `J_{k_max}` to 1.
    pub normalized: Vec<f64>,
    /// `(K, D_K)` for `K = 2..k_max - 1`.
    pub second_differences: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic_check: Option<BicCheck>,
    pub k_star: usize,
}

/// Adaptive choice of the number of segments from the optimal contrasts
/// `contrast[K - 1] = J_K`.
///
/// The curve is rescaled to `J~_K = (J_{Kmax} - J_K) / (J_{Kmax} - J_1) * (Kmax - 1) + 1`
/// and `K*` is the largest `K` with `J~_{K-1} - 2 J~_K + J~_{K+1} > threshold`,
/// or 1 when no `K` qualifies. A flat curve selects 1.
pub fn select_from_contrast(contrast: &[f64], threshold: f64) -> SelectionDiagnostics {
    let k_max = contrast.len();
    let span = contrast.first().zip(contrast.last()).map_or(0.0, |(a, b)| b - a);
    let normalized: Vec<f64> = if span < 0.0 && span.is_finite() {
        contrast
            .iter()
            .map(|j| (contrast[k_max - 1] - j) / span * (k_max as f64 - 1.0) + 1.0)
            .collect()
    } else {
        vec![1.0; k_max]
    };
    let second_differences: Vec<(usize, f64)> = (2..k_max)
        .map(|k| {
            (
                k,
                normalized[k - 2] - 2.0 * normalized[k - 1] + normalized[k],
            )
        })
        .collect();
    let k_star = second_differences
        .iter()
        .rev()
        .find(|(_, d)| *d > threshold)
        .map_or(1, |(k, _)| *k);
    SelectionDiagnostics {
        k_max,
        threshold,
        contrast: contrast.to_vec(),
        normalized,
        second_differences,
        bic_check: None,
        k_star,
    }
}

/// Free parameters added by each extra segment: the change location plus
/// the segment mean, and its variance when that may change too.
fn params_per_segment(mode: CostMode) -> f64 {
    match mode {
        CostMode::MeanOnly => 2.0,
        CostMode::MeanAndVariance => 3.0,
    }
}

/// Twice the Gaussian log-likelihood gain of the `k`-segment optimum over
/// one segment. In mean mode the variance is common and profiled out.
fn likelihood_gain(contrast: &[f64], k: usize, mode: CostMode, len: usize) -> f64 {
    let (j1, jk) = (contrast[0], contrast[k - 1]);
    match mode {
        CostMode::MeanOnly if jk <= 0.0 => {
            if j1 > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        }
        CostMode::MeanOnly => len as f64 * (j1 / jk).ln(),
        CostMode::MeanAndVariance => j1 - jk,
    }
}

/// Applies `scheme` to the curve `contrast[K - 1] = J_K` of a series of
/// length `len`.
pub fn select_with_scheme(
    contrast: &[f64],
    threshold: f64,
    scheme: PenaltyScheme,
    mode: CostMode,
    len: usize,
) -> SelectionDiagnostics {
    let mut diag = select_from_contrast(contrast, threshold);
    if scheme == PenaltyScheme::AdaptiveBicChecked && diag.k_star > 1 {
        let proposed = diag.k_star;
        let gain = likelihood_gain(contrast, proposed, mode, len);
        let penalty = (proposed - 1) as f64 * params_per_segment(mode) * (len as f64).ln();
        let accepted = gain > penalty;
        if !accepted {
            diag.k_star = 1;
        }
        diag.bic_check = Some(BicCheck {
            proposed,
            gain,
            penalty,
            accepted,
        });
    }
    diag
}

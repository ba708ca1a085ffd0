// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::model::{stationary_distribution, MsParams};
use super::MsError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Smallest noise scale whose square is still a normal float.
const SIGMA_MIN: f64 = 1.5e-154;

/// Lagged regressors and targets for `t = lag..T`.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub lag: usize,
    /// `x[k]` holds `y_{t-1}, ..., y_{t-lag}` for `t = lag + k`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Design {
    pub fn new(series: &[f64], lag: usize) -> Self {
        let x = (lag..series.len())
            .map(|t| (1..=lag).map(|k| series[t - k]).collect())
            .collect();
        Self {
            lag,
            x,
            y: series[lag.min(series.len())..].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn gaussian_log_density(y: f64, mean: f64, sigma: f64) -> f64 {
    let z = (y - mean) / sigma;
    -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z
}

/// `log f_i(y_t)` for every usable step (rows) and regime (columns).
pub(crate) fn log_densities(params: &MsParams, design: &Design) -> Vec<Vec<f64>> {
    design
        .x
        .iter()
        .zip(&design.y)
        .map(|(lags, &y)| {
            params
                .regimes
                .iter()
                .zip(&params.sigma)
                .map(|(mean, &s)| gaussian_log_density(y, mean.mean(lags), s))
                .collect()
        })
        .collect()
}

/// Forward pass output. Rows cover the whole series; the first `lag` rows
/// hold the stationary distribution since those observations only condition
/// the recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub lag: usize,
    /// `P(x_t | y_1..y_{t-1})`
    pub predicted: Vec<Vec<f64>>,
    /// `P(x_t | y_1..y_t)`
    pub filtered: Vec<Vec<f64>>,
    pub loglik: f64,
}

/// Filtered and smoothed regime probabilities of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeProbabilities {
    pub lag: usize,
    pub filtered: Vec<Vec<f64>>,
    pub smoothed: Vec<Vec<f64>>,
    pub loglik: f64,
}

impl RegimeProbabilities {
    pub fn len(&self) -> usize {
        self.smoothed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smoothed.is_empty()
    }

    /// Smoothed probability of regime `regime` (0-based) at each step.
    pub fn smoothed_column(&self, regime: usize) -> Vec<f64> {
        self.smoothed.iter().map(|row| row[regime]).collect()
    }
}

pub(crate) fn check_inputs(params: &MsParams, series: &[f64]) -> Result<(), MsError> {
    params.validate(false)?;
    let lag = params.lag();
    if series.len() <= lag {
        return Err(MsError::SeriesTooShort {
            len: series.len(),
            lag,
        });
    }
    if let Some(index) = series.iter().position(|v| !v.is_finite()) {
        return Err(MsError::NonFinite { index });
    }
    for (i, &s) in params.sigma.iter().enumerate() {
        if s < SIGMA_MIN {
            return Err(MsError::SigmaUnderflow { regime: i + 1, sigma: s });
        }
    }
    Ok(())
}

/// Hamilton forward recursion in the log domain.
///
/// The chain starts from the stationary distribution of the transition
/// matrix; each usable step contributes `log sum_i P(x_t = i | past) f_i(y_t)`.
pub fn hamilton_filter(params: &MsParams, series: &[f64]) -> Result<FilterResult, MsError> {
    check_inputs(params, series)?;
    let design = Design::new(series, params.lag());
    let dens = log_densities(params, &design);
    filter_from_densities(params, &dens, series.len())
}

pub(crate) fn filter_from_densities(
    params: &MsParams,
    log_dens: &[Vec<f64>],
    len: usize,
) -> Result<FilterResult, MsError> {
    let lag = len - log_dens.len();
    let pi = stationary_distribution(&params.transition)?;
    let mut predicted = vec![pi.clone(); lag];
    let mut filtered = vec![pi; lag];
    let mut loglik = 0.0;
    let mut joint = vec![0.0; params.n_regimes()];
    for (k, dens) in log_dens.iter().enumerate() {
        let pred = params.transition.propagate(filtered.last().expect("lag >= 1"));
        for ((j, p), d) in joint.iter_mut().zip(&pred).zip(dens) {
            *j = p.ln() + d;
        }
        let step = log_sum_exp(&joint);
        if !step.is_finite() {
            return Err(MsError::Numerical(format!(
                "zero likelihood at step {}",
                lag + k
            )));
        }
        loglik += step;
        let mut filt: Vec<f64> = joint.iter().map(|j| (j - step).exp()).collect();
        normalize(&mut filt);
        predicted.push(pred);
        filtered.push(filt);
    }
    Ok(FilterResult {
        lag,
        predicted,
        filtered,
        loglik,
    })
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

/// Kim backward recursion:
/// `P(x_t = j | Y) = P(x_t = j | Y_t) sum_i A[i][j] P(x_{t+1} = i | Y) / P(x_{t+1} = i | Y_t)`.
pub fn kim_smoother(params: &MsParams, filter: &FilterResult) -> Vec<Vec<f64>> {
    let len = filter.filtered.len();
    let n = params.n_regimes();
    let mut smoothed = vec![vec![0.0; n]; len];
    if len == 0 {
        return smoothed;
    }
    smoothed[len - 1] = filter.filtered[len - 1].clone();
    for t in (0..len - 1).rev() {
        let ratio: Vec<f64> = smoothed[t + 1]
            .iter()
            .zip(&filter.predicted[t + 1])
            .map(|(s, p)| if *p > 0.0 { s / p } else { 0.0 })
            .collect();
        let mut row: Vec<f64> = (0..n)
            .map(|j| {
                let back: f64 = (0..n).map(|i| params.transition.get(i, j) * ratio[i]).sum();
                filter.filtered[t][j] * back
            })
            .collect();
        normalize(&mut row);
        smoothed[t] = row;
    }
    smoothed
}

/// Posterior transition counts `sum_t P(x_t = i, x_{t-1} = j | Y)` over the
/// usable steps, indexed `[to][from]`.
pub(crate) fn expected_transitions(
    params: &MsParams,
    filter: &FilterResult,
    smoothed: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = params.n_regimes();
    let mut counts = vec![vec![0.0; n]; n];
    for (t, (pred_t, smooth_t)) in filter.predicted.iter().zip(smoothed).enumerate().skip(filter.lag) {
        for (i, row) in counts.iter_mut().enumerate() {
            let pred = pred_t[i];
            if pred <= 0.0 {
                continue;
            }
            let scale = smooth_t[i] / pred;
            for (j, c) in row.iter_mut().enumerate() {
                *c += scale * params.transition.get(i, j) * filter.filtered[t - 1][j];
            }
        }
    }
    counts
}

/// Filter then smoother.
pub fn regime_probabilities(
    params: &MsParams,
    series: &[f64],
) -> Result<RegimeProbabilities, MsError> {
    let filter = hamilton_filter(params, series)?;
    let smoothed = kim_smoother(params, &filter);
    Ok(RegimeProbabilities {
        lag: filter.lag,
        filtered: filter.filtered,
        smoothed,
        loglik: filter.loglik,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msar::model::{RegimeMean, TransitionMatrix};

    fn params(p: f64, q: f64) -> MsParams {
        MsParams {
            transition: TransitionMatrix::from_pq(p, q),
            regimes: vec![
                RegimeMean::Linear {
                    coef: vec![0.1, 0.5],
                },
                RegimeMean::Linear {
                    coef: vec![1.0, -0.2],
                },
            ],
            sigma: vec![0.3, 1.2],
        }
    }

    #[test]
    fn identical_regimes_carry_no_information() {
        let mut prm = params(0.8, 0.6);
        prm.regimes[1] = prm.regimes[0].clone();
        prm.sigma[1] = prm.sigma[0];
        let series = [0.2, 0.5, -0.1, 0.3, 0.9, 0.4];
        let f = hamilton_filter(&prm, &series).unwrap();
        let pi = stationary_distribution(&prm.transition).unwrap();
        for (row_f, row_p) in f.filtered.iter().zip(&f.predicted) {
            for ((a, b), c) in row_f.iter().zip(row_p).zip(&pi) {
                assert!((a - b).abs() < 1e-12);
                assert!((a - c).abs() < 1e-12);
            }
        }
        let s = kim_smoother(&prm, &f);
        for row in &s {
            assert!((row[0] - pi[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_usable_step_by_hand() {
        let prm = params(0.9, 0.7);
        let series = [0.4, 1.1];
        let f = hamilton_filter(&prm, &series).unwrap();
        // pi = (0.3, 0.1) / 0.4 = (0.75, 0.25)
        let d1 = (-(1.1f64 - 0.3).powi(2) / (2.0 * 0.09)).exp() / (0.3 * (2.0 * std::f64::consts::PI).sqrt());
        let d2 = (-(1.1f64 - 0.92).powi(2) / (2.0 * 1.44)).exp() / (1.2 * (2.0 * std::f64::consts::PI).sqrt());
        let z = 0.75 * d1 + 0.25 * d2;
        assert!((f.filtered[1][0] - 0.75 * d1 / z).abs() < 1e-12);
        assert!((f.loglik - z.ln()).abs() < 1e-12);
        assert!((f.filtered[0][0] - 0.75).abs() < 1e-15);
        assert!((f.filtered[0][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn smoother_ends_at_filter() {
        let prm = params(0.9, 0.7);
        let series: Vec<f64> = (0..30).map(|t| ((t * 7) % 5) as f64 * 0.3).collect();
        let f = hamilton_filter(&prm, &series).unwrap();
        let s = kim_smoother(&prm, &f);
        assert_eq!(s.last(), f.filtered.last());
    }

    #[test]
    fn input_errors() {
        let prm = params(0.9, 0.7);
        assert!(matches!(
            hamilton_filter(&prm, &[1.0]).unwrap_err(),
            MsError::SeriesTooShort { .. }
        ));
        assert!(matches!(
            hamilton_filter(&prm, &[1.0, f64::NAN, 2.0]).unwrap_err(),
            MsError::NonFinite { index: 1 }
        ));
        let mut tiny = prm.clone();
        tiny.sigma[1] = 1e-300;
        assert!(matches!(
            hamilton_filter(&tiny, &[1.0, 2.0, 3.0]).unwrap_err(),
            MsError::SigmaUnderflow { regime: 2, .. }
        ));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
    }

    /// Sums over every regime path of the usable steps: the chain starts
    /// from the stationary distribution at the last conditioning row.
    fn enumerate_paths(prm: &MsParams, series: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let lag = prm.lag();
        let n = prm.n_regimes();
        let steps = series.len() - lag;
        let pi = stationary_distribution(&prm.transition).unwrap();
        let design = Design::new(series, lag);
        let mut total = 0.0;
        let mut marg = vec![vec![0.0; n]; steps];
        for code in 0..n.pow(steps as u32) {
            let path: Vec<usize> = (0..steps).map(|k| (code / n.pow(k as u32)) % n).collect();
            let mut w: f64 = (0..n).map(|s0| pi[s0] * prm.transition.get(path[0], s0)).sum();
            for k in 0..steps {
                if k > 0 {
                    w *= prm.transition.get(path[k], path[k - 1]);
                }
                let i = path[k];
                w *= gaussian_log_density(design.y[k], prm.regimes[i].mean(&design.x[k]), prm.sigma[i]).exp();
            }
            total += w;
            for (k, &i) in path.iter().enumerate() {
                marg[k][i] += w;
            }
        }
        for row in &mut marg {
            row.iter_mut().for_each(|v| *v /= total);
        }
        (total.ln(), marg)
    }

    #[test]
    fn matches_path_enumeration() {
        for (seed, lag) in [(1u64, 1usize), (2, 2), (3, 1)] {
            let mut prm = params(0.85, 0.6);
            if lag == 2 {
                prm.regimes = vec![
                    RegimeMean::Linear { coef: vec![0.0, 0.4, 0.2] },
                    RegimeMean::Linear { coef: vec![0.5, -0.3, 0.1] },
                ];
            }
            let sim = crate::msar::simulate(&prm, 10 + lag, seed, &Default::default()).unwrap();
            let (ll, marg) = enumerate_paths(&prm, &sim.series);
            let probs = regime_probabilities(&prm, &sim.series).unwrap();
            assert!((probs.loglik - ll).abs() < 1e-10, "{} vs {ll}", probs.loglik);
            for (k, row) in marg.iter().enumerate() {
                for (a, b) in row.iter().zip(&probs.smoothed[lag + k]) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn three_regimes_match_path_enumeration() {
        let prm = MsParams {
            transition: TransitionMatrix {
                probs: vec![
                    vec![0.7, 0.2, 0.1],
                    vec![0.2, 0.6, 0.3],
                    vec![0.1, 0.2, 0.6],
                ],
            },
            regimes: vec![
                RegimeMean::Linear { coef: vec![0.0, 0.5] },
                RegimeMean::Linear { coef: vec![1.0, 0.0] },
                RegimeMean::Linear { coef: vec![-1.0, 0.2] },
            ],
            sigma: vec![0.4, 0.8, 1.5],
        };
        let series = [0.3, 0.1, 1.2, 0.9, -0.8, -1.5, 0.2];
        let (ll, marg) = enumerate_paths(&prm, &series);
        let probs = regime_probabilities(&prm, &series).unwrap();
        assert!((probs.loglik - ll).abs() < 1e-10);
        for (k, row) in marg.iter().enumerate() {
            for (a, b) in row.iter().zip(&probs.smoothed[1 + k]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn relabeling_permutes_probabilities(
            p in 0.05f64..0.95,
            q in 0.05f64..0.95,
            ys in proptest::collection::vec(-3.0f64..3.0, 3..40),
        ) {
            let prm = params(p, q);
            let swapped = prm.permuted(&[1, 0]);
            let a = regime_probabilities(&prm, &ys).unwrap();
            let b = regime_probabilities(&swapped, &ys).unwrap();
            proptest::prop_assert!((a.loglik - b.loglik).abs() < 1e-9);
            for (ra, rb) in a.smoothed.iter().zip(&b.smoothed) {
                proptest::prop_assert!((ra[0] - rb[1]).abs() < 1e-9);
                let s: f64 = ra.iter().sum();
                proptest::prop_assert!((s - 1.0).abs() < 1e-12);
                proptest::prop_assert!(ra.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

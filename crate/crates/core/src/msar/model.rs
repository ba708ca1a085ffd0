// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::MsError;

/// Conditional-mean family of one regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MeanFamily {
    /// Intercept plus `lag` autoregressive coefficients.
    Linear,
    /// One tanh hidden layer over the `lag` previous values, linear output.
    Mlp { hidden: usize },
}

/// Shape of a switching autoregression: one mean family per regime, all
/// regimes reading the same `lag` previous observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsSpec {
    pub lag: usize,
    pub regimes: Vec<MeanFamily>,
}

impl MsSpec {
    pub fn linear(n_regimes: usize, lag: usize) -> Self {
        Self {
            lag,
            regimes: vec![MeanFamily::Linear; n_regimes],
        }
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn validate(&self) -> Result<(), MsError> {
        if self.lag == 0 {
            return Err(MsError::InvalidSpec("lag must be at least 1".into()));
        }
        if self.regimes.len() < 2 {
            return Err(MsError::InvalidSpec("at least two regimes required".into()));
        }
        if self
            .regimes
            .iter()
            .any(|f| matches!(f, MeanFamily::Mlp { hidden: 0 }))
        {
            return Err(MsError::InvalidSpec("MLP regimes need at least one hidden unit".into()));
        }
        Ok(())
    }

    /// Number of free parameters, counting `n (n - 1)` transition entries.
    pub fn parameter_count(&self) -> usize {
        let n = self.n_regimes();
        let means: usize = self
            .regimes
            .iter()
            .map(|f| match f {
                MeanFamily::Linear => self.lag + 1,
                MeanFamily::Mlp { hidden } => hidden * (self.lag + 2) + 1,
            })
            .sum();
        n * (n - 1) + means + n
    }
}

/// Column-stochastic transition matrix: `probs[to][from]` is
/// `P(x_t = to | x_{t-1} = from)`.
///
/// For two regimes the columns are `(p, 1 - p)` and `(1 - q, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub probs: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn from_pq(p: f64, q: f64) -> Self {
        Self {
            probs: vec![vec![p, 1.0 - q], vec![1.0 - p, q]],
        }
    }

    /// Same persistence `stay` in every regime, the rest spread evenly.
    pub fn uniform_persistence(n: usize, stay: f64) -> Self {
        let leave = if n > 1 { (1.0 - stay) / (n - 1) as f64 } else { 0.0 };
        Self {
            probs: (0..n)
                .map(|i| (0..n).map(|j| if i == j { stay } else { leave }).collect())
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.probs[to][from]
    }

    /// Persistence of the first regime (two-regime convention).
    pub fn p(&self) -> f64 {
        self.probs[0][0]
    }

    /// Persistence of the second regime (two-regime convention).
    pub fn q(&self) -> f64 {
        self.probs[1][1]
    }

    /// Distribution of the next state given the current distribution.
    pub fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        self.probs
            .iter()
            .map(|row| row.iter().zip(dist).map(|(a, d)| a * d).sum())
            .collect()
    }

    /// Square shape, columns summing to one, entries in `[0, 1]`; with
    /// `strict`, additionally every entry in `(0, 1)`.
    pub fn validate(&self, strict: bool) -> Result<(), MsError> {
        let n = self.n();
        if n == 0 || self.probs.iter().any(|r| r.len() != n) {
            return Err(MsError::InvalidParams("transition matrix must be square".into()));
        }
        for j in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                let a = self.probs[i][j];
                let ok = if strict {
                    a > 0.0 && a < 1.0
                } else {
                    (0.0..=1.0).contains(&a)
                };
                if !ok || !a.is_finite() {
                    return Err(MsError::InvalidParams(format!(
                        "transition entry ({i}, {j}) = {a} out of range"
                    )));
                }
                sum += a;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(MsError::InvalidParams(format!(
                    "transition column {j} sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Reorders regimes so that new regime `k` is old regime `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            probs: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.probs[i][j]).collect())
                .collect(),
        }
    }
}

/// Invariant distribution `pi` with `A pi = pi` and `sum(pi) = 1`.
pub fn stationary_distribution(transition: &TransitionMatrix) -> Result<Vec<f64>, MsError> {
    transition.validate(false)?;
    let n = transition.n();
    if n == 2 {
        let (p, q) = (transition.p(), transition.q());
        let denom = (1.0 - p) + (1.0 - q);
        if denom <= 0.0 {
            return Err(MsError::DegenerateChain);
        }
        let pi1 = (1.0 - q) / denom;
        return Ok(vec![pi1, 1.0 - pi1]);
    }
    // (A - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        transition.probs[i][j] - if i == j { 1.0 } else { 0.0 }
    });
    m.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = m.lu();
    let pi = lu.solve(&rhs).ok_or(MsError::DegenerateChain)?;
    if pi.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return Err(MsError::DegenerateChain);
    }
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

/// Conditional mean of one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum RegimeMean {
    /// `a_0 + a_1 y_{t-1} + ... + a_l y_{t-l}`
    Linear { coef: Vec<f64> },
    Mlp(Mlp),
}

impl RegimeMean {
    pub fn lag(&self) -> usize {
        match self {
            RegimeMean::Linear { coef } => coef.len().saturating_sub(1),
            RegimeMean::Mlp(net) => net.inputs,
        }
    }

    pub fn family(&self) -> MeanFamily {
        match self {
            RegimeMean::Linear { .. } => MeanFamily::Linear,
            RegimeMean::Mlp(net) => MeanFamily::Mlp { hidden: net.hidden },
        }
    }

    /// `lags[0]` is `y_{t-1}`, `lags[k]` is `y_{t-1-k}`.
    pub fn mean(&self, lags: &[f64]) -> f64 {
        match self {
            RegimeMean::Linear { coef } => {
                coef[0] + coef[1..].iter().zip(lags).map(|(a, y)| a * y).sum::<f64>()
            }
            RegimeMean::Mlp(net) => net.forward(lags),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    pub transition: TransitionMatrix,
    pub regimes: Vec<RegimeMean>,
    pub sigma: Vec<f64>,
}

impl MsParams {
    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn lag(&self) -> usize {
        self.regimes.first().map_or(0, RegimeMean::lag)
    }

    pub fn spec(&self) -> MsSpec {
        MsSpec {
            lag: self.lag(),
            regimes: self.regimes.iter().map(RegimeMean::family).collect(),
        }
    }

    /// Structural checks; `strict` also demands `sigma > 0` and transition
    /// entries strictly inside `(0, 1)`.
    pub fn validate(&self, strict: bool) -> Result<(), MsError> {
        let n = self.n_regimes();
        if n == 0 || self.transition.n() != n || self.sigma.len() != n {
            return Err(MsError::InvalidParams(format!(
                "{n} regimes but {}x{} transition and {} noise scales",
                self.transition.n(),
                self.transition.n(),
                self.sigma.len()
            )));
        }
        self.transition.validate(strict)?;
        let lag = self.lag();
        if lag == 0 {
            return Err(MsError::InvalidParams("lag must be at least 1".into()));
        }
        if self.regimes.iter().any(|r| r.lag() != lag) {
            return Err(MsError::InvalidParams("all regimes must share the same lag".into()));
        }
        for (i, s) in self.sigma.iter().enumerate() {
            let ok = if strict { *s > 0.0 } else { *s >= 0.0 };
            if !ok || !s.is_finite() {
                return Err(MsError::InvalidParams(format!(
                    "noise scale of regime {} is {s}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Reorders regimes so that new regime `k` is old regime `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            transition: self.transition.permuted(order),
            regimes: order.iter().map(|&i| self.regimes[i].clone()).collect(),
            sigma: order.iter().map(|&i| self.sigma[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_chain_is_uniform() {
        let pi = stationary_distribution(&TransitionMatrix::from_pq(0.5, 0.5)).unwrap();
        assert_eq!(pi, vec![0.5, 0.5]);
    }

    #[test]
    fn reported_matrix_stationary_share() {
        // Hand solution of the 2x2 eigenproblem: pi_1 = (1-q) / ((1-p) + (1-q)),
        // (1 - 0.746643) / (0.155702 + 0.253357) = 0.253357 / 0.409059.
        let pi = stationary_distribution(&TransitionMatrix::from_pq(0.844298, 0.746643)).unwrap();
        assert!((pi[0] - 0.253357 / 0.409059).abs() < 1e-12);
        assert!((pi[0] - 0.6194).abs() < 5e-5);
    }

    #[test]
    fn reported_matrix_columns_sum_to_one() {
        let a = TransitionMatrix {
            probs: vec![vec![0.844298, 0.253357], vec![0.155702, 0.746643]],
        };
        a.validate(true).unwrap();
        let b = TransitionMatrix::from_pq(0.844298, 0.746643);
        for (ra, rb) in a.probs.iter().zip(&b.probs) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn absorbing_chain_is_degenerate() {
        assert!(matches!(
            stationary_distribution(&TransitionMatrix::from_pq(1.0, 1.0)).unwrap_err(),
            MsError::DegenerateChain
        ));
        assert!(TransitionMatrix::from_pq(1.0, 0.5).validate(true).is_err());
    }

    #[test]
    fn three_state_general_solve() {
        let a = TransitionMatrix {
            probs: vec![
                vec![0.8, 0.1, 0.2],
                vec![0.15, 0.7, 0.3],
                vec![0.05, 0.2, 0.5],
            ],
        };
        let pi = stationary_distribution(&a).unwrap();
        let next = a.propagate(&pi);
        for (x, y) in pi.iter().zip(&next) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_count() {
        assert_eq!(MsSpec::linear(2, 1).parameter_count(), 2 + 4 + 2);
        let spec = MsSpec {
            lag: 1,
            regimes: vec![MeanFamily::Mlp { hidden: 3 }, MeanFamily::Linear],
        };
        // MLP: 3x1 input weights + 3 hidden biases + 3 output weights + 1 bias.
        assert_eq!(spec.parameter_count(), 2 + 10 + 2 + 2);
    }

    proptest! {
        #[test]
        fn stationary_is_invariant(p in 0.01f64..0.99, q in 0.01f64..0.99) {
            let a = TransitionMatrix::from_pq(p, q);
            let pi = stationary_distribution(&a).unwrap();
            let next = a.propagate(&pi);
            prop_assert!((pi[0] + pi[1] - 1.0).abs() < 1e-12);
            prop_assert!((next[0] - pi[0]).abs() < 1e-12);
            prop_assert!((next[1] - pi[1]).abs() < 1e-12);
        }
    }
}

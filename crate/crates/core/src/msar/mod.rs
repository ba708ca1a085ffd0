// SPDX-License-Identifier: MIT OR Apache-2.0

//! Markov-switching autoregression: filtering, smoothing, EM estimation and
//! simulation, plus the cross-tabulation of regimes against a periodization.

mod crosstab;
mod em;
mod filter;
mod mlp;
mod model;
mod simulate;

pub use crosstab::{cross_tabulate, CrossTab, CrossTabRow};
pub use em::{em_fit, order_by_stationary_share, EmConfig, EmFit, RestartSummary, MONOTONICITY_SLACK};
pub use filter::{hamilton_filter, kim_smoother, regime_probabilities, FilterResult, RegimeProbabilities};
pub use mlp::Mlp;
pub use model::{
    stationary_distribution, MeanFamily, MsParams, MsSpec, RegimeMean, TransitionMatrix,
};
pub use simulate::{simulate, Simulation, SimulationOptions};

#[derive(Debug, thiserror::Error)]
pub enum MsError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("transition matrix has no unique stationary distribution")]
    DegenerateChain,
    #[error("series of length {len} is too short for lag {lag}")]
    SeriesTooShort { len: usize, lag: usize },
    #[error("non-finite observation at index {index}")]
    NonFinite { index: usize },
    #[error("noise scale of regime {regime} ({sigma:e}) underflows the density")]
    SigmaUnderflow { regime: usize, sigma: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("regime {regime} degenerated: {detail}")]
    Degenerate { regime: usize, detail: String },
    #[error(
        "all {restarts} restarts degenerated (a regime kept less than {min_weight} observations of posterior mass); the data may support fewer regimes"
    )]
    AllRestartsDegenerate { restarts: usize, min_weight: f64 },
    #[error("log-likelihood fell at iteration {iteration}: {before} -> {after}")]
    MonotonicityViolation {
        iteration: usize,
        before: f64,
        after: f64,
    },
    #[error("inputs are not aligned: {0}")]
    Misaligned(String),
}

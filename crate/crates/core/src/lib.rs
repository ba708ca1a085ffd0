// SPDX-License-Identifier: MIT OR Apache-2.0

//! Regime detection in multivariate price series: self-organizing-map
//! periodization, Markov-switching autoregression and multiple change-point
//! detection, with the ingestion and feature code they share.

#![forbid(unsafe_code)]

pub mod changepoint;
pub mod data;
pub mod msar;
pub mod som;

pub use changepoint::{
    detect, optimal_segmentation_for_k, select_num_segments, CostMode, CpConfig, CpError,
    PenaltyScheme, Segmentation,
};
pub use data::{
    build_features, compute_spread, impute_missing, parse_dataset, DataError, FeatureConfig,
    FeatureSet, ImputePolicy, QuotationWeek, SpreadAggregation, SpreadSeries, WeekId,
};
pub use msar::{
    cross_tabulate, em_fit, hamilton_filter, kim_smoother, regime_probabilities, simulate,
    CrossTab, EmConfig, EmFit, MeanFamily, MsError, MsParams, MsSpec, RegimeProbabilities,
    TransitionMatrix,
};
pub use som::{
    hac_macro_classes, periodize, train_som, MacroClassification, SomError, SomGrid, SomSchedule,
};

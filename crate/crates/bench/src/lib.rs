// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded inputs shared by the benchmarks.

#![forbid(unsafe_code)]

use bimetal_core::msar::{MsParams, RegimeMean, TransitionMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two linear AR(1) regimes with the persistence used throughout the tests.
pub fn two_regime_params() -> MsParams {
    MsParams {
        transition: TransitionMatrix::from_pq(0.844298, 0.746643),
        regimes: vec![
            RegimeMean::Linear { coef: vec![0.0, 0.5] },
            RegimeMean::Linear { coef: vec![3.0, -0.3] },
        ],
        sigma: vec![0.5, 1.5],
    }
}

/// Gaussian noise with a mean step at `len / 2`.
pub fn step_series(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + if t >= len / 2 { 3.0 } else { 0.0 }
        })
        .collect()
}

/// `n` standardized 14-dimensional observations.
pub fn feature_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..14).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

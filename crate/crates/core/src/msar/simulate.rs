// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{stationary_distribution, MsParams};
use super::MsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Leading draws discarded before the returned sample.
    pub burn_in: usize,
    /// Pre-sample values `y_{-1}, ..., y_{-lag}` (most recent first);
    /// zeros when unset.
    pub initial_lags: Option<Vec<f64>>,
    /// Regime (0-based) of the first draw; drawn from the stationary
    /// distribution when unset.
    pub start_regime: Option<usize>,
    /// Accept absorbing chains (`p = 1` or `q = 1`) and zero noise scales.
    pub allow_degenerate: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            burn_in: 100,
            initial_lags: None,
            start_regime: None,
            allow_degenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub series: Vec<f64>,
    /// 0-based regime of each returned observation.
    pub states: Vec<usize>,
}

fn draw_categorical<R: Rng>(rng: &mut R, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws a regime path from the chain and observations from the switching
/// autoregression driven by it. Deterministic for a given seed.
pub fn simulate(
    params: &MsParams,
    len: usize,
    seed: u64,
    options: &SimulationOptions,
) -> Result<Simulation, MsError> {
    params.validate(!options.allow_degenerate)?;
    if len == 0 {
        return Err(MsError::InvalidParams("simulation length must be positive".into()));
    }
    let n = params.n_regimes();
    let lag = params.lag();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut state = match options.start_regime {
        Some(s) if s < n => s,
        Some(s) => {
            return Err(MsError::InvalidParams(format!(
                "start regime {} out of range",
                s + 1
            )))
        }
        None => {
            let pi = stationary_distribution(&params.transition)?;
            draw_categorical(&mut rng, pi.into_iter())
        }
    };

    // `history` holds the most recent `lag` values, newest first.
    let mut history = match &options.initial_lags {
        Some(v) if v.len() == lag => v.clone(),
        Some(v) => {
            return Err(MsError::InvalidParams(format!(
                "{} initial lags given, model needs {lag}",
                v.len()
            )))
        }
        None => vec![0.0; lag],
    };

    let total = options.burn_in + len;
    let mut series = Vec::with_capacity(len);
    let mut states = Vec::with_capacity(len);
    for step in 0..total {
        if step > 0 {
            let from = state;
            state = draw_categorical(&mut rng, (0..n).map(|to| params.transition.get(to, from)));
        }
        let eps: f64 = rng.sample(StandardNormal);
        let y = params.regimes[state].mean(&history) + params.sigma[state] * eps;
        history.rotate_right(1);
        history[0] = y;
        if step >= options.burn_in {
            series.push(y);
            states.push(state);
        }
    }
    Ok(Simulation { series, states })
}

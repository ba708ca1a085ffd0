// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{
    expected_transitions, filter_from_densities, kim_smoother, log_densities, regime_probabilities,
    Design, FilterResult, RegimeProbabilities,
};
use super::mlp::Mlp;
use super::model::{
    stationary_distribution, MeanFamily, MsParams, MsSpec, RegimeMean, TransitionMatrix,
};
use super::MsError;

/// Largest tolerated drop in log-likelihood between EM iterations.
pub const MONOTONICITY_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
    /// A regime holding less posterior mass than this aborts the restart.
    pub min_weight: f64,
    /// Levenberg-Marquardt iterations per M-step for MLP regimes.
    pub mlp_steps: usize,
    /// A noise scale below this fraction of the series standard deviation
    /// also aborts the restart.
    pub min_sigma_ratio: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            n_restarts: 10,
            seed: 0,
            min_weight: 1.0,
            mlp_steps: 20,
            min_sigma_ratio: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    /// Final log-likelihood, or `None` when the restart degenerated.
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    /// Specification in fitted regime order (may differ from the requested
    /// order after relabeling).
    pub spec: MsSpec,
    pub params: MsParams,
    pub probabilities: RegimeProbabilities,
    /// Log-likelihood before the first M-step and after every iteration of
    /// the selected restart.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the selected restart; `None` when started from given params.
    pub restart: Option<usize>,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
    pub warnings: Vec<String>,
}

struct EStep {
    filter: FilterResult,
    smoothed: Vec<Vec<f64>>,
}

impl EStep {
    fn run(params: &MsParams, design: &Design, len: usize) -> Result<Self, MsError> {
        let dens = log_densities(params, design);
        let filter = filter_from_densities(params, &dens, len)?;
        let smoothed = kim_smoother(params, &filter);
        Ok(Self { filter, smoothed })
    }

    fn loglik(&self) -> f64 {
        self.filter.loglik
    }

    /// Posterior weights of regime `i` over the usable steps.
    fn weights(&self, i: usize) -> Vec<f64> {
        self.smoothed[self.filter.lag..].iter().map(|r| r[i]).collect()
    }
}

struct RunOutcome {
    params: MsParams,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

struct Context<'a> {
    design: &'a Design,
    len: usize,
    config: &'a EmConfig,
    sigma_floor: f64,
}

/// Fits a switching autoregression by expectation-maximization.
///
/// With `init`, a single run starts from those parameters. Otherwise
/// `config.n_restarts` seeded initializations are run and the highest final
/// log-likelihood is kept. The fitted regimes are ordered by decreasing
/// stationary probability, so regime 1 is the more frequent one.
pub fn em_fit(
    spec: &MsSpec,
    series: &[f64],
    init: Option<&MsParams>,
    config: &EmConfig,
) -> Result<EmFit, MsError> {
    spec.validate()?;
    if let Some(index) = series.iter().position(|v| !v.is_finite()) {
        return Err(MsError::NonFinite { index });
    }
    let n = spec.n_regimes();
    if series.len() < spec.lag + n + 1 {
        return Err(MsError::SeriesTooShort {
            len: series.len(),
            lag: spec.lag,
        });
    }
    let mut warnings = Vec::new();
    let needed = 10 * spec.parameter_count();
    if series.len() < needed {
        warnings.push(format!(
            "series has {} observations, fewer than 10 x {} parameters",
            series.len(),
            spec.parameter_count()
        ));
    }

    let design = Design::new(series, spec.lag);
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let sd = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / series.len() as f64).sqrt();
    let ctx = Context {
        design: &design,
        len: series.len(),
        config,
        sigma_floor: config.min_sigma_ratio * sd,
    };

    let (outcome, restart, restarts) = match init {
        Some(start) => {
            start.validate(true)?;
            if start.spec() != *spec {
                return Err(MsError::InvalidParams(
                    "initial parameters do not match the model specification".into(),
                ));
            }
            let out = run_em(start.clone(), &ctx)?;
            let summary = RestartSummary {
                restart: 0,
                loglik: out.trace.last().copied(),
                iterations: out.iterations,
                note: "given initial parameters".into(),
            };
            (out, None, vec![summary])
        }
        None => {
            let attempts = config.n_restarts.max(1);
            let results: Vec<Result<RunOutcome, MsError>> = (0..attempts)
                .into_par_iter()
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
                    let start = initial_params(spec, &ctx, r, &mut rng)?;
                    run_em(start, &ctx)
                })
                .collect();

            let mut summaries = Vec::with_capacity(attempts);
            let mut best: Option<(usize, RunOutcome)> = None;
            for (r, res) in results.into_iter().enumerate() {
                match res {
                    Ok(out) => {
                        let ll = *out.trace.last().expect("trace is never empty");
                        summaries.push(RestartSummary {
                            restart: r,
                            loglik: Some(ll),
                            iterations: out.iterations,
                            note: if out.converged { "converged" } else { "max_iter reached" }
                                .into(),
                        });
                        let better = best
                            .as_ref()
                            .is_none_or(|(_, b)| ll > *b.trace.last().expect("non-empty"));
                        if better {
                            best = Some((r, out));
                        }
                    }
                    Err(e @ MsError::Degenerate { .. }) => summaries.push(RestartSummary {
                        restart: r,
                        loglik: None,
                        iterations: 0,
                        note: e.to_string(),
                    }),
                    Err(e) => return Err(e),
                }
            }
            let Some((r, out)) = best else {
                return Err(MsError::AllRestartsDegenerate {
                    restarts: attempts,
                    min_weight: config.min_weight,
                });
            };
            (out, Some(r), summaries)
        }
    };

    let params = order_by_stationary_share(&outcome.params)?;
    let probabilities = regime_probabilities(&params, series)?;
    Ok(EmFit {
        spec: params.spec(),
        params,
        probabilities,
        trace: outcome.trace,
        iterations: outcome.iterations,
        converged: outcome.converged,
        restart,
        seed: config.seed,
        restarts,
        warnings,
    })
}

/// Relabels regimes by decreasing stationary probability (stable on ties).
pub fn order_by_stationary_share(params: &MsParams) -> Result<MsParams, MsError> {
    let pi = stationary_distribution(&params.transition)?;
    let mut order: Vec<usize> = (0..params.n_regimes()).collect();
    order.sort_by(|&a, &b| pi[b].total_cmp(&pi[a]));
    Ok(params.permuted(&order))
}

fn run_em(start: MsParams, ctx: &Context<'_>) -> Result<RunOutcome, MsError> {
    let mut params = start;
    let mut e = EStep::run(&params, ctx.design, ctx.len)?;
    let mut trace = vec![e.loglik()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < ctx.config.max_iter {
        let next = m_step(&params, &e, ctx)?;
        let next_e = EStep::run(&next, ctx.design, ctx.len)?;
        let gain = next_e.loglik() - e.loglik();
        if gain < -MONOTONICITY_SLACK {
            return Err(MsError::MonotonicityViolation {
                iteration: iterations + 1,
                before: e.loglik(),
                after: next_e.loglik(),
            });
        }
        iterations += 1;
        trace.push(next_e.loglik());
        params = next;
        e = next_e;
        if gain < ctx.config.tol {
            converged = true;
            break;
        }
    }
    Ok(RunOutcome {
        params,
        trace,
        iterations,
        converged,
    })
}

/// Generalized M-step: every block update is accepted only if it does not
/// lower its part of the expected complete-data log-likelihood, which keeps
/// the observed log-likelihood non-decreasing.
fn m_step(params: &MsParams, e: &EStep, ctx: &Context<'_>) -> Result<MsParams, MsError> {
    let n = params.n_regimes();
    let mut regimes = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for i in 0..n {
        let w = e.weights(i);
        let mass: f64 = w.iter().sum();
        if mass < ctx.config.min_weight {
            return Err(MsError::Degenerate {
                regime: i + 1,
                detail: format!("posterior mass {mass:.3} below {}", ctx.config.min_weight),
            });
        }
        let old_sse = weighted_sse(&params.regimes[i], ctx.design, &w);
        let candidate = update_mean(&params.regimes[i], ctx.design, &w, ctx.config.mlp_steps);
        let new_sse = weighted_sse(&candidate, ctx.design, &w);
        let (mean, sse) = if new_sse <= old_sse {
            (candidate, new_sse)
        } else {
            (params.regimes[i].clone(), old_sse)
        };
        let s = (sse / mass).sqrt();
        if !s.is_finite() || s <= ctx.sigma_floor {
            return Err(MsError::Degenerate {
                regime: i + 1,
                detail: format!("noise scale collapsed to {s:e}"),
            });
        }
        regimes.push(mean);
        sigma.push(s);
    }
    let transition = update_transition(params, e);
    Ok(MsParams {
        transition,
        regimes,
        sigma,
    })
}

fn weighted_sse(mean: &RegimeMean, design: &Design, w: &[f64]) -> f64 {
    design
        .x
        .iter()
        .zip(&design.y)
        .zip(w)
        .map(|((x, y), wt)| {
            let r = y - mean.mean(x);
            wt * r * r
        })
        .sum()
}

fn update_mean(current: &RegimeMean, design: &Design, w: &[f64], mlp_steps: usize) -> RegimeMean {
    match current {
        RegimeMean::Linear { .. } => RegimeMean::Linear {
            coef: weighted_least_squares(design, w),
        },
        RegimeMean::Mlp(net) => {
            let mut net = net.clone();
            net.fit_weighted(&design.x, &design.y, w, mlp_steps);
            RegimeMean::Mlp(net)
        }
    }
}

/// Minimizes `sum_t w_t (y_t - a_0 - sum_k a_k y_{t-k})^2` through an SVD
/// least-squares solve, which also copes with collinear regressors.
pub(crate) fn weighted_least_squares(design: &Design, w: &[f64]) -> Vec<f64> {
    let m = design.len();
    let p = design.lag + 1;
    let x = DMatrix::from_fn(m, p, |r, c| {
        let sw = w[r].max(0.0).sqrt();
        if c == 0 {
            sw
        } else {
            sw * design.x[r][c - 1]
        }
    });
    let b = DVector::from_fn(m, |r, _| w[r].max(0.0).sqrt() * design.y[r]);
    let svd = x.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    match svd.solve(&b, eps) {
        Ok(sol) => sol.iter().copied().collect(),
        Err(_) => vec![0.0; p],
    }
}

const TRANSITION_FLOOR: f64 = 1e-10;

/// Expected part of the complete-data log-likelihood that depends on the
/// transition matrix: the stationary start plus every usable transition.
fn transition_objective(a: &TransitionMatrix, start: &[f64], counts: &[Vec<f64>]) -> f64 {
    let Ok(pi) = stationary_distribution(a) else {
        return f64::NEG_INFINITY;
    };
    let mut q = 0.0;
    for (g, p) in start.iter().zip(&pi) {
        if *g > 0.0 {
            q += g * p.ln();
        }
    }
    for (i, row) in counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if *c > 0.0 {
                q += c * a.get(i, j).ln();
            }
        }
    }
    q
}

fn update_transition(params: &MsParams, e: &EStep) -> TransitionMatrix {
    let n = params.n_regimes();
    let counts = expected_transitions(params, &e.filter, &e.smoothed);
    let mut probs = vec![vec![0.0; n]; n];
    for j in 0..n {
        let col: f64 = (0..n).map(|i| counts[i][j]).sum();
        for i in 0..n {
            let raw = if col > 0.0 { counts[i][j] / col } else { 1.0 / n as f64 };
            probs[i][j] = raw.clamp(TRANSITION_FLOOR, 1.0);
        }
        let s: f64 = (0..n).map(|i| probs[i][j]).sum();
        (0..n).for_each(|i| probs[i][j] /= s);
    }
    let candidate = TransitionMatrix { probs };

    // The closed form ignores the stationary start term; back off towards
    // the current matrix if that costs more than the transitions gain.
    let start = &e.smoothed[e.filter.lag - 1];
    let current = &params.transition;
    let base = transition_objective(current, start, &counts);
    let mut step = 1.0;
    for _ in 0..40 {
        let trial = TransitionMatrix {
            probs: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| current.get(i, j) + step * (candidate.get(i, j) - current.get(i, j)))
                        .collect()
                })
                .collect(),
        };
        if transition_objective(&trial, start, &counts) >= base {
            return trial;
        }
        step *= 0.5;
    }
    current.clone()
}

/// Seeded starting point for restart `r`.
///
/// Observations are split into regimes by a score: the absolute residual of
/// a single-regime autoregression on even restarts (regimes differing in
/// noise) and the level of the series on odd ones (regimes differing in
/// mean). Restarts past the first pair jitter the split points and soft
/// assignments. Parameters then come from one weighted M-step.
fn initial_params<R: Rng>(
    spec: &MsSpec,
    ctx: &Context<'_>,
    restart: usize,
    rng: &mut R,
) -> Result<MsParams, MsError> {
    let n = spec.n_regimes();
    let design = ctx.design;
    let m = design.len();
    let jitter = restart >= 2;

    let pooled = weighted_least_squares(design, &vec![1.0; m]);
    let pooled_mean = RegimeMean::Linear { coef: pooled };
    let score: Vec<f64> = if restart.is_multiple_of(2) {
        design
            .x
            .iter()
            .zip(&design.y)
            .map(|(x, y)| (y - pooled_mean.mean(x)).abs())
            .collect()
    } else {
        design.y.clone()
    };
    let mut sorted = score.clone();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..n)
        .map(|k| {
            let mut frac = k as f64 / n as f64;
            if jitter {
                frac = (frac + rng.random_range(-0.15..0.15)).clamp(0.05, 0.95);
            }
            sorted[((frac * m as f64) as usize).min(m - 1)]
        })
        .collect();

    let weights: Vec<Vec<f64>> = score
        .iter()
        .map(|s| {
            let label = cuts.iter().filter(|c| s > c).count().min(n - 1);
            let mut row: Vec<f64> = (0..n)
                .map(|i| if i == label { 0.9 } else { 0.1 / (n - 1) as f64 })
                .collect();
            if jitter {
                row.iter_mut().for_each(|v| *v *= rng.random_range(0.5..1.5));
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
            }
            row
        })
        .collect();

    let stay = if jitter { rng.random_range(0.6..0.95) } else { 0.8 };
    let transition = TransitionMatrix::uniform_persistence(n, stay);

    let mut regimes = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for (i, family) in spec.regimes.iter().enumerate() {
        let w: Vec<f64> = weights.iter().map(|r| r[i]).collect();
        let mean = match family {
            MeanFamily::Linear => RegimeMean::Linear {
                coef: weighted_least_squares(design, &w),
            },
            MeanFamily::Mlp { hidden } => {
                let mut net = Mlp::random(spec.lag, *hidden, 0.5, rng);
                let total: f64 = w.iter().sum();
                net.b_out = design.y.iter().zip(&w).map(|(y, wt)| y * wt).sum::<f64>() / total;
                net.fit_weighted(&design.x, &design.y, &w, 5 * ctx.config.mlp_steps);
                RegimeMean::Mlp(net)
            }
        };
        let mass: f64 = w.iter().sum();
        let s = (weighted_sse(&mean, design, &w) / mass).sqrt();
        if s.is_nan() || s <= ctx.sigma_floor {
            return Err(MsError::Degenerate {
                regime: i + 1,
                detail: "initial noise scale is zero".into(),
            });
        }
        regimes.push(mean);
        sigma.push(s);
    }
    Ok(MsParams {
        transition,
        regimes,
        sigma,
    })
}

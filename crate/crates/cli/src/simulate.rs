// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic quotation datasets with known regimes and change-points.
//!
//! The spread follows a two-regime switching autoregression in absolute
//! value, raised by a constant between the first and second seam. Three
//! gold-silver prices are then placed so that their range is exactly the
//! spread: one at a random-walk base level `g`, one at `g + s` and one at
//! `g + u s` with `u` uniform on (0, 1), the centres' roles shuffled each
//! day. The other three series are independent random walks.

use std::fs;
use std::path::{Path, PathBuf};

use bimetal_core::data::{write_dataset, QuotationWeek, WeekId};
use bimetal_core::msar::{simulate, MsParams, RegimeMean, SimulationOptions, TransitionMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::artifacts::to_json;
use crate::error::PipelineError;

/// Persistence probabilities of the generating chain.
pub const DEFAULT_P: f64 = 0.844298;
pub const DEFAULT_Q: f64 = 0.746643;

/// First week of every synthetic dataset.
pub const START: WeekId = WeekId { year: 1821, week: 1 };
const WEEKS_PER_YEAR: u32 = 52;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub weeks: usize,
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    /// Indices where the spread level steps; defaults to `weeks / 3` and
    /// `2 * weeks / 3`.
    pub seams: Option<Vec<usize>>,
    /// Level added to the spread from odd-numbered seams until the next seam.
    pub level_shift: f64,
    pub output: PathBuf,
    /// Ground-truth sidecar; defaults to the output path with `.truth.json`.
    pub truth: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            weeks: 500,
            seed: 1,
            p: DEFAULT_P,
            q: DEFAULT_Q,
            seams: None,
            level_shift: 0.1,
            output: PathBuf::from("synthetic.csv"),
            truth: None,
        }
    }
}

impl SimulateConfig {
    pub fn truth_path(&self) -> PathBuf {
        self.truth.clone().unwrap_or_else(|| {
            let mut name = self.output.file_stem().unwrap_or_default().to_os_string();
            name.push(".truth.json");
            self.output.with_file_name(name)
        })
    }

    pub fn seam_indices(&self) -> Vec<usize> {
        self.seams
            .clone()
            .unwrap_or_else(|| vec![self.weeks / 3, 2 * self.weeks / 3])
    }

    /// Calm regime 1 and volatile regime 2, both AR(1).
    pub fn params(&self) -> MsParams {
        MsParams {
            transition: TransitionMatrix::from_pq(self.p, self.q),
            regimes: vec![
                RegimeMean::Linear { coef: vec![0.02, 0.5] },
                RegimeMean::Linear { coef: vec![0.04, 0.2] },
            ],
            sigma: vec![0.005, 0.02],
        }
    }
}

/// Ground truth written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub weeks: usize,
    pub params: MsParams,
    /// Regime of every week, 1-based.
    pub states: Vec<usize>,
    /// Change-points of the spread level, as first indices of new segments.
    pub tau: Vec<usize>,
    pub level_shift: f64,
    pub spread: Vec<f64>,
}

pub fn week_id(index: usize) -> WeekId {
    let offset = START.week as usize - 1 + index;
    WeekId::new(
        START.year + (offset / WEEKS_PER_YEAR as usize) as i32,
        (offset % WEEKS_PER_YEAR as usize) as u32 + 1,
    )
}

fn invalid(message: String) -> PipelineError {
    PipelineError::Usage(format!("simulate: {message}"))
}

/// Builds the synthetic weeks and their ground truth.
pub fn synthesize(config: &SimulateConfig) -> Result<(Vec<QuotationWeek>, Truth), PipelineError> {
    if config.weeks < 2 {
        return Err(invalid("weeks must be at least 2".into()));
    }
    if !(config.level_shift.is_finite() && config.level_shift >= 0.0) {
        return Err(invalid(format!("level shift {} must be finite and non-negative", config.level_shift)));
    }
    let mut seams = config.seam_indices();
    seams.sort_unstable();
    seams.dedup();
    if seams.iter().any(|&s| s == 0 || s >= config.weeks) {
        return Err(invalid(format!("seams must lie in 1..{}", config.weeks)));
    }
    let params = config.params();
    let sim = simulate(&params, config.weeks, config.seed, &SimulationOptions::default())
        .map_err(|source| PipelineError::Ms { stage: "simulate", source })?;

    let spread: Vec<f64> = sim
        .series
        .iter()
        .enumerate()
        .map(|(t, y)| {
            let passed = seams.iter().filter(|&&s| s <= t).count();
            y.abs() + if passed % 2 == 1 { config.level_shift } else { 0.0 }
        })
        .collect();

    // Independent stream for the prices, so the regime path does not depend
    // on how many price draws are made.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let step = |sd: f64| Normal::new(0.0, sd).expect("positive scale");
    let (gold_step, fx_step, phv_step) = (step(0.01), step(0.02), step(0.002));
    let mut gold = 15.5;
    let mut fx = [25.2, 13.6];
    let mut phv = 1.85;
    let mut weeks = Vec::with_capacity(config.weeks);
    for (t, &s) in spread.iter().enumerate() {
        // One row of six prices per quotation day, Tuesday first.
        let mut days = [[0.0; 6]; 2];
        for row in &mut days {
            gold += gold_step.sample(&mut rng);
            let u: f64 = rng.random();
            let mut centres = [gold, gold + u * s, gold + s];
            centres.shuffle(&mut rng);
            row[..3].copy_from_slice(&centres);
            for (slot, level) in row[3..5].iter_mut().zip(fx.iter_mut()) {
                *level += fx_step.sample(&mut rng);
                *slot = *level;
            }
            phv += phv_step.sample(&mut rng);
            row[5] = phv;
        }
        let prices = std::array::from_fn(|series| [days[0][series], days[1][series]]);
        weeks.push(QuotationWeek::complete(week_id(t), prices));
    }

    let truth = Truth {
        seed: config.seed,
        weeks: config.weeks,
        params,
        states: sim.states.iter().map(|s| s + 1).collect(),
        tau: seams,
        level_shift: config.level_shift,
        spread,
    };
    Ok((weeks, truth))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(format!("cannot create {}", parent.display()), e))?;
    }
    fs::write(path, bytes).map_err(|e| PipelineError::io(format!("cannot write {}", path.display()), e))
}

/// Writes the dataset and its sidecar; returns the truth.
pub fn cmd_simulate(config: &SimulateConfig) -> Result<Truth, PipelineError> {
    let (weeks, truth) = synthesize(config)?;
    let mut csv = Vec::new();
    write_dataset(&weeks, &mut csv).map_err(|source| PipelineError::Data { stage: "simulate", source })?;
    write_file(&config.output, &csv)?;
    write_file(&config.truth_path(), &to_json(&truth))?;
    Ok(truth)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Kohonen self-organizing map on a rectangular grid, Ward reduction of its
//! code vectors to macro-classes, and the week-to-class periodization.

mod hac;
mod periodize;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hac::{cut_linkage, hac_macro_classes, ward_linkage, Merge, NodeClassification};
pub use periodize::{periodize, ClassInterval, ClassSummary, MacroClassification};

#[derive(Debug, thiserror::Error)]
pub enum SomError {
    #[error("no observations to train on")]
    Empty,
    #[error("feature dimension must be at least 1")]
    ZeroDimension,
    #[error("grid must have at least one row and one column")]
    EmptyGrid,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k = {k} outside 1..={nodes}")]
    ClassCount { k: usize, nodes: usize },
    #[error("invalid schedule: {0}")]
    Schedule(String),
}

/// Learning-rate and neighbourhood schedule, both decaying linearly over all
/// presentations of the training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomSchedule {
    pub epochs: usize,
    pub learning_rate_start: f64,
    pub learning_rate_end: f64,
    /// Defaults to `max(rows, cols) / 2` when unset.
    pub radius_start: Option<f64>,
    pub radius_end: f64,
}

impl Default for SomSchedule {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate_start: 0.5,
            learning_rate_end: 0.01,
            radius_start: None,
            radius_end: 0.5,
        }
    }
}

impl SomSchedule {
    fn validate(&self) -> Result<(), SomError> {
        if self.epochs == 0 {
            return Err(SomError::Schedule("epochs must be positive".into()));
        }
        let lr_ok = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        if !lr_ok(self.learning_rate_start) || !lr_ok(self.learning_rate_end) {
            return Err(SomError::Schedule("learning rates must lie in (0, 1]".into()));
        }
        let r_ok = |v: f64| v.is_finite() && v > 0.0;
        if !r_ok(self.radius_end) || !self.radius_start.is_none_or(r_ok) {
            return Err(SomError::Schedule("radii must be positive".into()));
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) map.
///
/// Node `r * cols + c` sits at grid position `(r, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub code_vectors: Vec<Vec<f64>>,
    pub trained_epochs: usize,
    pub seed: u64,
    pub schedule: SomSchedule,
}

impl SomGrid {
    pub fn node_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn position(&self, node: usize) -> (usize, usize) {
        (node / self.cols, node % self.cols)
    }

    fn grid_dist2(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.position(a);
        let (rb, cb) = self.position(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        dr * dr + dc * dc
    }

    /// Code vectors drawn from the data with a seeded sample, without
    /// replacement when there are at least as many observations as nodes.
    pub fn initialize(
        data: &[Vec<f64>],
        rows: usize,
        cols: usize,
        seed: u64,
    ) -> Result<Self, SomError> {
        let dim = check_data(data)?;
        if rows == 0 || cols == 0 {
            return Err(SomError::EmptyGrid);
        }
        let nodes = rows * cols;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<usize> = if data.len() >= nodes {
            index::sample(&mut rng, data.len(), nodes).into_vec()
        } else {
            (0..nodes).map(|_| rng.random_range(0..data.len())).collect()
        };
        Ok(Self {
            rows,
            cols,
            dim,
            code_vectors: picks.into_iter().map(|i| data[i].clone()).collect(),
            trained_epochs: 0,
            seed,
            schedule: SomSchedule::default(),
        })
    }

    /// Node whose code vector is nearest in squared Euclidean distance;
    /// the lowest index wins ties.
    pub fn best_matching_unit(&self, v: &[f64]) -> Result<usize, SomError> {
        if v.len() != self.dim {
            return Err(SomError::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        Ok(self.bmu_unchecked(v).0)
    }

    fn bmu_unchecked(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (node, w) in self.code_vectors.iter().enumerate() {
            let d = sq_dist(w, v);
            if d < best.1 {
                best = (node, d);
            }
        }
        best
    }

    /// Mean squared distance from each observation to its best-matching unit.
    pub fn quantization_error(&self, data: &[Vec<f64>]) -> Result<f64, SomError> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for v in data {
            if v.len() != self.dim {
                return Err(SomError::DimensionMismatch {
                    expected: self.dim,
                    actual: v.len(),
                });
            }
            total += self.bmu_unchecked(v).1;
        }
        Ok(total / data.len() as f64)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_data(data: &[Vec<f64>]) -> Result<usize, SomError> {
    let dim = data.first().ok_or(SomError::Empty)?.len();
    if dim == 0 {
        return Err(SomError::ZeroDimension);
    }
    if let Some(bad) = data.iter().find(|v| v.len() != dim) {
        return Err(SomError::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(dim)
}

/// Trains a `rows x cols` map with the online Kohonen rule.
///
/// Each epoch presents every observation once in a seeded random order. At
/// presentation `s` of `S`, the learning rate and the Gaussian neighbourhood
/// radius are interpolated linearly between their start and end values.
pub fn train_som(
    data: &[Vec<f64>],
    rows: usize,
    cols: usize,
    schedule: &SomSchedule,
    seed: u64,
) -> Result<SomGrid, SomError> {
    schedule.validate()?;
    let mut grid = SomGrid::initialize(data, rows, cols, seed)?;
    grid.schedule = *schedule;

    let nodes = grid.node_count();
    let grid_d2: Vec<Vec<f64>> = (0..nodes)
        .map(|a| (0..nodes).map(|b| grid.grid_dist2(a, b)).collect())
        .collect();

    let radius_start = schedule
        .radius_start
        .unwrap_or(rows.max(cols) as f64 / 2.0);
    let total = schedule.epochs * data.len();
    let denom = total.saturating_sub(1).max(1) as f64;

    // Separate stream from initialization so that changing the grid size does
    // not shift the presentation order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0usize;
    for _ in 0..schedule.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let frac = step as f64 / denom;
            let lr = schedule.learning_rate_start
                + (schedule.learning_rate_end - schedule.learning_rate_start) * frac;
            let radius = radius_start + (schedule.radius_end - radius_start) * frac;
            let two_r2 = 2.0 * radius * radius;

            let x = &data[i];
            let (winner, _) = grid.bmu_unchecked(x);
            for (node, w) in grid.code_vectors.iter_mut().enumerate() {
                let h = (-grid_d2[winner][node] / two_r2).exp();
                let rate = lr * h;
                if rate < 1e-12 {
                    continue;
                }
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += rate * (xj - *wj);
                }
            }
            step += 1;
        }
        grid.trained_epochs += 1;
    }
    Ok(grid)
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use super::cost::SegCostTable;
use super::CpError;

/// Relative slack under which two contrasts count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

fn tied_or_better(candidate: f64, best: f64) -> bool {
    candidate <= best + TIE_TOLERANCE * (1.0 + best.abs().max(candidate.abs()))
}

/// Optimal contrasts of every suffix for every segment count.
///
/// `tail[k - 1][i]` is the smallest total contrast of `series[i..T]` split
/// into `k` segments, `+inf` when infeasible.
#[derive(Debug, Clone)]
pub struct SuffixCosts {
    pub k_max: usize,
    tail: Vec<Vec<f64>>,
}

impl SuffixCosts {
    pub fn compute(table: &SegCostTable, k_max: usize) -> Result<Self, CpError> {
        check_feasible(table, k_max)?;
        let t = table.len;
        let m = table.min_seg_len;
        let mut tail: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        tail.push((0..=t).map(|i| if i < t { table.cost(i, t) } else { f64::INFINITY }).collect());
        for k in 2..=k_max {
            let prev = &tail[k - 2];
            let mut cur = vec![f64::INFINITY; t + 1];
            // At least k segments of length m must fit in series[i..T].
            for (i, slot) in cur.iter_mut().enumerate().take((t + 1).saturating_sub(k * m)) {
                let row = table.row(i);
                let mut best = f64::INFINITY;
                for j in i + m..=t - (k - 1) * m {
                    let c = row[j - i - 1] + prev[j];
                    if c < best {
                        best = c;
                    }
                }
                *slot = best;
            }
            tail.push(cur);
        }
        Ok(Self { k_max, tail })
    }

    /// `J_k`: optimal contrast of the whole series in `k` segments.
    pub fn total(&self, k: usize) -> f64 {
        self.tail[k - 1][0]
    }

    /// Change-points of the optimal `k`-segmentation. Among tied optima the
    /// earliest split is taken at each position, so the result is the
    /// lexicographically first optimal change-point sequence.
    pub fn change_points(&self, table: &SegCostTable, k: usize) -> Vec<usize> {
        let t = table.len;
        let m = table.min_seg_len;
        let mut tau = Vec::with_capacity(k.saturating_sub(1));
        let mut i = 0;
        for remaining in (2..=k).rev() {
            let target = self.tail[remaining - 1][i];
            let next = &self.tail[remaining - 2];
            let row = table.row(i);
            let j = (i + m..=t - (remaining - 1) * m)
                .find(|&j| tied_or_better(row[j - i - 1] + next[j], target))
                .expect("optimum is attained by some split");
            tau.push(j);
            i = j;
        }
        tau
    }
}

pub(crate) fn check_feasible(table: &SegCostTable, k: usize) -> Result<(), CpError> {
    if k == 0 || k * table.min_seg_len > table.len {
        return Err(CpError::Infeasible {
            k,
            len: table.len,
            min_seg_len: table.min_seg_len,
        });
    }
    Ok(())
}

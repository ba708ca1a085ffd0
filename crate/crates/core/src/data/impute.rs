// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{DataError, Day, QuotationWeek, Series, WeekId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputePolicy {
    /// Longest run of consecutive missing weeks tolerated in one column.
    pub max_gap: usize,
}

impl Default for ImputePolicy {
    fn default() -> Self {
        Self { max_gap: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputationMethod {
    Linear,
    BackFill,
    ForwardFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedCell {
    pub row: usize,
    pub week: WeekId,
    pub series: Series,
    pub day: Day,
    pub value: f64,
    pub method: ImputationMethod,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub cells: Vec<ImputedCell>,
}

impl ImputationReport {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Fills missing quotations column by column (one column per series and day).
///
/// Interior gaps are linearly interpolated over the row index; leading gaps
/// take the first observed value and trailing gaps the last.
pub fn impute_missing(
    data: &[QuotationWeek],
    policy: &ImputePolicy,
) -> Result<(Vec<QuotationWeek>, ImputationReport), DataError> {
    let mut out = data.to_vec();
    let mut report = ImputationReport::default();

    for series in Series::ALL {
        for day in Day::ALL {
            let column: Vec<Option<f64>> = data.iter().map(|w| w.get(series, day)).collect();
            let observed: Vec<usize> = column
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|_| i))
                .collect();
            if observed.is_empty() {
                return Err(DataError::EmptyColumn { series, day });
            }

            for (start, end) in missing_runs(&column) {
                let length = end - start;
                if length > policy.max_gap {
                    return Err(DataError::GapTooLong {
                        series,
                        day,
                        from: data[start].id,
                        to: data[end - 1].id,
                        length,
                        max_gap: policy.max_gap,
                    });
                }
                let before = start.checked_sub(1).and_then(|i| column[i].map(|v| (i, v)));
                let after = column.get(end).copied().flatten().map(|v| (end, v));
                for row in start..end {
                    let (value, method) = match (before, after) {
                        (Some((i0, v0)), Some((i1, v1))) => {
                            let frac = (row - i0) as f64 / (i1 - i0) as f64;
                            (v0 + frac * (v1 - v0), ImputationMethod::Linear)
                        }
                        (None, Some((_, v1))) => (v1, ImputationMethod::BackFill),
                        (Some((_, v0)), None) => (v0, ImputationMethod::ForwardFill),
                        (None, None) => unreachable!("column has observed values"),
                    };
                    out[row].set(series, day, Some(value));
                    report.cells.push(ImputedCell {
                        row,
                        week: data[row].id,
                        series,
                        day,
                        value,
                        method,
                    });
                }
            }
        }
    }
    report.cells.sort_by_key(|c| (c.row, c.series, c.day));
    Ok((out, report))
}

/// Half-open index ranges of consecutive `None`s.
fn missing_runs(column: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, v) in column.iter().enumerate() {
        match (v, start) {
            (None, None) => start = Some(i),
            (Some(_), Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, column.len()));
    }
    runs
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weekly quotation records and the transformations that feed the models:
//! parsing, gap filling, SOM feature vectors and the spread series.

mod features;
mod impute;
mod parse;
mod spread;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use features::{build_features, FeatureConfig, FeatureSet, FeatureVector, HplForm};
pub use impute::{impute_missing, ImputationMethod, ImputationReport, ImputePolicy, ImputedCell};
pub use parse::{parse_dataset, write_dataset, HEADER};
pub use spread::{compute_spread, SpreadAggregation, SpreadPoint, SpreadSeries};

/// The six quoted series, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    /// Paris gold-silver price.
    Poa,
    /// London gold-silver price.
    Lgs,
    /// Hamburg gold-silver price.
    Hoa,
    /// Pound in francs.
    Lpv,
    /// Pound in marks.
    Hlv,
    /// Mark in francs.
    Phv,
}

impl Series {
    pub const ALL: [Series; 6] = [
        Series::Poa,
        Series::Lgs,
        Series::Hoa,
        Series::Lpv,
        Series::Hlv,
        Series::Phv,
    ];

    /// The three gold-silver prices whose spread measures integration.
    pub const GOLD_SILVER: [Series; 3] = [Series::Poa, Series::Lgs, Series::Hoa];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Series::Poa => "poa",
            Series::Lgs => "lgs",
            Series::Hoa => "hoa",
            Series::Lpv => "lpv",
            Series::Hlv => "hlv",
            Series::Phv => "phv",
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Quotation day within a week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Day {
    Tuesday,
    Friday,
}

impl Day {
    pub const ALL: [Day; 2] = [Day::Tuesday, Day::Friday];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column suffix used in the delimited format.
    pub fn suffix(self) -> &'static str {
        match self {
            Day::Tuesday => "t",
            Day::Friday => "f",
        }
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Day::Tuesday => f.write_str("tuesday"),
            Day::Friday => f.write_str("friday"),
        }
    }
}

/// Calendar position of a week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeekId {
    pub year: i32,
    pub week: u32,
}

impl WeekId {
    pub fn new(year: i32, week: u32) -> Self {
        Self { year, week }
    }
}

impl fmt::Display for WeekId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{:02}", self.year, self.week)
    }
}

/// One calendar week: six series quoted on Tuesday and Friday.
///
/// `prices[series][day]` is `None` when the quotation is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotationWeek {
    pub id: WeekId,
    pub prices: [[Option<f64>; 2]; 6],
}

impl QuotationWeek {
    pub fn new(id: WeekId, prices: [[Option<f64>; 2]; 6]) -> Self {
        Self { id, prices }
    }

    /// A week with every quotation present.
    pub fn complete(id: WeekId, prices: [[f64; 2]; 6]) -> Self {
        Self {
            id,
            prices: prices.map(|pair| pair.map(Some)),
        }
    }

    pub fn get(&self, series: Series, day: Day) -> Option<f64> {
        self.prices[series.index()][day.index()]
    }

    pub fn set(&mut self, series: Series, day: Day, value: Option<f64>) {
        self.prices[series.index()][day.index()] = value;
    }

    pub fn is_complete(&self) -> bool {
        self.prices.iter().flatten().all(Option::is_some)
    }

    pub fn missing_count(&self) -> usize {
        self.prices.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Present value, or [`DataError::Incomplete`] naming the cell.
    pub(crate) fn require(&self, series: Series, day: Day) -> Result<f64, DataError> {
        self.get(series, day).ok_or(DataError::Incomplete {
            week: self.id,
            series,
            day,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: non-positive price {value} for {series} {day}")]
    NonPositive {
        line: u64,
        series: Series,
        day: Day,
        value: f64,
    },
    #[error("line {line}: duplicate week {week}")]
    DuplicateWeek { line: u64, week: WeekId },
    #[error("line {line}: weeks out of order ({week} follows {previous})")]
    OutOfOrder {
        line: u64,
        week: WeekId,
        previous: WeekId,
    },
    #[error("no data rows")]
    NoRows,
    #[error("gap of {length} missing values in {series} {day} from week {from} to {to} exceeds max_gap {max_gap}")]
    GapTooLong {
        series: Series,
        day: Day,
        from: WeekId,
        to: WeekId,
        length: usize,
        max_gap: usize,
    },
    #[error("{series} {day} has no observed values")]
    EmptyColumn { series: Series, day: Day },
    #[error("week {week} is missing {series} {day}; impute before this step")]
    Incomplete {
        week: WeekId,
        series: Series,
        day: Day,
    },
    #[error("feature `{name}` has zero variance and cannot be standardized")]
    ZeroVariance { name: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

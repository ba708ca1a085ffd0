// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DataError, Day, QuotationWeek, Series, WeekId};

/// How the two quotation days of a week become spread observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadAggregation {
    /// One value per week: mean of the Tuesday and Friday spreads.
    #[default]
    WeeklyMean,
    /// Two values per week, Tuesday then Friday.
    PerQuotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    pub week_ref: usize,
    pub week: WeekId,
    /// Set only for per-quotation series.
    pub day: Option<Day>,
}

impl SpreadPoint {
    pub fn label(&self) -> String {
        match self.day {
            Some(day) => format!("{}{}", self.week, day.suffix()),
            None => self.week.to_string(),
        }
    }
}

/// Spread between the highest and lowest of the three gold-silver prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSeries {
    pub aggregation: SpreadAggregation,
    pub index: Vec<SpreadPoint>,
    pub values: Vec<f64>,
}

impl SpreadSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.index.iter().map(SpreadPoint::label).collect()
    }

    pub fn write_delimited<W: Write>(&self, sink: W) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(["year", "week", "day", "spread"])?;
        for (point, value) in self.index.iter().zip(&self.values) {
            writer.write_record([
                point.week.year.to_string(),
                point.week.week.to_string(),
                point.day.map(|d| d.to_string()).unwrap_or_default(),
                value.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`SpreadSeries::write_delimited`].
    pub fn read_delimited<R: Read>(source: R) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let mut index: Vec<SpreadPoint> = Vec::new();
        let mut values = Vec::new();
        let mut per_quotation = None;
        for (k, record) in reader.records().enumerate() {
            let record = record?;
            let line = k as u64 + 2;
            let parse_err = |message: String| DataError::Parse { line, message };
            if record.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, found {}", record.len())));
            }
            let year = record[0]
                .parse()
                .map_err(|_| parse_err(format!("bad year `{}`", &record[0])))?;
            let wk = record[1]
                .parse()
                .map_err(|_| parse_err(format!("bad week `{}`", &record[1])))?;
            let day = match &record[2] {
                "" => None,
                "tuesday" => Some(Day::Tuesday),
                "friday" => Some(Day::Friday),
                other => return Err(parse_err(format!("bad day `{other}`"))),
            };
            if *per_quotation.get_or_insert(day.is_some()) != day.is_some() {
                return Err(parse_err("mixes weekly and per-quotation rows".into()));
            }
            let value: f64 = record[3]
                .parse()
                .map_err(|_| parse_err(format!("bad spread `{}`", &record[3])))?;
            let week = WeekId::new(year, wk);
            let week_ref = match index.last() {
                Some(prev) if prev.week == week => prev.week_ref,
                Some(prev) => prev.week_ref + 1,
                None => 0,
            };
            index.push(SpreadPoint { week_ref, week, day });
            values.push(value);
        }
        let aggregation = match per_quotation {
            None => return Err(DataError::NoRows),
            Some(true) => SpreadAggregation::PerQuotation,
            Some(false) => SpreadAggregation::WeeklyMean,
        };
        Ok(Self {
            aggregation,
            index,
            values,
        })
    }
}

fn day_spread(week: &QuotationWeek, day: Day) -> Result<f64, DataError> {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for series in Series::GOLD_SILVER {
        let v = week.require(series, day)?;
        hi = hi.max(v);
        lo = lo.min(v);
    }
    Ok(hi - lo)
}

pub fn compute_spread(
    data: &[QuotationWeek],
    aggregation: SpreadAggregation,
) -> Result<SpreadSeries, DataError> {
    let mut index = Vec::new();
    let mut values = Vec::new();
    for (week_ref, week) in data.iter().enumerate() {
        let tuesday = day_spread(week, Day::Tuesday)?;
        let friday = day_spread(week, Day::Friday)?;
        match aggregation {
            SpreadAggregation::WeeklyMean => {
                index.push(SpreadPoint {
                    week_ref,
                    week: week.id,
                    day: None,
                });
                values.push((tuesday + friday) / 2.0);
            }
            SpreadAggregation::PerQuotation => {
                for (day, v) in [(Day::Tuesday, tuesday), (Day::Friday, friday)] {
                    index.push(SpreadPoint {
                        week_ref,
                        week: week.id,
                        day: Some(day),
                    });
                    values.push(v);
                }
            }
        }
    }
    Ok(SpreadSeries {
        aggregation,
        index,
        values,
    })
}

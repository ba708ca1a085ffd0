// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::{Read, Write};

use super::{DataError, Day, QuotationWeek, Series, WeekId};

/// Column names of the delimited quotation format, in canonical order.
pub const HEADER: [&str; 14] = [
    "year", "week", "poa_t", "poa_f", "lgs_t", "lgs_f", "hoa_t", "hoa_f", "lpv_t", "lpv_f",
    "hlv_t", "hlv_f", "phv_t", "phv_f",
];

/// Position of each canonical column within the file's header.
struct ColumnMap {
    year: usize,
    week: usize,
    prices: [[usize; 2]; 6],
}

impl ColumnMap {
    fn from_header(header: &csv::StringRecord) -> Result<Self, DataError> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| DataError::Parse {
                    line: 1,
                    message: format!("header is missing column `{name}`"),
                })
        };
        let mut prices = [[0usize; 2]; 6];
        for series in Series::ALL {
            for day in Day::ALL {
                prices[series.index()][day.index()] =
                    find(&format!("{}_{}", series.name(), day.suffix()))?;
            }
        }
        Ok(Self {
            year: find("year")?,
            week: find("week")?,
            prices,
        })
    }
}

/// Reads a comma-separated quotation table with a header row.
///
/// Rows are returned in file order. Empty price cells are missing values.
/// Weeks must be strictly increasing and every present price positive.
pub fn parse_dataset<R: Read>(source: R) -> Result<Vec<QuotationWeek>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?;
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(DataError::NoRows);
    }
    let columns = ColumnMap::from_header(header)?;

    let mut weeks: Vec<QuotationWeek> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            DataError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let week = parse_row(&record, &columns, line)?;
        if let Some(previous) = weeks.last().map(|w| w.id) {
            if week.id == previous {
                return Err(DataError::DuplicateWeek {
                    line,
                    week: week.id,
                });
            }
            if week.id < previous {
                return Err(DataError::OutOfOrder {
                    line,
                    week: week.id,
                    previous,
                });
            }
        }
        weeks.push(week);
    }
    if weeks.is_empty() {
        return Err(DataError::NoRows);
    }
    Ok(weeks)
}

fn parse_row(
    record: &csv::StringRecord,
    columns: &ColumnMap,
    line: u64,
) -> Result<QuotationWeek, DataError> {
    let cell = |idx: usize| record.get(idx).unwrap_or("");
    let parse_err = |message: String| DataError::Parse { line, message };

    let year: i32 = cell(columns.year)
        .parse()
        .map_err(|_| parse_err(format!("invalid year `{}`", cell(columns.year))))?;
    let week: u32 = cell(columns.week)
        .parse()
        .map_err(|_| parse_err(format!("invalid week `{}`", cell(columns.week))))?;
    if !(1..=53).contains(&week) {
        return Err(parse_err(format!("week {week} outside 1..=53")));
    }

    let mut prices = [[None; 2]; 6];
    for series in Series::ALL {
        for day in Day::ALL {
            let raw = cell(columns.prices[series.index()][day.index()]);
            if raw.is_empty() {
                continue;
            }
            let value: f64 = raw.parse().map_err(|_| {
                parse_err(format!("invalid number `{raw}` for {series} {day}"))
            })?;
            if !value.is_finite() {
                return Err(parse_err(format!("non-finite value for {series} {day}")));
            }
            if value <= 0.0 {
                return Err(DataError::NonPositive {
                    line,
                    series,
                    day,
                    value,
                });
            }
            prices[series.index()][day.index()] = Some(value);
        }
    }
    Ok(QuotationWeek::new(WeekId::new(year, week), prices))
}

/// Writes weeks in the canonical delimited layout accepted by [`parse_dataset`].
pub fn write_dataset<W: Write>(weeks: &[QuotationWeek], sink: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(HEADER)?;
    for week in weeks {
        let mut row = Vec::with_capacity(HEADER.len());
        row.push(week.id.year.to_string());
        row.push(week.id.week.to_string());
        for series in Series::ALL {
            for day in Day::ALL {
                row.push(week.get(series, day).map(|v| v.to_string()).unwrap_or_default());
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

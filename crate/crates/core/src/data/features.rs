// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DataError, Day, QuotationWeek, Series, WeekId};

/// How the Hamburg-versus-Paris/London indicator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HplForm {
    /// `hoa - (poa + lgs) / 2`
    #[default]
    Difference,
    /// `hoa / ((poa + lgs) / 2)`
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub hpl_form: HplForm,
    /// Append the two hpl values to the standardized SOM input.
    pub include_hpl: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hpl_form: HplForm::Difference,
            include_hpl: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Row index into the source dataset.
    pub week_ref: usize,
    pub week: WeekId,
    /// Six series by two quotation days, series-major.
    pub base: [f64; 12],
    /// One hpl value per quotation day.
    pub hpl: [f64; 2],
    /// Z-scored model input: `base`, then `hpl` when enabled.
    pub standardized: Vec<f64>,
}

impl FeatureVector {
    /// Unstandardized variables: the twelve quotations followed by hpl.
    pub fn raw(&self) -> Vec<f64> {
        self.base.iter().chain(self.hpl.iter()).copied().collect()
    }
}

/// Feature vectors plus the statistics needed to reproduce the z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub config: FeatureConfig,
    /// Names of the standardized coordinates.
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Standardized inputs, one row per week.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(|v| v.standardized.clone()).collect()
    }

    /// Names of the variables returned by [`FeatureVector::raw`].
    pub fn raw_names() -> Vec<String> {
        let mut names = base_names();
        names.extend(hpl_names());
        names
    }

    /// Writes one row per week: year, week, raw variables, then `z_`-prefixed
    /// standardized coordinates.
    pub fn write_delimited<W: Write>(&self, sink: W) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = vec!["year".to_string(), "week".to_string()];
        header.extend(Self::raw_names());
        header.extend(self.names.iter().map(|n| format!("z_{n}")));
        writer.write_record(&header)?;
        for v in &self.vectors {
            let mut row = vec![v.week.year.to_string(), v.week.week.to_string()];
            row.extend(v.raw().iter().map(f64::to_string));
            row.extend(v.standardized.iter().map(f64::to_string));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn base_names() -> Vec<String> {
    Series::ALL
        .iter()
        .flat_map(|s| Day::ALL.iter().map(move |d| format!("{}_{}", s.name(), d.suffix())))
        .collect()
}

fn hpl_names() -> Vec<String> {
    Day::ALL.iter().map(|d| format!("hpl_{}", d.suffix())).collect()
}

/// Builds one feature vector per week and z-scores every coordinate over the
/// whole dataset (population variance).
pub fn build_features(
    data: &[QuotationWeek],
    config: &FeatureConfig,
) -> Result<FeatureSet, DataError> {
    let mut vectors = Vec::with_capacity(data.len());
    for (week_ref, week) in data.iter().enumerate() {
        let mut base = [0.0; 12];
        for series in Series::ALL {
            for day in Day::ALL {
                base[series.index() * 2 + day.index()] = week.require(series, day)?;
            }
        }
        let mut hpl = [0.0; 2];
        for day in Day::ALL {
            let hoa = week.require(Series::Hoa, day)?;
            let reference =
                (week.require(Series::Poa, day)? + week.require(Series::Lgs, day)?) / 2.0;
            hpl[day.index()] = match config.hpl_form {
                HplForm::Difference => hoa - reference,
                HplForm::Ratio => hoa / reference,
            };
        }
        vectors.push(FeatureVector {
            week_ref,
            week: week.id,
            base,
            hpl,
            standardized: Vec::new(),
        });
    }
    if vectors.is_empty() {
        return Err(DataError::NoRows);
    }

    let mut names = base_names();
    if config.include_hpl {
        names.extend(hpl_names());
    }
    let dim = names.len();
    let inputs = |v: &FeatureVector| -> Vec<f64> {
        let mut x = v.base.to_vec();
        if config.include_hpl {
            x.extend_from_slice(&v.hpl);
        }
        x
    };

    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in &vectors {
        for (m, x) in mean.iter_mut().zip(inputs(v)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in &vectors {
        for ((s, x), m) in var.iter_mut().zip(inputs(v)).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
    for (j, (s, m)) in std.iter().zip(&mean).enumerate() {
        if *s <= 1e-12 * m.abs().max(1.0) {
            return Err(DataError::ZeroVariance {
                name: names[j].clone(),
            });
        }
    }

    for v in &mut vectors {
        v.standardized = inputs(v)
            .iter()
            .zip(mean.iter().zip(&std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
    }

    Ok(FeatureSet {
        config: *config,
        names,
        mean,
        std,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn week(i: u32, poa: f64, lgs: f64, hoa: f64, fx: f64) -> QuotationWeek {
        QuotationWeek::complete(
            WeekId::new(1821, i),
            [
                [poa, poa],
                [lgs, lgs],
                [hoa, hoa],
                [25.0 + fx, 25.1 + fx],
                [13.0 - fx, 13.1 - fx],
                [1.8 + fx / 10.0, 1.9 + fx / 10.0],
            ],
        )
    }

    #[test]
    fn hpl_difference() {
        let data = vec![week(1, 15.8, 15.7, 15.9, 0.0), week(2, 15.6, 15.5, 15.6, 1.0)];
        let set = build_features(&data, &FeatureConfig::default()).unwrap();
        let hpl = set.vectors[0].hpl;
        assert!((hpl[0] - 0.15).abs() < 1e-12);
        assert!((hpl[1] - 0.15).abs() < 1e-12);
        assert_eq!(set.dim(), 14);
    }

    #[test]
    fn hpl_ratio_and_no_hpl_input() {
        let data = vec![week(1, 15.8, 15.7, 15.9, 0.0), week(2, 15.6, 15.5, 15.6, 1.0)];
        let config = FeatureConfig {
            hpl_form: HplForm::Ratio,
            include_hpl: false,
        };
        let set = build_features(&data, &config).unwrap();
        assert!((set.vectors[0].hpl[0] - 15.9 / 15.75).abs() < 1e-12);
        assert_eq!(set.dim(), 12);
        assert_eq!(set.vectors[0].standardized.len(), 12);
    }

    #[test]
    fn identical_weeks_zero_variance() {
        let data = vec![week(1, 15.8, 15.7, 15.9, 0.0), week(2, 15.8, 15.7, 15.9, 0.0)];
        assert!(matches!(
            build_features(&data, &FeatureConfig::default()).unwrap_err(),
            DataError::ZeroVariance { .. }
        ));
    }

    #[test]
    fn missing_value_rejected() {
        let mut w = week(1, 15.8, 15.7, 15.9, 0.0);
        w.set(Series::Lpv, Day::Friday, None);
        assert!(matches!(
            build_features(&[w], &FeatureConfig::default()).unwrap_err(),
            DataError::Incomplete { .. }
        ));
    }

    #[test]
    fn standardized_moments() {
        let data: Vec<_> = (1..=30)
            .map(|i| {
                let x = i as f64;
                week(i, 15.0 + (x * 0.7).sin(), 15.2 + (x * 0.3).cos(), 15.1 + x / 40.0, x.sqrt())
            })
            .collect();
        let set = build_features(&data, &FeatureConfig::default()).unwrap();
        for j in 0..set.dim() {
            let col: Vec<f64> = set.vectors.iter().map(|v| v.standardized[j]).collect();
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!(m.abs() < 1e-9, "coord {j} mean {m}");
            assert!((var - 1.0).abs() < 1e-9, "coord {j} var {var}");
        }
    }

    #[test]
    fn delimited_output_shape() {
        let data = vec![week(1, 15.8, 15.7, 15.9, 0.0), week(2, 15.6, 15.5, 15.6, 1.0)];
        let set = build_features(&data, &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        set.write_delimited(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 2 + 14 + 14);
        assert!(lines[0].starts_with("year,week,poa_t"));
    }
}

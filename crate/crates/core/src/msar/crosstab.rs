// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::filter::RegimeProbabilities;
use super::MsError;
use crate::data::SpreadSeries;
use crate::som::MacroClassification;

/// One macro-class: size, share of weeks mostly in regime 1, spread volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTabRow {
    pub class: usize,
    pub n_obs: usize,
    /// Fraction of the class's weeks with smoothed `P(regime 1) > 0.5`.
    pub share_regime1: Option<f64>,
    /// Sample standard deviation (n - 1 denominator) of the spread.
    pub spread_sd: Option<f64>,
}

impl CrossTabRow {
    /// `n_obs, share, sd` with three decimals, e.g. `483, 0.733, 0.053`.
    pub fn format(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
        format!(
            "{}, {}, {}",
            self.n_obs,
            fmt(self.share_regime1),
            fmt(self.spread_sd)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub rows: Vec<CrossTabRow>,
    pub total_obs: usize,
    pub overall_share_regime1: f64,
}

impl CrossTab {
    pub fn write_delimited<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(["class", "n_obs", "share_regime1", "spread_sd"])?;
        for row in &self.rows {
            let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.3}"));
            writer.write_record([
                row.class.to_string(),
                row.n_obs.to_string(),
                fmt(row.share_regime1),
                fmt(row.spread_sd),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Per-class count, regime-1 share and spread standard deviation.
///
/// The three inputs must describe the same weeks in the same order.
pub fn cross_tabulate(
    probs: &RegimeProbabilities,
    periodization: &MacroClassification,
    spread: &SpreadSeries,
) -> Result<CrossTab, MsError> {
    let t = probs.len();
    if periodization.week_to_class.len() != t || spread.len() != t {
        return Err(MsError::Misaligned(format!(
            "{t} probability rows, {} classified weeks, {} spread values",
            periodization.week_to_class.len(),
            spread.len()
        )));
    }
    if let Some(k) = spread
        .index
        .iter()
        .zip(&periodization.weeks)
        .position(|(p, w)| p.week != *w || p.day.is_some())
    {
        return Err(MsError::Misaligned(format!(
            "spread entry {k} ({}) does not match classified week {}",
            spread.index[k].label(),
            periodization.weeks[k]
        )));
    }

    let regime1: Vec<bool> = probs.smoothed.iter().map(|row| row[0] > 0.5).collect();
    let rows = (1..=periodization.k)
        .map(|class| {
            let members: Vec<usize> = (0..t)
                .filter(|&i| periodization.week_to_class[i] == class)
                .collect();
            let n_obs = members.len();
            let values: Vec<f64> = members.iter().map(|&i| spread.values[i]).collect();
            CrossTabRow {
                class,
                n_obs,
                share_regime1: (n_obs > 0).then(|| {
                    members.iter().filter(|&&i| regime1[i]).count() as f64 / n_obs as f64
                }),
                spread_sd: (n_obs > 0).then(|| sample_sd(&values)),
            }
        })
        .collect();
    Ok(CrossTab {
        rows,
        total_obs: t,
        overall_share_regime1: regime1.iter().filter(|&&b| b).count() as f64 / t.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SpreadAggregation, SpreadPoint, WeekId};

    fn fixture(t: usize, classes: Vec<usize>, p1: f64, spread: Vec<f64>) -> (RegimeProbabilities, MacroClassification, SpreadSeries) {
        let weeks: Vec<WeekId> = (0..t).map(|i| WeekId::new(1821, i as u32 + 1)).collect();
        let probs = RegimeProbabilities {
            lag: 1,
            filtered: vec![vec![p1, 1.0 - p1]; t],
            smoothed: vec![vec![p1, 1.0 - p1]; t],
            loglik: 0.0,
        };
        let k = *classes.iter().max().unwrap();
        let mc = MacroClassification {
            k,
            node_to_class: vec![],
            linkage: vec![],
            weeks: weeks.clone(),
            week_to_node: vec![0; t],
            week_to_class: classes,
            variable_names: vec![],
            class_means: vec![],
            intervals: vec![],
        };
        let spread = SpreadSeries {
            aggregation: SpreadAggregation::WeeklyMean,
            index: weeks
                .iter()
                .enumerate()
                .map(|(i, w)| SpreadPoint { week_ref: i, week: *w, day: None })
                .collect(),
            values: spread,
        };
        (probs, mc, spread)
    }

    #[test]
    fn all_regime_one() {
        let (p, mc, s) = fixture(6, vec![1, 1, 2, 2, 3, 3], 1.0, vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.2]);
        let tab = cross_tabulate(&p, &mc, &s).unwrap();
        assert!(tab.rows.iter().all(|r| r.share_regime1 == Some(1.0)));
        assert_eq!(tab.overall_share_regime1, 1.0);
    }

    #[test]
    fn constant_spread_zero_sd() {
        let (p, mc, s) = fixture(4, vec![1, 1, 2, 2], 0.2, vec![0.05, 0.05, 0.1, 0.3]);
        let tab = cross_tabulate(&p, &mc, &s).unwrap();
        assert_eq!(tab.rows[0].spread_sd, Some(0.0));
        assert_eq!(tab.rows[0].share_regime1, Some(0.0));
        assert!((tab.rows[1].spread_sd.unwrap() - 0.2f64.powi(2).mul_add(0.5, 0.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn row_format_matches_table_layout() {
        let row = CrossTabRow {
            class: 1,
            n_obs: 483,
            share_regime1: Some(0.7329),
            spread_sd: Some(0.05301),
        };
        assert_eq!(row.format(), "483, 0.733, 0.053");
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let (p, mc, mut s) = fixture(4, vec![1, 1, 2, 2], 0.2, vec![0.1; 4]);
        s.values.pop();
        s.index.pop();
        assert!(matches!(cross_tabulate(&p, &mc, &s).unwrap_err(), MsError::Misaligned(_)));
        let (p, mc, mut s) = fixture(4, vec![1, 1, 2, 2], 0.2, vec![0.1; 4]);
        s.index[2].week = WeekId::new(1900, 1);
        assert!(matches!(cross_tabulate(&p, &mc, &s).unwrap_err(), MsError::Misaligned(_)));
    }

    #[test]
    fn empty_class_has_no_statistics() {
        let (p, mut mc, s) = fixture(3, vec![1, 1, 1], 0.9, vec![0.1, 0.2, 0.3]);
        mc.k = 2;
        let tab = cross_tabulate(&p, &mc, &s).unwrap();
        assert_eq!(tab.rows[1].n_obs, 0);
        assert_eq!(tab.rows[1].share_regime1, None);
        assert_eq!(tab.rows[1].format(), "0, NA, NA");
    }
}

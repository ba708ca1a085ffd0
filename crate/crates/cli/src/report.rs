// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;

use bimetal_core::changepoint::{CostMode, Segmentation};
use bimetal_core::data::SpreadSeries;
use bimetal_core::msar::{cross_tabulate, CrossTab};
use bimetal_core::som::MacroClassification;

use crate::analyze::RegimeProbabilityArtifact;
use crate::artifacts;
use crate::error::PipelineError;

/// Files written by the report and the class table they hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub table: CrossTab,
    pub files: Vec<String>,
    pub rows: usize,
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>, context: &str) -> Result<Vec<u8>, PipelineError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| PipelineError::io(context.to_string(), e.into()))?;
    }
    writer
        .into_inner()
        .map_err(|e| PipelineError::io(context.to_string(), e.into_error()))
}

fn write(dir: &Path, file: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    let path = dir.join(file);
    fs::write(&path, bytes).map_err(|e| PipelineError::io(format!("cannot write {}", path.display()), e))
}

fn segmentation_for<'a>(segs: &'a [Segmentation], mode: CostMode, dir: &Path) -> Result<&'a Segmentation, PipelineError> {
    segs.iter().find(|s| s.mode == mode).ok_or_else(|| PipelineError::Artifact {
        path: dir.join(artifacts::SEGMENTATIONS).display().to_string(),
        message: format!("no {} segmentation; rerun `bimetal analyze` with that mode enabled", mode.name()),
    })
}

/// Writes the class table, the per-class variable means and the aligned
/// spread / regime / change-point series from the artifacts in `dir`.
pub fn cmd_report(dir: &Path) -> Result<ReportSummary, PipelineError> {
    let spread_bytes = artifacts::read_artifact(dir, artifacts::SPREAD, "ingest")?;
    let spread = SpreadSeries::read_delimited(spread_bytes.as_slice()).map_err(|source| PipelineError::Data {
        stage: "report",
        source,
    })?;
    let classes: MacroClassification = artifacts::read_json(dir, artifacts::MACRO_CLASSES, "analyze")?;
    let probs: RegimeProbabilityArtifact = artifacts::read_json(dir, artifacts::REGIME_PROBABILITIES, "analyze")?;
    let segs: Vec<Segmentation> = artifacts::read_json(dir, artifacts::SEGMENTATIONS, "analyze")?;

    let table = cross_tabulate(&probs.probabilities, &classes, &spread).map_err(|source| PipelineError::Ms {
        stage: "report",
        source,
    })?;
    let mut table_bytes = Vec::new();
    table
        .write_delimited(&mut table_bytes)
        .map_err(|e| PipelineError::io("class table", e.into()))?;
    write(dir, artifacts::TABLE1, &table_bytes)?;

    let mut header = vec!["class".to_string(), "count".to_string()];
    header.extend(classes.variable_names.iter().cloned());
    let mean_rows = classes.class_means.iter().map(|c| {
        let mut row = vec![c.class.to_string(), c.count.to_string()];
        match &c.means {
            Some(means) => row.extend(means.iter().map(f64::to_string)),
            None => row.extend(classes.variable_names.iter().map(|_| String::new())),
        }
        row
    });
    write(
        dir,
        artifacts::CLASS_MEANS,
        &csv_bytes(std::iter::once(header).chain(mean_rows), "class means")?,
    )?;

    let mean = segmentation_for(&segs, CostMode::MeanOnly, dir)?;
    let mean_var = segmentation_for(&segs, CostMode::MeanAndVariance, dir)?;
    let t = spread.len();
    if probs.probabilities.len() != t || mean.series_len != t || mean_var.series_len != t {
        return Err(PipelineError::Artifact {
            path: dir.display().to_string(),
            message: format!(
                "artifacts disagree on length: {t} spread values, {} probability rows, segmentations of {} and {}",
                probs.probabilities.len(),
                mean.series_len,
                mean_var.series_len
            ),
        });
    }
    let (ind_mean, ind_mv) = (mean.indicator(), mean_var.indicator());
    let labels = spread.labels();
    let header = ["week_label", "spread", "p_regime1", "cp_mean", "cp_mean_variance"].map(String::from).to_vec();
    let series_rows = (0..t).map(|i| {
        vec![
            labels[i].clone(),
            spread.values[i].to_string(),
            probs.probabilities.smoothed[i][0].to_string(),
            ind_mean[i].to_string(),
            ind_mv[i].to_string(),
        ]
    });
    write(
        dir,
        artifacts::FIG3,
        &csv_bytes(std::iter::once(header).chain(series_rows), "aligned series")?,
    )?;

    Ok(ReportSummary {
        table,
        files: [artifacts::TABLE1, artifacts::CLASS_MEANS, artifacts::FIG3].map(String::from).to_vec(),
        rows: t,
    })
}

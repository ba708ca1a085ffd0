// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;

use bimetal_core::changepoint::{detect, Segmentation};
use bimetal_core::data::{
    build_features, compute_spread, impute_missing, parse_dataset, FeatureSet, ImputationReport,
    QuotationWeek, SpreadSeries,
};
use bimetal_core::msar::{em_fit, stationary_distribution, EmFit, MsParams, MsSpec, RegimeProbabilities, RestartSummary};
use bimetal_core::som::{hac_macro_classes, periodize, train_som, MacroClassification};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, Bundle, Manifest};
use crate::config::RunConfig;
use crate::error::PipelineError;

/// Parsed, imputed and transformed input.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub weeks: Vec<QuotationWeek>,
    pub imputation: ImputationReport,
    pub features: FeatureSet,
    pub spread: SpreadSeries,
}

pub fn ingest_bytes(bytes: &[u8], config: &RunConfig) -> Result<Ingested, PipelineError> {
    let data = |source| PipelineError::Data {
        stage: "ingest",
        source,
    };
    let raw = parse_dataset(bytes).map_err(data)?;
    let (weeks, imputation) = impute_missing(&raw, &config.data.impute_policy()).map_err(data)?;
    let features = build_features(&weeks, &config.data.features()).map_err(data)?;
    let spread = compute_spread(&weeks, config.data.spread_aggregation).map_err(data)?;
    Ok(Ingested {
        weeks,
        imputation,
        features,
        spread,
    })
}

fn read_input(config: &RunConfig) -> Result<Vec<u8>, PipelineError> {
    let path = config.input_path()?;
    fs::read(path).map_err(|e| PipelineError::io(format!("cannot read input {}", path.display()), e))
}

fn imputation_csv(report: &ImputationReport) -> Result<Vec<u8>, PipelineError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| PipelineError::Data {
        stage: "ingest",
        source: e.into(),
    };
    writer
        .write_record(["row", "year", "week", "series", "day", "value", "method"])
        .map_err(err)?;
    for cell in &report.cells {
        let method = serde_json::to_value(cell.method).expect("method serializes");
        writer
            .write_record([
                cell.row.to_string(),
                cell.week.year.to_string(),
                cell.week.week.to_string(),
                cell.series.to_string(),
                cell.day.to_string(),
                cell.value.to_string(),
                method.as_str().unwrap_or_default().to_string(),
            ])
            .map_err(err)?;
    }
    writer.into_inner().map_err(|e| PipelineError::io("imputation report", e.into_error()))
}

fn write_ingested(bundle: &mut Bundle, ingested: &Ingested) -> Result<(), PipelineError> {
    let data = |source| PipelineError::Data {
        stage: "ingest",
        source,
    };
    bundle.put_json("ingest", artifacts::FEATURES, &ingested.features)?;
    let mut spread = Vec::new();
    ingested.spread.write_delimited(&mut spread).map_err(data)?;
    bundle.put("ingest", artifacts::SPREAD, &spread)?;
    bundle.put_auxiliary("ingest", artifacts::IMPUTATION, &imputation_csv(&ingested.imputation)?)?;
    bundle.manifest.weeks = ingested.weeks.len();
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub weeks: usize,
    pub imputed_cells: usize,
    pub spread_len: usize,
}

/// Parses, imputes and transforms the input, writing the feature set, the
/// spread series and the imputation report.
pub fn cmd_ingest(config: &RunConfig) -> Result<IngestSummary, PipelineError> {
    let bytes = read_input(config)?;
    let mut ingest_only = config.clone();
    ingest_only.stages.som = false;
    ingest_only.stages.msar = false;
    ingest_only.stages.cpd = false;
    let mut bundle = Bundle::create(&config.out_dir, Manifest::new("ingest", &ingest_only, &bytes))?;
    match ingest_bytes(&bytes, config) {
        Ok(ingested) => {
            write_ingested(&mut bundle, &ingested)?;
            bundle.finish()?;
            Ok(IngestSummary {
                weeks: ingested.weeks.len(),
                imputed_cells: ingested.imputation.len(),
                spread_len: ingested.spread.len(),
            })
        }
        Err(e) => {
            bundle.fail(&e);
            Err(e)
        }
    }
}

/// Fitted switching model without the probability table, which has its own
/// artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsFitArtifact {
    pub spec: MsSpec,
    pub params: MsParams,
    pub stationary: Vec<f64>,
    pub loglik: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restart: Option<usize>,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
    pub warnings: Vec<String>,
}

impl MsFitArtifact {
    fn from_fit(fit: &EmFit) -> Result<Self, PipelineError> {
        let stationary = stationary_distribution(&fit.params.transition).map_err(|source| PipelineError::Ms {
            stage: "msar",
            source,
        })?;
        Ok(Self {
            spec: fit.spec.clone(),
            params: fit.params.clone(),
            stationary,
            loglik: fit.probabilities.loglik,
            trace: fit.trace.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            restart: fit.restart,
            seed: fit.seed,
            restarts: fit.restarts.clone(),
            warnings: fit.warnings.clone(),
        })
    }
}

/// Regime probabilities with the label of each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeProbabilityArtifact {
    pub labels: Vec<String>,
    pub probabilities: RegimeProbabilities,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSummary {
    pub weeks: usize,
    pub artifacts: Vec<String>,
    pub classes: Option<usize>,
    pub ms_loglik: Option<f64>,
    pub ms_warnings: Vec<String>,
    pub segmentations: Vec<Segmentation>,
}

/// Runs ingestion and every enabled stage, persisting all outputs and the
/// manifest. On a stage failure the manifest is written with the failed
/// stage and the artifacts produced so far are kept.
pub fn cmd_analyze(config: &RunConfig) -> Result<AnalyzeSummary, PipelineError> {
    let bytes = read_input(config)?;
    let mut bundle = Bundle::create(&config.out_dir, Manifest::new("analyze", config, &bytes))?;
    let mut summary = AnalyzeSummary {
        weeks: 0,
        artifacts: Vec::new(),
        classes: None,
        ms_loglik: None,
        ms_warnings: Vec::new(),
        segmentations: Vec::new(),
    };
    let outcome = run_stages(config, &bytes, &mut bundle, &mut summary);
    let cleanup = bundle.remove_stale();
    match outcome.and(cleanup) {
        Ok(()) => {
            bundle.finish()?;
            summary.artifacts = bundle.manifest.artifact_files().iter().map(|s| s.to_string()).collect();
            Ok(summary)
        }
        Err(e) => {
            bundle.fail(&e);
            Err(e)
        }
    }
}

fn run_stages(
    config: &RunConfig,
    bytes: &[u8],
    bundle: &mut Bundle,
    summary: &mut AnalyzeSummary,
) -> Result<(), PipelineError> {
    let ingested = ingest_bytes(bytes, config)?;
    write_ingested(bundle, &ingested)?;
    summary.weeks = ingested.weeks.len();
    let labels = ingested.spread.labels();

    if config.stages.som {
        let som = |source| PipelineError::Som { stage: "som", source };
        let matrix = ingested.features.matrix();
        let grid = train_som(
            &matrix,
            config.som.rows,
            config.som.cols,
            &config.som.schedule(),
            config.som.seed,
        )
        .map_err(som)?;
        bundle.put_json("som", artifacts::SOM_GRID, &grid)?;
        let nodes = hac_macro_classes(&grid, config.som.classes).map_err(som)?;
        let classes: MacroClassification = periodize(&ingested.features, &grid, &nodes).map_err(som)?;
        bundle.put_json("som", artifacts::MACRO_CLASSES, &classes)?;
        summary.classes = Some(classes.k);
    }

    if config.stages.msar {
        let fit = em_fit(&config.msar.spec(), &ingested.spread.values, None, &config.msar.em())
            .map_err(|source| PipelineError::Ms { stage: "msar", source })?;
        bundle.put_json("msar", artifacts::MS_FIT, &MsFitArtifact::from_fit(&fit)?)?;
        bundle.put_json(
            "msar",
            artifacts::REGIME_PROBABILITIES,
            &RegimeProbabilityArtifact {
                labels: labels.clone(),
                probabilities: fit.probabilities.clone(),
            },
        )?;
        summary.ms_loglik = Some(fit.probabilities.loglik);
        summary.ms_warnings = fit.warnings.clone();
    }

    if config.stages.cpd {
        let mut segs = Vec::with_capacity(config.cpd.modes.len());
        for &mode in &config.cpd.modes {
            let cp = |source| PipelineError::Cp { stage: "cpd", source };
            let mut seg = detect(&ingested.spread.values, mode, &config.cpd.config(mode)).map_err(cp)?;
            seg.attach_labels(&labels).map_err(cp)?;
            segs.push(seg);
        }
        bundle.put_json("cpd", artifacts::SEGMENTATIONS, &segs)?;
        summary.segmentations = segs;
    }
    Ok(())
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration. Every field has a default; a file only needs the keys
//! it changes. The all-default configuration is the 5x5 map with 6 classes,
//! the two-regime model with one MLP regime and one linear regime at lag 1,
//! and change-point detection in both modes.

use std::path::{Path, PathBuf};

use bimetal_core::changepoint::{CostMode, CpConfig, PenaltyScheme, DEFAULT_THRESHOLD, VARIANCE_FLOOR_RATIO};
use bimetal_core::data::{FeatureConfig, HplForm, ImputePolicy, SpreadAggregation};
use bimetal_core::msar::{EmConfig, MeanFamily, MsSpec};
use bimetal_core::som::SomSchedule;
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;

/// Environment variable naming the output directory when `--out-dir` is absent.
pub const OUT_DIR_ENV: &str = "BIMETAL_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub stages: Stages,
    pub data: DataSection,
    pub som: SomSection,
    pub msar: MsarSection,
    pub cpd: CpdSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out_dir: PathBuf::from("bimetal-out"),
            stages: Stages::default(),
            data: DataSection::default(),
            som: SomSection::default(),
            msar: MsarSection::default(),
            cpd: CpdSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub som: bool,
    pub msar: bool,
    pub cpd: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            som: true,
            msar: true,
            cpd: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Longest run of missing values filled by interpolation.
    pub max_gap: usize,
    pub hpl_form: HplForm,
    pub include_hpl: bool,
    pub spread_aggregation: SpreadAggregation,
}

impl Default for DataSection {
    fn default() -> Self {
        let features = FeatureConfig::default();
        Self {
            max_gap: ImputePolicy::default().max_gap,
            hpl_form: features.hpl_form,
            include_hpl: features.include_hpl,
            spread_aggregation: SpreadAggregation::default(),
        }
    }
}

impl DataSection {
    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            hpl_form: self.hpl_form,
            include_hpl: self.include_hpl,
        }
    }

    pub fn impute_policy(&self) -> ImputePolicy {
        ImputePolicy {
            max_gap: self.max_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomSection {
    pub rows: usize,
    pub cols: usize,
    pub classes: usize,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate_start: f64,
    pub learning_rate_end: f64,
    pub radius_start: Option<f64>,
    pub radius_end: f64,
}

impl Default for SomSection {
    fn default() -> Self {
        let s = SomSchedule::default();
        Self {
            rows: 5,
            cols: 5,
            classes: 6,
            seed: 1,
            epochs: s.epochs,
            learning_rate_start: s.learning_rate_start,
            learning_rate_end: s.learning_rate_end,
            radius_start: s.radius_start,
            radius_end: s.radius_end,
        }
    }
}

impl SomSection {
    pub fn schedule(&self) -> SomSchedule {
        SomSchedule {
            epochs: self.epochs,
            learning_rate_start: self.learning_rate_start,
            learning_rate_end: self.learning_rate_end,
            radius_start: self.radius_start,
            radius_end: self.radius_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsarSection {
    pub lag: usize,
    pub regimes: Vec<MeanFamily>,
    pub tol: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
    pub min_weight: f64,
    pub mlp_steps: usize,
    pub min_sigma_ratio: f64,
}

impl Default for MsarSection {
    fn default() -> Self {
        let em = EmConfig::default();
        Self {
            lag: 1,
            regimes: vec![MeanFamily::Mlp { hidden: 3 }, MeanFamily::Linear],
            tol: em.tol,
            max_iter: em.max_iter,
            n_restarts: em.n_restarts,
            seed: 1,
            min_weight: em.min_weight,
            mlp_steps: em.mlp_steps,
            min_sigma_ratio: em.min_sigma_ratio,
        }
    }
}

impl MsarSection {
    pub fn spec(&self) -> MsSpec {
        MsSpec {
            lag: self.lag,
            regimes: self.regimes.clone(),
        }
    }

    pub fn em(&self) -> EmConfig {
        EmConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            n_restarts: self.n_restarts,
            seed: self.seed,
            min_weight: self.min_weight,
            mlp_steps: self.mlp_steps,
            min_sigma_ratio: self.min_sigma_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdSection {
    pub modes: Vec<CostMode>,
    pub k_max: usize,
    pub threshold: f64,
    pub scheme: PenaltyScheme,
    pub min_seg_len_mean: Option<usize>,
    pub min_seg_len_mean_variance: Option<usize>,
    pub variance_floor_ratio: f64,
}

impl Default for CpdSection {
    fn default() -> Self {
        Self {
            modes: vec![CostMode::MeanOnly, CostMode::MeanAndVariance],
            k_max: CpConfig::default().k_max,
            threshold: DEFAULT_THRESHOLD,
            scheme: PenaltyScheme::default(),
            min_seg_len_mean: None,
            min_seg_len_mean_variance: None,
            variance_floor_ratio: VARIANCE_FLOOR_RATIO,
        }
    }
}

impl CpdSection {
    pub fn config(&self, mode: CostMode) -> CpConfig {
        CpConfig {
            k_max: self.k_max,
            threshold: self.threshold,
            scheme: self.scheme,
            min_seg_len: match mode {
                CostMode::MeanOnly => self.min_seg_len_mean,
                CostMode::MeanAndVariance => self.min_seg_len_mean_variance,
            },
            variance_floor_ratio: self.variance_floor_ratio,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Input path, or a usage error when none was configured.
    pub fn input_path(&self) -> Result<&Path, PipelineError> {
        self.input
            .as_deref()
            .ok_or_else(|| PipelineError::Usage("no input file: pass --input or set `input` in the config".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_module_defaults() {
        let c = RunConfig::default();
        assert_eq!((c.som.rows, c.som.cols, c.som.classes), (5, 5, 6));
        assert_eq!(c.som.schedule(), SomSchedule::default());
        assert_eq!(c.msar.spec().n_regimes(), 2);
        assert_eq!(c.msar.lag, 1);
        let em = c.msar.em();
        let reference = EmConfig { seed: em.seed, ..EmConfig::default() };
        assert_eq!(em, reference);
        assert_eq!(c.cpd.modes.len(), 2);
        assert_eq!(c.cpd.config(CostMode::MeanOnly), CpConfig::default());
        assert_eq!(c.data.impute_policy(), ImputePolicy::default());
        assert_eq!(c.data.features(), FeatureConfig::default());
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_file_overrides_only_its_keys() {
        let c = RunConfig::from_toml(
            "[som]\nrows = 3\n[stages]\ncpd = false\n[msar]\nregimes = [{ family = \"linear\" }, { family = \"linear\" }]\n[cpd]\nmodes = [\"mean-only\"]\n",
        )
        .unwrap();
        assert_eq!(c.som.rows, 3);
        assert_eq!(c.som.cols, 5);
        assert!(!c.stages.cpd && c.stages.som);
        assert_eq!(c.msar.regimes, vec![MeanFamily::Linear; 2]);
        assert_eq!(c.cpd.modes, vec![CostMode::MeanOnly]);
    }

    #[test]
    fn round_trip_and_unknown_keys() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(matches!(
            RunConfig::from_toml("[som]\nrowz = 3\n"),
            Err(PipelineError::Usage(_))
        ));
    }
}

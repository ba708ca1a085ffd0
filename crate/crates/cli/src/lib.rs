// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline driver: ingestion, the three regime analyses, report tables and
//! synthetic data, with every intermediate result persisted as text.

#![forbid(unsafe_code)]

pub mod analyze;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod report;
pub mod simulate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub use analyze::{cmd_analyze, cmd_ingest, ingest_bytes, AnalyzeSummary, IngestSummary, Ingested};
pub use config::{RunConfig, OUT_DIR_ENV};
pub use error::PipelineError;
pub use report::{cmd_report, ReportSummary};
pub use simulate::{cmd_simulate, SimulateConfig, Truth};

/// Output directory after the file and environment layers: the flag wins,
/// then the environment variable, then the file or default value.
pub fn resolve_out_dir(file_value: PathBuf, flag: Option<PathBuf>, env: Option<OsString>) -> PathBuf {
    flag.or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or(file_value)
}

/// Loads the config file when given, else the defaults, and applies the
/// output-directory precedence. Remaining flags are applied by the caller.
pub fn resolve_config(
    file: Option<&Path>,
    out_dir_flag: Option<PathBuf>,
    env_out_dir: Option<OsString>,
) -> Result<RunConfig, PipelineError> {
    let mut config = match file {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.out_dir = resolve_out_dir(config.out_dir, out_dir_flag, env_out_dir);
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_dir_precedence() {
        let file = PathBuf::from("from-file");
        assert_eq!(resolve_out_dir(file.clone(), None, None), file);
        assert_eq!(resolve_out_dir(file.clone(), None, Some("env".into())), PathBuf::from("env"));
        assert_eq!(resolve_out_dir(file.clone(), None, Some("".into())), file);
        assert_eq!(
            resolve_out_dir(file, Some("flag".into()), Some("env".into())),
            PathBuf::from("flag")
        );
    }
}

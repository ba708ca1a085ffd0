// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use bimetal_core::changepoint::{CostMode, PenaltyScheme};
use bimetal_core::data::{HplForm, SpreadAggregation};
use bimetal_core::msar::MeanFamily;
use pipeline::{
    cmd_analyze, cmd_ingest, cmd_report, cmd_simulate, resolve_config, resolve_out_dir, PipelineError, RunConfig,
    SimulateConfig, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "bimetal", version, about = "Regime detection in gold-silver price series")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, impute and transform a quotation file.
    Ingest(RunArgs),
    /// Ingest, then run the enabled analyses and write every artifact.
    Analyze(RunArgs),
    /// Build the class table, class means and aligned series from artifacts.
    Report {
        /// Directory holding the analysis artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic quotation file and its ground truth.
    Simulate(SimArgs),
}

fn on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("expected on or off, found `{s}`")),
    }
}

/// Parses a kebab-case enum name through its serde representation.
fn named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `linear` or `mlp:H` (H hidden units, 3 when omitted).
fn family(s: &str) -> Result<MeanFamily, String> {
    match s.split_once(':') {
        None if s == "linear" => Ok(MeanFamily::Linear),
        None if s == "mlp" => Ok(MeanFamily::Mlp { hidden: 3 }),
        Some(("mlp", h)) => h
            .parse()
            .map(|hidden| MeanFamily::Mlp { hidden })
            .map_err(|_| format!("bad hidden-unit count `{h}`")),
        _ => Err(format!("expected linear, mlp or mlp:H, found `{s}`")),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Quotation file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Artifact directory [env: BIMETAL_OUT_DIR].
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[arg(long, value_parser = on_off, value_name = "on|off")]
    som: Option<bool>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    msar: Option<bool>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    cpd: Option<bool>,

    #[arg(long)]
    max_gap: Option<usize>,
    /// difference or ratio
    #[arg(long, value_parser = named::<HplForm>)]
    hpl_form: Option<HplForm>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    include_hpl: Option<bool>,
    /// weekly-mean or per-quotation
    #[arg(long, value_parser = named::<SpreadAggregation>)]
    spread_aggregation: Option<SpreadAggregation>,

    #[arg(long)]
    som_rows: Option<usize>,
    #[arg(long)]
    som_cols: Option<usize>,
    /// Number of macro-classes.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    som_seed: Option<u64>,
    #[arg(long)]
    som_epochs: Option<usize>,

    #[arg(long)]
    lag: Option<usize>,
    /// Comma-separated regime families, e.g. `mlp:3,linear`.
    #[arg(long, value_parser = family, value_delimiter = ',')]
    regimes: Option<Vec<MeanFamily>>,
    #[arg(long)]
    em_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    msar_seed: Option<u64>,

    /// Comma-separated: mean-only, mean-and-variance.
    #[arg(long, value_parser = named::<CostMode>, value_delimiter = ',')]
    modes: Option<Vec<CostMode>>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// adaptive or adaptive-bic-checked
    #[arg(long, value_parser = named::<PenaltyScheme>)]
    scheme: Option<PenaltyScheme>,
    #[arg(long)]
    min_seg_len_mean: Option<usize>,
    #[arg(long)]
    min_seg_len_mean_variance: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunArgs {
    fn resolve(self, file: Option<&std::path::Path>) -> Result<RunConfig, PipelineError> {
        let mut c = resolve_config(file, self.out_dir, std::env::var_os(OUT_DIR_ENV))?;
        if self.input.is_some() {
            c.input = self.input;
        }
        set(&mut c.stages.som, self.som);
        set(&mut c.stages.msar, self.msar);
        set(&mut c.stages.cpd, self.cpd);
        set(&mut c.data.max_gap, self.max_gap);
        set(&mut c.data.hpl_form, self.hpl_form);
        set(&mut c.data.include_hpl, self.include_hpl);
        set(&mut c.data.spread_aggregation, self.spread_aggregation);
        set(&mut c.som.rows, self.som_rows);
        set(&mut c.som.cols, self.som_cols);
        set(&mut c.som.classes, self.classes);
        set(&mut c.som.seed, self.som_seed);
        set(&mut c.som.epochs, self.som_epochs);
        set(&mut c.msar.lag, self.lag);
        set(&mut c.msar.regimes, self.regimes);
        set(&mut c.msar.tol, self.em_tol);
        set(&mut c.msar.max_iter, self.max_iter);
        set(&mut c.msar.n_restarts, self.restarts);
        set(&mut c.msar.seed, self.msar_seed);
        set(&mut c.cpd.modes, self.modes);
        set(&mut c.cpd.k_max, self.k_max);
        set(&mut c.cpd.threshold, self.threshold);
        set(&mut c.cpd.scheme, self.scheme);
        if self.min_seg_len_mean.is_some() {
            c.cpd.min_seg_len_mean = self.min_seg_len_mean;
        }
        if self.min_seg_len_mean_variance.is_some() {
            c.cpd.min_seg_len_mean_variance = self.min_seg_len_mean_variance;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct SimArgs {
    /// Number of weeks.
    #[arg(long, default_value_t = 500)]
    weeks: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Probability of staying in regime 1.
    #[arg(long)]
    p: Option<f64>,
    /// Probability of staying in regime 2.
    #[arg(long)]
    q: Option<f64>,
    /// Comma-separated level-change indices (default: thirds of the series).
    #[arg(long, value_delimiter = ',')]
    seams: Option<Vec<usize>>,
    #[arg(long)]
    level_shift: Option<f64>,
    /// Dataset path.
    #[arg(long, default_value = "synthetic.csv")]
    output: PathBuf,
    /// Ground-truth path (default: next to the dataset, `.truth.json`).
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Ingest(args) => {
            let config = args.resolve(file)?;
            let s = cmd_ingest(&config)?;
            println!("{} weeks ingested", s.weeks);
            println!("{} values imputed, {} spread observations", s.imputed_cells, s.spread_len);
            println!("artifacts in {}", config.out_dir.display());
        }
        Command::Analyze(args) => {
            let config = args.resolve(file)?;
            let s = cmd_analyze(&config)?;
            println!("{} weeks ingested", s.weeks);
            if let Some(k) = s.classes {
                println!("som: {k} macro-classes");
            }
            if let Some(ll) = s.ms_loglik {
                println!("msar: log-likelihood {ll:.3}");
            }
            for w in &s.ms_warnings {
                eprintln!("msar warning: {w}");
            }
            for seg in &s.segmentations {
                println!(
                    "cpd {}: {} change-points {:?}",
                    seg.mode.name(),
                    seg.n_change_points(),
                    seg.tau_labels
                );
            }
            println!("{} artifacts in {}", s.artifacts.len(), config.out_dir.display());
        }
        Command::Report { out_dir } => {
            let base = match file {
                Some(path) => RunConfig::load(path)?.out_dir,
                None => RunConfig::default().out_dir,
            };
            let dir = resolve_out_dir(base, out_dir, std::env::var_os(OUT_DIR_ENV));
            let s = cmd_report(&dir)?;
            println!("class: n_obs, share_regime1, spread_sd");
            for row in &s.table.rows {
                println!("{}: {}", row.class, row.format());
            }
            println!("{} rows; wrote {}", s.rows, s.files.join(", "));
        }
        Command::Simulate(args) => {
            let defaults = SimulateConfig::default();
            let config = SimulateConfig {
                weeks: args.weeks,
                seed: args.seed,
                p: args.p.unwrap_or(defaults.p),
                q: args.q.unwrap_or(defaults.q),
                seams: args.seams,
                level_shift: args.level_shift.unwrap_or(defaults.level_shift),
                output: args.output,
                truth: args.truth,
            };
            let truth = cmd_simulate(&config)?;
            println!("{} weeks written to {}", truth.weeks, config.output.display());
            println!("truth in {}", config.truth_path().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

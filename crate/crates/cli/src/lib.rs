//! Experiment runner for quantum belief propagation: declarative JSON
//! configs, figure sweeps and CSV/JSON output.

pub mod config;
pub mod experiment;
pub mod figs;
pub mod output;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use config::{ConfigErrors, ExperimentConfig};
use experiment::{run_point, Experiment, OracleCache, PointResult, RunError};

/// Exit status for each failure class.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("numerical failure: {0}")]
    Numerical(#[from] RunError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Thread pool of `workers` threads; `0` means one per CPU.
pub fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool")
}

/// Evaluates points concurrently; results keep the input order.
pub fn evaluate(points: Vec<(&Experiment, f64)>, workers: usize) -> Result<Vec<PointResult>, RunError> {
    let cache = OracleCache::default();
    pool(workers).install(|| points.into_par_iter().map(|(e, b)| run_point(e, b, &cache)).collect())
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    method: &'static str,
    graph: &'a str,
    points: &'a [PointResult],
}

#[derive(Debug, Serialize)]
struct MergeRecord<'a> {
    graph: &'a str,
    groups: &'a [Vec<usize>],
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    command: &'static str,
    config: String,
    seed: u64,
    files: Vec<&'static str>,
    merged_pairs: Option<MergeRecord<'a>>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub points: usize,
    pub converged: usize,
}

/// Runs a validated config and writes `results.csv`, `report.json` and
/// `manifest.json` into `out_dir`.
pub fn run_config(config: &ExperimentConfig, source: &Path, out_dir: &Path, workers: usize) -> Result<RunSummary, CliError> {
    let exp = Experiment::from_config(config)
        .map_err(|errors| ConfigErrors { source: source.display().to_string(), errors })?;
    let betas = config.betas();
    let results = evaluate(betas.iter().map(|&b| (&exp, b)).collect::<Vec<_>>(), workers)?;

    std::fs::create_dir_all(out_dir).map_err(CliError::io(format!("creating {}", out_dir.display())))?;
    let config_name = source.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let metadata = vec![
        ("qbp".to_string(), VERSION.to_string()),
        ("config".to_string(), config_name.clone()),
        ("model".to_string(), format!("{:?}", exp.spec)),
        ("seed".to_string(), config.seed.to_string()),
    ];
    let rows: Vec<output::Row> = results.iter().flat_map(|r| output::rows(&exp, r)).collect();
    let csv = output::render_csv(&metadata, &rows);
    let csv_path = out_dir.join("results.csv");
    std::fs::write(&csv_path, csv).map_err(CliError::io(format!("writing {}", csv_path.display())))?;

    let report = Report { version: VERSION, config, method: exp.method.name(), graph: &exp.graph_id, points: &results };
    let report_path = out_dir.join("report.json");
    output::write_json(&report_path, &report).map_err(CliError::io(format!("writing {}", report_path.display())))?;
    let manifest = RunManifest {
        version: VERSION,
        command: "run",
        config: config_name,
        seed: config.seed,
        files: vec!["results.csv", "report.json"],
        merged_pairs: exp.merge.as_deref().map(|groups| MergeRecord { graph: &exp.graph_id, groups }),
    };
    let manifest_path = out_dir.join("manifest.json");
    output::write_json(&manifest_path, &manifest).map_err(CliError::io(format!("writing {}", manifest_path.display())))?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), points: results.len(), converged: results.iter().filter(|r| r.converged).count() })
}

//! Run orchestration and report emission. Experiments execute in declaration
//! order; identical configs produce byte-identical CSV and JSON outputs, so
//! wall time stays on stderr and out of the artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use wordbench_core::experiments::{self, SubgroupChoice};
use wordbench_core::metric::{Ball, BasepointOracle, ConstantsReport, DeltaMode, MetricError};

use crate::config::{BuiltContexts, ConfigError, ExperimentConfig, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentStatus {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub statuses: Vec<ExperimentStatus>,
    pub constants: ConstantsReport,
    /// Not serialized: determinism of the artifacts comes first.
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.statuses.iter().all(|s| s.ok)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String, RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path.display().to_string())
}

/// Executes every experiment in declaration order globally; per-experiment
/// errors are recorded and the run continues unless fail-fast is set.
pub fn run(
    config: &RunConfig,
    out_dir: &Path,
    format: OutputFormat,
    fail_fast: bool,
    threads: usize,
) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let BuiltContexts { amalgam, y } = config.build_contexts()?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    let mut statuses = Vec::new();
    let mut constants = ConstantsReport::default();

    // The identity ball backing exact-length queries, shared across all
    // experiments that need one; built once at the configured radius.
    let needs_ball = config.experiments.iter().any(|e| {
        matches!(
            e,
            ExperimentConfig::Claim2 { .. } | ExperimentConfig::Escape { .. } | ExperimentConfig::Vn { .. }
        )
    });
    let shared_ball: Option<Ball> = if needs_ball {
        Some(Ball::build(&amalgam, config.caps.ball_radius, false)?)
    } else {
        None
    };

    for exp in &config.experiments {
        let name = exp.label().to_string();
        let mut outputs = Vec::new();
        let outcome: Result<(), RunError> = (|| {
            match exp {
                ExperimentConfig::Distortion { n_max } => {
                    let rows = experiments::exp_distortion(
                        amalgam.torus(),
                        &amalgam.edge().x_left,
                        *n_max,
                        config.caps.geodesic_cap.max(config.caps.ball_radius),
                    )?;
                    if format.wants_csv() {
                        outputs.push(write_file(out_dir, "distortion.csv", &experiments::distortion_csv(&rows))?);
                    }
                    constants.distortion_rows = Some(rows);
                }
                ExperimentConfig::Claim1 { n_min, n_max } => {
                    let report = experiments::exp_claim1(&amalgam, &y, *n_min, *n_max, config.caps.y_window)?;
                    if format.wants_csv() {
                        outputs.push(write_file(out_dir, "claim1.csv", &experiments::claim1_csv(&report))?);
                    }
                    constants.k_hat = Some(report.k_hat);
                }
                ExperimentConfig::Claim2 { q, n_max } => {
                    let b = shared_ball.as_ref().expect("built for claim2");
                    let oracle = BasepointOracle::new(&amalgam, b);
                    let report = experiments::exp_claim2(
                        &amalgam,
                        &oracle,
                        q,
                        &y,
                        *n_max,
                        config.caps.distance_cap,
                    )?;
                    if format.wants_csv() {
                        outputs.push(write_file(out_dir, "claim2.csv", &experiments::claim2_csv(&report))?);
                    }
                    constants.d_hat = Some(report.d_hat);
                }
                ExperimentConfig::Escape { z, h_radius, n_max } => {
                    let b = shared_ball.as_ref().expect("built for escape");
                    let oracle = BasepointOracle::new(&amalgam, b);
                    let report = experiments::exp_gromov_escape(
                        &amalgam,
                        &oracle,
                        z,
                        &y,
                        *h_radius,
                        *n_max,
                        config.caps.distance_cap,
                        threads,
                    )?;
                    if format.wants_csv() {
                        outputs.push(write_file(out_dir, "escape.csv", &experiments::escape_csv(&report))?);
                    }
                }
                ExperimentConfig::Vn { g, max_radius } => {
                    let b = shared_ball.as_ref().expect("built for vn");
                    let rows = experiments::exp_vn_index(&amalgam, b, g, *max_radius)?;
                    if format.wants_csv() {
                        outputs.push(write_file(out_dir, "vn.csv", &experiments::vn_csv(&rows))?);
                    }
                }
                ExperimentConfig::Delta { max_radius, exhaustive, sample_count } => {
                    let mode = if *exhaustive { DeltaMode::Exhaustive } else { DeltaMode::Sampled };
                    let reports =
                        experiments::exp_delta(&amalgam, *max_radius, mode, *sample_count, config.seed)?;
                    if format.wants_csv() {
                        outputs.push(write_file(out_dir, "delta.csv", &experiments::delta_csv(&reports))?);
                    }
                    if let Some(last) = reports.last() {
                        constants.delta_hat = Some(last.delta_hat());
                        constants.delta_radius = Some(last.radius);
                    }
                }
                ExperimentConfig::Quasiconvexity { subgroup, radius } => {
                    let choice = match subgroup.as_str() {
                        "c-in-m" => SubgroupChoice::EdgeInAmalgam,
                        "h-in-m" => SubgroupChoice::HInAmalgam,
                        _ => SubgroupChoice::BaseInTorus,
                    };
                    let rows = experiments::exp_quasiconvexity(&amalgam, choice, *radius)?;
                    if format.wants_csv() {
                        outputs.push(write_file(
                            out_dir,
                            "quasiconvexity.csv",
                            &experiments::quasiconvexity_csv(&rows),
                        )?);
                    }
                    constants.epsilon_profile = Some(rows);
                }
            }
            Ok(())
        })();

        match outcome {
            Ok(()) => statuses.push(ExperimentStatus { name, ok: true, error: None, outputs }),
            Err(e) => {
                statuses.push(ExperimentStatus {
                    name,
                    ok: false,
                    error: Some(e.to_string()),
                    outputs,
                });
                if fail_fast {
                    break;
                }
            }
        }
    }

    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        statuses,
        constants,
        wall_time: start.elapsed(),
    };

    if format.wants_json() {
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        let path = write_file(out_dir, "summary.json", &json)?;
        report.statuses.push(ExperimentStatus {
            name: "summary".to_string(),
            ok: true,
            error: None,
            outputs: vec![path],
        });
    }
    Ok(report)
}

pub fn default_out_dir(config: &RunConfig) -> PathBuf {
    PathBuf::from(&config.out_dir)
}

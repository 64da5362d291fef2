//! `wordbench` — batch front door: validate a config, run its experiments,
//! emit CSV/JSON reports with full provenance (caps, seeds, versions).

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use report::OutputFormat;
use wordbench_core::experiments::validate_y;

#[derive(Parser)]
#[command(name = "wordbench", version, about = "Word-metric workbench for a cyclic amalgam of mapping tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the config and the experiment hypotheses, then exit.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the configured experiments and emit reports.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop at the first failing experiment.
        #[arg(long)]
        fail_fast: bool,
        /// Worker threads for per-row fan-out inside experiments.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_parser = parse_format, default_value = "both")]
        format: OutputFormat,
    },
    /// Print the constructed contexts and presets.
    Describe {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        "both" => Ok(OutputFormat::Both),
        other => Err(format!("unknown format {other:?}; expected csv, json, or both")),
    }
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", p.display()))?,
        None => String::new(),
    };
    Ok(RunConfig::parse(&text)?)
}

/// Hypothesis checks shared by `check` and run preflight: edge primitivity
/// is enforced during context construction; the y conditions are verified
/// here with their stable reason codes.
fn check_hypotheses(config: &RunConfig) -> anyhow::Result<()> {
    let built = config.build_contexts()?;
    let verdict = validate_y(&built.amalgam, &built.y, config.caps.y_window);
    if !verdict.valid {
        let reason = verdict.reason.expect("invalid verdict carries a reason");
        anyhow::bail!("y rejected ({}): y = {:?}", reason.code(), config.y);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_command(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Check { config } => {
            let cfg = load_config(&config)?;
            check_hypotheses(&cfg)?;
            println!("config ok: mode={:?} base={:?} x={:?} y={:?}, {} experiment(s)",
                cfg.mode, cfg.base, cfg.edge.x, cfg.y, cfg.experiments.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out, fail_fast, threads, format } => {
            let cfg = load_config(&config)?;
            check_hypotheses(&cfg)?;
            let out_dir = out.unwrap_or_else(|| report::default_out_dir(&cfg));
            let run = report::run(&cfg, &out_dir, format, fail_fast, threads.max(1))?;
            for s in &run.statuses {
                let tag = if s.ok { "ok" } else { "failed" };
                eprintln!("{:>14}  {}{}", s.name, tag,
                    s.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default());
                for o in &s.outputs {
                    eprintln!("{:>14}  wrote {o}", "");
                }
            }
            eprintln!("wall time: {:.3}s", run.wall_time.as_secs_f64());
            if run.all_ok() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Describe { config } => {
            let cfg = load_config(&config)?;
            let built = cfg.build_contexts()?;
            let m = &built.amalgam;
            println!("mode: {:?}", cfg.mode);
            println!("base alphabet: {}", cfg.base);
            println!("combined alphabet: {}", m.alphabet().names().join(" "));
            println!("automorphism forward:");
            for (g, img) in &cfg.aut.forward {
                println!("  {g} -> {img}");
            }
            println!("automorphism backward:");
            for (g, img) in &cfg.aut.backward {
                println!("  {g} -> {img}");
            }
            println!("edge: x = {:?}, x1 = {:?}", cfg.edge.x, cfg.edge.x1);
            println!("y: {:?}", cfg.y);
            println!(
                "caps: ball_radius={} distance_cap={} coset_window={} geodesic_cap={} y_window={}",
                cfg.caps.ball_radius,
                cfg.caps.distance_cap,
                cfg.caps.coset_window,
                cfg.caps.geodesic_cap,
                cfg.caps.y_window
            );
            println!("seed: {}", cfg.seed);
            println!("experiments ({}):", cfg.experiments.len());
            for e in &cfg.experiments {
                println!("  {}", e.label());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

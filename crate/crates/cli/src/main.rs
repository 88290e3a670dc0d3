//! Experiment CLI: run presets or TOML configs on any engine, emit CSV
//! traces, and print long-run summaries with the applicable closed-form
//! bounds.

use clap::{Parser, ValueEnum};
use flocksim::analysis::{aggregate, bound_report};
use flocksim::csv_io::{fmt_f64, write_ensemble_csv};
use flocksim::engine::run_experiment;
use flocksim::{EngineKind, ExperimentConfig, Mode, Trace, PRESET_NAMES};
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Event,
    Parallel,
    Sde,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Flocking,
    Centralized,
    Independent,
    /// Run the continuum-limit engine for the configured dynamics.
    Sde,
}

/// Flocking-based distributed stochastic optimization experiments.
#[derive(Debug, Parser)]
#[command(name = "flocksim", version, about, long_about = None, after_help = preset_help())]
struct Args {
    /// Named preset experiment.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Path to a TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicates override.
    #[arg(long)]
    replicas: Option<usize>,
    /// Execution engine override.
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Scheme override; `sde` selects the continuum-limit engine.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// CSV output path; stdout when omitted (summary then goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the applicable closed-form bounds and exit.
    #[arg(long)]
    bounds: bool,
}

fn preset_help() -> String {
    format!("Presets: {}", PRESET_NAMES.join(", "))
}

fn load_config(args: &Args) -> Result<ExperimentConfig, String> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => flocksim::preset(name).map_err(|e| e.to_string())?,
        (None, Some(path)) => ExperimentConfig::parse_file(path).map_err(|e| e.to_string())?,
        (None, None) => return Err("one of --preset or --config is required".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.replicas {
        cfg.replicates = r;
    }
    if let Some(engine) = args.engine {
        cfg.engine = match engine {
            EngineArg::Event => EngineKind::Event,
            EngineArg::Parallel => EngineKind::Parallel,
            EngineArg::Sde => EngineKind::Sde,
        };
    }
    if let Some(mode) = args.mode {
        match mode {
            ModeArg::Flocking => cfg.mode = Mode::Flocking,
            ModeArg::Centralized => cfg.mode = Mode::Centralized,
            ModeArg::Independent => cfg.mode = Mode::Independent,
            ModeArg::Sde => cfg.engine = EngineKind::Sde,
        }
    }
    cfg.validate()
        .map_err(|errs| errs.join("\n"))
        .map(|()| cfg)
}

fn print_summary<W: Write>(
    w: &mut W,
    cfg: &ExperimentConfig,
    traces: &[Trace],
    bounds_text: &str,
) -> std::io::Result<()> {
    let stats = aggregate(cfg, traces);
    writeln!(w, "summary.replicates = {}", stats.replicates)?;
    writeln!(w, "summary.diverged = {}", stats.diverged_count)?;
    if let Some((mean, se)) = stats.longrun_u() {
        writeln!(w, "summary.longrun_u_mean = {}", fmt_f64(mean))?;
        writeln!(w, "summary.longrun_u_se = {}", fmt_f64(se))?;
    }
    if let Some((mean, se)) = stats.longrun_vbar() {
        writeln!(w, "summary.longrun_vbar_mean = {}", fmt_f64(mean))?;
        writeln!(w, "summary.longrun_vbar_se = {}", fmt_f64(se))?;
    }
    if cfg.hit_radius.is_some() {
        match stats.hit_stats() {
            Some((mean, sd, count)) => {
                writeln!(w, "summary.hit_mean = {}", fmt_f64(mean))?;
                writeln!(w, "summary.hit_sd = {}", fmt_f64(sd))?;
                writeln!(w, "summary.hit_count = {count}")?;
            }
            None => writeln!(w, "summary.hit_count = 0")?,
        }
    }
    write!(w, "{bounds_text}")?;
    Ok(())
}

fn run(args: &Args) -> Result<u8, String> {
    let cfg = load_config(args)?;
    let bounds = bound_report(&cfg).map_err(|e| e.to_string())?;

    if args.bounds {
        print!("{}", bounds.to_text());
        return Ok(0);
    }

    let traces: Vec<Trace> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_experiment(&cfg, r))
        .collect::<flocksim::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;

    let all_diverged = traces.iter().all(|t| t.diverged.is_some());

    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            let mut buf = std::io::BufWriter::new(file);
            write_ensemble_csv(&mut buf, &cfg, &traces, &bounds).map_err(|e| e.to_string())?;
            buf.flush().map_err(|e| e.to_string())?;
            let stdout = std::io::stdout();
            print_summary(&mut stdout.lock(), &cfg, &traces, &bounds.to_text())
                .map_err(|e| e.to_string())?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = std::io::BufWriter::new(stdout.lock());
            write_ensemble_csv(&mut lock, &cfg, &traces, &bounds).map_err(|e| e.to_string())?;
            lock.flush().map_err(|e| e.to_string())?;
            let stderr = std::io::stderr();
            print_summary(&mut stderr.lock(), &cfg, &traces, &bounds.to_text())
                .map_err(|e| e.to_string())?;
        }
    }

    if all_diverged {
        eprintln!("error: every replicate diverged");
        return Ok(EXIT_DIVERGED);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

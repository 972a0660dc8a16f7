use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use qgrad_core::experiment::{
    report, run_b_sweep, run_multi_probe, run_nullmodel_suite, run_scaling, run_single_probe, with_workers,
    ExperimentConfig, RunOutcome,
};
use qgrad_core::heads::HeadKind;
use qgrad_core::shots::{power_of_two_grid, ProbeKind};
use qgrad_core::Error;
use serde_json::{json, Value};

/// Gradient-diagnostic experiments on compressed measurement interfaces.
///
/// Set QGRAD_WORKERS to override the number of worker threads.
#[derive(Parser, Debug)]
#[command(name = "qgrad", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-parameter probe: frontier and resolved gradients per head.
    Single(RunArgs),
    /// Subspace probe: chain-rule decompositions, variance bridge, frontier.
    Multi(RunArgs),
    /// ΔAICc classification of a multi-probe run's transmitted-gradient trends.
    Scaling {
        /// Run directory produced by `multi`.
        #[arg(long)]
        from: PathBuf,
    },
    /// Transmittance null-model menu.
    Nullmodel(RunArgs),
    /// Repeat a probe across interface widths (`--b-list`).
    Bsweep(RunArgs),
    /// Summarize an existing run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Start from a JSON config (e.g. a run's config.json); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Qubit counts, comma separated.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    n: Option<Vec<usize>>,
    #[arg(long)]
    b: Option<usize>,
    /// Block counts compared by `bsweep`.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    b_list: Option<Vec<usize>>,
    /// Heads, comma separated: linear, jsd, nll.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    heads: Option<Vec<String>>,
    /// Probe repeated by `bsweep`.
    #[arg(long)]
    probe: Option<String>,
    #[arg(long)]
    circuits: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    subspace: Option<usize>,
    /// Shot budgets: a comma list or a power-of-two range like `2^7..2^20`.
    #[arg(long)]
    shots_grid: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    teacher_shots: Option<u64>,
    /// Student depth (default: teacher depth at each n).
    #[arg(long)]
    depth: Option<usize>,
    /// Multi probe: exact decompositions only, no finite-shot frontier.
    #[arg(long)]
    exact_only: bool,
    /// Monte-Carlo samples per null-model row.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_probe(s: &str) -> Result<ProbeKind, Error> {
    match s.to_ascii_lowercase().as_str() {
        "single" => Ok(ProbeKind::Single),
        "multi" => Ok(ProbeKind::Multi),
        other => Err(invalid(format!("unknown probe {other:?}"))),
    }
}

fn parse_exponent(s: &str) -> Result<u32, Error> {
    s.trim()
        .strip_prefix("2^")
        .and_then(|e| e.parse().ok())
        .filter(|e| *e < 63)
        .ok_or_else(|| invalid(format!("expected 2^k in shot range, got {s:?}")))
}

fn parse_shots_grid(s: &str) -> Result<Vec<u64>, Error> {
    if let Some((lo, hi)) = s.split_once("..") {
        return Ok(power_of_two_grid(parse_exponent(lo)?, parse_exponent(hi)?));
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| invalid(format!("bad shot budget {t:?}")))
        })
        .collect()
}

fn build_config(args: &RunArgs, probe: ProbeKind) -> Result<ExperimentConfig, Error> {
    let mut c = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text)?
        }
        None => ExperimentConfig::protocol_defaults(probe),
    };
    if args.config.is_some() && args.probe.is_none() {
        c.probe = probe;
    }
    if let Some(v) = &args.n {
        c.n_list = v.clone();
    }
    if let Some(v) = args.b {
        c.b = v;
    }
    if let Some(v) = &args.b_list {
        c.b_list = v.clone();
    }
    if let Some(v) = &args.heads {
        c.heads = v.iter().map(|h| h.parse::<HeadKind>()).collect::<Result<_, _>>()?;
    }
    if let Some(v) = &args.probe {
        c.probe = parse_probe(v)?;
    }
    if let Some(v) = args.circuits {
        c.circuits = v;
    }
    if let Some(v) = args.reps {
        c.reps = v;
    }
    if let Some(v) = args.subspace {
        c.subspace = v;
    }
    if let Some(v) = &args.shots_grid {
        c.shots_grid = parse_shots_grid(v)?;
    }
    if let Some(v) = args.kappa {
        c.kappa = v;
    }
    if let Some(v) = args.tau {
        c.tau = v;
    }
    if let Some(v) = args.eps {
        c.eps = v;
    }
    if let Some(v) = args.teacher_shots {
        c.teacher_shots = v;
    }
    if let Some(v) = args.depth {
        c.student_depth = Some(v);
    }
    if args.exact_only {
        c.exact_only = true;
    }
    if let Some(v) = args.samples {
        c.null_samples = v;
    }
    if let Some(v) = args.seed {
        c.master_seed = v;
    }
    c.out_dir = args.out.clone();
    Ok(c)
}

fn outcome_json(out: &RunOutcome) -> Result<Value, Error> {
    Ok(json!({
        "run_dir": out.run_dir,
        "checksum": out.checksum,
        "cells_computed": out.cells_computed,
        "cells_resumed": out.cells_resumed,
        "summaries": serde_json::to_value(&out.summaries)?,
    }))
}

fn run(command: Command) -> Result<Value, Error> {
    match command {
        Command::Single(args) => {
            let mut cfg = build_config(&args, ProbeKind::Single)?;
            cfg.probe = ProbeKind::Single;
            outcome_json(&with_workers(|| run_single_probe(&cfg))?)
        }
        Command::Multi(args) => {
            let mut cfg = build_config(&args, ProbeKind::Multi)?;
            cfg.probe = ProbeKind::Multi;
            outcome_json(&with_workers(|| run_multi_probe(&cfg))?)
        }
        Command::Bsweep(args) => {
            let cfg = build_config(&args, ProbeKind::Single)?;
            outcome_json(&with_workers(|| run_b_sweep(&cfg))?)
        }
        Command::Nullmodel(args) => {
            let cfg = build_config(&args, ProbeKind::Single)?;
            let rep = with_workers(|| run_nullmodel_suite(&cfg))?;
            Ok(json!({ "run_dir": rep.run_dir, "rows": serde_json::to_value(&rep.rows)? }))
        }
        Command::Scaling { from } => Ok(serde_json::to_value(run_scaling(&from)?)?),
        Command::Report { run } => Ok(serde_json::to_value(report(&run)?)?),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shot_grid_forms() {
        assert_eq!(parse_shots_grid("2^7..2^9").unwrap(), vec![128, 256, 512]);
        assert_eq!(parse_shots_grid("10, 20,40").unwrap(), vec![10, 20, 40]);
        assert!(parse_shots_grid("2^7..9").is_err());
        assert!(parse_shots_grid("ten").is_err());
    }
}

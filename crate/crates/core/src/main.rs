use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prbandit::harness::{
    emit_csv, parse_config_with, run_experiment, run_experiment_on, write_csv, ExperimentKind, Profile,
};
use prbandit::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "prbandit", version, about = "Private and robust bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cumulative clean-regret curves on the linear-means benchmark.
    Regret(Common),
    /// Empirical error quantiles of the mean estimators against their radii.
    Concentration(Common),
    /// Empirical sensitivity of the truncated mean.
    Audit(Common),
    /// Regret curves on the two-point lower-bound instances.
    HardInstance(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment description; built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; overrides `output` in the config. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `base_seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults for horizon and repetitions when the config leaves them unset.
    #[arg(long, value_enum, default_value_t = ProfileArg::Paper)]
    profile: ProfileArg,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (kind, common) = match cli.command {
        Command::Regret(c) => (ExperimentKind::RegretCurves, c),
        Command::Concentration(c) => (ExperimentKind::ConcentrationStudy, c),
        Command::Audit(c) => (ExperimentKind::SensitivityAudit, c),
        Command::HardInstance(c) => (ExperimentKind::HardInstance, c),
    };
    match run(kind, common) {
        Ok(code) => code,
        Err((code, err)) => {
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}

fn run(kind: ExperimentKind, args: Common) -> Result<ExitCode, (u8, Error)> {
    let config_err = |e| (EXIT_CONFIG, e);
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })
            .map_err(config_err)?,
        None => String::new(),
    };
    let profile = match args.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    };
    let text = with_kind(&text, kind).map_err(config_err)?;
    let mut cfg = parse_config_with(&text, profile).map_err(config_err)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }

    let output = match args.threads {
        Some(0) => return Err(config_err(Error::Config("`--threads` must be >= 1".into()))),
        Some(n) => run_experiment_on(&cfg, n),
        None => run_experiment(&cfg),
    }
    .map_err(|e| (EXIT_RUNTIME, e))?;

    let destination = args.out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
    match destination {
        Some(path) => emit_csv(&output.rows, &path).map_err(|e| (EXIT_RUNTIME, e))?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(&output.rows, &mut lock).map_err(|e| (EXIT_RUNTIME, e))?;
            let _ = lock.flush();
        }
    }

    if output.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &output.failures {
            eprintln!("cell {} ({}) failed: {}", f.cell, f.description, f.error);
        }
        Ok(ExitCode::from(EXIT_RUNTIME))
    }
}

/// Pins the document's `kind` to the subcommand, rejecting a conflicting one.
fn with_kind(text: &str, kind: ExperimentKind) -> Result<String, Error> {
    let name = match kind {
        ExperimentKind::RegretCurves => "regret_curves",
        ExperimentKind::ConcentrationStudy => "concentration_study",
        ExperimentKind::SensitivityAudit => "sensitivity_audit",
        ExperimentKind::HardInstance => "hard_instance",
    };
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    match table.get("kind") {
        Some(toml::Value::String(s)) if s == name => Ok(text.to_string()),
        Some(other) => Err(Error::Config(format!(
            "config declares kind = {other} but the subcommand runs `{name}`"
        ))),
        None => Ok(format!("kind = \"{name}\"\n{text}")),
    }
}

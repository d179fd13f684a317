use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hamest::experiment::{
    parse_delta_list, run_sweep, run_trials, summarize, ExperimentConfig, TrialOutcome,
};
use hamest::verify::{run_suite, Suite};
use hamest::Error;

/// Multiparameter Hamiltonian estimation experiments.
#[derive(Parser)]
#[command(name = "hamest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// CSV output; the JSON summary goes next to it with a .json extension.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials of one configuration.
    Run(RunArgs),
    /// Run the configuration at several δ and fit the scaling of median T.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Strictly decreasing δ values, e.g. 0.2,0.1,0.05.
        #[arg(long, value_name = "CSV")]
        delta_list: Option<String>,
    },
    /// Run the fixed-seed property suites.
    Verify {
        /// all, qfi, collective, resolution or bounds.
        #[arg(default_value = "all")]
        suite: String,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.csv_out = Some(out.clone());
        cfg.json_out = Some(out.with_extension("json"));
    }
    Ok(cfg)
}

fn write_rows<W: Write>(writer: W, cfg: &ExperimentConfig, batches: &[(f64, &[TrialOutcome])]) -> csv::Result<()> {
    let m = cfg.build_model().map(|model| model.m()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    for (delta, outcomes) in batches {
        for o in *outcomes {
            w.serialize(o.row(cfg, *delta, m))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV to the configured path (stdout otherwise); JSON summary to its path
/// (stderr when the CSV went to stdout, stdout when there is no CSV path).
fn emit(cfg: &ExperimentConfig, batches: &[(f64, &[TrialOutcome])], summary: &serde_json::Value) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(summary).map_err(|e| Failure::Runtime(e.to_string()))?;
    match &cfg.csv_out {
        Some(path) => {
            let f = File::create(path).map_err(|e| io_err(path, e))?;
            write_rows(f, cfg, batches).map_err(|e| io_err(path, e))?;
        }
        None => write_rows(io::stdout().lock(), cfg, batches).map_err(|e| Failure::Runtime(e.to_string()))?,
    }
    match (&cfg.json_out, &cfg.csv_out) {
        (Some(path), _) => std::fs::write(path, json + "\n").map_err(|e| io_err(path, e))?,
        (None, None) => eprintln!("{json}"),
        (None, Some(_)) => println!("{json}"),
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let outcomes = run_trials(&cfg, cfg.delta, args.jobs)?;
    let summary = summarize(&cfg, cfg.delta, &outcomes);
    let value = serde_json::to_value(&summary).map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(&cfg, &[(cfg.delta, &outcomes)], &value)
}

fn cmd_sweep(args: &RunArgs, delta_list: Option<&str>) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let deltas = match delta_list {
        Some(s) => parse_delta_list(s)?,
        None => cfg
            .delta_list
            .clone()
            .ok_or_else(|| Failure::Usage("sweep needs --delta-list or delta_list in the config".into()))?,
    };
    let result = run_sweep(&cfg, &deltas, args.jobs)?;
    let batches: Vec<(f64, &[TrialOutcome])> = result
        .points
        .iter()
        .map(|(s, o)| (s.delta, o.as_slice()))
        .collect();
    let value = serde_json::to_value(&result.summary).map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(&cfg, &batches, &value)
}

fn cmd_verify(suite: &str) -> Result<bool, Failure> {
    let suite: Suite = suite.parse()?;
    let checks = run_suite(suite);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Sweep { args, delta_list } => cmd_sweep(args, delta_list.as_deref()).map(|_| true),
        Command::Verify { suite } => cmd_verify(suite),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

//! `towerlimits`: run experiments from INI configurations.
//!
//! Exit status: 0 on success, 1 when `--strict` is given and a verdict
//! fails, 2 for configuration and usage errors, 3 when a precondition of the
//! computation fails or outputs cannot be written.

mod catalog;
mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(#[from] towerlimits::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) | CliError::Output(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "towerlimits",
    version,
    about = "Run limit-law experiments on expanding maps, towers, flows and billiards"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by an INI configuration.
    Run {
        config: PathBuf,
        /// Exit with status 1 if any verdict fails.
        #[arg(long)]
        strict: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides `[experiment] output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a gnuplot script next to each CSV.
        #[arg(long)]
        plots: bool,
        /// Validate the configuration and exit without running.
        #[arg(long)]
        check: bool,
    },
    /// List the experiment kinds with their settings and outputs.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn run(
    path: PathBuf,
    strict: bool,
    threads: Option<usize>,
    out: Option<PathBuf>,
    plots: bool,
    check: bool,
) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse(&text)?;
    if check {
        println!("{}: valid {} configuration", path.display(), cfg.experiment);
        return Ok(ExitCode::SUCCESS);
    }
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("out/{}-seed{}", cfg.experiment, cfg.seed)));
    output::prepare(&dir)?;

    let start = Instant::now();
    let outcome = experiments::run(&cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    output::write(&dir, &cfg, &outcome, runtime, plots)?;

    println!(
        "{} (seed {}) -> {}",
        cfg.experiment,
        cfg.seed,
        dir.display()
    );
    for (name, ok) in &outcome.verdicts {
        println!("  {} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    let failed = outcome.verdicts.values().any(|ok| !ok);
    Ok(if strict && failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn list(json: bool) {
    let entries: Vec<_> = catalog::ALL.iter().map(|k| k.entry()).collect();
    if json {
        let doc = serde_json::json!({
            "csv_schema_version": catalog::CSV_SCHEMA_VERSION,
            "experiments": entries,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("catalog serializes")
        );
        return;
    }
    for e in entries {
        println!(
            "{:<14} [{}] {}",
            e.kind.name(),
            e.criteria.join(", "),
            e.description
        );
        println!("{:<14} systems: {}", "", e.systems.join(", "));
        println!("{:<14} budget:  {}", "", e.budget_keys.join(", "));
        for s in e.series {
            println!("{:<14} {} ({})", "", s.file, s.columns.join(","));
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            list(json);
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            strict,
            threads,
            out,
            plots,
            check,
        } => run(config, strict, threads, out, plots, check).unwrap_or_else(|e| {
            eprintln!("towerlimits: {e}");
            ExitCode::from(e.exit_code())
        }),
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use treehjb_cli::{cmd_compare, cmd_solve, reproduce, init_threads, CliResult, RunConfig, TestId};

#[derive(Parser)]
#[command(name = "treehjb", version, about = "Tree-structure and grid solvers for state-constrained optimal control")]
struct Cli {
    /// Worker threads for the solvers (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed recorded in the outputs, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on a configured problem.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tree against grid, with and without inertia.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Also build the tree without the state constraint and report node totals.
        #[arg(long)]
        constraint_toggle: bool,
        /// One untimed run of each value solver first.
        #[arg(long)]
        warmup: bool,
    },
    /// Run a scripted benchmark test and check it against its thresholds.
    Reproduce {
        /// test1, test2a, test2b or test3
        test: String,
    },
    /// Catalog queries.
    Catalog {
        #[command(subcommand)]
        what: CatalogCommand,
    },
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Print the available problem names.
    List,
}

fn load(cli: &Cli, path: &Path) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Solve { config } => {
            let summary = cmd_solve(&load(cli, config)?)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Compare { config, constraint_toggle, warmup } => {
            let report = cmd_compare(&load(cli, config)?, *constraint_toggle, *warmup)?;
            print!("{}", report.table());
        }
        Command::Reproduce { test } => {
            let id: TestId = test.parse()?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(id.name()));
            let report = reproduce(id, &out)?;
            for c in &report.checks {
                println!("{} {}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
            }
            report.first_failure()?;
        }
        Command::Catalog { what: CatalogCommand::List } => {
            for name in treehjb::catalog::NAMES {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("treehjb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

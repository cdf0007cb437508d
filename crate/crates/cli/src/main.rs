use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use paralens::check::COUNTER_DEPTHS;
use paralens::ComposeMode;
use paralens_cli::commands;
use paralens_cli::config::{Loaded, ModeName};

#[derive(Parser)]
#[command(
    name = "paralens",
    version,
    about = "Train, dream and check with parametric lenses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's compose mode.
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised training on a CSV dataset.
    Train(RunArgs),
    /// Deep dreaming: push an input towards one output unit.
    Dream(RunArgs),
    /// Generator/discriminator training with descent-ascent.
    Gan(RunArgs),
    /// Forward-call counts per layer for both compose modes.
    Bench {
        /// Chain depths, at least 2.
        #[arg(long, value_delimiter = ',')]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only this mode; both when absent.
        #[arg(long, value_enum)]
        mode: Option<ModeName>,
        /// Also write the table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the gradient, functoriality, axiom, worked-example, Z2 and
    /// counter suites.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Negate this primitive's backward pass first (expect failures).
        #[arg(long)]
        flip: Option<String>,
    },
}

fn load(args: &RunArgs) -> Result<(Loaded, PathBuf)> {
    let mut loaded = Loaded::read(&args.config)?;
    if let Some(s) = args.seed {
        loaded.config.seed = s;
    }
    if let Some(m) = args.mode {
        loaded.config.compose_mode = m;
    }
    let out = match (&args.out, &loaded.config.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => loaded.resolve(o),
        (None, None) => PathBuf::from("out"),
    };
    Ok((loaded, out))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(a) => {
            let (l, out) = load(&a)?;
            print_json(&commands::train(&l, &out)?)?;
        }
        Command::Dream(a) => {
            let (l, out) = load(&a)?;
            print_json(&commands::dream(&l, &out)?)?;
        }
        Command::Gan(a) => {
            let (l, out) = load(&a)?;
            let s = commands::gan(&l, &out)?;
            println!(
                "gap {:.6} -> {:.6} over {} steps",
                s.initial_gap, s.final_gap, s.steps
            );
        }
        Command::Bench {
            depths,
            seed,
            mode,
            out,
        } => {
            let depths = if depths.is_empty() {
                COUNTER_DEPTHS.collect()
            } else {
                depths
            };
            let modes = match mode {
                Some(m) => vec![ComposeMode::from(m)],
                None => vec![ComposeMode::Memoised, ComposeMode::Checkpointed],
            };
            let table = commands::bench(&depths, &modes, seed)?;
            print!("{}", commands::render_bench(&table));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                paralens_cli::io::write_json(&dir.join("bench.json"), &table)?;
            }
            if table.updates_agree == Some(false) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Check { seed, flip } => {
            let reports = commands::check(seed, flip.as_deref());
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            println!(
                "{} of {} suites passed",
                reports.len() - failed,
                reports.len()
            );
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cmc_tools::commands::fit_comparator;
use cmc_tools::{run, CliError, Command, RunOptions, Scenario};

/// Current-mode control loop analysis under sensor interference.
#[derive(Debug, Parser)]
#[command(name = "cmc", version)]
struct Args {
    command: Command,
    /// Scenario file (flat key = value with unit suffixes).
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario, e.g. buck-prototype.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cycles: Option<usize>,
    /// Region grid as A_POINTSxOMEGA_POINTS.
    #[arg(long, value_parser = parse_grid, default_value = "32x32")]
    grid: (usize, usize),
    /// Monte Carlo samples per cell.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// CSV of delta_v,delay pairs for fit-comparator.
    #[arg(long)]
    data: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected AxB")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn execute(args: Args) -> Result<String, CliError> {
    let scenario = match (&args.scenario, &args.preset) {
        (Some(path), _) => Some(Scenario::load(path)?),
        (None, Some(name)) => Some(Scenario::preset(name)?),
        (None, None) => None,
    };
    let opts = |sc: Option<&Scenario>| RunOptions {
        out_dir: args
            .out
            .clone()
            .or_else(|| sc.and_then(|s| s.run.output_path.clone()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(".")),
        seed: args.seed.or(sc.map(|s| s.run.seed)).unwrap_or(0),
        cycles: args.cycles,
        grid: args.grid,
        samples: args.samples,
        data: args.data.clone(),
    };
    match (args.command, scenario) {
        (Command::FitComparator, sc) => fit_comparator(&opts(sc.as_ref())),
        (cmd, Some(sc)) => run(cmd, &sc, &opts(Some(&sc))),
        (_, None) => Err(CliError::Precondition("either --scenario or --preset is required".into())),
    }
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

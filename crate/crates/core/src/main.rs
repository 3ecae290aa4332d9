use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavityfarm::experiment::{
    audit_run, freq_response, gw_run, plot, valley_sweep, vibration_run, PlotKind, RunOptions, RunOutcome,
    ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "cavityfarm", version, about = "Entanglement-farming cavity seismograph experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state E_N and 2<q1p2> over a grid of f = (T + dt)/L0.
    ValleySweep(RunArgs),
    /// Per-cycle response to a wall vibration, starting from the fixed point.
    Vibration(RunArgs),
    /// Peak |2<q1p2>| as a function of the vibration frequency.
    FreqResponse(RunArgs),
    /// Response to a gravitational wave acting through the mirror spring.
    Gw(RunArgs),
    /// Size of the moving-wall corrections neglected by the adiabatic model.
    Audit(RunArgs),
    /// Render a result CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip points already recorded in the output manifest.
    #[arg(long)]
    resume: bool,
    /// Worker threads for sweeps (else CAVITYFARM_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Exit 0 even if some sweep points fail.
    #[arg(long)]
    keep_going: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Result CSV written by one of the run subcommands.
    csv: PathBuf,
    /// valley, vibration, freq-response or gw; detected from the header when omitted.
    #[arg(long)]
    kind: Option<String>,
    /// SVG path; defaults to the CSV path with an .svg extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> cavityfarm::Result<(ScenarioConfig, RunOptions)> {
    let scenario = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let out = args
        .out
        .clone()
        .or_else(|| scenario.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let base_dir = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let opts = RunOptions { out_dir: out, resume: args.resume, workers: args.workers, keep_going: args.keep_going, base_dir };
    Ok((scenario, opts))
}

fn report(outcome: &RunOutcome, keep_going: bool) -> ExitCode {
    let m = &outcome.manifest;
    println!(
        "{}: {} points, {} failed, wrote {}",
        m.kind,
        m.points.len(),
        m.failures(),
        outcome.csv.display()
    );
    if outcome.failures() > 0 && !keep_going {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> cavityfarm::Result<ExitCode> {
    match cli.command {
        Command::ValleySweep(args) => {
            let (s, o) = load(&args)?;
            Ok(report(&valley_sweep(&s, &o)?, args.keep_going))
        }
        Command::Vibration(args) => {
            let (s, o) = load(&args)?;
            Ok(report(&vibration_run(&s, &o)?, args.keep_going))
        }
        Command::FreqResponse(args) => {
            let (s, o) = load(&args)?;
            Ok(report(&freq_response(&s, &o)?, args.keep_going))
        }
        Command::Gw(args) => {
            let (s, o) = load(&args)?;
            Ok(report(&gw_run(&s, &o)?, args.keep_going))
        }
        Command::Audit(args) => {
            let (s, o) = load(&args)?;
            let (outcome, r) = audit_run(&s, &o)?;
            println!("ratio_1 = {:e}, ratio_2 = {:e}, max |dL/dt| = {:e}", r.ratio_1, r.ratio_2, r.max_rate);
            if let Some(d) = r.max_drift() {
                println!("max detector covariance drift = {d:e}");
            }
            Ok(report(&outcome, args.keep_going))
        }
        Command::Plot(args) => {
            let kind = args.kind.as_deref().map(str::parse::<PlotKind>).transpose()?;
            let svg = plot(&args.csv, kind, args.out.as_deref())?;
            println!("wrote {}", svg.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

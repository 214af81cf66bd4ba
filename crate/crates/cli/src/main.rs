use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use swarm_core::edgelist::read_edge_list;
use swarm_core::robustness::analyze;
use swarm_core::sim::{preset, preset_names, run_scenario, write_outputs, ScenarioConfig};

#[derive(Parser)]
#[command(name = "swarm-sim", version, about = "Resilient formation control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write timeseries.csv, summary.json and config.echo.json.
    Run(RunArgs),
    /// Print a robustness report for an edge-list graph as JSON.
    Analyze(AnalyzeArgs),
    /// List the bundled scenarios.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir` or `runs/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long)]
    exact_robustness: bool,
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("one of --config or --preset is required"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .or_else(|| config.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(&config.name));
    let result = run_scenario(&config)?;
    let paths = write_outputs(&result, &out)?;
    let s = &result.summary;
    println!(
        "{}: spread=({:.3e}, {:.3e}) lambda2_min={:.3} hull_violations={} wall={:.2}s",
        s.name, s.final_spread[0], s.final_spread[1], s.lambda2_min_after_transient, s.hull_violations, s.wall_time_s
    );
    println!("wrote {}", paths.timeseries.parent().unwrap_or(&out).display());
    Ok(())
}

fn analyze_graph(args: AnalyzeArgs) -> anyhow::Result<()> {
    let g = read_edge_list(&args.graph).with_context(|| format!("reading {}", args.graph.display()))?;
    let report = analyze(&g, args.threshold, args.exact_robustness)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze_graph(args),
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

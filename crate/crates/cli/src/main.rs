//! `cellrate` command line: ergodic per-group rate distributions for
//! multi-cell MIMO downlinks under configurable cooperation and fairness.

mod registry;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use registry::ScenarioRegistry;
use run::{RunConfig, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "cellrate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write rates.csv, summary.json and (optionally)
    /// validation.csv into the output directory.
    Run(Box<RunArgs>),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Run-configuration JSON file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario name (see `list-scenarios`).
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario description JSON file.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// Fairness criterion: pfs, hfs or weighted.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated per-group weights for weighted mode.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Utility scale constant (optimum is invariant to it).
    #[arg(long)]
    utility_c: Option<f64>,
    /// Relative duality-gap tolerance.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Stationarity tolerance of the outer loop.
    #[arg(long)]
    stat_tol: Option<f64>,
    /// Outer-iteration budget.
    #[arg(long)]
    max_outer: Option<usize>,
    /// SINR fixed-point coupling: coupled or shared.
    #[arg(long)]
    sinr_coupling: Option<String>,
    /// Validate the reported rates against the finite-dimension Monte Carlo
    /// oracle.
    #[arg(long)]
    mc_validate: bool,
    /// Monte Carlo draws per group size.
    #[arg(long)]
    mc_draws: Option<usize>,
    /// Comma-separated group sizes for the validation (e.g. 1,2,4).
    #[arg(long = "mc-N", value_delimiter = ',')]
    mc_n: Option<Vec<usize>>,
    /// Master seed of the validation sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for the artifact set.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            scenario_path: self.scenario_file.clone(),
            scenario_name: self.scenario.clone(),
            mode: self.mode.clone(),
            utility_c: self.utility_c,
            weights: self.weights.clone(),
            gap_tol: self.gap_tol,
            stat_tol: self.stat_tol,
            max_outer: self.max_outer,
            sinr_coupling: self.sinr_coupling.clone(),
            mc_validate: if self.mc_validate { Some(true) } else { None },
            mc_draws: self.mc_draws,
            mc_n: self.mc_n.clone(),
            seed: self.seed,
            out_dir: self.out.clone(),
            jobs: self.jobs,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => {
            let file_config = match &args.config {
                Some(path) => match std::fs::read_to_string(path) {
                    Ok(text) => match serde_json::from_str::<RunConfig>(&text) {
                        Ok(c) => c,
                        Err(e) => {
                            eprintln!("error: invalid run config {}: {e}", path.display());
                            std::process::exit(EXIT_CONFIG);
                        }
                    },
                    Err(e) => {
                        eprintln!("error: cannot read run config {}: {e}", path.display());
                        std::process::exit(EXIT_CONFIG);
                    }
                },
                None => RunConfig::default(),
            };
            match run::run(file_config, args.as_config()) {
                Ok(code) => code,
                Err(e) => {
                    eprintln!("error: {}", e.message());
                    e.exit_code()
                }
            }
        }
        Command::ListScenarios => {
            for entry in ScenarioRegistry::standard().entries() {
                println!("{:22} {} [{}]", entry.name, entry.description, entry.default_mode);
            }
            0
        }
    };
    std::process::exit(code);
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use consumption_duality::exec::Exec;
use consumption_duality::report::{
    check_plan, exit_code, fmt_f64, parse_utility_str, read_plan, run, summary_csv, sweep, sweep_x_csv, sweep_y_csv,
    write_sweep, LoadedScenario, RunConfig, ScenarioSource,
};
use consumption_duality::solver::{brute_force_primal, DualProblem, SolverOptions};
use consumption_duality::utility::asymptotic_elasticity;
use consumption_duality::{Error, Result};

#[derive(Parser)]
#[command(name = "cduality", version, about = "Expected utility from consumption on event trees, solved by duality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// scenario file (TOML)
    #[arg(long, conflicts_with = "builder", required_unless_present = "builder")]
    scenario: Option<PathBuf>,
    /// builder tag with parameters, e.g. `complete_binomial:u=2,d=0.5,n=1`
    #[arg(long)]
    builder: Option<String>,
    /// utility override: `log`, `power:<alpha>` or an inline table
    #[arg(long)]
    utility: Option<String>,
    /// seed for the `random` builder
    #[arg(long)]
    seed: Option<u64>,
    /// optimality tolerance of the dual solver
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// run the outer loop on one thread
    #[arg(long)]
    sequential: bool,
}

impl Source {
    fn config(&self) -> Result<RunConfig> {
        let source = match (&self.scenario, &self.builder) {
            (Some(p), _) => ScenarioSource::File(p.clone()),
            (None, Some(tag)) => {
                let tag = match self.seed {
                    Some(seed) if tag.contains(':') => format!("{tag},seed={seed}"),
                    Some(seed) => format!("{tag}:seed={seed}"),
                    None => tag.clone(),
                };
                ScenarioSource::Builder(tag)
            }
            (None, None) => return Err(Error::InvalidArgument("give --scenario or --builder".into())),
        };
        let mut config = RunConfig::new(source);
        config.utility = self.utility.as_deref().map(parse_utility_str).transpose()?;
        config.options = SolverOptions {
            tol_opt: self.tol,
            ..SolverOptions::default()
        };
        config.exec = self.exec();
        Ok(config)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one or more initial wealths (or dual scales)
    Solve {
        #[command(flatten)]
        source: Source,
        /// initial wealth; repeat or separate with commas
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        /// dual scales to solve at
        #[arg(long, value_delimiter = ',')]
        y_grid: Vec<f64>,
        /// output directory for summary.csv, paths_*.csv and results.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the value functions and check their shape
    Sweep {
        #[command(flatten)]
        source: Source,
        /// wealth grid (at least three points)
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        /// dual-scale grid (at least three points)
        #[arg(long, value_delimiter = ',')]
        y_grid: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a given consumption plan (CSV with node,rate columns)
    Check {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        x: f64,
    },
    /// Brute-force the primal problem and compare with the dual solver
    Oracle {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        x: f64,
        /// zoom rounds of the grid search
        #[arg(long, default_value_t = 8)]
        refinement: usize,
    },
    /// Asymptotic elasticity report of the utility field
    Elasticity {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1e6)]
        x_max: f64,
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// exponent for the growth-condition grid checks
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn load(source: &Source) -> Result<LoadedScenario> {
    source.config()?.load()
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Internal(e.to_string()))
}

/// Runs a subcommand; `Ok(false)` means a certificate or check failed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Solve { source, x, y_grid, out } => {
            let mut config = source.config()?;
            config.x_grid = x;
            config.y_grid = y_grid;
            config.out_dir = out;
            let (_, results) = run(&config)?;
            print!("{}", summary_csv(&results));
            Ok(results.iter().all(|r| r.solution.certificates.all_pass()))
        }
        Command::Sweep { source, x, y_grid, out } => {
            let config = source.config()?;
            let loaded = config.load()?;
            let report = sweep(&loaded, &x, &y_grid, &config.options, config.exec)?;
            if let Some(dir) = out {
                write_sweep(&dir, &report)?;
            }
            if !report.x_rows.is_empty() {
                print!("{}", sweep_x_csv(&report));
            }
            if !report.y_rows.is_empty() {
                print!("{}", sweep_y_csv(&report));
            }
            println!(
                "u_increasing={} u_concave={} v_decreasing={} v_convex={}",
                report.u_increasing, report.u_concave, report.v_decreasing, report.v_convex
            );
            Ok(report.shape_ok())
        }
        Command::Check { source, plan, x } => {
            let loaded = load(&source)?;
            let rate = read_plan(&plan, loaded.scenario.tree().num_nodes())?;
            let check = check_plan(&loaded, x, &rate)?;
            println!("{}", to_json(&check)?);
            Ok(check.financeable)
        }
        Command::Oracle { source, x, refinement } => {
            let config = source.config()?;
            let loaded = config.load()?;
            let oracle = brute_force_primal(&loaded.scenario, &loaded.field, x, refinement)?;
            let solution = DualProblem::new(&loaded.scenario, &loaded.field)?.solve(x, &config.options)?;
            let diff = (oracle.value - solution.primal_value).abs();
            println!("oracle_value,solver_value,abs_diff");
            println!("{},{},{}", fmt_f64(oracle.value), fmt_f64(solution.primal_value), fmt_f64(diff));
            Ok(diff <= 1e-4 * solution.primal_value.abs().max(1.0))
        }
        Command::Elasticity {
            source,
            x_max,
            points,
            gamma,
        } => {
            let loaded = load(&source)?;
            let report = asymptotic_elasticity(&loaded.field, x_max, points, gamma)?;
            println!("{}", to_json(&report)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

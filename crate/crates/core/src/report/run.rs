//! Batch runs over wealth or dual-scale grids, value-function sweeps and
//! plan checks, with CSV and JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario_file::{load_builder, load_scenario, LoadedScenario};
use crate::error::{Error, Result, Stage};
use crate::exec::Exec;
use crate::market::{cumulative_from_rate, is_admissible_strategy, Strategy};
use crate::solver::{
    budget_check, recover_portfolio, DualProblem, Solution, SolverOptions, TOL_BUDGET,
};
use crate::utility::UtilitySpec;

/// Tag written into every JSON result.
pub const RESULT_FORMAT: &str = "consumption-duality/run/1";

/// Minimum number of grid points for a sweep.
pub const MIN_SWEEP_POINTS: usize = 3;

/// Formats a float for CSV output; identical inputs give identical bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err.stage() {
        Stage::Certificate => 1,
        Stage::Input => 2,
        Stage::NoArbitrage => 3,
        Stage::Solver => 4,
        Stage::DegenerateDual => 5,
        Stage::Internal => 6,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    /// builder tag with parameters, e.g. `complete_binomial:n=2`
    Builder(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ScenarioSource,
    /// overrides the utility of the scenario file or builder
    pub utility: Option<UtilitySpec>,
    /// initial wealths to solve at
    pub x_grid: Vec<f64>,
    /// dual scales to solve at (each fixes its own wealth)
    pub y_grid: Vec<f64>,
    pub options: SolverOptions,
    /// policy for the outer loop over grid points
    pub exec: Exec,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(source: ScenarioSource) -> Self {
        Self {
            source,
            utility: None,
            x_grid: Vec::new(),
            y_grid: Vec::new(),
            options: SolverOptions::default(),
            exec: Exec::default(),
            out_dir: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if let Some(x) = self.x_grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!(
                "x must be positive and finite, got {x}"
            )));
        }
        if let Some(y) = self.y_grid.iter().find(|y| !(**y > 0.0 && y.is_finite())) {
            return Err(Error::invalid(format!(
                "y must be positive and finite, got {y}"
            )));
        }
        if !(self.options.tol_opt > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.options.max_iterations == 0 {
            return Err(Error::invalid("iteration cap must be positive"));
        }
        Ok(())
    }

    pub fn load(&self) -> Result<LoadedScenario> {
        let loaded = match &self.source {
            ScenarioSource::File(path) => load_scenario(path)?,
            ScenarioSource::Builder(tag) => return load_builder(tag, self.utility.clone()),
        };
        match &self.utility {
            Some(u) => loaded.with_utility(u.clone()),
            None => Ok(loaded),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub format: String,
    pub index: usize,
    #[serde(flatten)]
    pub solution: Solution,
}

/// Loads the scenario, solves at every grid point and writes the outputs
/// when an output directory is set.
pub fn run(config: &RunConfig) -> Result<(LoadedScenario, Vec<RunResult>)> {
    config.check()?;
    let loaded = config.load()?;
    let results = solve_grid(
        &loaded,
        &config.x_grid,
        &config.y_grid,
        &config.options,
        config.exec,
    )?;
    if let Some(dir) = &config.out_dir {
        write_run(dir, &loaded, &results)?;
    }
    Ok((loaded, results))
}

/// Solves at every grid point. Results are ordered as the inputs: the x
/// grid first, then the y grid. The first failure aborts the batch.
pub fn solve_grid(
    loaded: &LoadedScenario,
    xs: &[f64],
    ys: &[f64],
    opts: &SolverOptions,
    exec: Exec,
) -> Result<Vec<RunResult>> {
    if xs.is_empty() && ys.is_empty() {
        return Err(Error::invalid("nothing to solve: give at least one x or y"));
    }
    let problem = DualProblem::new(&loaded.scenario, &loaded.field)?;
    let nx = xs.len();
    let solved = exec.map_range(nx + ys.len(), |i| {
        if i < nx {
            problem.solve(xs[i], opts)
        } else {
            problem.solve_at_y(ys[i - nx], opts)
        }
    });
    solved
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            s.map(|solution| RunResult {
                format: RESULT_FORMAT.to_string(),
                index,
                solution,
            })
        })
        .collect()
}

pub fn summary_csv(results: &[RunResult]) -> String {
    let mut out = String::from("x,y,primal_value,dual_value,gap,budget_slack,vi_worst,certified\n");
    for r in results {
        let s = &r.solution;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(s.x),
            fmt_f64(s.y),
            fmt_f64(s.primal_value),
            fmt_f64(s.dual_value),
            fmt_f64(s.gap),
            fmt_f64(s.diagnostics.budget_slack),
            fmt_f64(s.diagnostics.vi_worst),
            s.certificates.all_pass()
        );
    }
    out
}

/// Per-node table of one solution: consumption rate, density and wealth.
pub fn paths_csv(loaded: &LoadedScenario, s: &Solution) -> String {
    let tree = loaded.scenario.tree();
    let mut out = String::from("node,time,consumption,density,wealth\n");
    for n in tree.forward_order() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            n,
            fmt_f64(tree.time(n)),
            fmt_f64(s.c_hat[n]),
            fmt_f64(s.density[n]),
            fmt_f64(s.wealth[n])
        );
    }
    out
}

pub fn results_json(results: &[RunResult]) -> Result<String> {
    serde_json::to_string_pretty(results)
        .map_err(|e| Error::Internal(format!("serializing results: {e}")))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `summary.csv`, `paths_<index>.csv` per result and `results.json`.
pub fn write_run(dir: &Path, loaded: &LoadedScenario, results: &[RunResult]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(&dir.join("summary.csv"), &summary_csv(results))?;
    for r in results {
        write(
            &dir.join(format!("paths_{:03}.csv", r.index)),
            &paths_csv(loaded, &r.solution),
        )?;
    }
    write(&dir.join("results.json"), &(results_json(results)? + "\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepXRow {
    pub x: f64,
    pub value: f64,
    /// central difference of 𝔘 (one-sided near zero)
    pub derivative_fd: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepYRow {
    pub y: f64,
    pub value: f64,
    /// 𝔙'(y) from the optimal measure
    pub derivative: f64,
    pub derivative_fd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub x_rows: Vec<SweepXRow>,
    pub y_rows: Vec<SweepYRow>,
    pub u_increasing: bool,
    pub u_concave: bool,
    /// expected only without endowment; with ℰ ≠ 0, 𝔙' turns positive for
    /// large y
    pub v_decreasing: bool,
    pub v_convex: bool,
}

impl SweepReport {
    /// The shape claims that hold for every scenario: 𝔘 increasing and
    /// concave, 𝔙 convex.
    pub fn shape_ok(&self) -> bool {
        self.u_increasing && self.u_concave && self.v_convex
    }
}

fn step(v: f64) -> f64 {
    1e-4 * v.abs().max(1.0)
}

/// Tolerance for discrete shape checks, relative to the values involved.
fn shape_tol(values: &[f64]) -> f64 {
    1e-9 * values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

fn sorted_strictly(grid: &[f64], what: &str) -> Result<()> {
    if grid.len() < MIN_SWEEP_POINTS {
        return Err(Error::invalid(format!(
            "{what} sweep needs at least {MIN_SWEEP_POINTS} points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!(
            "{what} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Nonneg second differences on a possibly nonuniform grid.
fn convex_on(grid: &[f64], values: &[f64], tol: f64) -> bool {
    (1..grid.len().saturating_sub(1)).all(|i| {
        let left = (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]);
        let right = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
        right - left >= -tol
    })
}

/// Tabulates 𝔘 on `xs` and 𝔙 on `ys` with finite-difference slopes and
/// checks monotonicity and curvature. Either grid may be empty.
pub fn sweep(
    loaded: &LoadedScenario,
    xs: &[f64],
    ys: &[f64],
    opts: &SolverOptions,
    exec: Exec,
) -> Result<SweepReport> {
    if xs.is_empty() && ys.is_empty() {
        return Err(Error::invalid("sweep needs an x grid or a y grid"));
    }
    if !xs.is_empty() {
        sorted_strictly(xs, "x")?;
    }
    if !ys.is_empty() {
        sorted_strictly(ys, "y")?;
    }
    let problem = DualProblem::new(&loaded.scenario, &loaded.field)?;
    let primal_at = |x: f64| problem.solve(x, opts).map(|s| (s.primal_value, s.y));
    let x_rows = exec
        .map(xs, |&x| -> Result<SweepXRow> {
            let (value, y) = primal_at(x)?;
            let h = step(x);
            let derivative_fd = if x - h >= 0.0 {
                (primal_at(x + h)?.0 - primal_at(x - h)?.0) / (2.0 * h)
            } else {
                (primal_at(x + h)?.0 - value) / h
            };
            Ok(SweepXRow {
                x,
                value,
                derivative_fd,
                y,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let dual_at = |y: f64| problem.solve_dual(y, opts);
    let y_rows = exec
        .map(ys, |&y| -> Result<SweepYRow> {
            let sol = dual_at(y)?;
            let derivative = problem.derivative(y, &sol.q)?;
            let h = step(y).min(0.5 * y);
            let derivative_fd = (dual_at(y + h)?.value - dual_at(y - h)?.value) / (2.0 * h);
            Ok(SweepYRow {
                y,
                value: sol.value,
                derivative,
                derivative_fd,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let uv: Vec<f64> = x_rows.iter().map(|r| r.value).collect();
    let ut = shape_tol(&uv);
    let neg_u: Vec<f64> = uv.iter().map(|v| -v).collect();
    let vv: Vec<f64> = y_rows.iter().map(|r| r.value).collect();
    let vt = shape_tol(&vv);
    Ok(SweepReport {
        u_increasing: uv.windows(2).all(|w| w[1] >= w[0] - ut),
        u_concave: convex_on(xs, &neg_u, ut),
        v_decreasing: vv.windows(2).all(|w| w[1] <= w[0] + vt),
        v_convex: convex_on(ys, &vv, vt),
        x_rows,
        y_rows,
    })
}

pub fn sweep_x_csv(report: &SweepReport) -> String {
    let mut out = String::from("x,value,derivative_fd,y\n");
    for r in &report.x_rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.x),
            fmt_f64(r.value),
            fmt_f64(r.derivative_fd),
            fmt_f64(r.y)
        );
    }
    out
}

pub fn sweep_y_csv(report: &SweepReport) -> String {
    let mut out = String::from("y,value,derivative,derivative_fd\n");
    for r in &report.y_rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.y),
            fmt_f64(r.value),
            fmt_f64(r.derivative),
            fmt_f64(r.derivative_fd)
        );
    }
    out
}

/// Writes `sweep_x.csv` and `sweep_y.csv` (for the grids that were given)
/// and `sweep.json`.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    if !report.x_rows.is_empty() {
        write(&dir.join("sweep_x.csv"), &sweep_x_csv(report))?;
    }
    if !report.y_rows.is_empty() {
        write(&dir.join("sweep_y.csv"), &sweep_y_csv(report))?;
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))?;
    write(&dir.join("sweep.json"), &(json + "\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCheck {
    pub x: f64,
    pub primal_value: f64,
    /// `max_{Q ∈ 𝒟}` of the budget expression (≤ 0 when financeable)
    pub budget_slack: f64,
    pub financeable: bool,
    /// smallest terminal wealth of the financing strategy, when there is one
    pub min_terminal_wealth: Option<f64>,
}

/// Evaluates a consumption-rate plan at initial wealth `x`: its utility,
/// its worst-case budget and whether some admissible strategy finances it.
pub fn check_plan(loaded: &LoadedScenario, x: f64, rate: &[f64]) -> Result<PlanCheck> {
    let s = &loaded.scenario;
    let problem = DualProblem::new(s, &loaded.field)?;
    let cumulative = cumulative_from_rate(s, rate)?;
    let primal_value = problem.primal_value(rate)?;
    let budget = budget_check(s, &cumulative, x)?;
    let scale = 1.0 + x.abs() + cumulative.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let within = budget.max_slack <= TOL_BUDGET * scale;
    let (financeable, min_terminal_wealth) = if within {
        match recover_portfolio(s, &cumulative, x + budget.max_slack.max(0.0)) {
            Ok(p) => {
                let strategy = Strategy::new(p.holdings, cumulative.clone());
                let adm = is_admissible_strategy(s, x, &strategy)?;
                (adm.is_admissible(), Some(adm.min_terminal_wealth))
            }
            Err(Error::NotFinanceable { .. }) => (false, None),
            Err(e) => return Err(e),
        }
    } else {
        (false, None)
    };
    Ok(PlanCheck {
        x,
        primal_value,
        budget_slack: budget.max_slack,
        financeable,
        min_terminal_wealth,
    })
}

/// Reads a plan CSV with a `node,rate` header (extra columns are ignored).
pub fn read_plan(path: &Path, num_nodes: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_plan(&text, num_nodes, &path.display().to_string())
}

pub fn parse_plan(text: &str, num_nodes: usize, origin: &str) -> Result<Vec<f64>> {
    let perr = |line: usize, message: String| Error::Parse {
        path: format!("{origin}:{line}"),
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty plan".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let node_col = cols.iter().position(|c| *c == "node");
    let rate_col = cols
        .iter()
        .position(|c| *c == "rate" || *c == "consumption");
    let (Some(node_col), Some(rate_col)) = (node_col, rate_col) else {
        return Err(perr(1, "header must name 'node' and 'rate' columns".into()));
    };
    let mut rate = vec![f64::NAN; num_nodes];
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| {
            fields
                .get(c)
                .copied()
                .ok_or_else(|| perr(i + 1, "missing column".into()))
        };
        let node: usize = get(node_col)?
            .parse()
            .map_err(|_| perr(i + 1, "node is not an integer".into()))?;
        if node >= num_nodes {
            return Err(perr(i + 1, format!("node {node} out of range")));
        }
        rate[node] = get(rate_col)?
            .parse()
            .map_err(|_| perr(i + 1, "rate is not a number".into()))?;
    }
    // nodes left out consume nothing
    Ok(rate
        .into_iter()
        .map(|r| if r.is_nan() { 0.0 } else { r })
        .collect())
}

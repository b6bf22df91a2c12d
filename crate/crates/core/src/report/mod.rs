//! Scenario files, batch runs, sweeps, plan checks and their CSV/JSON
//! output.

mod run;
mod scenario_file;

pub use run::{
    check_plan, exit_code, fmt_f64, parse_plan, paths_csv, read_plan, results_json, run,
    solve_grid, summary_csv, sweep, sweep_x_csv, sweep_y_csv, write_run, write_sweep, PlanCheck,
    RunConfig, RunResult, ScenarioSource, SweepReport, SweepXRow, SweepYRow, MIN_SWEEP_POINTS,
    RESULT_FORMAT,
};
pub use scenario_file::{
    load_builder, load_scenario, parse_scenario, parse_utility, parse_utility_str, LoadedScenario,
};

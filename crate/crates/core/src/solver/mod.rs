//! Dual solver: minimizes the dual objective over the supermartingale
//! polytope, matches the dual scale to initial wealth, recovers the optimal
//! consumption and its financing portfolio, and certifies optimality.

mod certify;
mod dual;
mod matching;
mod oracle;
mod problem;
mod recover;
mod solution;

pub use certify::{
    minimax_check, variational_inequality_check, MinimaxReport, VariationalReport,
    MAX_MINIMAX_EVALUATIONS,
};
pub use dual::{solve_dual, DualSolution, InitialPoint, SolverOptions};
pub use matching::{match_y_to_x, Matched, Y_RANGE};
pub use oracle::{brute_force_primal, OracleResult, MAX_ORACLE_NODES};
pub use problem::{dual_value, DualObjectiveEval, DualProblem, DENSITY_GUARD};
pub use recover::{
    budget_at, budget_check, primal_value, recover_portfolio, BudgetReport, PortfolioRecovery,
    TOL_FINANCE,
};
pub use solution::{solve, Certificates, Diagnostics, Solution, TOL_BUDGET, TOL_GAP, TOL_VI};

use crate::dual_domain::DualMeasure;
use crate::error::Result;
use crate::market::MarketScenario;
use crate::utility::UtilityField;

/// `𝔙'(y) = ⟨Q̂, ℰ_T⟩ − E∫Y^Q̂ I(t, y Y^Q̂) dμ` at a dual optimizer.
pub fn dual_derivative(
    s: &MarketScenario,
    field: &UtilityField,
    y: f64,
    q_hat: &DualMeasure,
) -> Result<f64> {
    DualProblem::new(s, field)?.derivative(y, q_hat)
}

/// `ĉ(n) = I(t(n), y Y^Q̂(n))` on charged nodes.
pub fn recover_consumption(
    s: &MarketScenario,
    field: &UtilityField,
    y: f64,
    q_hat: &DualMeasure,
) -> Result<Vec<f64>> {
    DualProblem::new(s, field)?.recover_consumption(y, q_hat)
}

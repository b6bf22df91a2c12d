use serde::{Deserialize, Serialize};

use super::certify::VariationalReport;
use super::dual::SolverOptions;
use super::matching::Matched;
use super::problem::DualProblem;
use super::recover::{budget_at, budget_check_on, recover_portfolio_on};
use crate::dual_domain::DualMeasure;
use crate::error::{Error, Result};
use crate::market::{
    cumulative_from_rate, is_admissible_strategy, MarketScenario, Strategy, TOL_ADMISS,
};
use crate::utility::UtilityField;

pub const TOL_GAP: f64 = 1e-6;
pub const TOL_BUDGET: f64 = 1e-7;
pub const TOL_VI: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// dual solver iterations summed over the y search
    pub iterations: usize,
    /// dual solves spent matching y to x
    pub dual_solves: usize,
    pub active_constraints: usize,
    /// `max_{Q ∈ 𝒟}` budget expression of Ĉ (≤ 0 when financeable)
    pub budget_slack: f64,
    /// budget expression at Q̂ (0 at the optimum)
    pub budget_at_optimum: f64,
    /// worst variational-inequality value over the dual domain
    pub vi_worst: f64,
    /// Frank–Wolfe gap of the dual optimizer
    pub fw_gap: f64,
    /// `𝔙'(y) + x`
    pub match_residual: f64,
    pub min_terminal_wealth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificates {
    pub gap: bool,
    pub budget: bool,
    pub variational: bool,
    pub admissible: bool,
}

impl Certificates {
    pub fn all_pass(&self) -> bool {
        self.gap && self.budget && self.variational && self.admissible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: f64,
    pub y: f64,
    /// optimal consumption rate per node (0 where μ has no mass)
    pub c_hat: Vec<f64>,
    /// cumulative consumption per node
    pub cumulative: Vec<f64>,
    pub q_hat: DualMeasure,
    /// Y^Q̂ per node
    pub density: Vec<f64>,
    /// financing portfolio per node (zero at terminal nodes)
    pub h_hat: Vec<Vec<f64>>,
    /// wealth `x + ℰ + Σ H·ΔS − C` per node
    pub wealth: Vec<f64>,
    /// nondecreasing surplus of the financing strategy over the
    /// superhedging value of the remaining plan
    pub surplus: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// duality gap `𝔙(y) + xy − 𝔘(x)`
    pub gap: f64,
    pub diagnostics: Diagnostics,
    pub certificates: Certificates,
}

impl Solution {
    /// `|gap| ≤ TOL_GAP · max(1, |𝔘|)`.
    pub fn relative_gap(&self) -> f64 {
        self.gap.abs() / self.primal_value.abs().max(1.0)
    }
}

impl<'a> DualProblem<'a> {
    /// Full pipeline: match y to x, solve the dual, recover consumption
    /// and portfolio, and evaluate every certificate. Certificate failures
    /// are reported in the solution, not as errors.
    pub fn solve(&self, x: f64, opts: &SolverOptions) -> Result<Solution> {
        match self.polytope().interior_point() {
            Some((_, margin)) if margin > 0.0 => {}
            _ => return Err(Error::NoArbitrage),
        }
        let matched = self.match_y_to_x(x, opts)?;
        self.finish(x, matched)
    }

    /// Pipeline for a prescribed dual scale: solves the dual at `y` and
    /// uses the wealth `x = −𝔙'(y)` it corresponds to.
    pub fn solve_at_y(&self, y: f64, opts: &SolverOptions) -> Result<Solution> {
        match self.polytope().interior_point() {
            Some((_, margin)) if margin > 0.0 => {}
            _ => return Err(Error::NoArbitrage),
        }
        let dual = self.solve_dual(y, opts)?;
        let derivative = self.derivative(y, &dual.q)?;
        let x = -derivative;
        if !(x >= 0.0) {
            return Err(Error::invalid(format!(
                "y = {y} corresponds to negative initial wealth {x}"
            )));
        }
        let total_iterations = dual.iterations;
        self.finish(
            x,
            Matched {
                y,
                dual,
                derivative,
                evaluations: 1,
                total_iterations,
            },
        )
    }

    fn finish(&self, x: f64, matched: Matched) -> Result<Solution> {
        let s = self.scenario();
        let y = matched.y;
        let q_hat = matched.dual.q.clone();
        let c_hat = self.recover_consumption(y, &q_hat)?;
        let cumulative = cumulative_from_rate(s, &c_hat)?;
        let budget = budget_check_on(self.polytope(), s, &cumulative, x)?;
        let budget_at_optimum = budget_at(s, &cumulative, x, &q_hat);
        let vi: VariationalReport = self.variational_inequality(y, &q_hat)?;
        let primal_value = self.primal_value(&c_hat)?;
        let dual_value = matched.dual.value;
        let gap = dual_value + x * y - primal_value;
        let scale = 1.0 + x.abs() + cumulative.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // the plan is priced at Q̂ with equality, so tiny positive budget
        // slack is rounding; the hedge is built for x plus that slack
        let cover = x + budget.max_slack.max(0.0);
        let portfolio = recover_portfolio_on(self.polytope(), s, &cumulative, cover)?;
        let strategy = Strategy::new(portfolio.holdings.clone(), cumulative.clone());
        let adm = is_admissible_strategy(s, cover, &strategy)?;
        let certificates = Certificates {
            gap: gap.abs() <= TOL_GAP * primal_value.abs().max(1.0),
            budget: budget.max_slack <= TOL_BUDGET * scale
                && budget_at_optimum.abs() <= TOL_BUDGET * scale,
            variational: vi.worst <= TOL_VI,
            admissible: adm.is_admissible() && adm.min_terminal_wealth >= -TOL_ADMISS * scale,
        };
        Ok(Solution {
            x,
            y,
            density: self.density(&q_hat),
            c_hat,
            cumulative,
            q_hat,
            h_hat: portfolio.holdings,
            wealth: portfolio.wealth,
            surplus: portfolio.surplus,
            primal_value,
            dual_value,
            gap,
            diagnostics: Diagnostics {
                iterations: matched.total_iterations,
                dual_solves: matched.evaluations,
                active_constraints: matched.dual.active_constraints,
                budget_slack: budget.max_slack,
                budget_at_optimum,
                vi_worst: vi.worst,
                fw_gap: matched.dual.fw_gap,
                match_residual: matched.derivative + x,
                min_terminal_wealth: adm.min_terminal_wealth,
            },
            certificates,
        })
    }
}

/// Solves the consumption problem at initial wealth `x`.
pub fn solve(
    s: &MarketScenario,
    field: &UtilityField,
    x: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    DualProblem::new(s, field)?.solve(x, opts)
}

use serde::{Deserialize, Serialize};

use super::problem::{check_scale, DualProblem};
use crate::dual_domain::{supermartingale_constraints, DualMeasure, SupermartingalePolytope};
use crate::error::{Error, Result};
use crate::market::{MarketScenario, NodeId, TOL_ADMISS};
use crate::numeric::lp::{LinearProgram, Relation};
use crate::utility::UtilityField;

/// Tolerance for the root superhedging LP.
pub const TOL_FINANCE: f64 = 1e-9;

impl<'a> DualProblem<'a> {
    /// `ĉ(n) = I(t(n), y Y^Q̂(n))` at charged nodes, 0 elsewhere.
    pub fn recover_consumption(&self, y: f64, q: &DualMeasure) -> Result<Vec<f64>> {
        check_scale(y)?;
        let mut c = vec![0.0; self.scenario().tree().num_nodes()];
        for (ch, dens) in self.charged().iter().zip(self.charged_density(&q.q)) {
            if !(dens > 0.0) {
                return Err(Error::DegenerateDual { node: ch.node });
            }
            c[ch.node] = ch.utility.inverse_marginal(y * dens);
        }
        Ok(c)
    }

    /// `Σ ℙ(n) w(t(n)) U(t(n), c(n))` over charged nodes; −∞ when some
    /// term is −∞.
    pub fn primal_value(&self, rate: &[f64]) -> Result<f64> {
        primal_sum(
            self.charged()
                .iter()
                .map(|c| (c.prob * c.weight, c.utility.u(rate[c.node]))),
            rate.len(),
            self.scenario().tree().num_nodes(),
        )
    }
}

fn primal_sum(terms: impl Iterator<Item = (f64, f64)>, got: usize, want: usize) -> Result<f64> {
    if got != want {
        return Err(Error::Dimension {
            context: "consumption rate",
            expected: want,
            actual: got,
        });
    }
    let mut total = 0.0;
    for (w, u) in terms {
        if u == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += w * u;
    }
    Ok(total)
}

/// `Σ ℙ(n) w(t(n)) U(t(n), c(n))`, the primal objective of a rate plan.
pub fn primal_value(s: &MarketScenario, field: &UtilityField, rate: &[f64]) -> Result<f64> {
    let tree = s.tree();
    primal_sum(
        s.charged_nodes()
            .into_iter()
            .map(|n| (tree.prob(n) * s.mu_weight(n), field.u(n, rate[n]))),
        rate.len(),
        tree.num_nodes(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// `max_{Q ∈ 𝒟} E_Q[C_T] − ⟨Q, ℰ_T⟩ − x`; the plan is financeable iff ≤ 0
    pub max_slack: f64,
    pub worst: DualMeasure,
}

/// `E∫Y^Q dC − ⟨Q, ℰ_T⟩ − x = ⟨Q, C_T − ℰ_T⟩ − x`, maximized over the dual
/// domain (vertex scan or LP).
pub fn budget_check(s: &MarketScenario, cumulative: &[f64], x: f64) -> Result<BudgetReport> {
    budget_check_on(&supermartingale_constraints(s), s, cumulative, x)
}

pub(crate) fn budget_check_on(
    poly: &SupermartingalePolytope,
    s: &MarketScenario,
    cumulative: &[f64],
    x: f64,
) -> Result<BudgetReport> {
    let tree = s.tree();
    if cumulative.len() != tree.num_nodes() {
        return Err(Error::Dimension {
            context: "cumulative consumption",
            expected: tree.num_nodes(),
            actual: cumulative.len(),
        });
    }
    let net: Vec<f64> = (0..tree.num_paths())
        .map(|w| cumulative[tree.terminal(w)] - s.terminal_endowment(w))
        .collect();
    let (v, worst) = poly.maximize_linear(&net)?;
    Ok(BudgetReport {
        max_slack: v - x,
        worst,
    })
}

/// Budget expression `E∫Y^Q dC − ⟨Q, ℰ_T⟩ − x` at one measure.
pub fn budget_at(s: &MarketScenario, cumulative: &[f64], x: f64, q: &DualMeasure) -> f64 {
    let tree = s.tree();
    (0..tree.num_paths())
        .map(|w| q.q[w] * (cumulative[tree.terminal(w)] - s.terminal_endowment(w)))
        .sum::<f64>()
        - x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRecovery {
    /// holdings per node (zero vectors at terminal nodes)
    pub holdings: Vec<Vec<f64>>,
    /// `Z_n = max_{Q ∈ 𝒟} E_Q[C_T − ℰ_T | n]`
    pub superhedge: Vec<f64>,
    /// `x + Σ H·ΔS − Z`: nonnegative, nondecreasing along every path
    pub surplus: Vec<f64>,
    /// wealth `x + ℰ + Σ H·ΔS − C`
    pub wealth: Vec<f64>,
}

/// Backward superhedging recursion for `C_T − ℰ_T`: `Z_n` is the largest
/// one-step expectation of the children's values under the node's
/// feasible conditional laws, and `H_n ∈ 𝒦` solves
/// `z + H_n·ΔS_c ≥ Z_c` for all children `c`, with `z = Z_n` below the
/// root and `z = x` at the root. Fails with `NotFinanceable` when x does
/// not cover `Z_root`.
pub fn recover_portfolio(
    s: &MarketScenario,
    cumulative: &[f64],
    x: f64,
) -> Result<PortfolioRecovery> {
    let poly = supermartingale_constraints(s);
    recover_portfolio_on(&poly, s, cumulative, x)
}

pub(crate) fn recover_portfolio_on(
    poly: &SupermartingalePolytope,
    s: &MarketScenario,
    cumulative: &[f64],
    x: f64,
) -> Result<PortfolioRecovery> {
    let tree = s.tree();
    let n = tree.num_nodes();
    if cumulative.len() != n {
        return Err(Error::Dimension {
            context: "cumulative consumption",
            expected: n,
            actual: cumulative.len(),
        });
    }
    let gens = s.cone().generators();
    let d = s.num_assets();
    let mut z = vec![0.0; n];
    for &t in tree.terminals() {
        z[t] = cumulative[t] - s.endowment()[t];
    }
    let order: Vec<NodeId> = tree.forward_order().collect();
    for &id in order.iter().rev() {
        if tree.is_terminal(id) {
            continue;
        }
        let (children, drift) = poly
            .local_drift(id)
            .expect("interior node has a local system");
        let vals: Vec<f64> = children.iter().map(|&c| z[c]).collect();
        let mut lp = LinearProgram::maximize(vals);
        lp.constrain(vec![1.0; children.len()], Relation::Eq, 1.0);
        for row in drift {
            if row.iter().any(|v| *v != 0.0) {
                lp.constrain(row.clone(), Relation::Le, 0.0);
            }
        }
        let sol = lp.solve().optimal().ok_or_else(|| {
            Error::Internal(format!("one-step superhedging LP failed at node {id}"))
        })?;
        z[id] = sol.value;
    }
    let mut holdings = vec![vec![0.0; d]; n];
    let mut gains = vec![0.0; n];
    for &id in &order {
        if tree.is_terminal(id) {
            continue;
        }
        let base = if id == tree.root() { x } else { z[id] };
        let (children, drift) = poly
            .local_drift(id)
            .expect("interior node has a local system");
        // variables: λ per generator ≥ 0, then t ≥ 0; minimize t
        let m = gens.len();
        let mut cost = vec![0.0; m + 1];
        cost[m] = 1.0;
        let mut lp = LinearProgram::minimize(cost);
        for (ci, &c) in children.iter().enumerate() {
            let mut row: Vec<f64> = drift.iter().map(|dr| dr[ci]).collect();
            row.push(1.0);
            lp.constrain(row, Relation::Ge, z[c] - base);
        }
        let sol = lp
            .solve()
            .optimal()
            .ok_or_else(|| Error::Internal(format!("hedging LP failed at node {id}")))?;
        let shortfall = sol.x[m];
        let scale = 1.0
            + children
                .iter()
                .map(|&c| z[c].abs())
                .fold(base.abs(), f64::max);
        if shortfall > TOL_FINANCE * scale {
            if id == tree.root() {
                return Err(Error::NotFinanceable {
                    node: id,
                    shortfall,
                });
            }
            return Err(Error::Internal(format!(
                "superhedging recursion inconsistent at node {id} (shortfall {shortfall:e})"
            )));
        }
        let h = &mut holdings[id];
        for (g, lam) in gens.iter().zip(&sol.x[..m]) {
            for (hj, gj) in h.iter_mut().zip(g) {
                *hj += lam * gj;
            }
        }
        for &c in children {
            let step: f64 = h.iter().zip(s.price_step(c)).map(|(a, b)| a * b).sum();
            gains[c] = gains[id] + step;
        }
    }
    let surplus: Vec<f64> = (0..n).map(|i| x + gains[i] - z[i]).collect();
    let wealth: Vec<f64> = (0..n)
        .map(|i| x + s.endowment()[i] + gains[i] - cumulative[i])
        .collect();
    let worst = tree
        .terminals()
        .iter()
        .map(|&t| wealth[t])
        .fold(f64::INFINITY, f64::min);
    if worst < -TOL_ADMISS * (1.0 + x.abs()) {
        return Err(Error::Internal(format!(
            "recovered portfolio leaves terminal wealth {worst:e}"
        )));
    }
    Ok(PortfolioRecovery {
        holdings,
        superhedge: z,
        surplus,
        wealth,
    })
}

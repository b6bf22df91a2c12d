use serde::{Deserialize, Serialize};

use super::scenario::MarketScenario;
use super::tree::NodeId;
use crate::error::{Error, Result};

/// Tolerance on terminal wealth for admissibility.
pub const TOL_ADMISS: f64 = 1e-9;

/// Investment-consumption strategy: holdings chosen at each non-terminal
/// node for the next step, and cumulative consumption per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    /// holdings per node; terminal entries are unused
    pub holdings: Vec<Vec<f64>>,
    /// cumulative consumption C per node
    pub consumption: Vec<f64>,
}

impl Strategy {
    pub fn new(holdings: Vec<Vec<f64>>, consumption: Vec<f64>) -> Self {
        Self {
            holdings,
            consumption,
        }
    }

    /// No trading, no consumption.
    pub fn idle(s: &MarketScenario) -> Self {
        let n = s.tree().num_nodes();
        Self {
            holdings: vec![vec![0.0; s.num_assets()]; n],
            consumption: vec![0.0; n],
        }
    }

    fn check_dims(&self, s: &MarketScenario) -> Result<()> {
        let n = s.tree().num_nodes();
        if self.holdings.len() != n {
            return Err(Error::Dimension {
                context: "strategy holdings",
                expected: n,
                actual: self.holdings.len(),
            });
        }
        if self.consumption.len() != n {
            return Err(Error::Dimension {
                context: "strategy consumption",
                expected: n,
                actual: self.consumption.len(),
            });
        }
        for id in s.tree().interior_nodes() {
            if self.holdings[id].len() != s.num_assets() {
                return Err(Error::Dimension {
                    context: "holding vector",
                    expected: s.num_assets(),
                    actual: self.holdings[id].len(),
                });
            }
        }
        Ok(())
    }
}

/// Trading gains Σ H·ΔS accumulated along the path to each node.
pub fn trading_gains(s: &MarketScenario, holdings: &[Vec<f64>]) -> Vec<f64> {
    let tree = s.tree();
    let mut gains = vec![0.0; tree.num_nodes()];
    for id in tree.forward_order() {
        if let Some(p) = tree.parent(id) {
            let step: f64 = holdings[p]
                .iter()
                .zip(s.price(id).iter().zip(s.price(p)))
                .map(|(h, (a, b))| h * (a - b))
                .sum();
            gains[id] = gains[p] + step;
        }
    }
    gains
}

/// W = x + ℰ + Σ H·ΔS − C at every node.
pub fn wealth_process(s: &MarketScenario, x: f64, strat: &Strategy) -> Result<Vec<f64>> {
    strat.check_dims(s)?;
    let gains = trading_gains(s, &strat.holdings);
    Ok((0..s.tree().num_nodes())
        .map(|n| x + s.endowment()[n] + gains[n] - strat.consumption[n])
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibilityViolation {
    NotInCone { node: NodeId, distance: f64 },
    NegativeTerminalWealth { node: NodeId, wealth: f64 },
    ConsumptionDecreasing { node: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub violation: Option<AdmissibilityViolation>,
    pub min_terminal_wealth: f64,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violation.is_none()
    }
}

/// Holdings in 𝒦 at every node, C nonnegative and nondecreasing, and
/// W_T ≥ −`TOL_ADMISS` on every path. The first violation found is kept.
pub fn is_admissible_strategy(
    s: &MarketScenario,
    x: f64,
    strat: &Strategy,
) -> Result<AdmissibilityReport> {
    let wealth = wealth_process(s, x, strat)?;
    let tree = s.tree();
    let min_terminal_wealth = tree
        .terminals()
        .iter()
        .map(|&n| wealth[n])
        .fold(f64::INFINITY, f64::min);
    let mut violation = None;
    for id in tree.interior_nodes() {
        let distance = s.cone().distance(&strat.holdings[id]);
        if distance > super::scenario::TOL_CONE {
            violation = Some(AdmissibilityViolation::NotInCone { node: id, distance });
            break;
        }
    }
    if violation.is_none() {
        for id in tree.forward_order() {
            let prev = tree.parent(id).map_or(0.0, |p| strat.consumption[p]);
            if strat.consumption[id] < prev - TOL_ADMISS {
                violation = Some(AdmissibilityViolation::ConsumptionDecreasing { node: id });
                break;
            }
        }
    }
    if violation.is_none() {
        if let Some(&node) = tree.terminals().iter().find(|&&n| wealth[n] < -TOL_ADMISS) {
            violation = Some(AdmissibilityViolation::NegativeTerminalWealth {
                node,
                wealth: wealth[node],
            });
        }
    }
    Ok(AdmissibilityReport {
        violation,
        min_terminal_wealth,
    })
}

/// C at node n = Σ over path nodes m ≤ n of c(m)·w(t(m)). Rates at nodes
/// without μ mass are ignored.
pub fn cumulative_from_rate(s: &MarketScenario, rate: &[f64]) -> Result<Vec<f64>> {
    let tree = s.tree();
    if rate.len() != tree.num_nodes() {
        return Err(Error::Dimension {
            context: "consumption rate",
            expected: tree.num_nodes(),
            actual: rate.len(),
        });
    }
    let mut c = vec![0.0; tree.num_nodes()];
    for id in tree.forward_order() {
        let w = s.mu_weight(id);
        let inc = if w > 0.0 {
            if !(rate[id] >= 0.0) {
                return Err(Error::invalid(format!(
                    "negative consumption rate {} at node {id}",
                    rate[id]
                )));
            }
            rate[id] * w
        } else {
            0.0
        };
        c[id] = tree.parent(id).map_or(0.0, |p| c[p]) + inc;
    }
    Ok(c)
}

/// Per-node increments ΔC (C at the root counts as its own increment).
pub fn increments(s: &MarketScenario, cumulative: &[f64]) -> Vec<f64> {
    let tree = s.tree();
    (0..tree.num_nodes())
        .map(|n| cumulative[n] - tree.parent(n).map_or(0.0, |p| cumulative[p]))
        .collect()
}

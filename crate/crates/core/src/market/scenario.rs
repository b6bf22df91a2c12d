use serde::{Deserialize, Serialize};

use super::tree::{EventTree, NodeId};
use crate::error::{Error, Result};
use crate::numeric::lp::{LinearProgram, Relation};

/// Tolerance on the distance from a holding vector to the cone.
pub const TOL_CONE: f64 = 1e-9;

/// Consumption clock μ: one weight per time-grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionMeasure {
    weights: Vec<f64>,
}

impl ConsumptionMeasure {
    /// Accepts any finite nonnegative weights; normalization and the
    /// "mass left before T" condition are checked by `validate_scenario`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("consumption measure has no weights"));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!(
                "mu weight {i} is negative or not finite"
            )));
        }
        Ok(Self { weights })
    }

    pub fn point_mass(points: usize, at: usize) -> Self {
        let mut weights = vec![0.0; points];
        weights[at] = 1.0;
        Self { weights }
    }

    /// Equal weight on every index in `range`, zero elsewhere.
    pub fn uniform_over(points: usize, range: std::ops::Range<usize>) -> Self {
        let k = range.len() as f64;
        let mut weights = vec![0.0; points];
        for i in range {
            weights[i] = 1.0 / k;
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, time_index: usize) -> f64 {
        self.weights[time_index]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }
}

/// Closed convex cone 𝒦 of admissible holdings, the conic hull of a finite
/// generator list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCone {
    dim: usize,
    generators: Vec<Vec<f64>>,
}

impl ConstraintCone {
    pub fn from_generators(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self> {
        for (k, g) in generators.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::Dimension {
                    context: "cone generator",
                    expected: dim,
                    actual: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("cone generator {k} is not finite")));
            }
        }
        Ok(Self { dim, generators })
    }

    /// ℝᵈ, generated by ±e₁, …, ±e_d.
    pub fn unconstrained(dim: usize) -> Self {
        let mut generators = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            generators.push(e.clone());
            e[i] = -1.0;
            generators.push(e);
        }
        Self { dim, generators }
    }

    /// ℝᵈ₊ (no short sales).
    pub fn nonnegative(dim: usize) -> Self {
        let generators = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { dim, generators }
    }

    /// −ℝᵈ₊ (short positions only).
    pub fn nonpositive(dim: usize) -> Self {
        let generators = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = -1.0;
                e
            })
            .collect();
        Self { dim, generators }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// Euclidean norm of the residual `h − Σλₖgₖ` left by the L¹-closest
    /// conic combination; zero iff `h` lies in the cone.
    pub fn distance(&self, h: &[f64]) -> f64 {
        if h.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let m = self.generators.len();
        let d = self.dim;
        // variables: λ (m), r⁺ (d), r⁻ (d)
        let mut cost = vec![0.0; m + 2 * d];
        for c in cost.iter_mut().skip(m) {
            *c = 1.0;
        }
        let mut lp = LinearProgram::minimize(cost);
        for i in 0..d {
            let mut row = vec![0.0; m + 2 * d];
            for (k, g) in self.generators.iter().enumerate() {
                row[k] = g[i];
            }
            row[m + i] = 1.0;
            row[m + d + i] = -1.0;
            lp.constrain(row, Relation::Eq, h[i]);
        }
        let sol = lp
            .solve()
            .optimal()
            .expect("cone distance LP is always feasible and bounded");
        (0..d)
            .map(|i| {
                let fitted: f64 = (0..m).map(|k| sol.x[k] * self.generators[k][i]).sum();
                (h[i] - fitted).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, h: &[f64]) -> bool {
        self.distance(h) <= TOL_CONE
    }
}

/// Event-tree market: discounted prices, cumulative endowment, consumption
/// clock and portfolio cone.
#[derive(Debug, Clone)]
pub struct MarketScenario {
    tree: EventTree,
    prices: Vec<Vec<f64>>,
    endowment: Vec<f64>,
    mu: ConsumptionMeasure,
    cone: ConstraintCone,
}

impl MarketScenario {
    /// Checks shapes only; economic invariants are left to
    /// `validate_scenario`.
    pub fn new(
        tree: EventTree,
        prices: Vec<Vec<f64>>,
        endowment: Vec<f64>,
        mu: ConsumptionMeasure,
        cone: ConstraintCone,
    ) -> Result<Self> {
        let n = tree.num_nodes();
        if prices.len() != n {
            return Err(Error::Dimension {
                context: "prices (one vector per node)",
                expected: n,
                actual: prices.len(),
            });
        }
        if let Some(p) = prices.iter().find(|p| p.len() != cone.dim()) {
            return Err(Error::Dimension {
                context: "price vector",
                expected: cone.dim(),
                actual: p.len(),
            });
        }
        if endowment.len() != n {
            return Err(Error::Dimension {
                context: "endowment (one value per node)",
                expected: n,
                actual: endowment.len(),
            });
        }
        if mu.weights().len() != tree.time_grid().len() {
            return Err(Error::Dimension {
                context: "mu (one weight per time point)",
                expected: tree.time_grid().len(),
                actual: mu.weights().len(),
            });
        }
        Ok(Self {
            tree,
            prices,
            endowment,
            mu,
            cone,
        })
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn price(&self, n: NodeId) -> &[f64] {
        &self.prices[n]
    }

    /// Cumulative endowment ℰ per node.
    pub fn endowment(&self) -> &[f64] {
        &self.endowment
    }

    pub fn mu(&self) -> &ConsumptionMeasure {
        &self.mu
    }

    pub fn cone(&self) -> &ConstraintCone {
        &self.cone
    }

    pub fn num_assets(&self) -> usize {
        self.cone.dim()
    }

    /// Price increment from `parent(child)` to `child`.
    pub fn price_step(&self, child: NodeId) -> Vec<f64> {
        let p = self
            .tree
            .parent(child)
            .expect("price_step needs a non-root node");
        self.prices[child]
            .iter()
            .zip(&self.prices[p])
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Endowment increment received at `n` (the root receives ℰ_root).
    pub fn endowment_increment(&self, n: NodeId) -> f64 {
        match self.tree.parent(n) {
            Some(p) => self.endowment[n] - self.endowment[p],
            None => self.endowment[n],
        }
    }

    /// ℰ_T on path `omega`.
    pub fn terminal_endowment(&self, omega: usize) -> f64 {
        self.endowment[self.tree.terminal(omega)]
    }

    pub fn terminal_endowments(&self) -> Vec<f64> {
        (0..self.tree.num_paths())
            .map(|w| self.terminal_endowment(w))
            .collect()
    }

    /// μ-weight of the time point of node `n`.
    pub fn mu_weight(&self, n: NodeId) -> f64 {
        self.mu.weight(self.tree.time_index(n))
    }

    /// Nodes whose time carries positive μ mass, parents first.
    pub fn charged_nodes(&self) -> Vec<NodeId> {
        self.tree
            .forward_order()
            .filter(|&n| self.mu_weight(n) > 0.0)
            .collect()
    }

    pub fn with_mu(&self, mu: ConsumptionMeasure) -> Result<Self> {
        Self::new(
            self.tree.clone(),
            self.prices.clone(),
            self.endowment.clone(),
            mu,
            self.cone.clone(),
        )
    }

    pub fn with_cone(&self, cone: ConstraintCone) -> Result<Self> {
        Self::new(
            self.tree.clone(),
            self.prices.clone(),
            self.endowment.clone(),
            self.mu.clone(),
            cone,
        )
    }

    pub fn with_endowment(&self, endowment: Vec<f64>) -> Result<Self> {
        Self::new(
            self.tree.clone(),
            self.prices.clone(),
            endowment,
            self.mu.clone(),
            self.cone.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_membership() {
        let pos = ConstraintCone::nonnegative(1);
        assert!(pos.contains(&[2.0]));
        assert!(!pos.contains(&[-1.0]));
        assert!((pos.distance(&[-1.0]) - 1.0).abs() < 1e-12);
        let all = ConstraintCone::unconstrained(2);
        assert!(all.contains(&[-3.0, 5.0]));
        let wedge =
            ConstraintCone::from_generators(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(wedge.contains(&[2.0, 1.0]));
        assert!(!wedge.contains(&[0.0, 1.0]));
    }

    #[test]
    fn mu_helpers() {
        let mu = ConsumptionMeasure::uniform_over(4, 1..4);
        assert_eq!(mu.support(), vec![1, 2, 3]);
        assert!((mu.total() - 1.0).abs() < 1e-15);
        assert!(ConsumptionMeasure::new(vec![0.5, -0.1]).is_err());
    }
}

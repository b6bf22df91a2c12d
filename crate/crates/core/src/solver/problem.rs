use std::ops::Range;

use nalgebra::DMatrix;

use crate::dual_domain::{
    density_process, supermartingale_constraints, DualMeasure, SupermartingalePolytope,
};
use crate::error::{Error, Result};
use crate::market::{MarketScenario, NodeId};
use crate::utility::{PointUtility, UtilityField};

/// Densities at or below this on a charged node make the objective +∞
/// while iterating.
pub const DENSITY_GUARD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Charged {
    pub node: NodeId,
    /// μ-weight of the node's time point
    pub weight: f64,
    pub prob: f64,
    pub paths: Range<usize>,
    pub utility: PointUtility,
}

/// Value and gradient of `J(y, ·)` at one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DualObjectiveEval {
    pub y: f64,
    pub q: DualMeasure,
    /// `+∞` when a charged node has vanishing density
    pub value: f64,
    /// `∂J/∂q` per path; `None` when the value is infinite
    pub gradient: Option<Vec<f64>>,
}

/// A scenario paired with a utility field, with the dual domain and the
/// per-node data of the dual objective precomputed.
#[derive(Debug, Clone)]
pub struct DualProblem<'a> {
    scenario: &'a MarketScenario,
    field: &'a UtilityField,
    poly: SupermartingalePolytope,
    charged: Vec<Charged>,
    endowment: Vec<f64>,
}

impl<'a> DualProblem<'a> {
    pub fn new(scenario: &'a MarketScenario, field: &'a UtilityField) -> Result<Self> {
        let tree = scenario.tree();
        if field.num_nodes() != tree.num_nodes() {
            return Err(Error::Dimension {
                context: "utility field",
                expected: tree.num_nodes(),
                actual: field.num_nodes(),
            });
        }
        let charged = scenario
            .charged_nodes()
            .into_iter()
            .map(|n| Charged {
                node: n,
                weight: scenario.mu_weight(n),
                prob: tree.prob(n),
                paths: tree.paths_below(n),
                utility: *field.point(n),
            })
            .collect();
        Ok(Self {
            scenario,
            field,
            poly: supermartingale_constraints(scenario),
            charged,
            endowment: scenario.terminal_endowments(),
        })
    }

    pub fn scenario(&self) -> &'a MarketScenario {
        self.scenario
    }

    pub fn field(&self) -> &'a UtilityField {
        self.field
    }

    pub fn polytope(&self) -> &SupermartingalePolytope {
        &self.poly
    }

    pub fn num_paths(&self) -> usize {
        self.endowment.len()
    }

    /// ℰ_T per path.
    pub fn terminal_endowment(&self) -> &[f64] {
        &self.endowment
    }

    pub fn charged_nodes(&self) -> Vec<NodeId> {
        self.charged.iter().map(|c| c.node).collect()
    }

    pub(crate) fn charged(&self) -> &[Charged] {
        &self.charged
    }

    fn check_measure(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.num_paths() {
            return Err(Error::Dimension {
                context: "dual measure",
                expected: self.num_paths(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn masses(&self, q: &[f64]) -> Vec<f64> {
        let mut prefix = Vec::with_capacity(q.len() + 1);
        prefix.push(0.0);
        for v in q {
            prefix.push(prefix.last().unwrap() + v);
        }
        self.charged
            .iter()
            .map(|c| prefix[c.paths.end] - prefix[c.paths.start])
            .collect()
    }

    /// `Y^Q` at the charged nodes, in `charged_nodes()` order.
    pub fn charged_density(&self, q: &[f64]) -> Vec<f64> {
        self.masses(q)
            .iter()
            .zip(&self.charged)
            .map(|(m, c)| m / c.prob)
            .collect()
    }

    /// `J(y, q)` with the density guard `guard` (0 for the exact value).
    pub(crate) fn value_guarded(&self, y: f64, q: &[f64], guard: f64) -> f64 {
        let mut total = y * q
            .iter()
            .zip(&self.endowment)
            .map(|(a, b)| a * b)
            .sum::<f64>();
        for (c, m) in self.charged.iter().zip(self.masses(q)) {
            let dens = m / c.prob;
            if dens <= guard {
                return f64::INFINITY;
            }
            total += c.prob * c.weight * c.utility.v(y * dens);
        }
        total
    }

    pub(crate) fn value(&self, y: f64, q: &[f64]) -> f64 {
        self.value_guarded(y, q, DENSITY_GUARD)
    }

    /// `Ĉ_T(ω) = Σ_{charged n ∋ ω} w(t(n)) I(t(n), y Y_n)`: the cumulative
    /// consumption the first-order condition assigns to each path.
    pub(crate) fn implied_terminal_consumption(&self, y: f64, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; q.len()];
        for (c, m) in self.charged.iter().zip(self.masses(q)) {
            let inc = c.weight * c.utility.inverse_marginal(y * m / c.prob);
            for w in c.paths.clone() {
                out[w] += inc;
            }
        }
        out
    }

    /// `∂J/∂q_ω = y (ℰ_T(ω) − Ĉ_T(ω))`.
    pub(crate) fn gradient(&self, y: f64, q: &[f64]) -> Vec<f64> {
        let c = self.implied_terminal_consumption(y, q);
        c.iter()
            .zip(&self.endowment)
            .map(|(c, e)| y * (e - c))
            .collect()
    }

    /// `Σ_n y² w V''(y Y_n)/ℙ(n) 1_{D(n)} 1_{D(n)}ᵀ`.
    pub(crate) fn hessian(&self, y: f64, q: &[f64]) -> DMatrix<f64> {
        let k = q.len();
        let mut h = DMatrix::zeros(k, k);
        for (c, m) in self.charged.iter().zip(self.masses(q)) {
            let coef = y * y * c.weight * c.utility.d2v(y * m / c.prob) / c.prob;
            for i in c.paths.clone() {
                for j in c.paths.clone() {
                    h[(i, j)] += coef;
                }
            }
        }
        h
    }

    /// Public evaluation of the dual objective, without the density guard.
    pub fn evaluate(&self, y: f64, q: &DualMeasure) -> Result<DualObjectiveEval> {
        check_scale(y)?;
        self.check_measure(&q.q)?;
        let value = self.value_guarded(y, &q.q, 0.0);
        let gradient = value.is_finite().then(|| self.gradient(y, &q.q));
        Ok(DualObjectiveEval {
            y,
            q: q.clone(),
            value,
            gradient,
        })
    }

    /// `𝔙'(y) = ⟨Q̂, ℰ_T⟩ − Σ ℙ(n) w Y_n I(y Y_n)` at an optimizer `q`.
    pub fn derivative(&self, y: f64, q: &DualMeasure) -> Result<f64> {
        check_scale(y)?;
        self.check_measure(&q.q)?;
        let mut d = q.expect(&self.endowment);
        for (c, m) in self.charged.iter().zip(self.masses(&q.q)) {
            if m > 0.0 {
                let dens = m / c.prob;
                d -= c.prob * c.weight * dens * c.utility.inverse_marginal(y * dens);
            }
        }
        Ok(d)
    }

    /// Y^Q at every node.
    pub fn density(&self, q: &DualMeasure) -> Vec<f64> {
        density_process(self.scenario.tree(), q).y
    }
}

pub(crate) fn check_scale(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dual scale y must be positive and finite, got {y}"
        )))
    }
}

/// `J(y, Q) = E∫V(t, y Y^Q_t) μ(dt) + y⟨Q, ℰ_T⟩`.
pub fn dual_value(
    s: &MarketScenario,
    field: &UtilityField,
    y: f64,
    q: &DualMeasure,
) -> Result<DualObjectiveEval> {
    DualProblem::new(s, field)?.evaluate(y, q)
}

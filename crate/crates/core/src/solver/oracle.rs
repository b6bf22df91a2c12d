use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dual_domain::supermartingale_constraints;
use crate::error::{Error, Result};
use crate::market::{MarketScenario, NodeId};
use crate::utility::UtilityField;

pub const MAX_ORACLE_NODES: usize = 8;
const GRID_BUDGET: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// best primal value found
    pub value: f64,
    /// maximizing rate per node (0 off the charged set)
    pub rate: Vec<f64>,
    /// best value on the grid before the barrier refinement
    pub grid_value: f64,
}

struct Budget {
    /// rows `a·c ≤ b`, one per dual vertex, over charged-node rates
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Budget {
    fn slack(&self, c: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| b - a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Direct maximization of the primal objective over rate plans satisfying
/// the budget inequality at every vertex of the dual domain. A dense grid
/// (refined `refinement` times around the incumbent) is followed by a
/// log-barrier Newton polish. Uses only U and its derivatives; never the
/// conjugate, the inverse marginal or the dual solver.
pub fn brute_force_primal(
    s: &MarketScenario,
    field: &UtilityField,
    x: f64,
    refinement: usize,
) -> Result<OracleResult> {
    let tree = s.tree();
    let charged: Vec<NodeId> = s.charged_nodes();
    let m = charged.len();
    if m > MAX_ORACLE_NODES {
        return Err(Error::SizeGuard {
            what: "charged nodes for the primal oracle",
            actual: m,
            limit: MAX_ORACLE_NODES,
        });
    }
    if m == 0 {
        return Err(Error::invalid("consumption measure charges no node"));
    }
    let poly = supermartingale_constraints(s);
    let verts = poly.vertices()?;
    let endow = s.terminal_endowments();
    let mut budget = Budget {
        a: Vec::new(),
        b: Vec::new(),
    };
    for v in verts.iter() {
        // E_Q[C_T] = Σ_n Q(n) w(t(n)) c(n)
        let row: Vec<f64> = charged
            .iter()
            .map(|&n| v.mass(tree, n) * s.mu_weight(n))
            .collect();
        budget.a.push(row);
        budget.b.push(x + v.expect(&endow));
    }
    let weights: Vec<f64> = charged
        .iter()
        .map(|&n| tree.prob(n) * s.mu_weight(n))
        .collect();
    let objective = |c: &[f64]| -> f64 {
        charged
            .iter()
            .zip(c)
            .zip(&weights)
            .map(|((&n, &ci), w)| w * field.u(n, ci))
            .sum()
    };
    // largest affordable rate per node with the others at zero
    let caps: Vec<f64> = (0..m)
        .map(|j| {
            budget
                .a
                .iter()
                .zip(&budget.b)
                .filter(|(a, _)| a[j] > 0.0)
                .map(|(a, b)| b / a[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    if caps.iter().any(|c| !c.is_finite() || *c <= 0.0) {
        return Err(Error::invalid(
            "primal oracle needs a bounded budget set with nonempty interior",
        ));
    }
    let per_axis = ((GRID_BUDGET as f64).powf(1.0 / m as f64).floor() as usize).max(2);
    let mut lo = vec![0.0; m];
    let mut hi = caps.clone();
    // strictly feasible seed: each row sums to at most half its bound. With
    // many nodes the coarse grid can miss the budget set entirely.
    let seed: Vec<f64> = caps.iter().map(|c| c / (2 * m) as f64).collect();
    let mut best: (f64, Vec<f64>) = (objective(&seed), seed.clone());
    for _round in 0..=refinement {
        let mut idx = vec![0usize; m];
        loop {
            let c: Vec<f64> = (0..m)
                .map(|j| lo[j] + (hi[j] - lo[j]) * (idx[j] as f64 + 0.5) / per_axis as f64)
                .collect();
            if budget.slack(&c) > 0.0 {
                let v = objective(&c);
                if v > best.0 {
                    best = (v, c);
                }
            }
            let mut j = 0;
            while j < m {
                idx[j] += 1;
                if idx[j] < per_axis {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == m {
                break;
            }
        }
        let c = &best.1;
        for j in 0..m {
            let w = (hi[j] - lo[j]) / per_axis as f64;
            lo[j] = (c[j] - 1.5 * w).max(0.0);
            hi[j] = (c[j] + 1.5 * w).min(caps[j]);
        }
    }
    let (grid_value, start) = best;
    // the incumbent can sit on the budget boundary, where the barrier
    // cannot move; start halfway toward the seed instead
    let centered: Vec<f64> = start.iter().zip(&seed).map(|(a, b)| 0.5 * (a + b)).collect();
    let polished = barrier_polish(&budget, &charged, &weights, field, centered);
    let (value, c) = match polished {
        Some(c) if objective(&c) >= grid_value => (objective(&c), c),
        _ => (grid_value, start),
    };
    let mut rate = vec![0.0; tree.num_nodes()];
    for (&n, ci) in charged.iter().zip(&c) {
        rate[n] = *ci;
    }
    Ok(OracleResult {
        value,
        rate,
        grid_value,
    })
}

/// Interior-point refinement of `max Σ w U(c)` subject to `A c ≤ b`, c > 0.
fn barrier_polish(
    budget: &Budget,
    charged: &[NodeId],
    weights: &[f64],
    field: &UtilityField,
    mut c: Vec<f64>,
) -> Option<Vec<f64>> {
    let m = c.len();
    let phi = |c: &[f64], t: f64| -> f64 {
        let mut v = 0.0;
        for ((&n, &ci), w) in charged.iter().zip(c).zip(weights) {
            if ci <= 0.0 {
                return f64::INFINITY;
            }
            v -= t * w * field.u(n, ci) + ci.ln();
        }
        for (a, b) in budget.a.iter().zip(&budget.b) {
            let s = b - a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
            if s <= 0.0 {
                return f64::INFINITY;
            }
            v -= s.ln();
        }
        v
    };
    let mut t = 1.0;
    let barriers = (m + budget.a.len()) as f64;
    while barriers / t > 1e-13 {
        for _ in 0..100 {
            let mut g = DVector::zeros(m);
            let mut h = DMatrix::zeros(m, m);
            for (j, ((&n, &cj), w)) in charged.iter().zip(&c).zip(weights).enumerate() {
                let p = field.point(n);
                g[j] = -t * w * p.du(cj) - 1.0 / cj;
                h[(j, j)] = -t * w * p.d2u(cj) + 1.0 / (cj * cj);
            }
            for (a, b) in budget.a.iter().zip(&budget.b) {
                let s = b - a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
                let av = DVector::from_column_slice(a);
                g += &av / s;
                h += &av * av.transpose() / (s * s);
            }
            let chol = h.cholesky()?;
            let step = chol.solve(&(-&g));
            let dec = -g.dot(&step);
            if dec < 1e-22 {
                break;
            }
            let f0 = phi(&c, t);
            let mut a = 1.0;
            loop {
                let cand: Vec<f64> = c.iter().zip(step.iter()).map(|(x, d)| x + a * d).collect();
                let f = phi(&cand, t);
                if f.is_finite() && f <= f0 - 0.25 * a * dec {
                    c = cand;
                    break;
                }
                a *= 0.5;
                if a < 1e-20 {
                    break;
                }
            }
            if a < 1e-20 {
                break;
            }
        }
        t *= 8.0;
    }
    Some(c)
}

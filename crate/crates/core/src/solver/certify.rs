use serde::{Deserialize, Serialize};

use super::problem::{check_scale, DualProblem};
use crate::dual_domain::DualMeasure;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::market::MarketScenario;
use crate::utility::UtilityField;

/// Largest allowed product grid for the minimax check.
pub const MAX_MINIMAX_EVALUATIONS: usize = 200_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    /// `max_Q E∫(Y^Q − Y^Q̂) I(t, yY^Q̂) dμ + ⟨Q̂ − Q, ℰ_T⟩`
    pub worst: f64,
    pub worst_measure: DualMeasure,
}

impl<'a> DualProblem<'a> {
    /// The left side of the first-order optimality inequality, maximized
    /// over the dual domain. It is `Σ_ω (q_ω − q̂_ω)(Ĉ_T(ω) − ℰ_T(ω))`,
    /// linear in q, so the maximum sits at a vertex.
    pub fn variational_inequality(&self, y: f64, q_hat: &DualMeasure) -> Result<VariationalReport> {
        check_scale(y)?;
        if self.charged_density(&q_hat.q).iter().any(|d| !(*d > 0.0)) {
            let node = self
                .charged()
                .iter()
                .zip(self.charged_density(&q_hat.q))
                .find(|(_, d)| !(*d > 0.0))
                .map(|(c, _)| c.node)
                .unwrap_or(0);
            return Err(Error::DegenerateDual { node });
        }
        let c = self.implied_terminal_consumption(y, &q_hat.q);
        let dir: Vec<f64> = c
            .iter()
            .zip(self.terminal_endowment())
            .map(|(c, e)| c - e)
            .collect();
        let at_hat = q_hat.expect(&dir);
        let (best, worst_measure) = self.polytope().maximize_linear(&dir)?;
        Ok(VariationalReport {
            worst: best - at_hat,
            worst_measure,
        })
    }
}

/// Worst violation of the variational inequality over the dual domain.
pub fn variational_inequality_check(
    s: &MarketScenario,
    field: &UtilityField,
    y: f64,
    q_hat: &DualMeasure,
) -> Result<VariationalReport> {
    DualProblem::new(s, field)?.variational_inequality(y, q_hat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    /// `sup_c inf_Q L(c, Q)` over the consumption grid
    pub sup_inf: f64,
    /// `inf_Q sup_c L(c, Q)` with Q over the dual domain
    pub inf_sup: f64,
    pub grid_points: usize,
}

impl MinimaxReport {
    pub fn discrepancy(&self) -> f64 {
        (self.sup_inf - self.inf_sup).abs()
    }
}

/// Both iterated optima of the Lagrangian
/// `L(c, Q) = E∫(U(t, c) − y Y^Q c) dμ + y⟨Q, ℰ_T⟩`
/// with c on the grid `{step, 2·step, …, c_cap}` at every charged node.
/// The inner infimum over Q is attained at a vertex; the inner supremum
/// separates node by node. The outer infimum over Q is searched on a
/// barycentric grid over the vertices (at most three) with local refinement.
pub fn minimax_check(
    s: &MarketScenario,
    field: &UtilityField,
    y: f64,
    c_cap: f64,
    step: f64,
    exec: Exec,
) -> Result<MinimaxReport> {
    check_scale(y)?;
    if !(c_cap > 0.0 && step > 0.0 && step < c_cap) {
        return Err(Error::invalid("minimax grid needs 0 < step < c_cap"));
    }
    let prob = DualProblem::new(s, field)?;
    let vertices = prob.polytope().vertices()?;
    let charged = prob.charged();
    if charged.len() > 16 {
        return Err(Error::SizeGuard {
            what: "charged nodes for minimax",
            actual: charged.len(),
            limit: 16,
        });
    }
    if vertices.len() > 3 {
        return Err(Error::SizeGuard {
            what: "dual vertices for minimax",
            actual: vertices.len(),
            limit: 3,
        });
    }
    let g = (c_cap / step).round() as usize;
    let total = (g as f64).powi(charged.len() as i32) * vertices.len() as f64;
    if total > MAX_MINIMAX_EVALUATIONS as f64 {
        return Err(Error::SizeGuard {
            what: "minimax grid evaluations",
            actual: total.min(usize::MAX as f64) as usize,
            limit: MAX_MINIMAX_EVALUATIONS,
        });
    }
    let grid: Vec<f64> = (1..=g).map(|i| i as f64 * step).collect();
    let endow = prob.terminal_endowment();
    // per charged node: utility term ℙ w U(c) on the grid
    let util: Vec<Vec<f64>> = charged
        .iter()
        .map(|c| {
            grid.iter()
                .map(|&x| c.prob * c.weight * c.utility.u(x))
                .collect()
        })
        .collect();
    // per vertex: price of a unit rate at each charged node, y ℙ w Y^Q,
    // and the endowment term
    let prices: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| {
            prob.charged_density(&v.q)
                .iter()
                .zip(charged)
                .map(|(d, c)| y * c.prob * c.weight * d)
                .collect()
        })
        .collect();
    let offsets: Vec<f64> = vertices.iter().map(|v| y * v.expect(endow)).collect();
    let m = charged.len();

    // sup_c min_v: enumerate the product grid, parallel over the first node
    let outer = if m == 0 { 1 } else { g };
    let best = exec.map_range(outer, |i0| {
        let mut idx = vec![0usize; m];
        if m > 0 {
            idx[0] = i0;
        }
        let mut best = f64::NEG_INFINITY;
        loop {
            let u: f64 = (0..m).map(|j| util[j][idx[j]]).sum();
            let inf = prices
                .iter()
                .zip(&offsets)
                .map(|(p, o)| u - (0..m).map(|j| p[j] * grid[idx[j]]).sum::<f64>() + o)
                .fold(f64::INFINITY, f64::min);
            best = best.max(inf);
            // advance odometer on nodes 1..m
            let mut j = 1;
            while j < m {
                idx[j] += 1;
                if idx[j] < g {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j >= m {
                break;
            }
        }
        best
    });
    let sup_inf = best.into_iter().fold(f64::NEG_INFINITY, f64::max);

    // inf over Q of the node-separable supremum
    let sup_given = |lam: &[f64]| -> f64 {
        let mut val = 0.0;
        for j in 0..m {
            let price: f64 = lam.iter().zip(&prices).map(|(l, p)| l * p[j]).sum();
            val += util[j]
                .iter()
                .zip(&grid)
                .map(|(u, c)| u - price * c)
                .fold(f64::NEG_INFINITY, f64::max);
        }
        val + lam.iter().zip(&offsets).map(|(l, o)| l * o).sum::<f64>()
    };
    let nv = vertices.len();
    let mut inf_sup = f64::INFINITY;
    let mut best_lam = vec![1.0 / nv as f64; nv];
    let scan =
        |centre: &[f64], radius: f64, res: usize, inf_sup: &mut f64, best_lam: &mut Vec<f64>| {
            let cands: Vec<Vec<f64>> = match nv {
                1 => vec![vec![1.0]],
                2 => (0..=res)
                    .map(|i| {
                        let a = (centre[0] - radius + 2.0 * radius * i as f64 / res as f64)
                            .clamp(0.0, 1.0);
                        vec![a, 1.0 - a]
                    })
                    .collect(),
                _ => {
                    let mut out = Vec::new();
                    for i in 0..=res {
                        for j in 0..=res {
                            let a = (centre[0] - radius + 2.0 * radius * i as f64 / res as f64)
                                .clamp(0.0, 1.0);
                            let b = (centre[1] - radius + 2.0 * radius * j as f64 / res as f64)
                                .clamp(0.0, 1.0);
                            if a + b <= 1.0 {
                                out.push(vec![a, b, 1.0 - a - b]);
                            }
                        }
                    }
                    out
                }
            };
            let vals = exec.map(&cands, |l| sup_given(l));
            for (l, v) in cands.into_iter().zip(vals) {
                if v < *inf_sup {
                    *inf_sup = v;
                    *best_lam = l;
                }
            }
        };
    let res = if nv == 3 { 60 } else { 400 };
    let centre = best_lam.clone();
    scan(&centre, 1.0, res, &mut inf_sup, &mut best_lam);
    let mut radius = 2.0 / res as f64;
    for _ in 0..6 {
        let centre = best_lam.clone();
        scan(&centre, radius, 20, &mut inf_sup, &mut best_lam);
        radius /= 8.0;
    }
    Ok(MinimaxReport {
        sup_inf,
        inf_sup,
        grid_points: g,
    })
}

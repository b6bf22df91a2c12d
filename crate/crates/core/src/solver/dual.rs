use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::problem::{check_scale, DualProblem};
use crate::dual_domain::DualMeasure;
use crate::error::{Error, Result};
use crate::market::MarketScenario;
use crate::numeric::qp::QuadraticProgram;
use crate::utility::UtilityField;

/// Where the dual iteration starts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum InitialPoint {
    /// midpoint of the max-min interior point and the projection of ℙ
    #[default]
    Default,
    /// projection of ℙ onto the dual domain
    Reference,
    /// the interior point maximizing the smallest weight
    Interior,
    /// a given measure, projected onto the dual domain
    Measure(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// stationarity tolerance on the Frank–Wolfe gap, scaled by 1 + |J|
    pub tol_opt: f64,
    pub initial: InitialPoint,
    /// replace the optimizer by the minimum-norm member of the optimal face
    pub min_norm: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tol_opt: 1e-8,
            initial: InitialPoint::Default,
            min_norm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub y: f64,
    pub q: DualMeasure,
    /// 𝔙(y) = J(y, Q̂)
    pub value: f64,
    pub iterations: usize,
    /// `max_{Q ∈ 𝒟} ∇J·(q̂ − Q)`, the Frank–Wolfe duality gap
    pub fw_gap: f64,
    /// polytope inequalities (including q ≥ 0) active at Q̂
    pub active_constraints: usize,
    /// iterations that fell back to a Frank–Wolfe step
    pub fallback_steps: usize,
}

const ARMIJO: f64 = 1e-4;

impl<'a> DualProblem<'a> {
    fn start_point(&self, initial: &InitialPoint) -> Result<Vec<f64>> {
        let poly = self.polytope();
        let tree = self.scenario().tree();
        let reference = DualMeasure::reference(tree);
        let interior = || poly.interior_point().ok_or(Error::NoArbitrage);
        Ok(match initial {
            InitialPoint::Default => {
                let (qi, _) = interior()?;
                let qp = poly.project(&reference.q)?;
                qi.q.iter().zip(&qp.q).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            InitialPoint::Reference => poly.project(&reference.q)?.q,
            InitialPoint::Interior => interior()?.0.q,
            InitialPoint::Measure(q) => poly.project(q)?.q,
        })
    }

    /// `(gap, argmin vertex)` of the linearization at `q`.
    fn frank_wolfe_gap(&self, g: &[f64], q: &[f64]) -> Result<(f64, DualMeasure)> {
        let (lo, v) = self.polytope().minimize_linear(g)?;
        let at_q: f64 = g.iter().zip(q).map(|(a, b)| a * b).sum();
        Ok(((at_q - lo).max(0.0), v))
    }

    /// Newton direction: minimizes the local quadratic model over the
    /// polytope, returning the target point `z = q + d`.
    fn newton_target(&self, y: f64, q: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        let k = q.len();
        let mut m = self.hessian(y, q);
        // relative shift per entry: the diagonal can span many orders of
        // magnitude near the boundary, and rank-deficient blocks only need
        // a shift proportional to their own diagonal
        let scale = (0..k).map(|i| m[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        for i in 0..k {
            m[(i, i)] += 1e-9 * m[(i, i)] + 1e-15 * scale + 1e-300;
        }
        let qv = DVector::from_column_slice(q);
        let lin = DVector::from_column_slice(g) - &m * &qv;
        let mut qp = QuadraticProgram::new(m, lin);
        self.polytope().add_qp_rows(&mut qp);
        let sol = qp.solve().ok()?;
        Some(sol.x.iter().map(|v| v.max(0.0)).collect())
    }

    fn line_search(
        &self,
        y: f64,
        q: &[f64],
        d: &[f64],
        j0: f64,
        slope: f64,
    ) -> Option<(f64, Vec<f64>, f64)> {
        let mut t = 1.0;
        for _ in 0..80 {
            let cand: Vec<f64> = q.iter().zip(d).map(|(a, b)| (a + t * b).max(0.0)).collect();
            let j = self.value(y, &cand);
            if j.is_finite() && j <= j0 + ARMIJO * t * slope {
                return Some((t, cand, j));
            }
            t *= 0.5;
        }
        None
    }

    /// Minimizes `J(y, ·)` over the dual domain by projected Newton steps
    /// with backtracking, falling back to Frank–Wolfe steps when the
    /// quadratic subproblem fails.
    pub fn solve_dual(&self, y: f64, opts: &SolverOptions) -> Result<DualSolution> {
        check_scale(y)?;
        let mut q = self.start_point(&opts.initial)?;
        let mut j = self.value(y, &q);
        if !j.is_finite() {
            // boundary start: pull toward the interior until finite
            let (qi, _) = self.polytope().interior_point().ok_or(Error::NoArbitrage)?;
            let mut lam = 0.5;
            while !j.is_finite() && lam > 1e-6 {
                q = q
                    .iter()
                    .zip(&qi.q)
                    .map(|(a, b)| (1.0 - lam) * a + lam * b)
                    .collect();
                j = self.value(y, &q);
                lam *= 0.5;
            }
            if !j.is_finite() {
                q = qi.q;
                j = self.value(y, &q);
            }
            if !j.is_finite() {
                return Err(Error::Internal(
                    "dual objective is infinite on the whole domain".into(),
                ));
            }
        }
        let mut fallback_steps = 0;
        let mut iterations = 0;
        let mut stalled = false;
        // set when the Newton model sees no descent beyond rounding; with
        // strong curvature the Frank–Wolfe gap overstates suboptimality
        // (roughly gap²/curvature), so this point is accepted as optimal
        let mut model_converged = false;
        loop {
            let g = self.gradient(y, &q);
            let (fw_gap, vertex) = self.frank_wolfe_gap(&g, &q)?;
            let tol = opts.tol_opt * 1e-3 * (1.0 + j.abs());
            if fw_gap <= tol || stalled || iterations >= opts.max_iterations {
                let done = model_converged || fw_gap <= opts.tol_opt * (1.0 + j.abs());
                if !done {
                    return Err(Error::NoConvergence {
                        stage: "dual solver",
                        iterations,
                        residual: fw_gap,
                    });
                }
                let q = if opts.min_norm {
                    self.min_norm_optimizer(y, q, j)
                } else {
                    q
                };
                let value = self.value_guarded(y, &q, 0.0);
                let g = self.gradient(y, &q);
                let (fw_gap, _) = self.frank_wolfe_gap(&g, &q)?;
                return Ok(DualSolution {
                    y,
                    active_constraints: self.active_count(&q),
                    q: DualMeasure::new(q),
                    value,
                    iterations,
                    fw_gap,
                    fallback_steps,
                });
            }
            iterations += 1;
            let mut stepped = false;
            if let Some(z) = self.newton_target(y, &q, &g) {
                let d: Vec<f64> = z.iter().zip(&q).map(|(a, b)| a - b).collect();
                let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
                if slope < -1e-16 * (1.0 + j.abs()) {
                    if let Some((_, cand, jn)) = self.line_search(y, &q, &d, j, slope) {
                        stepped = jn < j || (j - jn).abs() <= 1e-15 * (1.0 + j.abs());
                        if stepped {
                            q = cand;
                            j = jn;
                        }
                    }
                } else {
                    stalled = true;
                    model_converged = true;
                    continue;
                }
            }
            if !stepped {
                fallback_steps += 1;
                let d: Vec<f64> = vertex.q.iter().zip(&q).map(|(a, b)| a - b).collect();
                let slope = -fw_gap;
                match self.line_search(y, &q, &d, j, slope) {
                    Some((_, cand, jn)) if jn < j => {
                        q = cand;
                        j = jn;
                    }
                    _ => stalled = true,
                }
            }
        }
    }

    fn active_count(&self, q: &[f64]) -> usize {
        let poly = self.polytope();
        let zeros = q.iter().filter(|v| **v <= 1e-12).count();
        let rows = poly
            .inequality_rows()
            .iter()
            .filter(|r| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() >= -1e-10)
            .count();
        zeros + rows
    }

    /// The optimal face is `𝒟 ∩ {Q(n) fixed on charged nodes, ⟨Q, ℰ_T⟩
    /// fixed}`; its minimum-norm point is the canonical optimizer. Falls
    /// back to `q` when the projection is not numerically clean.
    fn min_norm_optimizer(&self, y: f64, q: Vec<f64>, j: f64) -> Vec<f64> {
        let k = q.len();
        let mut qp = QuadraticProgram::identity(DVector::zeros(k));
        self.polytope().add_qp_rows(&mut qp);
        let masses = self.masses(&q);
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for (c, m) in self.charged().iter().zip(masses) {
            let mut a = vec![0.0; k];
            for w in c.paths.clone() {
                a[w] = 1.0;
            }
            rows.push((a, m));
        }
        let e = self.terminal_endowment();
        rows.push((e.to_vec(), e.iter().zip(&q).map(|(a, b)| a * b).sum()));
        // keep only rows independent of the simplex row and each other
        let mut basis: Vec<DVector<f64>> = vec![DVector::from_element(k, 1.0 / (k as f64).sqrt())];
        for (a, b) in rows {
            let mut v = DVector::from_vec(a.clone());
            for u in &basis {
                let c = u.dot(&v);
                v -= u * c;
            }
            let n = v.norm();
            if n > 1e-9 * DVector::from_vec(a.clone()).norm().max(1e-300) {
                basis.push(v / n);
                qp.equality(DVector::from_vec(a), b);
            }
        }
        let Ok(sol) = qp.solve() else { return q };
        let cand: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
        let jn = self.value(y, &cand);
        let feasible = self.polytope().max_violation(&cand) <= 1e-12;
        if feasible && jn.is_finite() && jn <= j + 1e-13 * (1.0 + j.abs()) {
            cand
        } else {
            q
        }
    }
}

/// Minimizes `J(y, ·)` over the dual domain; returns `Q̂^y` and `𝔙(y)`.
pub fn solve_dual(
    s: &MarketScenario,
    field: &UtilityField,
    y: f64,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    DualProblem::new(s, field)?.solve_dual(y, opts)
}

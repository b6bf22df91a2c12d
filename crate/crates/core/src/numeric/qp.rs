//! Strictly convex quadratic programs via the Goldfarb–Idnani dual
//! active-set method:
//!
//!   min ½ xᵀGx + cᵀx   s.t.  aᵢ·x = bᵢ (equalities),  aⱼ·x ≥ bⱼ (inequalities).
//!
//! `G` is reduced to the identity with its Cholesky factor; the active-set
//! projections are recomputed from a QR factorization at every step, which
//! is fine for the dimensions used here (≲ 100).

use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    /// `None` means the identity metric.
    hessian: Option<DMatrix<f64>>,
    linear: DVector<f64>,
    equalities: Vec<(DVector<f64>, f64)>,
    inequalities: Vec<(DVector<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// indices into the inequality list that are active at the solution
    pub active_inequalities: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpError {
    NotPositiveDefinite,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Eq,
    Ineq,
}

impl QuadraticProgram {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        assert_eq!(hessian.nrows(), linear.len());
        Self {
            hessian: Some(hessian),
            linear,
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    /// `min ½‖x‖² + cᵀx`, i.e. Euclidean projection of `-c`.
    pub fn identity(linear: DVector<f64>) -> Self {
        Self {
            hessian: None,
            linear,
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn equality(&mut self, a: DVector<f64>, b: f64) {
        self.equalities.push((a, b));
    }

    pub fn inequality(&mut self, a: DVector<f64>, b: f64) {
        self.inequalities.push((a, b));
    }

    pub fn solve(&self) -> Result<QpSolution, QpError> {
        let n = self.dim();
        let chol = match &self.hessian {
            Some(g) => Some(Cholesky::new(g.clone()).ok_or(QpError::NotPositiveDefinite)?),
            None => None,
        };
        let to_tilde = |v: &DVector<f64>| -> DVector<f64> {
            match &chol {
                Some(c) => c
                    .l_dirty()
                    .solve_lower_triangular(v)
                    .expect("cholesky factor is regular"),
                None => v.clone(),
            }
        };
        let ctilde = to_tilde(&self.linear);
        let mut normals: Vec<DVector<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut kinds: Vec<Kind> = Vec::new();
        let mut scale: Vec<f64> = Vec::new();
        for (a, b) in &self.equalities {
            normals.push(to_tilde(a));
            rhs.push(*b);
            kinds.push(Kind::Eq);
            scale.push(a.amax().max(1e-300));
        }
        for (a, b) in &self.inequalities {
            normals.push(to_tilde(a));
            rhs.push(*b);
            kinds.push(Kind::Ineq);
            scale.push(a.amax().max(1e-300));
        }
        let n_eq = self.equalities.len();
        let total = normals.len();

        let mut x = -ctilde.clone();
        let mut active: Vec<usize> = Vec::new();
        let mut signs: Vec<f64> = Vec::new();
        let mut u: Vec<f64> = Vec::new();
        let mut eq_done = vec![false; n_eq];
        let max_iter = 20 * (n + total) + 100;
        let mut iterations = 0;

        let tol = |j: usize, x: &DVector<f64>| 1e-13 * (1.0 + rhs[j].abs() + scale[j] * x.amax());

        loop {
            // choose the constraint to add
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..n_eq {
                if !eq_done[j] {
                    let s = normals[j].dot(&x) - rhs[j];
                    pick = Some((j, if s > 0.0 { -1.0 } else { 1.0 }));
                    break;
                }
            }
            if pick.is_none() {
                let mut worst = 0.0;
                for j in n_eq..total {
                    if active.contains(&j) {
                        continue;
                    }
                    let s = normals[j].dot(&x) - rhs[j];
                    if s < -tol(j, &x) && s / scale[j] < worst {
                        worst = s / scale[j];
                        pick = Some((j, 1.0));
                    }
                }
            }
            let Some((p, sign)) = pick else {
                break;
            };
            let np = &normals[p] * sign;
            let bp = rhs[p] * sign;
            let mut u_plus = 0.0;
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(QpError::IterationLimit);
                }
                let s_p = np.dot(&x) - bp;
                let (z, r) = step_directions(&normals, &signs, &active, &np, n);
                let mut t1 = f64::INFINITY;
                let mut drop_k = None;
                for (i, &j) in active.iter().enumerate() {
                    if kinds[j] == Kind::Ineq && r[i] > 1e-14 {
                        let ratio = u[i] / r[i];
                        if ratio < t1 {
                            t1 = ratio;
                            drop_k = Some(i);
                        }
                    }
                }
                let zn = z.dot(&np);
                let dependent = z.norm() <= 1e-11 * np.norm();
                let t2 = if dependent {
                    f64::INFINITY
                } else {
                    (-s_p / zn).max(0.0)
                };
                if dependent && s_p.abs() <= tol(p, &x) {
                    // implied by the active set and already satisfied
                    if kinds[p] == Kind::Eq {
                        eq_done[p] = true;
                    }
                    break;
                }
                let t = t1.min(t2);
                if !t.is_finite() {
                    return Err(QpError::Infeasible);
                }
                if dependent {
                    for (i, ui) in u.iter_mut().enumerate() {
                        *ui -= t * r[i];
                    }
                    u_plus += t;
                    let k = drop_k.expect("finite t1 has a drop index");
                    active.remove(k);
                    signs.remove(k);
                    u.remove(k);
                    continue;
                }
                x += &z * t;
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui -= t * r[i];
                }
                u_plus += t;
                if t2 <= t1 {
                    active.push(p);
                    signs.push(sign);
                    u.push(u_plus);
                    if kinds[p] == Kind::Eq {
                        eq_done[p] = true;
                    }
                    break;
                }
                let k = drop_k.expect("partial step has a drop index");
                active.remove(k);
                signs.remove(k);
                u.remove(k);
            }
        }

        let xs = match &chol {
            Some(c) => c
                .l_dirty()
                .transpose()
                .solve_upper_triangular(&x)
                .expect("regular factor"),
            None => x,
        };
        let objective = match &self.hessian {
            Some(g) => 0.5 * xs.dot(&(g * &xs)) + self.linear.dot(&xs),
            None => 0.5 * xs.norm_squared() + self.linear.dot(&xs),
        };
        let active_inequalities = active
            .iter()
            .filter(|&&j| j >= n_eq)
            .map(|&j| j - n_eq)
            .collect();
        Ok(QpSolution {
            x: xs,
            objective,
            active_inequalities,
            iterations,
        })
    }
}

/// Primal direction `z` (component of `np` orthogonal to the active normals)
/// and dual direction `r` (least-squares coefficients of `np` on them).
fn step_directions(
    normals: &[DVector<f64>],
    signs: &[f64],
    active: &[usize],
    np: &DVector<f64>,
    n: usize,
) -> (DVector<f64>, DVector<f64>) {
    if active.is_empty() {
        return (np.clone(), DVector::zeros(0));
    }
    let q = active.len();
    let mut nmat = DMatrix::zeros(n, q);
    for (k, &j) in active.iter().enumerate() {
        nmat.set_column(k, &(&normals[j] * signs[k]));
    }
    let qr = nmat.qr();
    let qm = qr.q();
    let rm = qr.r();
    let proj = qm.transpose() * np;
    let r = rm
        .solve_upper_triangular(&proj)
        .unwrap_or_else(|| DVector::zeros(q));
    let z = np - &qm * &proj;
    (z, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn projection_onto_simplex_corner() {
        // project (2, -1) onto {x >= 0, x1 + x2 = 1}
        let mut qp = QuadraticProgram::identity(dvector![-2.0, 1.0]);
        qp.equality(dvector![1.0, 1.0], 1.0);
        qp.inequality(dvector![1.0, 0.0], 0.0);
        qp.inequality(dvector![0.0, 1.0], 0.0);
        let s = qp.solve().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && s.x[1].abs() < 1e-14);
        assert_eq!(s.active_inequalities, vec![1]);
    }

    #[test]
    fn general_metric() {
        // min x² + xy + y² - 3x st x + y >= 2   -> classic check by KKT
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let mut qp = QuadraticProgram::new(g, dvector![-3.0, 0.0]);
        qp.inequality(dvector![1.0, 1.0], 2.0);
        let s = qp.solve().unwrap();
        // unconstrained min (2,-1) violates; KKT on x+y=2: 2x+y-3=l, x+2y=l -> x=2.5, y=-0.5, l=1.5
        assert!((s.x[0] - 2.5).abs() < 1e-13 && (s.x[1] + 0.5).abs() < 1e-13);
    }

    #[test]
    fn duplicate_and_opposite_rows() {
        let mut qp = QuadraticProgram::identity(dvector![-1.0, -1.0, -1.0]);
        qp.equality(dvector![1.0, 1.0, 1.0], 1.0);
        qp.inequality(dvector![1.0, -2.0, 0.0], 0.0);
        qp.inequality(dvector![-1.0, 2.0, 0.0], 0.0);
        qp.inequality(dvector![1.0, -2.0, 0.0], 0.0);
        for i in 0..3 {
            let mut e = DVector::zeros(3);
            e[i] = 1.0;
            qp.inequality(e, 0.0);
        }
        let s = qp.solve().unwrap();
        assert!((s.x[0] - 2.0 * s.x[1]).abs() < 1e-14);
        assert!((s.x.sum() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn infeasible_detected() {
        let mut qp = QuadraticProgram::identity(dvector![0.0]);
        qp.inequality(dvector![1.0], 1.0);
        qp.inequality(dvector![-1.0], 0.0);
        assert_eq!(qp.solve().unwrap_err(), QpError::Infeasible);
    }
}

use serde::{Deserialize, Serialize};

use super::dual::{DualSolution, InitialPoint, SolverOptions};
use super::problem::DualProblem;
use crate::error::{Error, Result};
use crate::market::MarketScenario;
use crate::numeric::roots::{brent, RootError};
use crate::utility::UtilityField;

/// Bracket for y, in log space.
pub const Y_RANGE: (f64, f64) = (1e-8, 1e8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matched {
    pub y: f64,
    pub dual: DualSolution,
    /// 𝔙'(y) at the returned y
    pub derivative: f64,
    /// number of dual solves spent
    pub evaluations: usize,
    /// dual solver iterations summed over those solves
    pub total_iterations: usize,
}

impl<'a> DualProblem<'a> {
    /// Smallest value of `⟨Q, ℰ_T⟩` over the dual domain.
    pub fn min_endowment_value(&self) -> Result<f64> {
        Ok(self
            .polytope()
            .minimize_linear(self.terminal_endowment())?
            .0)
    }

    /// Finds y with `𝔙'(y) = −x` by Brent's method in log y, warm-starting
    /// each dual solve at the previous optimizer. `x = 0` is accepted when
    /// `⟨Q, ℰ_T⟩` is bounded away from zero on the dual domain.
    pub fn match_y_to_x(&self, x: f64, opts: &SolverOptions) -> Result<Matched> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::invalid(format!(
                "initial wealth must be nonnegative and finite, got {x}"
            )));
        }
        if x == 0.0 && !(self.min_endowment_value()? > 0.0) {
            return Err(Error::invalid(
                "zero initial wealth needs a terminal endowment bounded away from zero",
            ));
        }
        let mut ev = Evaluator {
            problem: self,
            x,
            warm: opts.clone(),
            evaluations: 0,
            iterations: 0,
            failure: None,
            last: None,
        };
        let (tmin, tmax) = (Y_RANGE.0.ln(), Y_RANGE.1.ln());
        let scale = x.max(1.0);
        let mut a = 0.0;
        let mut fa = ev.f(a);
        let mut b = a;
        let mut fb = fa;
        let mut step = 1.0;
        // 𝔙' is nondecreasing: move right while negative, left while positive
        while fb.is_finite() && fb.signum() == fa.signum() && fb != 0.0 {
            a = b;
            fa = fb;
            let dir = if fa < 0.0 { 1.0 } else { -1.0 };
            b = (a + dir * step).clamp(tmin, tmax);
            if b == a {
                break;
            }
            fb = ev.f(b);
            step *= 2.0;
        }
        if let Some(e) = ev.failure.take() {
            return Err(e);
        }
        if fa == 0.0 || fb == 0.0 || fa.signum() == fb.signum() {
            if fb == 0.0 || fa == 0.0 {
                // exact hit; fall through to the final solve below
            } else {
                return Err(Error::NoConvergence {
                    stage: "y matching (bracket expansion)",
                    iterations: ev.evaluations,
                    residual: fb.abs().min(fa.abs()),
                });
            }
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let root = if fa == 0.0 {
            a
        } else if fb == 0.0 {
            b
        } else {
            match brent(|t| ev.f(t), lo, hi, 1e-15, 1e-12 * scale, 200) {
                Ok(r) => r.x,
                Err(RootError::MaxIterations { x, .. }) => x,
                Err(e) => {
                    return Err(ev.failure.take().unwrap_or(Error::NoConvergence {
                        stage: "y matching",
                        iterations: ev.evaluations,
                        residual: match e {
                            RootError::NotBracketed { fa, .. } => fa.abs(),
                            _ => f64::NAN,
                        },
                    }))
                }
            }
        };
        let reuse = matches!(&ev.last, Some((t, _, _)) if *t == root);
        if !reuse {
            ev.f(root);
        }
        if let Some(e) = ev.failure {
            return Err(e);
        }
        let (t, dual, derivative) = ev.last.expect("at least one dual solve");
        Ok(Matched {
            y: t.exp(),
            dual,
            derivative,
            evaluations: ev.evaluations,
            total_iterations: ev.iterations,
        })
    }
}

struct Evaluator<'p, 'a> {
    problem: &'p DualProblem<'a>,
    x: f64,
    warm: SolverOptions,
    evaluations: usize,
    iterations: usize,
    failure: Option<Error>,
    last: Option<(f64, DualSolution, f64)>,
}

impl Evaluator<'_, '_> {
    /// `𝔙'(e^t) + x`, or NaN after recording a failure.
    fn f(&mut self, t: f64) -> f64 {
        let y = t.exp();
        self.evaluations += 1;
        let res = self
            .problem
            .solve_dual(y, &self.warm)
            .and_then(|sol| self.problem.derivative(y, &sol.q).map(|d| (sol, d)));
        match res {
            Ok((sol, d)) => {
                self.iterations += sol.iterations;
                self.warm.initial = InitialPoint::Measure(sol.q.q.clone());
                self.last = Some((t, sol, d));
                d + self.x
            }
            Err(e) => {
                self.failure.get_or_insert(e);
                f64::NAN
            }
        }
    }
}

/// y with `𝔙'(y) = −x`.
pub fn match_y_to_x(
    s: &MarketScenario,
    field: &UtilityField,
    x: f64,
    opts: &SolverOptions,
) -> Result<Matched> {
    DualProblem::new(s, field)?.match_y_to_x(x, opts)
}

use super::conjugate::{invert_marginal, numeric_conjugate};
use super::envelope::{envelopes, Bound, PowerMix};
use super::point::PointUtility;
use super::spec::UtilitySpec;
use crate::error::{Error, Result};
use crate::market::{EventTree, NodeId};

/// A utility random field resolved on an event tree: one closed-form
/// utility per node plus the marginal envelopes shared by all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityField {
    spec: UtilitySpec,
    points: Vec<PointUtility>,
    time_index: Vec<usize>,
    k1: PowerMix,
    k2: PowerMix,
}

fn check_level(y: f64) -> Result<()> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dual argument must be positive, got {y}"
        )))
    }
}

impl UtilityField {
    pub fn resolve(spec: &UtilitySpec, tree: &EventTree) -> Result<Self> {
        spec.check()?;
        let points = (0..tree.num_nodes())
            .map(|n| spec.point(tree, n))
            .collect::<Result<Vec<_>>>()?;
        let (k1, k2) = envelopes(&points);
        let field = Self {
            spec: spec.clone(),
            points,
            time_index: (0..tree.num_nodes()).map(|n| tree.time_index(n)).collect(),
            k1,
            k2,
        };
        field.check_tail_compatibility()?;
        Ok(field)
    }

    /// `limsup K₂/K₁ < ∞` at infinity. For power-type marginals this means
    /// all nodes share the tail exponent; a mixed running/terminal field
    /// with different exponents is rejected here.
    fn check_tail_compatibility(&self) -> Result<()> {
        let (lo, hi) = (self.k1.tail_exponent(), self.k2.tail_exponent());
        if (hi - lo).abs() > 1e-12 {
            let node = self
                .points
                .iter()
                .position(|p| (p.marginal_power().1 - lo).abs() <= 1e-12)
                .unwrap_or(0);
            let detail = match &self.spec {
                UtilitySpec::Mixed { .. } => format!(
                    "running and terminal utilities are incompatible: marginal utilities decay like x^{lo} and x^{hi}, so their ratio is unbounded"
                ),
                _ => format!("envelope ratio K2/K1 is unbounded (tail exponents {lo} and {hi})"),
            };
            return Err(Error::Envelope {
                node,
                x: f64::INFINITY,
                detail,
            });
        }
        Ok(())
    }

    pub fn spec(&self) -> &UtilitySpec {
        &self.spec
    }

    pub fn family(&self) -> &'static str {
        self.spec.family()
    }

    pub fn num_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, n: NodeId) -> &PointUtility {
        &self.points[n]
    }

    pub fn points(&self) -> &[PointUtility] {
        &self.points
    }

    pub fn time_index(&self, n: NodeId) -> usize {
        self.time_index[n]
    }

    pub fn u(&self, n: NodeId, x: f64) -> f64 {
        self.points[n].u(x)
    }

    pub fn du(&self, n: NodeId, x: f64) -> f64 {
        self.points[n].du(x)
    }

    pub fn conjugate(&self, n: NodeId, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.points[n].v(y))
    }

    pub fn conjugate_derivative(&self, n: NodeId, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.points[n].dv(y))
    }

    pub fn inverse_marginal(&self, n: NodeId, y: f64) -> Result<f64> {
        check_level(y)?;
        Ok(self.points[n].inverse_marginal(y))
    }

    pub fn envelopes(&self) -> (&PowerMix, &PowerMix) {
        (&self.k1, &self.k2)
    }

    /// `K₁⁻¹(y) ≤ I(t, y) ≤ K₂⁻¹(y)` for every node.
    pub fn inverse_marginal_bracket(&self, y: f64) -> (f64, f64) {
        (self.k1.inverse(y), self.k2.inverse(y))
    }

    /// Inverse marginal by root finding on the marginal, bracketed by the
    /// envelope inverses. Independent of the closed-form inverse.
    pub fn inverse_marginal_numeric(&self, n: NodeId, y: f64) -> Result<f64> {
        check_level(y)?;
        let p = self.points[n];
        invert_marginal(|x| p.du(x), y, Some(self.inverse_marginal_bracket(y)))
    }

    /// Conjugate by maximizing `U(x) − xy` numerically.
    pub fn conjugate_numeric(&self, n: NodeId, y: f64) -> Result<f64> {
        check_level(y)?;
        let p = self.points[n];
        numeric_conjugate(
            |x| p.u(x),
            |x| p.du(x),
            y,
            Some(self.inverse_marginal_bracket(y)),
        )
        .map(|r| r.0)
    }

    /// True when every node carries the same utility.
    pub fn is_homogeneous(&self) -> bool {
        self.points.windows(2).all(|w| w[0] == w[1])
    }

    /// Deterministic minorant and majorant `U_lo ≤ U(t, ·) ≤ U_hi`, built
    /// from the envelopes and the range of `U(t, 1)`. The sandwich is
    /// verified on `grid`; a violation is reported with its witness.
    pub fn minorant_majorant(&self, grid: &[f64]) -> Result<(Bound, Bound)> {
        if self.is_homogeneous() {
            return Ok((Bound::Exact(self.points[0]), Bound::Exact(self.points[0])));
        }
        let at_one = self.points.iter().map(|p| p.u(1.0));
        let (m, big_m) = at_one.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let delta = self.k2.eval(1.0) - self.k1.eval(1.0);
        let lower = Bound::Lower {
            level: m,
            delta,
            k1: self.k1.clone(),
            k2: self.k2.clone(),
        };
        let upper = Bound::Upper {
            level: big_m,
            delta,
            k1: self.k1.clone(),
            k2: self.k2.clone(),
        };
        for &x in grid {
            let (lo, hi) = (lower.u(x), upper.u(x));
            for (n, p) in self.points.iter().enumerate() {
                let u = p.u(x);
                let slack = 1e-10 * (1.0 + u.abs());
                if lo > u + slack || u > hi + slack {
                    return Err(Error::Envelope {
                        node: n,
                        x,
                        detail: format!("sandwich violated: lower {lo}, value {u}, upper {hi}"),
                    });
                }
            }
        }
        Ok((lower, upper))
    }

    /// Grid verification of the standing utility conditions: monotone,
    /// strictly concave, Inada, envelope containment, bounded envelope ratio
    /// and eventual positivity. Returns the list of failures.
    pub fn check_conditions(&self) -> Vec<String> {
        let mut failures = Vec::new();
        let grid: Vec<f64> = (-24..=24).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
        for (n, p) in self.points.iter().enumerate() {
            for w in grid.windows(2) {
                if !(p.u(w[1]) > p.u(w[0])) {
                    failures.push(format!("node {n}: not increasing near x = {:e}", w[0]));
                    break;
                }
                if !(p.du(w[1]) < p.du(w[0])) {
                    failures.push(format!(
                        "node {n}: marginal not decreasing near x = {:e}",
                        w[0]
                    ));
                    break;
                }
            }
            if !(p.du(1e-12) > 1e4 * p.du(1.0) && p.du(1e12) < 1e-4 * p.du(1.0)) {
                failures.push(format!("node {n}: Inada limits not visible on the grid"));
            }
            for &x in &grid {
                let d = p.du(x);
                let (a, b) = (self.k1.eval(x), self.k2.eval(x));
                if d < a * (1.0 - 1e-12) || d > b * (1.0 + 1e-12) {
                    failures.push(format!(
                        "node {n}: marginal {d} outside envelope [{a}, {b}] at x = {x:e}"
                    ));
                    break;
                }
            }
            if !(p.u(1e12) > 0.0) {
                failures.push(format!("node {n}: utility not eventually positive"));
            }
        }
        let r6 = self.k2.eval(1e6) / self.k1.eval(1e6);
        let r12 = self.k2.eval(1e12) / self.k1.eval(1e12);
        if !(r12.is_finite() && r12 <= r6 * 1.01) {
            failures.push(format!("envelope ratio grows at infinity ({r6} -> {r12})"));
        }
        failures
    }
}

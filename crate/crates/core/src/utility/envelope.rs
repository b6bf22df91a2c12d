use serde::{Deserialize, Serialize};

use super::conjugate::{invert_marginal, numeric_conjugate};
use super::point::PointUtility;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixKind {
    Min,
    Max,
}

/// Pointwise min or max of power terms `κ x^p` with p < 0; continuous and
/// strictly decreasing, used as a marginal-utility envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMix {
    pub kind: MixKind,
    pub terms: Vec<(f64, f64)>,
}

fn term_integral(k: f64, p: f64, a: f64, b: f64) -> f64 {
    if (p + 1.0).abs() < 1e-15 {
        k * (b / a).ln()
    } else {
        k * (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
    }
}

impl PowerMix {
    pub fn new(kind: MixKind, mut terms: Vec<(f64, f64)>) -> Self {
        terms.sort_by(|a, b| a.partial_cmp(b).expect("finite envelope terms"));
        terms.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-15 * a.0.abs() && a.1 == b.1);
        Self { kind, terms }
    }

    fn pick(&self, vals: impl Iterator<Item = f64>) -> f64 {
        match self.kind {
            MixKind::Min => vals.fold(f64::INFINITY, f64::min),
            MixKind::Max => vals.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pick(self.terms.iter().map(|&(k, p)| k * x.powf(p)))
    }

    /// Inverse function; for decreasing terms the inverse of a min is the
    /// min of the inverses, and likewise for max.
    pub fn inverse(&self, y: f64) -> f64 {
        self.pick(self.terms.iter().map(|&(k, p)| (y / k).powf(1.0 / p)))
    }

    /// Exponent that dominates as x → ∞.
    pub fn tail_exponent(&self) -> f64 {
        let ps = self.terms.iter().map(|t| t.1);
        match self.kind {
            MixKind::Min => ps.fold(f64::INFINITY, f64::min),
            MixKind::Max => ps.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn active(&self, x: f64) -> (f64, f64) {
        let mut best = self.terms[0];
        for &t in &self.terms[1..] {
            let (vb, vt) = (best.0 * x.powf(best.1), t.0 * x.powf(t.1));
            let better = match self.kind {
                MixKind::Min => vt < vb,
                MixKind::Max => vt > vb,
            };
            if better {
                best = t;
            }
        }
        best
    }

    /// Exact `∫_a^b` by splitting at the crossing points of the terms.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if a > b {
            return -self.integral(b, a);
        }
        let mut cuts = vec![a, b];
        for (i, &(ki, pi)) in self.terms.iter().enumerate() {
            for &(kj, pj) in &self.terms[i + 1..] {
                if pi != pj {
                    let x = (kj / ki).powf(1.0 / (pi - pj));
                    if x > a && x < b {
                        cuts.push(x);
                    }
                }
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cuts"));
        cuts.windows(2)
            .map(|w| {
                let (k, p) = self.active((w[0] * w[1]).sqrt());
                term_integral(k, p, w[0], w[1])
            })
            .sum()
    }
}

/// Envelopes `K₁ ≤ ∂U ≤ K₂` of a set of closed-form point utilities.
pub fn envelopes(points: &[PointUtility]) -> (PowerMix, PowerMix) {
    let terms: Vec<(f64, f64)> = points.iter().map(|p| p.marginal_power()).collect();
    (
        PowerMix::new(MixKind::Min, terms.clone()),
        PowerMix::new(MixKind::Max, terms),
    )
}

/// A deterministic one-argument utility bounding the field from one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    /// the field is the same function everywhere
    Exact(PointUtility),
    /// built from the envelopes and the extreme values of U(·, 1)
    Lower {
        level: f64,
        delta: f64,
        k1: PowerMix,
        k2: PowerMix,
    },
    Upper {
        level: f64,
        delta: f64,
        k1: PowerMix,
        k2: PowerMix,
    },
}

impl Bound {
    pub fn u(&self, x: f64) -> f64 {
        match self {
            Bound::Exact(p) => p.u(x),
            Bound::Lower {
                level,
                delta,
                k1,
                k2,
            } => {
                if x <= 1.0 {
                    level - delta - k2.integral(x, 1.0)
                } else {
                    level - delta + k1.integral(1.0, x) + delta * (1.0 - (1.0 - x).exp())
                }
            }
            Bound::Upper {
                level,
                delta,
                k1,
                k2,
            } => {
                if x >= 1.0 {
                    level + delta + k2.integral(1.0, x)
                } else {
                    level + delta * x - k1.integral(x, 1.0)
                }
            }
        }
    }

    pub fn du(&self, x: f64) -> f64 {
        match self {
            Bound::Exact(p) => p.du(x),
            Bound::Lower { delta, k1, k2, .. } => {
                if x <= 1.0 {
                    k2.eval(x)
                } else {
                    k1.eval(x) + delta * (1.0 - x).exp()
                }
            }
            Bound::Upper { delta, k1, k2, .. } => {
                if x >= 1.0 {
                    k2.eval(x)
                } else {
                    k1.eval(x) + delta
                }
            }
        }
    }

    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        match self {
            Bound::Exact(p) => Ok(p.inverse_marginal(y)),
            _ => invert_marginal(|x| self.du(x), y, None),
        }
    }

    /// Convex conjugate of the bound.
    pub fn v(&self, y: f64) -> Result<f64> {
        match self {
            Bound::Exact(p) => Ok(p.v(y)),
            _ => numeric_conjugate(|x| self.u(x), |x| self.du(x), y, None).map(|r| r.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::point::Base;

    #[test]
    fn mix_integral_matches_quadrature() {
        let m = PowerMix::new(MixKind::Min, vec![(1.0, -0.5), (2.0, -0.8), (0.5, -1.0)]);
        let (a, b) = (0.05, 40.0);
        let n = 200_000;
        let h = (b / a as f64).ln() / n as f64;
        // midpoint rule in log coordinates
        let quad: f64 = (0..n)
            .map(|i| {
                let x = a * ((i as f64 + 0.5) * h).exp();
                m.eval(x) * x * h
            })
            .sum();
        assert!((m.integral(a, b) - quad).abs() < 1e-6 * quad.abs());
    }

    #[test]
    fn inverse_of_mix() {
        for kind in [MixKind::Min, MixKind::Max] {
            let m = PowerMix::new(kind, vec![(1.0, -0.5), (3.0, -0.7), (0.2, -1.0)]);
            for y in [0.01, 0.3, 1.0, 7.0, 500.0] {
                assert!((m.eval(m.inverse(y)) / y - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounds_are_smooth_at_one() {
        let pts = [
            PointUtility::new(Base::Log).scaled(0.8, 1.0),
            PointUtility::new(Base::Log).scaled(1.3, 1.0),
        ];
        let (k1, k2) = envelopes(&pts);
        let delta = k2.eval(1.0) - k1.eval(1.0);
        let lower = Bound::Lower {
            level: 0.0,
            delta,
            k1: k1.clone(),
            k2: k2.clone(),
        };
        let upper = Bound::Upper {
            level: 0.0,
            delta,
            k1,
            k2,
        };
        for b in [&lower, &upper] {
            let e = 1e-7;
            assert!((b.du(1.0 - e) - b.du(1.0 + e)).abs() < 1e-6);
            assert!((b.u(1.0 - e) - b.u(1.0 + e)).abs() < 1e-6);
        }
    }
}

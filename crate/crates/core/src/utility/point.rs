use serde::{Deserialize, Serialize};

/// Base utility families with closed-form conjugates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Base {
    /// x^α/α with 0 < α < 1
    Power {
        alpha: f64,
    },
    Log,
}

impl Base {
    fn w(self, x: f64) -> f64 {
        match self {
            Base::Power { alpha } => x.powf(alpha) / alpha,
            Base::Log => x.ln(),
        }
    }

    fn dw(self, x: f64) -> f64 {
        match self {
            Base::Power { alpha } => x.powf(alpha - 1.0),
            Base::Log => 1.0 / x,
        }
    }

    fn d2w(self, x: f64) -> f64 {
        match self {
            Base::Power { alpha } => (alpha - 1.0) * x.powf(alpha - 2.0),
            Base::Log => -1.0 / (x * x),
        }
    }

    fn vw(self, y: f64) -> f64 {
        match self {
            Base::Power { alpha } => (1.0 - alpha) / alpha * y.powf(alpha / (alpha - 1.0)),
            Base::Log => -y.ln() - 1.0,
        }
    }

    fn iw(self, y: f64) -> f64 {
        match self {
            Base::Power { alpha } => y.powf(1.0 / (alpha - 1.0)),
            Base::Log => 1.0 / y,
        }
    }

    fn diw(self, y: f64) -> f64 {
        match self {
            Base::Power { alpha } => y.powf((2.0 - alpha) / (alpha - 1.0)) / (alpha - 1.0),
            Base::Log => -1.0 / (y * y),
        }
    }

    /// Exponent p with W'(x) = x^p.
    pub fn marginal_exponent(self) -> f64 {
        match self {
            Base::Power { alpha } => alpha - 1.0,
            Base::Log => -1.0,
        }
    }
}

/// The utility in force at one node: `U(x) = outer · W(inner · x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointUtility {
    pub base: Base,
    pub outer: f64,
    pub inner: f64,
}

impl PointUtility {
    pub fn new(base: Base) -> Self {
        Self {
            base,
            outer: 1.0,
            inner: 1.0,
        }
    }

    pub fn scaled(self, outer: f64, inner: f64) -> Self {
        Self {
            base: self.base,
            outer: self.outer * outer,
            inner: self.inner * inner,
        }
    }

    fn ab(&self) -> f64 {
        self.outer * self.inner
    }

    pub fn u(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return match self.base {
                Base::Power { .. } if x == 0.0 => 0.0,
                Base::Power { .. } => f64::NEG_INFINITY,
                Base::Log => f64::NEG_INFINITY,
            };
        }
        self.outer * self.base.w(self.inner * x)
    }

    pub fn du(&self, x: f64) -> f64 {
        self.ab() * self.base.dw(self.inner * x)
    }

    pub fn d2u(&self, x: f64) -> f64 {
        self.ab() * self.inner * self.base.d2w(self.inner * x)
    }

    /// Conjugate `V(y) = sup_x [U(x) − xy]`.
    pub fn v(&self, y: f64) -> f64 {
        self.outer * self.base.vw(y / self.ab())
    }

    /// `V'(y) = −I(y)`.
    pub fn dv(&self, y: f64) -> f64 {
        -self.inverse_marginal(y)
    }

    /// `V''(y) = −I'(y) > 0`.
    pub fn d2v(&self, y: f64) -> f64 {
        -self.inverse_marginal_derivative(y)
    }

    /// `I(y) = (U')^{-1}(y)`.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        self.base.iw(y / self.ab()) / self.inner
    }

    pub fn inverse_marginal_derivative(&self, y: f64) -> f64 {
        self.base.diw(y / self.ab()) / (self.ab() * self.inner)
    }

    /// `U'(x) = κ x^p`; returns `(κ, p)`.
    pub fn marginal_power(&self) -> (f64, f64) {
        let p = self.base.marginal_exponent();
        (self.ab() * self.inner.powf(p), p)
    }

    /// `U(0+)`: 0 for power, −∞ for log (times the outer factor).
    pub fn u_at_zero(&self) -> f64 {
        match self.base {
            Base::Power { .. } => 0.0,
            Base::Log => f64::NEG_INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let log = PointUtility::new(Base::Log);
        assert_eq!(log.v(1.0), -1.0);
        assert_eq!(log.inverse_marginal(2.0), 0.5);
        let pw = PointUtility::new(Base::Power { alpha: 0.5 });
        assert!((pw.v(1.0) - 1.0).abs() < 1e-15);
        assert!((pw.inverse_marginal(4.0) - 1.0 / 16.0).abs() < 1e-16);
    }

    #[test]
    fn scaled_round_trip() {
        for base in [Base::Log, Base::Power { alpha: 0.3 }] {
            let p = PointUtility::new(base).scaled(2.5, 0.4);
            for x in [0.01, 0.7, 3.0, 200.0] {
                let y = p.du(x);
                assert!((p.inverse_marginal(y) / x - 1.0).abs() < 1e-13);
                // Fenchel-Young equality at y = U'(x)
                assert!((p.v(y) + x * y - p.u(x)).abs() < 1e-12 * (1.0 + p.u(x).abs()));
                let (k, e) = p.marginal_power();
                assert!((k * x.powf(e) / y - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn second_derivatives_match_differences() {
        let p = PointUtility::new(Base::Power { alpha: 0.6 }).scaled(1.3, 2.0);
        let (y, h) = (0.8, 1e-5);
        let fd = (p.dv(y + h) - p.dv(y - h)) / (2.0 * h);
        assert!((fd - p.d2v(y)).abs() < 1e-7);
        let fd = (p.du(y + h) - p.du(y - h)) / (2.0 * h);
        assert!((fd - p.d2u(y)).abs() < 1e-7);
    }
}

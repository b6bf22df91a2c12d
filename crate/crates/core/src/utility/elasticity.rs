use serde::{Deserialize, Serialize};

use super::field::UtilityField;
use crate::error::{Error, Result};

/// Margin below 1 required of the tail estimate for a "reasonably elastic"
/// verdict.
pub const ELASTICITY_MARGIN: f64 = 0.01;

/// Empirical thresholds for the four equivalent characterizations of
/// `γ > AE[U]`. `None` means the inequality failed on the tail of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub gamma: f64,
    /// x₀ with `U(λx) < λ^γ U(x)` for all tested λ > 1 and grid x ≥ x₀
    pub gamma1_x0: Option<f64>,
    /// x₀ with `U'(x) < γ U(x)/x` for grid x ≥ x₀
    pub gamma2_x0: Option<f64>,
    /// y₀ with `V(ρy) < ρ^{-γ/(1-γ)} V(y)` for tested ρ < 1 and grid y ≤ y₀
    pub gamma3_y0: Option<f64>,
    /// y₀ with `-V'(y) < γ/(1-γ) V(y)/y` for grid y ≤ y₀
    pub gamma4_y0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityReport {
    pub x_max: f64,
    /// `(x, sup over nodes of x U'(x)/U(x))` where U > 0 at every node
    pub profile: Vec<(f64, f64)>,
    /// the profile value at `x_max`
    pub estimate: f64,
    /// Richardson extrapolation of the last two profile points in 1/ln x
    pub tail_estimate: f64,
    pub reasonably_elastic: bool,
    /// `K₂/K₁` at `x_max`
    pub envelope_ratio: f64,
    pub gamma: Option<GammaReport>,
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    // exact endpoints; exp(ln hi) need not round back to hi
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// Last index `i` such that `ok` holds on `i..` (scanning from the top);
/// accepted when the passing tail covers at least a quarter of the grid.
fn tail_threshold(grid: &[f64], ok: impl Fn(f64) -> bool) -> Option<f64> {
    let mut first = grid.len();
    while first > 0 && ok(grid[first - 1]) {
        first -= 1;
    }
    (grid.len() - first >= grid.len().div_ceil(4)).then(|| grid[first])
}

/// Asymptotic elasticity diagnostics on a geometric grid of `points`
/// values in `[1e-3, x_max]`, optionally with Γ checks for `gamma`.
pub fn asymptotic_elasticity(
    field: &UtilityField,
    x_max: f64,
    points: usize,
    gamma: Option<f64>,
) -> Result<ElasticityReport> {
    if !(x_max > 1.0 && points >= 8) {
        return Err(Error::invalid(
            "elasticity grid needs x_max > 1 and at least 8 points",
        ));
    }
    let grid = geometric(1e-3, x_max, points);
    let profile: Vec<(f64, f64)> = grid
        .iter()
        .filter_map(|&x| {
            let mut sup = f64::NEG_INFINITY;
            for p in field.points() {
                let u = p.u(x);
                if !(u > 0.0) {
                    return None;
                }
                sup = sup.max(x * p.du(x) / u);
            }
            Some((x, sup))
        })
        .collect();
    let tail: Vec<&(f64, f64)> = profile.iter().rev().take(2).collect();
    if tail.len() < 2 || tail[0].0 != x_max {
        return Err(Error::invalid(
            "utility is not positive on the tail of the grid; elasticity ratio undefined",
        ));
    }
    let ((xb, eb), (xa, ea)) = (*tail[0], *tail[1]);
    let tail_estimate = (eb * xb.ln() - ea * xa.ln()) / (xb.ln() - xa.ln());
    let (k1, k2) = field.envelopes();
    let gamma = gamma.map(|g| gamma_report(field, g, &grid));
    Ok(ElasticityReport {
        x_max,
        estimate: eb,
        tail_estimate,
        reasonably_elastic: tail_estimate <= 1.0 - ELASTICITY_MARGIN && eb < 1.0,
        envelope_ratio: k2.eval(x_max) / k1.eval(x_max),
        profile,
        gamma,
    })
}

fn gamma_report(field: &UtilityField, gamma: f64, xgrid: &[f64]) -> GammaReport {
    let pts = field.points();
    let lambdas = [1.5, 2.0, 10.0, 100.0];
    let rhos = [0.1, 0.5, 0.9];
    let gamma1_x0 = tail_threshold(xgrid, |x| {
        pts.iter()
            .all(|p| lambdas.iter().all(|&l| p.u(l * x) < l.powf(gamma) * p.u(x)))
    });
    let gamma2_x0 = tail_threshold(xgrid, |x| pts.iter().all(|p| p.du(x) < gamma * p.u(x) / x));
    // y grid spans the marginal range of the x grid, scanned from below
    let y_lo = pts
        .iter()
        .map(|p| p.du(xgrid[xgrid.len() - 1]))
        .fold(f64::INFINITY, f64::min);
    let y_hi = pts.iter().map(|p| p.du(xgrid[0])).fold(0.0, f64::max);
    let mut ygrid = geometric(y_lo, y_hi, xgrid.len());
    ygrid.reverse();
    let e = gamma / (1.0 - gamma);
    let gamma3_y0 = tail_threshold(&ygrid, |y| {
        pts.iter()
            .all(|p| rhos.iter().all(|&r| p.v(r * y) < r.powf(-e) * p.v(y)))
    });
    let gamma4_y0 = tail_threshold(&ygrid, |y| pts.iter().all(|p| -p.dv(y) < e * p.v(y) / y));
    GammaReport {
        gamma,
        gamma1_x0,
        gamma2_x0,
        gamma3_y0,
        gamma4_y0,
    }
}

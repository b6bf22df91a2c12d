use crate::error::{Error, Result};
use crate::numeric::roots::brent;

/// Solves `du(x) = y` for a strictly decreasing marginal by Brent's method
/// in log x. `bracket` is an optional `[lo, hi]` known to contain the root
/// (for instance from envelope inverses); otherwise it is grown
/// geometrically from 1.
pub fn invert_marginal<D>(du: D, y: f64, bracket: Option<(f64, f64)>) -> Result<f64>
where
    D: Fn(f64) -> f64,
{
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::invalid(format!(
            "marginal level must be positive, got {y}"
        )));
    }
    let f = |t: f64| du(t.exp()) / y - 1.0;
    let (mut lo, mut hi) = match bracket {
        Some((a, b)) if a > 0.0 && b >= a => ((a * (1.0 - 1e-9)).ln(), (b * (1.0 + 1e-9)).ln()),
        _ => (-1.0, 1.0),
    };
    let mut grow = 0;
    while f(lo) < 0.0 {
        lo -= 2.0f64.max(lo.abs());
        grow += 1;
        if grow > 60 || lo < -700.0 {
            return Err(Error::invalid(format!(
                "cannot bracket inverse marginal at y = {y:e}"
            )));
        }
    }
    while f(hi) > 0.0 {
        hi += 2.0f64.max(hi.abs());
        grow += 1;
        if grow > 60 || hi > 700.0 {
            return Err(Error::invalid(format!(
                "cannot bracket inverse marginal at y = {y:e}"
            )));
        }
    }
    let root = brent(f, lo, hi, 1e-15, 0.0, 300)
        .map_err(|e| Error::Internal(format!("inverse marginal root search failed: {e:?}")))?;
    Ok(root.x.exp())
}

/// `V(y) = sup_x [U(x) − xy]` evaluated at the stationary point, together
/// with the maximizer.
pub fn numeric_conjugate<U, D>(
    u: U,
    du: D,
    y: f64,
    bracket: Option<(f64, f64)>,
) -> Result<(f64, f64)>
where
    U: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let x = invert_marginal(&du, y, bracket)?;
    Ok((u(x) - x * y, x))
}

//! Double-description enumeration of the extreme rays of
//! `{x ∈ ℝⁿ : x ≥ 0, aₖ·x ≥ 0 for all k}`.
//!
//! The nonnegative orthant is the initial cone (rays e₁…eₙ); each extra
//! halfspace is intersected in turn, keeping rays on its nonnegative side
//! and combining adjacent pairs that straddle it. Adjacency uses the
//! combinatorial test on zero sets.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RayLimit {
    pub rays: usize,
    pub limit: usize,
}

#[derive(Clone)]
struct Ray {
    v: Vec<f64>,
    zeros: Vec<u64>,
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn intersect(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn popcount(a: &[u64]) -> usize {
    a.iter().map(|w| w.count_ones() as usize).sum()
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Extreme rays normalized to unit coordinate sum. Fails if the working
/// ray list grows beyond `limit`.
pub fn extreme_rays(
    dim: usize,
    halfspaces: &[Vec<f64>],
    limit: usize,
) -> Result<Vec<Vec<f64>>, RayLimit> {
    let total = dim + halfspaces.len();
    let words = total.div_ceil(64).max(1);
    let mut rays: Vec<Ray> = (0..dim)
        .map(|i| {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            let mut zeros = vec![0u64; words];
            for j in 0..dim {
                if j != i {
                    set_bit(&mut zeros, j);
                }
            }
            Ray { v, zeros }
        })
        .collect();

    for (k, a) in halfspaces.iter().enumerate() {
        let idx = dim + k;
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            for r in &mut rays {
                set_bit(&mut r.zeros, idx);
            }
            continue;
        }
        let tol = 1e-12 * scale;
        let vals: Vec<f64> = rays
            .iter()
            .map(|r| a.iter().zip(&r.v).map(|(x, y)| x * y).sum())
            .collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > tol).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < -tol).collect();
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len());
        for (i, r) in rays.iter().enumerate() {
            if vals[i] >= -tol {
                let mut r = r.clone();
                if vals[i] <= tol {
                    set_bit(&mut r.zeros, idx);
                }
                next.push(r);
            }
        }
        for &p in &pos {
            for &n in &neg {
                let common = intersect(&rays[p].zeros, &rays[n].zeros);
                if popcount(&common) + 2 < dim {
                    continue;
                }
                let adjacent = (0..rays.len())
                    .all(|o| o == p || o == n || !is_subset(&common, &rays[o].zeros));
                if !adjacent {
                    continue;
                }
                let (vp, vn) = (vals[p], -vals[n]);
                let mut v: Vec<f64> = rays[p]
                    .v
                    .iter()
                    .zip(&rays[n].v)
                    .map(|(x, y)| vn * x + vp * y)
                    .collect();
                for x in v.iter_mut() {
                    if x.abs() < 1e-15 {
                        *x = 0.0;
                    }
                }
                normalize(&mut v);
                let mut zeros = common;
                set_bit(&mut zeros, idx);
                next.push(Ray { v, zeros });
                if next.len() > limit {
                    return Err(RayLimit {
                        rays: next.len(),
                        limit,
                    });
                }
            }
        }
        rays = next;
    }
    Ok(rays
        .into_iter()
        .map(|mut r| {
            normalize(&mut r.v);
            r.v
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn orthant_only() {
        let r = extreme_rays(3, &[], 100).unwrap();
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn one_cut_of_a_triangle() {
        // x ≥ 0 in ℝ³ sliced by x1 - x2 ≥ 0: rays e1, e3, (e1+e2)/2
        let r = sorted(extreme_rays(3, &[vec![1.0, -1.0, 0.0]], 100).unwrap());
        assert_eq!(
            r,
            sorted(vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.5, 0.5, 0.0]
            ])
        );
    }

    #[test]
    fn opposite_pair_gives_hyperplane() {
        let a = vec![1.5, -0.5];
        let b = vec![-1.5, 0.5];
        let r = extreme_rays(2, &[a, b], 100).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn limit_is_enforced() {
        let cuts: Vec<Vec<f64>> = (0..6)
            .map(|k| {
                (0..8)
                    .map(|i| if (i + k) % 3 == 0 { 1.0 } else { -0.4 })
                    .collect()
            })
            .collect();
        assert!(extreme_rays(8, &cuts, 3).is_err());
    }
}

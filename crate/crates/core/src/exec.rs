//! Data-parallel helpers. With the `parallel` feature the `Parallel` policy
//! runs on the rayon pool; without it every policy runs sequentially.
//! Results always come back in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Index and value of the maximum of `f` over `0..n`; ties go to the
    /// lowest index so the answer does not depend on scheduling.
    pub fn argmax<F>(self, n: usize, f: F) -> Option<(usize, f64)>
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let pick = |a: (usize, f64), b: (usize, f64)| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) || a.1.is_nan() {
                b
            } else {
                a
            }
        };
        if n == 0 {
            return None;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(|i| (i, f(i))).reduce_with(pick);
        }
        (0..n).map(|i| (i, f(i))).reduce(pick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_and_keep_order() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        let a = Exec::Sequential.map(&xs, |x| x * x);
        let b = Exec::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        let f = |i: usize| -((i as f64) - 321.0).abs();
        assert_eq!(Exec::Sequential.argmax(1000, f), Some((321, 0.0)));
        assert_eq!(Exec::Parallel.argmax(1000, f), Some((321, 0.0)));
    }

    #[test]
    fn argmax_ties_pick_lowest_index() {
        let f = |i: usize| if i % 7 == 3 { 1.0 } else { 0.0 };
        assert_eq!(Exec::Parallel.argmax(100, f), Some((3, 1.0)));
    }
}

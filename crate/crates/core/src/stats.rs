//! Descriptive statistics on data series.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn mean<T: Real>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::lit(x.len() as f64)
}

/// Population standard deviation (divisor `n`).
pub fn population_sd<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    (x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::lit(x.len() as f64)).sqrt()
}

pub fn sorted<T: Real>(x: &[T]) -> Vec<T> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
    v
}

/// Linear-interpolation quantile of sorted data (the usual "type 7" rule).
/// Affine equivariant: `q(a x + b) = a q(x) + b` for `a > 0`.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn check_series<T: Real>(x: &[T], min_len: usize) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptySeries("data series is empty".into()));
    }
    if x.len() < min_len {
        return Err(Error::Domain(format!("need at least {min_len} observations, got {}", x.len())));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite observation at index {i}")));
    }
    Ok(())
}

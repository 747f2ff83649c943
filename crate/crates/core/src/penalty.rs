//! Penalties on the mixing proportion and on the component scales.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Family, Kernel};
use crate::scalar::Real;

/// `p(alpha) = log(1 - |1 - 2 alpha|)`, maximal (zero) at one half.
pub fn p_alpha<T: Real>(alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Domain(format!("mixing proportion must lie in (0, 1), got {alpha}")));
    }
    Ok(p_alpha_unchecked(alpha))
}

#[inline]
pub(crate) fn p_alpha_unchecked<T: Real>(alpha: T) -> T {
    let two = T::lit(2.0);
    if alpha <= T::lit(0.5) {
        (two * alpha).ln()
    } else {
        (two * (T::one() - alpha)).ln()
    }
}

/// Strength `a_n` of the scale penalty and the null scale estimate it is
/// centred on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig<T> {
    pub a_n: T,
    pub sigma_hat: T,
}

impl<T: Real> PenaltyConfig<T> {
    pub fn new(a_n: T, sigma_hat: T) -> Result<Self> {
        if !(a_n.is_finite() && a_n >= T::zero()) {
            return Err(Error::Config(format!("a_n must be non-negative, got {a_n}")));
        }
        if !(sigma_hat.is_finite() && sigma_hat > T::zero()) {
            return Err(Error::Domain(format!("sigma_hat must be positive, got {sigma_hat}")));
        }
        Ok(PenaltyConfig { a_n, sigma_hat })
    }

    /// Penalty value with its first and second derivative in `s = log sigma`.
    #[inline]
    pub(crate) fn log_scale_derivs(&self, sigma: T) -> (T, T, T) {
        let two = T::lit(2.0);
        let r = (self.sigma_hat / sigma).powi(2);
        let value = -self.a_n * (r - r.ln());
        (value, two * self.a_n * (r - T::one()), -T::lit(4.0) * self.a_n * r)
    }
}

/// `p_n(sigma) = -a_n (sigma_hat^2 / sigma^2 + log(sigma^2 / sigma_hat^2))`.
pub fn p_sigma<T: Real>(sigma: T, cfg: &PenaltyConfig<T>) -> Result<T> {
    if !(sigma.is_finite() && sigma > T::zero()) {
        return Err(Error::Domain(format!("scale must be positive, got {sigma}")));
    }
    Ok(p_sigma_unchecked(sigma, cfg))
}

#[inline]
pub(crate) fn p_sigma_unchecked<T: Real>(sigma: T, cfg: &PenaltyConfig<T>) -> T {
    let r = (cfg.sigma_hat / sigma).powi(2);
    -cfg.a_n * (r - r.ln())
}

/// Coefficients `(c0, c1)` of `a_n = 0.2 + exp(c0 + c1 / n)` per family.
pub fn a_n_coefficients(kernel: &Kernel) -> (f64, f64) {
    match kernel.family() {
        Family::Logistic => (-0.959, -119.899),
        Family::ExtremeValue => (-0.986, -77.677),
        Family::StudentT => (-1.032, -103.737),
        Family::Normal => (-1.410, -114.433),
    }
}

/// Recommended penalty strength for sample size `n`.
pub fn a_n_formula(kernel: &Kernel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("a_n requires n >= 1".into()));
    }
    let (c0, c1) = a_n_coefficients(kernel);
    Ok(0.2 + (c0 + c1 / n as f64).exp())
}

/// How `a_n` is chosen: the empirical formula or a fixed override.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningConstant {
    #[default]
    Auto,
    Fixed(f64),
}

impl TuningConstant {
    pub fn resolve(&self, kernel: &Kernel, n: usize) -> Result<f64> {
        match *self {
            TuningConstant::Auto => a_n_formula(kernel, n),
            TuningConstant::Fixed(v) if v.is_finite() && v > 0.0 => Ok(v),
            TuningConstant::Fixed(v) => Err(Error::Config(format!("a_n must be positive, got {v}"))),
        }
    }
}

impl fmt::Display for TuningConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TuningConstant::Auto => write!(f, "auto"),
            TuningConstant::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for TuningConstant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(TuningConstant::Auto);
        }
        let v: f64 = s.parse().map_err(|_| Error::Config(format!("bad a_n value {s:?}")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("a_n must be positive, got {v}")));
        }
        Ok(TuningConstant::Fixed(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_alpha_examples() {
        assert_eq!(p_alpha(0.5).unwrap(), 0.0);
        assert!((p_alpha(0.25).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!((p_alpha(0.75).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!(p_alpha(0.0).is_err());
        assert!(p_alpha(1.0).is_err());
        assert!(p_alpha(f64::NAN).is_err());
    }

    #[test]
    fn p_alpha_is_maximal_at_half_and_diverges_at_zero() {
        let grid: Vec<f64> = (1..10_000).map(|i| i as f64 / 10_000.0).collect();
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| p_alpha(*a).unwrap().partial_cmp(&p_alpha(*b).unwrap()).unwrap())
            .unwrap();
        assert_eq!(best, 0.5);
        for w in grid.windows(2) {
            assert!((p_alpha(w[1]).unwrap() - p_alpha(w[0]).unwrap()).abs() < 0.1 || w[0] < 0.01 || w[0] > 0.99);
        }
        assert!(p_alpha(1e-300).unwrap() < -600.0);
    }

    #[test]
    fn p_sigma_examples() {
        let cfg = PenaltyConfig::new(0.5f64, 1.0).unwrap();
        assert!((p_sigma(1.0, &cfg).unwrap() + 0.5).abs() < 1e-15);
        let expect = -0.5 * (0.25 + 4f64.ln());
        assert!((p_sigma(2.0, &cfg).unwrap() - expect).abs() < 1e-14);
        assert!((expect + 0.818147).abs() < 1e-6);
        assert!(p_sigma(0.0, &cfg).is_err());
        assert!(p_sigma(1e-6, &cfg).unwrap() < -1e11);
        assert!(p_sigma(1e6, &cfg).unwrap() < -13.0);
    }

    #[test]
    fn p_sigma_argmax_is_sigma_hat_on_grid() {
        let cfg = PenaltyConfig::new(0.37, 2.3).unwrap();
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        for i in 1..=100_000 {
            let s = i as f64 * 1e-4;
            let v = p_sigma(s, &cfg).unwrap();
            if v > best {
                best = v;
                arg = s;
            }
        }
        assert!((arg - 2.3).abs() < 1e-4);
        let (_, d1, d2) = cfg.log_scale_derivs(2.3);
        assert!(d1.abs() < 1e-14 && d2 < 0.0);
    }

    #[test]
    fn log_scale_derivatives_match_finite_differences() {
        let cfg = PenaltyConfig::new(0.45, 1.7).unwrap();
        let s0 = 0.9f64.ln();
        let f = |s: f64| p_sigma(s.exp(), &cfg).unwrap();
        let (v, d1, d2) = cfg.log_scale_derivs(s0.exp());
        let h = 1e-5;
        assert!((v - f(s0)).abs() < 1e-15);
        assert!((d1 - (f(s0 + h) - f(s0 - h)) / (2.0 * h)).abs() < 1e-8);
        let h = 1e-4;
        assert!((d2 - (f(s0 + h) - 2.0 * f(s0) + f(s0 - h)) / (h * h)).abs() < 1e-5);
    }

    #[test]
    fn scale_penalty_is_invariant_under_rescaling() {
        let a: f64 = 3.7;
        let base = PenaltyConfig::new(0.4, 1.3).unwrap();
        let scaled = PenaltyConfig::new(0.4, a * 1.3).unwrap();
        for &s in &[0.1, 0.9, 2.5] {
            assert!((p_sigma(a * s, &scaled).unwrap() - p_sigma(s, &base).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn a_n_formula_examples() {
        let v = a_n_formula(&Kernel::logistic(), 300).unwrap();
        assert!((v - (0.2 + (-0.959 - 119.899 / 300.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.4570).abs() < 1e-4);
        let v = a_n_formula(&Kernel::extreme_value(), 100).unwrap();
        assert!((v - 0.3716).abs() < 1e-4);
        let v = a_n_formula(&Kernel::normal(), 1000).unwrap();
        assert!((v - 0.4177).abs() < 1e-4);
        assert!(a_n_formula(&Kernel::logistic(), 0).is_err());
    }

    #[test]
    fn a_n_formula_is_increasing_and_bounded() {
        for k in [
            Kernel::logistic(),
            Kernel::extreme_value(),
            Kernel::normal(),
            Kernel::student_t(6.0).unwrap(),
        ] {
            let (c0, _) = a_n_coefficients(&k);
            let mut prev = 0.0;
            for n in 10..5000 {
                let v = a_n_formula(&k, n).unwrap();
                assert!(v > prev && v > 0.2 && v < 0.2 + c0.exp());
                prev = v;
            }
        }
    }

    #[test]
    fn tuning_constant_parsing() {
        assert_eq!("auto".parse::<TuningConstant>().unwrap(), TuningConstant::Auto);
        assert_eq!("0.4".parse::<TuningConstant>().unwrap(), TuningConstant::Fixed(0.4));
        assert!("-1".parse::<TuningConstant>().is_err());
        assert!("x".parse::<TuningConstant>().is_err());
        let k = Kernel::student_t(10.0).unwrap();
        let v = TuningConstant::Auto.resolve(&k, 200).unwrap();
        assert!((v - (0.2 + (-1.032 - 103.737 / 200.0f64).exp())).abs() < 1e-15);
    }
}

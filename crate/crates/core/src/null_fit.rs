//! Maximum likelihood fit of the single-component (null) model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Family, Kernel, Theta};
use crate::linalg::Mat;
use crate::optim::{maximize, NewtonOptions, Objective};
use crate::penalty::{p_alpha_unchecked, TuningConstant};
use crate::scalar::Real;
use crate::stats::{check_series, mean, population_sd};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullFit<T> {
    pub mu_hat: T,
    pub sigma_hat: T,
    pub loglik: T,
    /// Penalized log-likelihood of the homogeneous mixture
    /// `(0.5, 0.5, theta_hat, theta_hat)`: `loglik + 2 p_n(sigma_hat) + 2 p(0.5)`.
    pub penalized_loglik: T,
    /// Scale-penalty strength used for `penalized_loglik`.
    pub a_n: T,
}

impl<T: Real> NullFit<T> {
    pub fn theta(&self) -> Theta<T> {
        Theta { mu: self.mu_hat, sigma: self.sigma_hat }
    }
}

/// Log-likelihood of one component in `(mu, log sigma)` coordinates,
/// optionally weighted and with an additive scale penalty.
pub(crate) struct ComponentLik<'a, T> {
    pub kernel: Kernel,
    pub data: &'a [T],
    pub weights: Option<&'a [T]>,
    pub penalty: Option<crate::penalty::PenaltyConfig<T>>,
}

impl<T: Real> Objective<T, 2> for ComponentLik<'_, T> {
    fn value(&self, x: &[T; 2]) -> T {
        let sigma = x[1].exp();
        if !(sigma > T::zero() && sigma.is_finite() && x[0].is_finite()) {
            return T::neg_infinity();
        }
        let inv = sigma.recip();
        let log_sigma = x[1];
        let mut total = T::zero();
        match self.weights {
            Some(w) => {
                for (&xi, &wi) in self.data.iter().zip(w) {
                    if wi != T::zero() {
                        total = total + wi * (self.kernel.log_f0((xi - x[0]) * inv) - log_sigma);
                    }
                }
            }
            None => {
                for &xi in self.data {
                    total = total + self.kernel.log_f0((xi - x[0]) * inv);
                }
                total = total - T::lit(self.data.len() as f64) * log_sigma;
            }
        }
        if let Some(cfg) = &self.penalty {
            total = total + crate::penalty::p_sigma_unchecked(sigma, cfg);
        }
        total
    }

    fn derivs(&self, x: &[T; 2]) -> (T, [T; 2], Mat<T, 2>) {
        let sigma = x[1].exp();
        let mut v = T::zero();
        let mut g = [T::zero(); 2];
        let mut h = [T::zero(); 3];
        for (i, &xi) in self.data.iter().enumerate() {
            let wi = self.weights.map_or(T::one(), |w| w[i]);
            if wi == T::zero() {
                continue;
            }
            let d = self.kernel.log_density_derivs(xi, x[0], sigma);
            v = v + wi * d.value;
            g[0] = g[0] + wi * d.grad[0];
            g[1] = g[1] + wi * d.grad[1];
            h[0] = h[0] + wi * d.hess[0];
            h[1] = h[1] + wi * d.hess[1];
            h[2] = h[2] + wi * d.hess[2];
        }
        if let Some(cfg) = &self.penalty {
            let (pv, p1, p2) = cfg.log_scale_derivs(sigma);
            v = v + pv;
            g[1] = g[1] + p1;
            h[2] = h[2] + p2;
        }
        (v, g, [[h[0], h[1]], [h[1], h[2]]])
    }
}

/// Maximum likelihood estimate of `(mu, sigma)` under homogeneity, with the
/// penalized log-likelihood reported at the formula value of `a_n`.
pub fn fit_null<T: Real>(kernel: &Kernel, data: &[T]) -> Result<NullFit<T>> {
    fit_null_with(kernel, data, TuningConstant::Auto)
}

pub fn fit_null_with<T: Real>(kernel: &Kernel, data: &[T], tuning: TuningConstant) -> Result<NullFit<T>> {
    check_series(data, 3)?;
    let a_n = T::lit(tuning.resolve(kernel, data.len())?);
    let m = mean(data);
    let sd = population_sd(data);
    if !(sd > T::zero()) || sd <= T::epsilon() * T::lit(16.0) * m.abs() {
        return Err(Error::DegenerateData("data have no spread".into()));
    }
    let (mu_hat, sigma_hat) = if kernel.family() == Family::Normal {
        (m, sd)
    } else {
        let obj = ComponentLik { kernel: *kernel, data, weights: None, penalty: None };
        let opt = maximize(&obj, [m, sd.ln()], NewtonOptions::default())?;
        if !opt.converged {
            return Err(Error::Numerical(format!(
                "null fit did not converge after {} iterations",
                opt.iterations
            )));
        }
        (opt.x[0], opt.x[1].exp())
    };
    let loglik = data.iter().map(|&x| kernel.log_density_unchecked(x, mu_hat, sigma_hat)).sum::<T>();
    let two = T::lit(2.0);
    // p_n(sigma_hat) = -a_n
    let penalized_loglik = loglik - two * a_n + two * p_alpha_unchecked(T::lit(0.5));
    Ok(NullFit { mu_hat, sigma_hat, loglik, penalized_loglik, a_n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_closed_form() {
        let f = fit_null(&Kernel::normal(), &[1.0f64, 2.0, 3.0]).unwrap();
        assert!((f.mu_hat - 2.0).abs() < 1e-15);
        assert!((f.sigma_hat - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn logistic_first_order_condition() {
        let data: Vec<f64> = Kernel::logistic().sample(150, 3).unwrap();
        let data: Vec<f64> = data.iter().map(|x| 2.0 * x + 5.0).collect();
        let f = fit_null(&Kernel::logistic(), &data).unwrap();
        let obj = ComponentLik { kernel: Kernel::logistic(), data: &data, weights: None, penalty: None };
        let (_, g, _) = obj.derivs(&[f.mu_hat, f.sigma_hat.ln()]);
        // gradient in sigma = gradient in log sigma / sigma
        let norm = (g[0] * g[0] + (g[1] / f.sigma_hat).powi(2)).sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn extreme_value_fit_agrees_with_grid_search() {
        let k = Kernel::extreme_value();
        let data: Vec<f64> = k.sample(500, 21).unwrap();
        let f = fit_null(&k, &data).unwrap();
        let ll = |mu: f64, s: f64| data.iter().map(|&x| k.log_density_unchecked(x, mu, s)).sum::<f64>();
        let (mut best, mut arg) = (f64::NEG_INFINITY, (0.0, 0.0));
        for i in 0..=100 {
            for j in 0..=100 {
                let mu = -0.5 + i as f64 * 0.01;
                let s = 0.5 + j as f64 * 0.01;
                let v = ll(mu, s);
                if v > best {
                    best = v;
                    arg = (mu, s);
                }
            }
        }
        assert!((f.mu_hat - arg.0).abs() < 0.011 && (f.sigma_hat - arg.1).abs() < 0.011);
        assert!(f.mu_hat.abs() < 0.15 && (f.sigma_hat - 1.0).abs() < 0.15);
        assert!(f.loglik >= best);
    }

    #[test]
    fn fit_is_affine_equivariant() {
        for k in [Kernel::logistic(), Kernel::extreme_value(), Kernel::student_t(6.0).unwrap()] {
            let x: Vec<f64> = k.sample(120, 5).unwrap();
            let (a, b) = (3.0, 7.0);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let fx = fit_null(&k, &x).unwrap();
            let fy = fit_null(&k, &y).unwrap();
            assert!((fy.mu_hat - (a * fx.mu_hat + b)).abs() < 1e-8, "{k}");
            assert!((fy.sigma_hat - a * fx.sigma_hat).abs() < 1e-8, "{k}");
            assert!((fy.loglik - (fx.loglik - x.len() as f64 * a.ln())).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_beats_moment_start_and_penalized_value_is_consistent() {
        let k = Kernel::student_t(10.0).unwrap();
        let x: Vec<f64> = k.sample(80, 9).unwrap();
        let f = fit_null(&k, &x).unwrap();
        let m = mean(&x);
        let s = population_sd(&x);
        let at_moments = x.iter().map(|&v| k.log_density_unchecked(v, m, s)).sum::<f64>();
        assert!(f.loglik >= at_moments);
        let cfg = crate::penalty::PenaltyConfig::new(f.a_n, f.sigma_hat).unwrap();
        let expect = f.loglik
            + 2.0 * crate::penalty::p_sigma(f.sigma_hat, &cfg).unwrap()
            + 2.0 * crate::penalty::p_alpha(0.5).unwrap();
        assert!((f.penalized_loglik - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(fit_null(&Kernel::logistic(), &[2.0; 10]), Err(Error::DegenerateData(_))));
        assert!(fit_null(&Kernel::logistic(), &[1.0, 2.0]).is_err());
    }
}

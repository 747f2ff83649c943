//! Two-component mixing distributions, their (penalized) likelihoods and the
//! E-step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Theta};
use crate::linalg::Mat;
use crate::optim::Objective;
use crate::penalty::{p_alpha_unchecked, p_sigma_unchecked, PenaltyConfig};
use crate::scalar::Real;

/// `alpha1 {theta1} + alpha2 {theta2}` with `alpha2 = 1 - alpha1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixingRepr<T>", bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct MixingDistribution<T> {
    alpha1: T,
    alpha2: T,
    pub theta1: Theta<T>,
    pub theta2: Theta<T>,
}

#[derive(Deserialize)]
struct MixingRepr<T> {
    alpha1: T,
    #[allow(dead_code)]
    alpha2: Option<T>,
    theta1: Theta<T>,
    theta2: Theta<T>,
}

impl<T: Real> TryFrom<MixingRepr<T>> for MixingDistribution<T> {
    type Error = Error;
    fn try_from(r: MixingRepr<T>) -> Result<Self> {
        MixingDistribution::new(r.alpha1, r.theta1, r.theta2)
    }
}

impl<T: Real> MixingDistribution<T> {
    /// `alpha1` may be 0 or 1 (a degenerate but valid distribution); the
    /// penalized likelihood then evaluates to `-inf`.
    pub fn new(alpha1: T, theta1: Theta<T>, theta2: Theta<T>) -> Result<Self> {
        if !(alpha1 >= T::zero() && alpha1 <= T::one()) {
            return Err(Error::Domain(format!("alpha1 must lie in [0, 1], got {alpha1}")));
        }
        theta1.validate()?;
        theta2.validate()?;
        Ok(MixingDistribution { alpha1, alpha2: T::one() - alpha1, theta1, theta2 })
    }

    pub fn homogeneous(theta: Theta<T>) -> Self {
        MixingDistribution { alpha1: T::lit(0.5), alpha2: T::lit(0.5), theta1: theta, theta2: theta }
    }

    pub fn alpha1(&self) -> T {
        self.alpha1
    }

    pub fn alpha2(&self) -> T {
        self.alpha2
    }

    /// Log of the mixture density at `x`.
    pub fn log_density(&self, kernel: &Kernel, x: T) -> T {
        let a = component_term(self.alpha1, kernel, x, &self.theta1);
        let b = component_term(self.alpha2, kernel, x, &self.theta2);
        T::log_add_exp(a, b)
    }

    pub fn density(&self, kernel: &Kernel, x: T) -> T {
        self.log_density(kernel, x).exp()
    }

    pub fn log_likelihood(&self, kernel: &Kernel, data: &[T]) -> T {
        data.iter().map(|&x| self.log_density(kernel, x)).sum()
    }

    /// Log-likelihood plus `p(alpha1) + p(alpha2) + p_n(sigma1) + p_n(sigma2)`.
    pub fn penalized_log_likelihood(&self, kernel: &Kernel, data: &[T], cfg: &PenaltyConfig<T>) -> T {
        if !(self.alpha1 > T::zero() && self.alpha1 < T::one()) {
            return T::neg_infinity();
        }
        self.log_likelihood(kernel, data)
            + p_alpha_unchecked(self.alpha1)
            + p_alpha_unchecked(self.alpha2)
            + p_sigma_unchecked(self.theta1.sigma, cfg)
            + p_sigma_unchecked(self.theta2.sigma, cfg)
    }

    /// Log-likelihood plus the two scale penalties only (no proportion penalty).
    pub fn scale_penalized_log_likelihood(&self, kernel: &Kernel, data: &[T], cfg: &PenaltyConfig<T>) -> T {
        self.log_likelihood(kernel, data)
            + p_sigma_unchecked(self.theta1.sigma, cfg)
            + p_sigma_unchecked(self.theta2.sigma, cfg)
    }

    /// Draws `n` observations.
    pub fn sample<R: rand::Rng + ?Sized>(&self, kernel: &Kernel, n: usize, rng: &mut R) -> Vec<T> {
        use rand_distr::Distribution;
        let sampler = kernel.sampler();
        let a1 = self.alpha1.to_f64_lossy();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let th = if u < a1 { &self.theta1 } else { &self.theta2 };
                th.mu + th.sigma * T::lit(sampler.sample(rng))
            })
            .collect()
    }
}

#[inline]
fn component_term<T: Real>(alpha: T, kernel: &Kernel, x: T, th: &Theta<T>) -> T {
    if alpha <= T::zero() {
        return T::neg_infinity();
    }
    alpha.ln() + kernel.log_density_unchecked(x, th.mu, th.sigma)
}

/// Posterior probabilities of the first component,
/// `w_i = alpha1 f(x_i; theta1) / (alpha1 f(x_i; theta1) + alpha2 f(x_i; theta2))`.
///
/// Computed from log-densities so that underflow of both component densities
/// never produces NaN.
pub fn e_step<T: Real>(kernel: &Kernel, g: &MixingDistribution<T>, data: &[T]) -> Vec<T> {
    data.iter()
        .map(|&x| {
            let a = component_term(g.alpha1, kernel, x, &g.theta1);
            let b = component_term(g.alpha2, kernel, x, &g.theta2);
            posterior(a, b)
        })
        .collect()
}

/// `exp(a) / (exp(a) + exp(b))`
#[inline]
pub(crate) fn posterior<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() && b == T::neg_infinity() {
        return T::lit(0.5);
    }
    let d = b - a;
    if d > T::zero() {
        let e = (-d).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + d.exp())
    }
}

/// Penalized two-component log-likelihood in
/// `[eta, mu1, log sigma1, mu2, log sigma2]` (free proportion, `eta = logit alpha1`)
/// or `[mu1, log sigma1, mu2, log sigma2]` (proportion held fixed).
pub(crate) struct MixtureLik<'a, T> {
    pub kernel: Kernel,
    pub data: &'a [T],
    pub penalty: PenaltyConfig<T>,
    /// Fixed proportion; `None` means the proportion is a free parameter.
    pub alpha: Option<T>,
    /// Include `p(alpha1) + p(alpha2)` (constant when the proportion is fixed).
    pub alpha_penalty: bool,
}

impl<'a, T: Real> MixtureLik<'a, T> {
    fn unpack(&self, x: &[T]) -> (T, T, T, T, T) {
        match self.alpha {
            Some(a) => (a, x[0], x[1], x[2], x[3]),
            None => {
                let eta = x[0];
                (logistic(eta), x[1], x[2], x[3], x[4])
            }
        }
    }

    fn value_impl(&self, x: &[T]) -> T {
        let (alpha, mu1, s1, mu2, s2) = self.unpack(x);
        if !(alpha > T::zero() && alpha < T::one()) || [mu1, s1, mu2, s2].iter().any(|v| !v.is_finite()) {
            return T::neg_infinity();
        }
        let (sig1, sig2) = (s1.exp(), s2.exp());
        if !(sig1 > T::zero() && sig2 > T::zero() && sig1.is_finite() && sig2.is_finite()) {
            return T::neg_infinity();
        }
        let (la, lb) = (alpha.ln(), (T::one() - alpha).ln());
        let (i1, i2) = (sig1.recip(), sig2.recip());
        let mut total = T::zero();
        for &xi in self.data {
            let a = la + self.kernel.log_f0((xi - mu1) * i1) - s1;
            let b = lb + self.kernel.log_f0((xi - mu2) * i2) - s2;
            total = total + T::log_add_exp(a, b);
        }
        total = total + p_sigma_unchecked(sig1, &self.penalty) + p_sigma_unchecked(sig2, &self.penalty);
        if self.alpha_penalty {
            total = total + p_alpha_unchecked(alpha) + p_alpha_unchecked(T::one() - alpha);
        }
        total
    }

    /// Value, gradient and Hessian. Layout: optional `eta` first, then
    /// `(mu1, s1, mu2, s2)`.
    fn derivs_impl<const N: usize>(&self, x: &[T; N]) -> (T, [T; N], Mat<T, N>) {
        let off = N - 4;
        let (alpha, mu1, s1, mu2, s2) = self.unpack(x);
        let (sig1, sig2) = (s1.exp(), s2.exp());
        let (la, lb) = (alpha.ln(), (T::one() - alpha).ln());
        let mut v = T::zero();
        let mut g = [T::zero(); N];
        let mut h = [[T::zero(); N]; N];
        for &xi in self.data {
            let d1 = self.kernel.log_density_derivs(xi, mu1, sig1);
            let d2 = self.kernel.log_density_derivs(xi, mu2, sig2);
            let a = la + d1.value;
            let b = lb + d2.value;
            v = v + T::log_add_exp(a, b);
            let w = posterior(a, b);
            let w1 = T::one() - w;
            let ww = w * w1;
            let gi = [d1.grad[0], d1.grad[1], d2.grad[0], d2.grad[1]];
            // component-wise weighted Hessians
            let hd1 = [[d1.hess[0], d1.hess[1]], [d1.hess[1], d1.hess[2]]];
            let hd2 = [[d2.hess[0], d2.hess[1]], [d2.hess[1], d2.hess[2]]];
            for p in 0..2 {
                g[off + p] = g[off + p] + w * gi[p];
                g[off + 2 + p] = g[off + 2 + p] + w1 * gi[2 + p];
                for q in 0..2 {
                    h[off + p][off + q] = h[off + p][off + q] + w * hd1[p][q] + ww * gi[p] * gi[q];
                    h[off + 2 + p][off + 2 + q] =
                        h[off + 2 + p][off + 2 + q] + w1 * hd2[p][q] + ww * gi[2 + p] * gi[2 + q];
                    h[off + p][off + 2 + q] = h[off + p][off + 2 + q] - ww * gi[p] * gi[2 + q];
                }
            }
            if off == 1 {
                g[0] = g[0] + (w - alpha);
                h[0][0] = h[0][0] + ww;
                for p in 0..2 {
                    h[0][1 + p] = h[0][1 + p] + ww * gi[p];
                    h[0][3 + p] = h[0][3 + p] - ww * gi[2 + p];
                }
            }
        }
        if off == 1 {
            h[0][0] = h[0][0] - T::lit(self.data.len() as f64) * alpha * (T::one() - alpha);
        }
        for (k, sig) in [(off + 1, sig1), (off + 3, sig2)] {
            let (pv, p1, p2) = self.penalty.log_scale_derivs(sig);
            v = v + pv;
            g[k] = g[k] + p1;
            h[k][k] = h[k][k] + p2;
        }
        if self.alpha_penalty {
            v = v + p_alpha_unchecked(alpha) + p_alpha_unchecked(T::one() - alpha);
            if off == 1 {
                // 2 p(alpha) is log(2 alpha) + log(2 alpha) below one half and the
                // mirror image above; in eta: d/deta 2 log(alpha) = 2 (1 - alpha)
                let two = T::lit(2.0);
                let aa = alpha * (T::one() - alpha);
                if alpha < T::lit(0.5) {
                    g[0] = g[0] + two * (T::one() - alpha);
                } else {
                    g[0] = g[0] - two * alpha;
                }
                h[0][0] = h[0][0] - two * aa;
            }
        }
        // symmetrize
        for i in 0..N {
            for j in 0..i {
                h[i][j] = h[j][i];
            }
        }
        (v, g, h)
    }
}

#[inline]
pub(crate) fn logistic<T: Real>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Objective<T, 4> for MixtureLik<'_, T> {
    fn value(&self, x: &[T; 4]) -> T {
        self.value_impl(x)
    }
    fn derivs(&self, x: &[T; 4]) -> (T, [T; 4], Mat<T, 4>) {
        self.derivs_impl(x)
    }
}

impl<T: Real> Objective<T, 5> for MixtureLik<'_, T> {
    fn value(&self, x: &[T; 5]) -> T {
        self.value_impl(x)
    }
    fn derivs(&self, x: &[T; 5]) -> (T, [T; 5], Mat<T, 5>) {
        self.derivs_impl(x)
    }
}

//! Location-scale kernel families.
//!
//! A kernel is described by its standardized density `f0`; the component
//! density is `f(x; mu, sigma) = f0((x - mu) / sigma) / sigma`. Every family
//! here has its mode at zero and full support on the real line.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    ExtremeValue,
    StudentT,
    Normal,
}

/// A location-scale family descriptor.
///
/// Student-t degrees of freedom are a fixed configuration constant and are
/// never estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Kernel {
    family: Family,
    dof: f64,
    log_norm: f64,
}

impl Kernel {
    pub fn logistic() -> Self {
        Kernel { family: Family::Logistic, dof: f64::INFINITY, log_norm: 0.0 }
    }

    /// Type-I extreme-value kernel with density `exp(x - exp(x))`.
    pub fn extreme_value() -> Self {
        Kernel { family: Family::ExtremeValue, dof: f64::INFINITY, log_norm: 0.0 }
    }

    pub fn normal() -> Self {
        Kernel {
            family: Family::Normal,
            dof: f64::INFINITY,
            log_norm: -0.5 * (2.0 * std::f64::consts::PI).ln(),
        }
    }

    /// Student-t kernel with `dof > 2` degrees of freedom (finite variance is
    /// needed for the score covariance to exist).
    pub fn student_t(dof: f64) -> Result<Self> {
        if !(dof.is_finite() && dof > 2.0) {
            return Err(Error::Domain(format!("student-t dof must be finite and > 2, got {dof}")));
        }
        use statrs::function::gamma::ln_gamma;
        let log_norm = ln_gamma((dof + 1.0) / 2.0)
            - ln_gamma(dof / 2.0)
            - 0.5 * (std::f64::consts::PI * dof).ln();
        Ok(Kernel { family: Family::StudentT, dof, log_norm })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Degrees of freedom for the Student-t family, `None` otherwise.
    pub fn dof(&self) -> Option<f64> {
        (self.family == Family::StudentT).then_some(self.dof)
    }

    /// Log of the standardized density.
    #[inline]
    pub fn log_f0<T: Real>(&self, z: T) -> T {
        match self.family {
            Family::Logistic => {
                let a = z.abs();
                -a - T::lit(2.0) * (-a).exp().ln_1p()
            }
            Family::ExtremeValue => z - z.exp(),
            Family::StudentT => {
                let nu = T::lit(self.dof);
                T::lit(self.log_norm) - (nu + T::one()) / T::lit(2.0) * (z * z / nu).ln_1p()
            }
            Family::Normal => T::lit(self.log_norm) - z * z / T::lit(2.0),
        }
    }

    #[inline]
    pub fn f0<T: Real>(&self, z: T) -> T {
        self.log_f0(z).exp()
    }

    /// `(g, g', g'')` for `g = log f0`, evaluated at `z`.
    #[inline]
    pub fn log_f0_derivs<T: Real>(&self, z: T) -> (T, T, T) {
        let one = T::one();
        let two = T::lit(2.0);
        match self.family {
            Family::Logistic => {
                let a = z.abs();
                let e = (-a).exp();
                let g = -a - two * e.ln_1p();
                // tanh(z/2) = (1 - e^{-|z|}) / (1 + e^{-|z|}) * sign(z)
                let t = (one - e) / (one + e);
                let g1 = if z < T::zero() { t } else { -t };
                let g2 = -two * e / ((one + e) * (one + e));
                (g, g1, g2)
            }
            Family::ExtremeValue => {
                let e = z.exp();
                (z - e, one - e, -e)
            }
            Family::StudentT => {
                let nu = T::lit(self.dof);
                let q = nu + z * z;
                let g = T::lit(self.log_norm) - (nu + one) / two * (z * z / nu).ln_1p();
                let g1 = -(nu + one) * z / q;
                let g2 = -(nu + one) * (nu - z * z) / (q * q);
                (g, g1, g2)
            }
            Family::Normal => (T::lit(self.log_norm) - z * z / two, -z, -one),
        }
    }

    /// `log f(x; theta)`.
    pub fn log_density<T: Real>(&self, x: T, theta: Theta<T>) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        theta.validate()?;
        Ok(self.log_density_unchecked(x, theta.mu, theta.sigma))
    }

    #[inline]
    pub(crate) fn log_density_unchecked<T: Real>(&self, x: T, mu: T, sigma: T) -> T {
        self.log_f0((x - mu) / sigma) - sigma.ln()
    }

    /// Log-density together with its gradient and Hessian with respect to
    /// `(mu, s)` where `s = log sigma`.
    #[inline]
    pub(crate) fn log_density_derivs<T: Real>(&self, x: T, mu: T, sigma: T) -> LogDensityDerivs<T> {
        let inv = sigma.recip();
        let z = (x - mu) * inv;
        let (g, g1, g2) = self.log_f0_derivs(z);
        let zg1 = z * g1;
        LogDensityDerivs {
            value: g - sigma.ln(),
            grad: [-g1 * inv, -T::one() - zg1],
            hess: [g2 * inv * inv, (g1 + z * g2) * inv, zg1 + z * z * g2],
        }
    }

    /// First and halved second derivative ratios of `f(x; theta)` at
    /// `theta0 = (0, 1)`.
    pub fn score_vector<T: Real>(&self, x: T) -> Result<ScoreVector<T>> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite observation {x}")));
        }
        Ok(self.score_vector_unchecked(x))
    }

    #[inline]
    pub(crate) fn score_vector_unchecked<T: Real>(&self, x: T) -> ScoreVector<T> {
        let one = T::one();
        let half = T::lit(0.5);
        let (_, a, h) = self.log_f0_derivs(x);
        let xa = x * a;
        let l_s = -one - xa;
        ScoreVector {
            b1: [-a, l_s],
            b2: [
                half * (h + a * a),
                half * (a + x * h + a * (one + xa)),
                half * (one + T::lit(2.0) * xa + x * x * h + l_s * l_s),
            ],
        }
    }

    pub fn sampler(&self) -> KernelSampler {
        let inner = match self.family {
            Family::Logistic => SamplerKind::Logistic,
            Family::ExtremeValue => SamplerKind::ExtremeValue,
            Family::Normal => SamplerKind::Normal,
            Family::StudentT => {
                SamplerKind::StudentT(StudentT::new(self.dof).expect("dof validated at construction"))
            }
        };
        KernelSampler { inner }
    }

    /// `n` independent draws from `f0`, deterministic given `seed`.
    pub fn sample<T: Real>(&self, n: usize, seed: u64) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::EmptySeries("requested zero draws".into()));
        }
        let mut rng = seeded(seed);
        let sampler = self.sampler();
        Ok((0..n).map(|_| T::lit(sampler.sample(&mut rng))).collect())
    }

    /// Short name accepted on the command line.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Logistic => write!(f, "logistic"),
            Family::ExtremeValue => write!(f, "extreme"),
            Family::Normal => write!(f, "normal"),
            Family::StudentT => write!(f, "t{}", self.dof),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" => Ok(Kernel::logistic()),
            "extreme" | "extreme_value" | "extreme-value" | "gumbel" => Ok(Kernel::extreme_value()),
            "normal" | "gaussian" => Ok(Kernel::normal()),
            other => match other.strip_prefix('t') {
                Some(dof) if !dof.is_empty() => {
                    let nu: f64 = dof
                        .parse()
                        .map_err(|_| Error::UnsupportedKernel(format!("bad student-t dof in {s:?}")))?;
                    Kernel::student_t(nu)
                }
                _ => Err(Error::UnsupportedKernel(format!(
                    "{s:?} (expected logistic, extreme, normal or t<dof>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for Kernel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Kernel> for String {
    fn from(k: Kernel) -> String {
        k.to_string()
    }
}

/// Component parameter `(mu, sigma)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> Theta<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self> {
        let t = Theta { mu, sigma };
        t.validate()?;
        Ok(t)
    }

    pub fn standard() -> Self {
        Theta { mu: T::zero(), sigma: T::one() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Domain(format!("non-finite location {}", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma > T::zero()) {
            return Err(Error::Domain(format!("scale must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Score ratios of the component density at the standard parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreVector<T> {
    /// `(df/dmu, df/dsigma) / f`
    pub b1: [T; 2],
    /// `(d2f/dmu2, d2f/dmu dsigma, d2f/dsigma2) / (2 f)`
    pub b2: [T; 3],
}

impl<T: Copy> ScoreVector<T> {
    pub fn to_array(&self) -> [T; 5] {
        [self.b1[0], self.b1[1], self.b2[0], self.b2[1], self.b2[2]]
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LogDensityDerivs<T> {
    pub value: T,
    pub grad: [T; 2],
    /// `[d2/dmu2, d2/dmu ds, d2/ds2]`
    pub hess: [T; 3],
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Logistic,
    ExtremeValue,
    Normal,
    StudentT(StudentT<f64>),
}

/// Exact sampler for a standardized kernel.
#[derive(Clone, Debug)]
pub struct KernelSampler {
    inner: SamplerKind,
}

impl Distribution<f64> for KernelSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.inner {
            SamplerKind::Logistic => {
                let u: f64 = rng.sample(Open01);
                (u / (1.0 - u)).ln()
            }
            SamplerKind::ExtremeValue => {
                // F(x) = 1 - exp(-exp(x))
                let u: f64 = rng.sample(Open01);
                (-(-u).ln_1p()).ln()
            }
            SamplerKind::Normal => rng.sample(StandardNormal),
            SamplerKind::StudentT(t) => t.sample(rng),
        }
    }
}

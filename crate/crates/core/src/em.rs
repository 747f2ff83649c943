//! The EM-test statistic.
//!
//! For every initial proportion `pi` the two component parameters are first
//! fitted with the proportion frozen at `(pi, 1 - pi)`, then refined by a
//! fixed number of penalized EM iterations. Each track yields
//! `M(pi) = 2 {pl(G_K) - pl(0.5, 0.5, theta0, theta0)}` where `pl` is the
//! penalized log-likelihood; the statistic is the largest `M(pi)`.

use serde::{Deserialize, Serialize};

use crate::calibration::{default_law, p_value, LimitLaw};
use crate::error::{Error, Result};
use crate::geometry::LimitCase;
use crate::kernel::{Kernel, Theta};
use crate::mixture::{e_step, MixingDistribution, MixtureLik};
use crate::null_fit::{fit_null_with, ComponentLik, NullFit};
use crate::optim::{maximize, NewtonOptions};
use crate::penalty::{p_alpha_unchecked, PenaltyConfig, TuningConstant};
use crate::scalar::Real;
use crate::stats::{check_series, quantile_sorted, sorted};

/// Smallest sample the test accepts.
pub const MIN_SAMPLE: usize = 10;

/// Quantile pairs used as location starts for the frozen-proportion fit.
const START_QUANTILES: [(f64, f64); 4] = [(0.25, 0.75), (0.1, 0.5), (0.5, 0.9), (0.5, 0.5)];
/// Scale starts, as multiples of the null scale estimate.
const START_SCALES: [f64; 2] = [0.5, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Initial proportions; each in `(0, 0.5]`, and 0.5 must be present.
    pub pis: Vec<f64>,
    /// Number of EM iterations `K`.
    pub iterations: usize,
    pub a_n: TuningConstant,
    /// How many of the 16 multi-start points to use in the initial fit.
    pub starts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { pis: vec![0.1, 0.3, 0.5], iterations: 3, a_n: TuningConstant::Auto, starts: 16 }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pis.is_empty() {
            return Err(Error::Config("at least one initial proportion is required".into()));
        }
        if let Some(p) = self.pis.iter().find(|&&p| !(p > 0.0 && p <= 0.5)) {
            return Err(Error::Config(format!("initial proportion {p} outside (0, 0.5]")));
        }
        if !self.pis.iter().any(|&p| p == 0.5) {
            return Err(Error::Config("initial proportions must include 0.5".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count K must be at least 1".into()));
        }
        if self.starts == 0 {
            return Err(Error::Config("at least one start is required".into()));
        }
        Ok(())
    }
}

/// One initial-proportion track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiTrack<T: Real> {
    pub pi: f64,
    /// `M(pi)` after `K` iterations.
    pub statistic: T,
    pub fit: MixingDistribution<T>,
    /// Penalized log-likelihood after the initial fit and after each EM
    /// iteration (`K + 1` entries).
    pub trace: Vec<T>,
}

impl<T: Real> PiTrack<T> {
    /// `M(pi)` after each iteration `k = 0..=K`.
    pub fn statistics_by_iteration(&self, null_penalized: T) -> Vec<T> {
        self.trace.iter().map(|&v| T::lit(2.0) * (v - null_penalized)).collect()
    }
}

/// Statistic and fitted quantities, before calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmFit<T: Real> {
    pub statistic: T,
    pub per_pi: Vec<PiTrack<T>>,
    pub null_fit: NullFit<T>,
    pub a_n: T,
}

impl<T: Real> EmFit<T> {
    /// Track with the largest `M(pi)`.
    pub fn best(&self) -> &PiTrack<T> {
        self.per_pi
            .iter()
            .fold(None::<&PiTrack<T>>, |b, t| match b {
                Some(b) if b.statistic >= t.statistic => Some(b),
                _ => Some(t),
            })
            .expect("at least one track")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmTestResult<T: Real> {
    pub statistic: T,
    pub per_pi: Vec<PiTrack<T>>,
    pub null_fit: NullFit<T>,
    pub a_n: T,
    pub p_value: f64,
    pub limit_case: LimitCase,
}

/// Objective of the proportion update:
/// `S log a + (n - S) log(1 - a) + p(a) + p(1 - a)`.
pub fn alpha_objective<T: Real>(weight_sum: T, n: usize, alpha: T) -> T {
    let nf = T::lit(n as f64);
    let xlogy = |c: T, y: T| if c == T::zero() { T::zero() } else { c * y.ln() };
    xlogy(weight_sum, alpha)
        + xlogy(nf - weight_sum, T::one() - alpha)
        + p_alpha_unchecked(alpha)
        + p_alpha_unchecked(T::one() - alpha)
}

/// Penalized M-step for the mixing proportion.
///
/// The penalty `p(a) + p(1 - a)` equals `2 log(2a)` below one half and
/// `2 log(2(1 - a))` above, so the maximizer on each branch is closed form:
/// `(S + 2) / (n + 2)` clipped to `(0, 0.5]` and `S / (n + 2)` clipped to
/// `[0.5, 1)`. The better branch wins; ties go to 0.5.
pub fn m_step_alpha<T: Real>(weight_sum: T, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::Domain("proportion update needs n >= 1".into()));
    }
    let nf = T::lit(n as f64);
    if !(weight_sum >= T::zero() && weight_sum <= nf) {
        return Err(Error::Domain(format!("weight sum {weight_sum} outside [0, {n}]")));
    }
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let low = ((weight_sum + two) / (nf + two)).min(half);
    let high = (weight_sum / (nf + two)).max(half);
    let (fl, fh) = (alpha_objective(weight_sum, n, low), alpha_objective(weight_sum, n, high));
    Ok(if fl > fh {
        low
    } else if fh > fl {
        high
    } else if (low - half).abs() <= (high - half).abs() {
        low
    } else {
        high
    })
}

fn weighted_start<T: Real>(data: &[T], weights: &[T]) -> Result<Theta<T>> {
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    let mean = data.iter().zip(weights).map(|(&x, &w)| w * x).sum::<T>() / total;
    let var = data.iter().zip(weights).map(|(&x, &w)| w * (x - mean) * (x - mean)).sum::<T>() / total;
    let sd = var.sqrt();
    if !(sd > T::zero()) {
        return Err(Error::DegenerateData("weighted data have no spread".into()));
    }
    Ok(Theta { mu: mean, sigma: sd })
}

/// Penalized weighted M-step for one component, started at the weighted
/// moments.
pub fn m_step_component<T: Real>(
    kernel: &Kernel,
    data: &[T],
    weights: &[T],
    cfg: &PenaltyConfig<T>,
) -> Result<Theta<T>> {
    let start = weighted_start(data, weights)?;
    m_step_component_from(kernel, data, weights, cfg, start).map(|(t, _)| t)
}

/// Penalized weighted M-step started at `start`; returns the maximizer and
/// the attained objective `sum w_i log f(x_i; theta) + p_n(sigma)`.
pub fn m_step_component_from<T: Real>(
    kernel: &Kernel,
    data: &[T],
    weights: &[T],
    cfg: &PenaltyConfig<T>,
    start: Theta<T>,
) -> Result<(Theta<T>, T)> {
    if data.len() != weights.len() {
        return Err(Error::Domain("weights and data differ in length".into()));
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    let obj = ComponentLik { kernel: *kernel, data, weights: Some(weights), penalty: Some(*cfg) };
    let opt = maximize(&obj, [start.mu, start.sigma.ln()], NewtonOptions::default())?;
    Ok((Theta { mu: opt.x[0], sigma: opt.x[1].exp() }, opt.value))
}

/// Scale-equivariant start points for the frozen-proportion fit.
pub fn start_points<T: Real>(data: &[T], sigma_hat: T, count: usize) -> Vec<(Theta<T>, Theta<T>)> {
    let s = sorted(data);
    let mut out = Vec::with_capacity(16);
    for &(q1, q2) in &START_QUANTILES {
        let (m1, m2) = (quantile_sorted(&s, q1), quantile_sorted(&s, q2));
        for &r1 in &START_SCALES {
            for &r2 in &START_SCALES {
                out.push((
                    Theta { mu: m1, sigma: sigma_hat * T::lit(r1) },
                    Theta { mu: m2, sigma: sigma_hat * T::lit(r2) },
                ));
            }
        }
    }
    out.truncate(count.max(1));
    out
}

/// Approximate maximizer of the penalized likelihood over both component
/// parameters with the proportions frozen at `(pi, 1 - pi)`.
pub fn initial_pair_fit<T: Real>(
    kernel: &Kernel,
    data: &[T],
    pi: T,
    cfg: &PenaltyConfig<T>,
) -> Result<(Theta<T>, Theta<T>)> {
    initial_pair_fit_with(kernel, data, pi, cfg, None, 16).map(|(a, b, _)| (a, b))
}

/// Multi-start frozen-proportion fit. `null_theta`, when given, is also
/// considered as a candidate (it is a stationary point of the objective).
pub(crate) fn initial_pair_fit_with<T: Real>(
    kernel: &Kernel,
    data: &[T],
    pi: T,
    cfg: &PenaltyConfig<T>,
    null_theta: Option<Theta<T>>,
    starts: usize,
) -> Result<(Theta<T>, Theta<T>, T)> {
    if !(pi > T::zero() && pi <= T::lit(0.5)) {
        return Err(Error::Domain(format!("initial proportion {pi} outside (0, 0.5]")));
    }
    let obj = MixtureLik { kernel: *kernel, data, penalty: *cfg, alpha: Some(pi), alpha_penalty: true };
    let mut best: Option<([T; 4], T)> = None;
    let mut failures = Vec::new();
    for (t1, t2) in start_points(data, cfg.sigma_hat, starts) {
        let x0 = [t1.mu, t1.sigma.ln(), t2.mu, t2.sigma.ln()];
        match maximize(&obj, x0, NewtonOptions::default()) {
            Ok(o) if o.value.is_finite() => {
                if best.as_ref().map_or(true, |b| o.value > b.1) {
                    best = Some((o.x, o.value));
                }
            }
            Ok(o) => failures.push(format!("start {x0:?}: non-finite value {}", o.value)),
            Err(e) => failures.push(format!("start {x0:?}: {e}")),
        }
    }
    if let Some(th) = null_theta {
        let x = [th.mu, th.sigma.ln(), th.mu, th.sigma.ln()];
        let v = crate::optim::Objective::<T, 4>::value(&obj, &x);
        if best.as_ref().map_or(v.is_finite(), |b| v > b.1) {
            best = Some((x, v));
        }
    }
    let (x, v) = best.ok_or_else(|| {
        Error::Numerical(format!("initial fit failed from every start: {}", failures.join("; ")))
    })?;
    Ok((Theta { mu: x[0], sigma: x[1].exp() }, Theta { mu: x[2], sigma: x[3].exp() }, v))
}

/// Runs one initial-proportion track.
fn run_track<T: Real>(
    kernel: &Kernel,
    data: &[T],
    pi: f64,
    iterations: usize,
    cfg: &PenaltyConfig<T>,
    null: &NullFit<T>,
    starts: usize,
) -> Result<PiTrack<T>> {
    let n = data.len();
    let pi_t = T::lit(pi);
    let (t1, t2, _) = initial_pair_fit_with(kernel, data, pi_t, cfg, Some(null.theta()), starts)?;
    let mut g = MixingDistribution::new(pi_t, t1, t2)?;
    let mut trace = vec![g.penalized_log_likelihood(kernel, data, cfg)];
    let mut comp = vec![T::zero(); n];
    for _ in 0..iterations {
        let w = e_step(kernel, &g, data);
        let s: T = w.iter().copied().sum();
        let alpha = m_step_alpha(s, n)?;
        for (c, &wi) in comp.iter_mut().zip(&w) {
            *c = T::one() - wi;
        }
        let (th1, _) = m_step_component_from(kernel, data, &w, cfg, g.theta1)?;
        let (th2, _) = m_step_component_from(kernel, data, &comp, cfg, g.theta2)?;
        g = MixingDistribution::new(alpha, th1, th2)?;
        trace.push(g.penalized_log_likelihood(kernel, data, cfg));
    }
    let last = *trace.last().expect("non-empty trace");
    Ok(PiTrack { pi, statistic: T::lit(2.0) * (last - null.penalized_loglik), fit: g, trace })
}

/// Computes the EM-test statistic without calibrating it.
pub fn em_fit<T: Real>(kernel: &Kernel, data: &[T], config: &EmConfig) -> Result<EmFit<T>> {
    config.validate()?;
    check_series(data, MIN_SAMPLE)?;
    let null = fit_null_with(kernel, data, config.a_n)?;
    let cfg = PenaltyConfig::new(null.a_n, null.sigma_hat)?;
    let per_pi = config
        .pis
        .iter()
        .map(|&pi| run_track(kernel, data, pi, config.iterations, &cfg, &null, config.starts))
        .collect::<Result<Vec<_>>>()?;
    let statistic = per_pi
        .iter()
        .map(|t| t.statistic)
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    Ok(EmFit { statistic, per_pi, null_fit: null, a_n: null.a_n })
}

/// EM-test statistic calibrated by the kernel's cached limiting law.
pub fn em_statistic<T: Real>(kernel: &Kernel, data: &[T], config: &EmConfig) -> Result<EmTestResult<T>> {
    let law = default_law(kernel)?;
    em_statistic_with_law(kernel, data, config, &law)
}

/// EM-test statistic calibrated by `law`.
pub fn em_statistic_with_law<T: Real>(
    kernel: &Kernel,
    data: &[T],
    config: &EmConfig,
    law: &LimitLaw,
) -> Result<EmTestResult<T>> {
    let fit = em_fit(kernel, data, config)?;
    let p = p_value(law, fit.statistic.to_f64_lossy())?;
    Ok(EmTestResult {
        statistic: fit.statistic,
        per_pi: fit.per_pi,
        null_fit: fit.null_fit,
        a_n: fit.a_n,
        p_value: p,
        limit_case: law.case,
    })
}

//! Penalized likelihood ratio baseline.
//!
//! The full two-component model is fitted by maximizing
//! `l_n(G) + p_n(sigma1) + p_n(sigma2)` with `a_n = 1/n` (no proportion
//! penalty); the statistic is the unpenalized log-likelihood difference
//! against the null fit. Its null distribution is simulated.

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::empirical_p_value;
use crate::em::{em_fit, m_step_component_from, start_points, EmConfig, MIN_SAMPLE};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, Theta};
use crate::mixture::{e_step, logistic, MixingDistribution, MixtureLik};
use crate::null_fit::{fit_null, NullFit};
use crate::optim::{newton_maximize, NewtonOptions, Objective};
use crate::penalty::PenaltyConfig;
use crate::rng::substream;
use crate::scalar::Real;
use crate::stats::check_series;

/// Settings of the full-model fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtConfig {
    /// Starting proportions, crossed with the location/scale starts.
    pub alphas: Vec<f64>,
    /// Location/scale starts per proportion (at most 16).
    pub starts: usize,
    /// EM iteration counts after which each start is snapshotted as a
    /// candidate; `0` keeps the raw start.
    pub warmups: Vec<usize>,
    /// Number of best candidates carried to convergence; `None` polishes all.
    pub polish: Option<usize>,
    /// Cap on EM iterations for a polished start.
    pub max_iter: usize,
    /// Relative change in the objective that stops EM.
    pub rel_tol: f64,
}

impl Default for LrtConfig {
    fn default() -> Self {
        LrtConfig { alphas: vec![0.1, 0.3, 0.5], starts: 16, warmups: vec![0, 5], polish: None, max_iter: 500, rel_tol: 1e-8 }
    }
}

impl LrtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::Config("starting proportions must be non-empty and inside (0, 1)".into()));
        }
        if self.starts == 0 || self.polish == Some(0) || self.max_iter == 0 || self.warmups.is_empty() {
            return Err(Error::Config("starts, polish and max_iter must be positive and warmups non-empty".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Result of the full-model fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullFit<T: Real> {
    pub mixing: MixingDistribution<T>,
    /// Attained `l_n(G) + p_n(sigma1) + p_n(sigma2)`.
    pub objective: T,
    /// Objective along the EM path of the winning start.
    pub trace: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtResult<T: Real> {
    pub statistic: T,
    pub full_fit: MixingDistribution<T>,
    pub null_fit: NullFit<T>,
    pub p_value: Option<f64>,
    pub null_table: Option<Vec<f64>>,
}

/// Penalty used by the full-model fit: `a_n = 1/n` centred on the null MLE.
pub fn lrt_penalty<T: Real>(null: &NullFit<T>, n: usize) -> Result<PenaltyConfig<T>> {
    PenaltyConfig::new(T::one() / T::lit(n as f64), null.sigma_hat)
}

struct EmPath<T: Real> {
    g: MixingDistribution<T>,
    value: T,
    trace: Vec<T>,
}

/// One unpenalized-proportion EM iteration. `None` when an update fails or
/// the objective decreases beyond rounding.
fn em_step<T: Real>(
    kernel: &Kernel,
    data: &[T],
    cfg: &PenaltyConfig<T>,
    g: &MixingDistribution<T>,
    value: T,
    comp: &mut [T],
) -> Option<(MixingDistribution<T>, T)> {
    let n = T::lit(data.len() as f64);
    let w = e_step(kernel, g, data);
    let s: T = w.iter().copied().sum();
    let alpha = s / n;
    if !(alpha > T::zero() && alpha < T::one()) {
        return None;
    }
    for (c, &wi) in comp.iter_mut().zip(&w) {
        *c = T::one() - wi;
    }
    let (t1, _) = m_step_component_from(kernel, data, &w, cfg, g.theta1).ok()?;
    let (t2, _) = m_step_component_from(kernel, data, comp, cfg, g.theta2).ok()?;
    let next = MixingDistribution::new(alpha, t1, t2).ok()?;
    let v = next.scale_penalized_log_likelihood(kernel, data, cfg);
    let slack = T::lit(1e-8) * value.abs().max(T::one());
    if !(v.is_finite() && v >= value - slack) {
        return None;
    }
    Some((next, v))
}

fn run_em<T: Real>(
    kernel: &Kernel,
    data: &[T],
    cfg: &PenaltyConfig<T>,
    mut path: EmPath<T>,
    iterations: usize,
    rel_tol: Option<T>,
) -> Option<EmPath<T>> {
    let mut comp = vec![T::zero(); data.len()];
    for _ in 0..iterations {
        let (g, v) = em_step(kernel, data, cfg, &path.g, path.value, &mut comp)?;
        let change = (v - path.value).abs();
        path.g = g;
        path.value = v;
        path.trace.push(v);
        if let Some(tol) = rel_tol {
            if change <= tol * v.abs().max(T::one()) {
                break;
            }
        }
    }
    Some(path)
}

/// Newton refinement in `(logit alpha, mu1, log sigma1, mu2, log sigma2)`;
/// accepted only if it improves the objective.
fn newton_polish<T: Real>(kernel: &Kernel, data: &[T], cfg: &PenaltyConfig<T>, path: &mut EmPath<T>) {
    let obj = MixtureLik { kernel: *kernel, data, penalty: *cfg, alpha: None, alpha_penalty: false };
    let a = path.g.alpha1();
    let x0 = [
        (a / (T::one() - a)).ln(),
        path.g.theta1.mu,
        path.g.theta1.sigma.ln(),
        path.g.theta2.mu,
        path.g.theta2.sigma.ln(),
    ];
    let opts = NewtonOptions { max_iter: 100, ..NewtonOptions::default() };
    if let Ok(o) = newton_maximize(&obj, x0, opts) {
        let alpha = logistic(o.x[0]);
        if o.value > path.value && alpha > T::zero() && alpha < T::one() {
            if let Ok(g) = MixingDistribution::new(
                alpha,
                Theta { mu: o.x[1], sigma: o.x[2].exp() },
                Theta { mu: o.x[3], sigma: o.x[4].exp() },
            ) {
                path.g = g;
                path.value = Objective::<T, 5>::value(&obj, &o.x);
                path.trace.push(path.value);
            }
        }
    }
}

/// Penalized maximum likelihood fit of the full two-component model.
pub fn fit_full_penalized<T: Real>(kernel: &Kernel, data: &[T]) -> Result<FullFit<T>> {
    let null = fit_null(kernel, data)?;
    fit_full_penalized_with(kernel, data, &null, &LrtConfig::default())
}

pub fn fit_full_penalized_with<T: Real>(
    kernel: &Kernel,
    data: &[T],
    null: &NullFit<T>,
    config: &LrtConfig,
) -> Result<FullFit<T>> {
    config.validate()?;
    check_series(data, MIN_SAMPLE)?;
    let cfg = lrt_penalty(null, data.len())?;
    let mut warmups = config.warmups.clone();
    warmups.sort_unstable();
    warmups.dedup();
    let mut warmed: Vec<EmPath<T>> = Vec::new();
    for &alpha in &config.alphas {
        for (t1, t2) in start_points(data, null.sigma_hat, config.starts) {
            let Ok(g) = MixingDistribution::new(T::lit(alpha), t1, t2) else { continue };
            let value = g.scale_penalized_log_likelihood(kernel, data, &cfg);
            if !value.is_finite() {
                continue;
            }
            let mut path = EmPath { g, value, trace: vec![value] };
            let mut done = 0;
            for &w in &warmups {
                let Some(p) = run_em(kernel, data, &cfg, path, w - done, None) else { break };
                done = w;
                path = p;
                warmed.push(EmPath { g: path.g, value: path.value, trace: path.trace.clone() });
            }
        }
    }
    // The homogeneous fit is feasible and a stationary point.
    let homog = MixingDistribution::new(T::lit(0.5), null.theta(), null.theta())?;
    let hv = homog.scale_penalized_log_likelihood(kernel, data, &cfg);
    if warmed.is_empty() {
        return Err(Error::Numerical("full-model fit diverged from every start".into()));
    }
    warmed.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<EmPath<T>> = None;
    for p in warmed.into_iter().take(config.polish.unwrap_or(usize::MAX)) {
        let mut p = p;
        newton_polish(kernel, data, &cfg, &mut p);
        let rel = Some(T::lit(config.rel_tol));
        let Some(p) = run_em(kernel, data, &cfg, p, config.max_iter, rel) else { continue };
        if best.as_ref().map_or(true, |b| p.value > b.value) {
            best = Some(p);
        }
    }
    let best = match best {
        Some(b) if b.value >= hv => b,
        _ => EmPath { g: homog, value: hv, trace: vec![hv] },
    };
    Ok(FullFit { mixing: best.g, objective: best.value, trace: best.trace })
}

/// `2 {l_n(G_full) - l_n(G_null)}` with `G_full` from the penalized fit.
pub fn lrt_statistic<T: Real>(kernel: &Kernel, data: &[T]) -> Result<LrtResult<T>> {
    lrt_statistic_with(kernel, data, &LrtConfig::default(), None)
}

/// As [`lrt_statistic`], with an optional sorted null table for the p-value.
pub fn lrt_statistic_with<T: Real>(
    kernel: &Kernel,
    data: &[T],
    config: &LrtConfig,
    null_table: Option<Vec<f64>>,
) -> Result<LrtResult<T>> {
    check_series(data, MIN_SAMPLE)?;
    let null = fit_null(kernel, data)?;
    let full = fit_full_penalized_with(kernel, data, &null, config)?;
    let statistic = T::lit(2.0) * (full.mixing.log_likelihood(kernel, data) - null.loglik);
    let p_value = null_table.as_deref().map(|t| empirical_p_value(t, statistic.to_f64_lossy()));
    Ok(LrtResult { statistic, full_fit: full.mixing, null_fit: null, p_value, null_table })
}

/// Which statistic a simulated null table is built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullStatistic {
    Em(EmConfig),
    Lrt(LrtConfig),
}

impl NullStatistic {
    pub fn compute(&self, kernel: &Kernel, data: &[f64]) -> Result<f64> {
        match self {
            NullStatistic::Em(c) => em_fit(kernel, data, c).map(|f| f.statistic),
            NullStatistic::Lrt(c) => lrt_statistic_with(kernel, data, c, None).map(|r| r.statistic),
        }
    }
}

/// Sample of size `n` from `g` on substream `rep` of `seed`.
pub fn replicate_sample(kernel: &Kernel, g: Option<&MixingDistribution<f64>>, n: usize, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = substream(seed, rep);
    match g {
        Some(g) => g.sample(kernel, n, &mut rng),
        None => {
            let s = kernel.sampler();
            (0..n).map(|_| s.sample(&mut rng)).collect()
        }
    }
}

/// Statistics on `reps` samples of size `n` drawn from `g` (or from the
/// standard kernel when `g` is `None`); one row per replicate, one column per
/// entry of `stats`. Replicate `r` always uses substream `r`.
pub fn replicate_statistics(
    kernel: &Kernel,
    g: Option<&MixingDistribution<f64>>,
    n: usize,
    reps: usize,
    seed: u64,
    stats: &[NullStatistic],
) -> Result<Vec<Vec<f64>>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = replicate_sample(kernel, g, n, seed, r as u64);
            stats.iter().map(|s| s.compute(kernel, &data)).collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Sorted null table of `statistic` from `reps` standard-kernel samples.
pub fn bootstrap_null(kernel: &Kernel, n: usize, reps: usize, seed: u64, statistic: &NullStatistic) -> Result<Vec<f64>> {
    if reps < 100 {
        return Err(Error::Config(format!("at least 100 replicates are required, got {reps}")));
    }
    let rows = replicate_statistics(kernel, None, n, reps, seed, std::slice::from_ref(statistic))?;
    let mut t: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
    t.sort_by(f64::total_cmp);
    Ok(t)
}

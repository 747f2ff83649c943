//! Calibration of the EM-test statistic against its limiting law.
//!
//! In the full-rank case the limit is `sup_v {2 (v^2)' w - (v^2)' B (v^2)}`
//! with `w ~ N(0, B)`, `B` the residual covariance of the second-order
//! scores and `v^2 = (v1^2, 2 v1 v2, v2^2)`. Writing `v^2 = r^2 u(phi)` the
//! radial maximum is `max(u'w, 0)^2 / u'Bu`, so each draw reduces to a
//! one-dimensional search over `phi` in `[0, pi)`. The structured rank-2
//! case and the normal kernel are calibrated by chi-square with two degrees
//! of freedom.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cached_score_matrices, classify_limit, LimitCase};
use crate::kernel::Kernel;
use crate::linalg::{matvec, psd_sqrt, quad_form, Mat};
use crate::rng::substream;
use crate::scalar::Real;

/// Grid resolution of the angular search.
pub const ANGLE_GRID: usize = 720;
/// Draws used for the cached per-kernel law.
pub const DEFAULT_DRAWS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 20_190_101;
/// Smallest table accepted for p-values.
pub const MIN_TABLE: usize = 10_000;
const BLOCK: usize = 4096;
const GOLDEN_TOL: f64 = 1e-10;

/// A direction `v` together with `(v1^2, 2 v1 v2, v2^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquaredDirection<T> {
    pub v: [T; 2],
    pub v_sq: [T; 3],
}

impl<T: Real> SquaredDirection<T> {
    pub fn new(v: [T; 2]) -> Self {
        SquaredDirection { v, v_sq: [v[0] * v[0], T::lit(2.0) * v[0] * v[1], v[1] * v[1]] }
    }

    /// Unit direction at angle `phi`.
    pub fn from_angle(phi: T) -> Self {
        Self::new([phi.cos(), phi.sin()])
    }
}

/// Angular objective for a fixed matrix, with the grid denominators cached.
#[derive(Clone, Debug)]
pub struct LimitSolver {
    b: Mat<f64, 3>,
    grid: Vec<([f64; 3], f64)>,
}

fn u_of(phi: f64) -> [f64; 3] {
    SquaredDirection::from_angle(phi).v_sq
}

impl LimitSolver {
    pub fn new(tilde_b22: &Mat<f64, 3>) -> Result<Self> {
        let mut grid = Vec::with_capacity(ANGLE_GRID);
        for j in 0..ANGLE_GRID {
            let phi = PI * j as f64 / ANGLE_GRID as f64;
            let u = u_of(phi);
            let den = quad_form(tilde_b22, &u);
            if !(den > 0.0) {
                return Err(Error::CaseCondition(format!(
                    "u'Bu = {den:e} <= 0 at angle {phi:.6}; the matrix is not positive on the squared directions"
                )));
            }
            grid.push((u, den));
        }
        Ok(LimitSolver { b: *tilde_b22, grid })
    }

    fn objective(&self, w: &[f64; 3], phi: f64) -> f64 {
        let u = u_of(phi);
        let num = (u[0] * w[0] + u[1] * w[1] + u[2] * w[2]).max(0.0);
        let den = quad_form(&self.b, &u);
        if den > 0.0 {
            num * num / den
        } else {
            0.0
        }
    }

    /// Supremum of the limit objective for one `w`.
    pub fn solve(&self, w: &[f64; 3]) -> f64 {
        let (mut best, mut best_j) = (0.0, usize::MAX);
        for (j, (u, den)) in self.grid.iter().enumerate() {
            let num = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
            if num > 0.0 {
                let v = num * num / den;
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
        }
        if best_j == usize::MAX {
            return 0.0;
        }
        // The objective has period pi, so the bracket may cross 0.
        let h = PI / ANGLE_GRID as f64;
        let centre = PI * best_j as f64 / ANGLE_GRID as f64;
        let (mut a, mut b) = (centre - h, centre + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.objective(w, c), self.objective(w, d));
        while b - a > GOLDEN_TOL {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.objective(w, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.objective(w, d);
            }
        }
        best.max(fc).max(fd)
    }
}

/// One evaluation of the limit functional; builds the grid each call, so
/// use [`LimitSolver`] for repeated draws.
pub fn limit_draw<T: Real>(tilde_b22: &Mat<T, 3>, w: &[T; 3]) -> Result<T> {
    let b = tilde_b22.map(|r| r.map(|x| x.to_f64_lossy()));
    let w = w.map(|x| x.to_f64_lossy());
    Ok(T::lit(LimitSolver::new(&b)?.solve(&w)))
}

/// Calibration object: either a simulated table or the chi-square(2) law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub kernel: Option<String>,
    pub case: LimitCase,
    /// Sorted simulated values; empty for chi-square calibration.
    pub quantile_table: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
    pub tool_version: String,
    pub tilde_b22: Option<Mat<f64, 3>>,
}

impl LimitLaw {
    pub fn chi_square(case: LimitCase, kernel: Option<String>) -> Self {
        LimitLaw {
            kernel,
            case,
            quantile_table: Vec::new(),
            draws: 0,
            seed: 0,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            tilde_b22: None,
        }
    }

    /// True when the chi-square(2) law is used, including the normal kernel,
    /// which is special-cased.
    pub fn is_chi_square(&self) -> bool {
        self.case.is_chi_square()
    }
}

/// Simulates the full-rank limiting law with `draws` draws.
pub fn simulate_limit(tilde_b22: &Mat<f64, 3>, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let root = psd_sqrt(tilde_b22, 1e-10)
        .ok_or_else(|| Error::Matrix("residual score covariance is not positive semidefinite".into()))?;
    let solver = LimitSolver::new(tilde_b22)?;
    let blocks = draws.div_ceil(BLOCK);
    let mut table: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|blk| {
            let mut rng = substream(seed, blk as u64);
            let len = BLOCK.min(draws - blk * BLOCK);
            let (solver, root) = (&solver, &root);
            (0..len)
                .map(move |_| {
                    let z: [f64; 3] = [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ];
                    solver.solve(&matvec(root, &z))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    table.sort_by(f64::total_cmp);
    Ok(table)
}

/// Limiting law for `kernel`: simulated in the full-rank case, chi-square
/// otherwise.
pub fn limit_law_for(kernel: &Kernel, draws: usize, seed: u64) -> Result<LimitLaw> {
    let sm = cached_score_matrices(kernel)?;
    let case = classify_limit(kernel, &sm)?;
    if case.is_chi_square() {
        return Ok(LimitLaw::chi_square(case, Some(kernel.to_string())));
    }
    let table = simulate_limit(&sm.tilde_b22, draws, seed)?;
    Ok(LimitLaw {
        kernel: Some(kernel.to_string()),
        case,
        quantile_table: table,
        draws,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        tilde_b22: Some(sm.tilde_b22),
    })
}

/// Process-wide cached law at [`DEFAULT_DRAWS`] and [`DEFAULT_SEED`].
pub fn default_law(kernel: &Kernel) -> Result<Arc<LimitLaw>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<LimitLaw>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = kernel.to_string();
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let law = Arc::new(limit_law_for(kernel, DEFAULT_DRAWS, DEFAULT_SEED)?);
    cache.lock().expect("cache lock").insert(key, Arc::clone(&law));
    Ok(law)
}

fn table_or_err(law: &LimitLaw) -> Result<&[f64]> {
    if law.quantile_table.is_empty() {
        return Err(Error::CalibrationMissing("full-rank case needs a simulated table".into()));
    }
    Ok(&law.quantile_table)
}

/// Upper-tail probability of `stat` under `law`.
pub fn p_value(law: &LimitLaw, stat: f64) -> Result<f64> {
    if !stat.is_finite() {
        return Err(Error::Domain(format!("statistic must be finite, got {stat}")));
    }
    if law.is_chi_square() {
        return Ok((-stat.max(0.0) / 2.0).exp());
    }
    let t = table_or_err(law)?;
    Ok(empirical_p_value(t, stat))
}

/// `(1 + #{t >= stat}) / (N + 1)` for a sorted table.
pub fn empirical_p_value(sorted_table: &[f64], stat: f64) -> f64 {
    let below = sorted_table.partition_point(|&v| v < stat);
    (1 + sorted_table.len() - below) as f64 / (sorted_table.len() + 1) as f64
}

/// Critical value at `level`: smallest table value whose upper-tail share is
/// at most `level`, or `-2 log(level)` for chi-square(2).
pub fn critical_value(law: &LimitLaw, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    if law.is_chi_square() {
        return Ok(-2.0 * level.ln());
    }
    Ok(empirical_critical_value(table_or_err(law)?, level))
}

/// Empirical `1 - level` quantile of a sorted table (the value at rank
/// `ceil((1 - level) N)`).
pub fn empirical_critical_value(sorted_table: &[f64], level: f64) -> f64 {
    let n = sorted_table.len();
    let k = ((1.0 - level) * n as f64).ceil() as usize;
    sorted_table[k.clamp(1, n) - 1]
}

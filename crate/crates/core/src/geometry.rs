//! Score covariance `B`, its residual block and the limit-case classification.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Family, Kernel};
use crate::linalg::{matmul, spd_inverse, sym_eigen, transpose, Mat};
use crate::quadrature::{integrate, Tolerance};
use crate::scalar::Real;

/// Relative eigenvalue threshold separating exact rank deficiency from
/// quadrature noise.
pub const RANK_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrices<T> {
    pub b: Mat<T, 5>,
    pub b11: Mat<T, 2>,
    pub b12: [[T; 3]; 2],
    pub b22: Mat<T, 3>,
    /// `B22 - B12^T B11^{-1} B12`
    pub tilde_b22: Mat<T, 3>,
    /// Integration range used for the final estimate.
    pub range: (T, T),
}

impl<T: Real> ScoreMatrices<T> {
    /// Builds the blocks and the residual matrix from a full 5x5 `B`.
    pub fn from_full(b: Mat<T, 5>, range: (T, T)) -> Result<Self> {
        let mut b11 = [[T::zero(); 2]; 2];
        let mut b12 = [[T::zero(); 3]; 2];
        let mut b22 = [[T::zero(); 3]; 3];
        for i in 0..2 {
            for j in 0..2 {
                b11[i][j] = b[i][j];
            }
            for j in 0..3 {
                b12[i][j] = b[i][2 + j];
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                b22[i][j] = b[2 + i][2 + j];
            }
        }
        let inv = spd_inverse(&b11)
            .ok_or_else(|| Error::Matrix("B11 is not positive definite".into()))?;
        let proj = matmul(&transpose(&b12), &matmul(&inv, &b12));
        let mut tilde_b22 = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                tilde_b22[i][j] = b22[i][j] - proj[i][j];
            }
        }
        // exact symmetry
        for i in 0..3 {
            for j in 0..i {
                let m = (tilde_b22[i][j] + tilde_b22[j][i]) / T::lit(2.0);
                tilde_b22[i][j] = m;
                tilde_b22[j][i] = m;
            }
        }
        Ok(ScoreMatrices { b, b11, b12, b22, tilde_b22, range })
    }

    /// `B21 B11^{-1}`, the regression of `b2` on `b1`.
    pub fn regression(&self) -> [[T; 2]; 3] {
        let inv = spd_inverse(&self.b11).expect("validated at construction");
        matmul(&transpose(&self.b12), &inv)
    }
}

/// Point where `f0` has dropped below `1e-14` of its peak, searched outward
/// from the mode in steps that double.
fn tail_point<T: Real>(kernel: &Kernel, direction: T) -> T {
    let peak = kernel.log_f0(T::zero());
    let cut = peak + T::lit(1e-14_f64.ln());
    let mut x = direction;
    while kernel.log_f0(x) > cut {
        x = x * T::lit(2.0);
        if x.abs() > T::lit(1e8) {
            break;
        }
    }
    x
}

fn integrate_b<T: Real>(kernel: &Kernel, lo: T, hi: T) -> Result<Mat<T, 5>> {
    // 15 upper-triangle entries of b b^T
    let integrand = |x: T| {
        let mut out = [T::zero(); 15];
        let lf = kernel.log_f0(x);
        let f = lf.exp();
        if f == T::zero() {
            return out;
        }
        let b = kernel.score_vector_unchecked(x).to_array();
        let mut k = 0;
        for i in 0..5 {
            for j in i..5 {
                out[k] = b[i] * b[j] * f;
                k += 1;
            }
        }
        out
    };
    let eps = T::epsilon().to_f64_lossy();
    let tol = Tolerance { abs: (100.0 * eps).max(1e-13), rel: (100.0 * eps).max(1e-12), max_intervals: 20_000 };
    // split at the mode so both sides are resolved independently
    let left = integrate(integrand, lo, T::zero(), tol)?;
    let right = integrate(integrand, T::zero(), hi, tol)?;
    let mut b = [[T::zero(); 5]; 5];
    let mut k = 0;
    for i in 0..5 {
        for j in i..5 {
            let v = left.value[k] + right.value[k];
            b[i][j] = v;
            b[j][i] = v;
            k += 1;
        }
    }
    Ok(b)
}

/// `B = Var(b)` by adaptive quadrature.
///
/// The range starts where `f0 < 1e-14 * max f0` and doubles until no entry of
/// `B` moves by more than `1e-10`.
pub fn score_covariance<T: Real>(kernel: &Kernel) -> Result<ScoreMatrices<T>> {
    score_covariance_scaled(kernel, T::one())
}

/// As [`score_covariance`] with the initial truncation range multiplied by
/// `grid_scale` (used to check stability under range refinement).
pub fn score_covariance_scaled<T: Real>(kernel: &Kernel, grid_scale: T) -> Result<ScoreMatrices<T>> {
    let mut lo = tail_point(kernel, -T::one()) * grid_scale;
    let mut hi = tail_point(kernel, T::one()) * grid_scale;
    let mut b = integrate_b(kernel, lo, hi)?;
    for _ in 0..12 {
        let (nlo, nhi) = (lo * T::lit(2.0), hi * T::lit(2.0));
        let nb = integrate_b(kernel, nlo, nhi)?;
        let mut change = T::zero();
        for i in 0..5 {
            for j in 0..5 {
                change = change.max((nb[i][j] - b[i][j]).abs());
            }
        }
        lo = nlo;
        hi = nhi;
        b = nb;
        if change < T::lit(1e-10).max(T::lit(1000.0) * T::epsilon()) {
            return ScoreMatrices::from_full(b, (lo, hi));
        }
    }
    Err(Error::Quadrature(format!("score covariance for {kernel} did not stabilize on [{lo}, {hi}]")))
}

/// Cached `f64` score matrices, shared across threads.
pub fn cached_score_matrices(kernel: &Kernel) -> Result<Arc<ScoreMatrices<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<ScoreMatrices<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = kernel.to_string();
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let sm = Arc::new(score_covariance::<f64>(kernel)?);
    cache.lock().expect("cache lock").insert(key, Arc::clone(&sm));
    Ok(sm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// Full-rank residual matrix: simulated nonstandard limit.
    #[serde(rename = "case_i")]
    CaseI,
    /// Rank two with a null eigenvector `(u1, 0, u3)`, `u1 u3 > 0`: chi-square(2).
    #[serde(rename = "case_ii")]
    CaseII,
    /// Normal kernel: residual matrix annihilates the first coordinate;
    /// calibrated as chi-square(2).
    NormalDegenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCase {
    pub tag: CaseTag,
    pub null_eigenvector: Option<[f64; 3]>,
}

impl LimitCase {
    pub fn is_chi_square(&self) -> bool {
        matches!(self.tag, CaseTag::CaseII | CaseTag::NormalDegenerate)
    }
}

/// Decides which limiting law applies from the spectrum of the residual matrix.
pub fn classify_limit<T: Real>(kernel: &Kernel, sm: &ScoreMatrices<T>) -> Result<LimitCase> {
    let eps = T::lit(RANK_EPS);
    let b11_eig = sym_eigen(&sm.b11);
    if !(b11_eig.values[0] > eps * b11_eig.values[1]) {
        return Err(Error::UnsupportedKernel(format!("{kernel}: B11 is rank deficient")));
    }
    let eig = sym_eigen(&sm.tilde_b22);
    let top = eig.values[2];
    if !(top > T::zero()) {
        return Err(Error::UnsupportedKernel(format!("{kernel}: residual matrix vanishes")));
    }
    if eig.values[0] > eps * top {
        return Ok(LimitCase { tag: CaseTag::CaseI, null_eigenvector: None });
    }
    if !(eig.values[1] > eps * top) {
        return Err(Error::UnsupportedKernel(format!(
            "{kernel}: residual matrix has rank below two (eigenvalues {:?})",
            eig.values
        )));
    }
    let mut u = eig.vectors[0];
    // sign convention: largest-magnitude entry positive
    let lead = if u[0].abs() >= u[2].abs() { u[0] } else { u[2] };
    if lead < T::zero() {
        for v in u.iter_mut() {
            *v = -*v;
        }
    }
    let uf = [u[0].to_f64_lossy(), u[1].to_f64_lossy(), u[2].to_f64_lossy()];
    let small = T::lit(1e-6);
    if u[1].abs() < small && u[0].abs() > small && u[2].abs() > small && u[0] * u[2] > T::zero() {
        return Ok(LimitCase { tag: CaseTag::CaseII, null_eigenvector: Some(uf) });
    }
    if kernel.family() == Family::Normal && u[1].abs() < small && u[2].abs() < small {
        return Ok(LimitCase { tag: CaseTag::NormalDegenerate, null_eigenvector: Some(uf) });
    }
    Err(Error::UnsupportedKernel(format!(
        "{kernel}: rank-two residual matrix with null eigenvector {uf:?} matches no known case"
    )))
}

/// Score matrices and limit case for a kernel, from the shared cache.
pub fn limit_case(kernel: &Kernel) -> Result<LimitCase> {
    let sm = cached_score_matrices(kernel)?;
    classify_limit(kernel, &sm)
}

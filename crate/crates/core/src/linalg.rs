//! Fixed-size dense linear algebra on `[[T; N]; N]` arrays.
//!
//! Only what the crate needs: Cholesky factorization, symmetric Jacobi
//! eigendecomposition, symmetric square roots and a few products.

use crate::scalar::Real;

pub type Mat<T, const N: usize> = [[T; N]; N];

pub fn zeros<T: Real, const R: usize, const C: usize>() -> [[T; C]; R] {
    [[T::zero(); C]; R]
}

pub fn identity<T: Real, const N: usize>() -> Mat<T, N> {
    let mut m = zeros::<T, N, N>();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn transpose<T: Real, const R: usize, const C: usize>(a: &[[T; C]; R]) -> [[T; R]; C] {
    let mut t = zeros::<T, C, R>();
    for i in 0..R {
        for j in 0..C {
            t[j][i] = a[i][j];
        }
    }
    t
}

pub fn matmul<T: Real, const R: usize, const K: usize, const C: usize>(
    a: &[[T; K]; R],
    b: &[[T; C]; K],
) -> [[T; C]; R] {
    let mut out = zeros::<T, R, C>();
    for i in 0..R {
        for j in 0..C {
            let mut s = T::zero();
            for k in 0..K {
                s = s + a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn matvec<T: Real, const R: usize, const C: usize>(a: &[[T; C]; R], v: &[T; C]) -> [T; R] {
    let mut out = [T::zero(); R];
    for i in 0..R {
        let mut s = T::zero();
        for j in 0..C {
            s = s + a[i][j] * v[j];
        }
        out[i] = s;
    }
    out
}

pub fn dot<T: Real, const N: usize>(a: &[T; N], b: &[T; N]) -> T {
    let mut s = T::zero();
    for i in 0..N {
        s = s + a[i] * b[i];
    }
    s
}

/// `v^T A v`
pub fn quad_form<T: Real, const N: usize>(a: &Mat<T, N>, v: &[T; N]) -> T {
    dot(v, &matvec(a, v))
}

pub fn max_abs_diff<T: Real, const R: usize, const C: usize>(a: &[[T; C]; R], b: &[[T; C]; R]) -> T {
    let mut m = T::zero();
    for i in 0..R {
        for j in 0..C {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a pivot is not strictly positive.
pub fn cholesky<T: Real, const N: usize>(a: &Mat<T, N>) -> Option<Mat<T, N>> {
    let mut l = zeros::<T, N, N>();
    for j in 0..N {
        let mut d = a[j][j];
        for k in 0..j {
            d = d - l[j][k] * l[j][k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in (j + 1)..N {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            l[i][j] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve<T: Real, const N: usize>(l: &Mat<T, N>, b: &[T; N]) -> [T; N] {
    let mut y = [T::zero(); N];
    for i in 0..N {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [T::zero(); N];
    for i in (0..N).rev() {
        let mut s = y[i];
        for k in (i + 1)..N {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse<T: Real, const N: usize>(a: &Mat<T, N>) -> Option<Mat<T, N>> {
    let l = cholesky(a)?;
    let mut inv = zeros::<T, N, N>();
    for j in 0..N {
        let mut e = [T::zero(); N];
        e[j] = T::one();
        let col = cholesky_solve(&l, &e);
        for i in 0..N {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
#[derive(Clone, Debug)]
pub struct SymEigen<T, const N: usize> {
    /// Ascending eigenvalues.
    pub values: [T; N],
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: [[T; N]; N],
}

pub fn sym_eigen<T: Real, const N: usize>(a: &Mat<T, N>) -> SymEigen<T, N> {
    let mut m = *a;
    let mut v = identity::<T, N>();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..N {
            diag = diag + m[i][i] * m[i][i];
            for j in (i + 1)..N {
                off = off + m[i][j] * m[i][j];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..N {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..N {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..N {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut values = [T::zero(); N];
    let mut vectors = zeros::<T, N, N>();
    for (k, &i) in order.iter().enumerate() {
        values[k] = m[i][i];
        for r in 0..N {
            vectors[k][r] = v[r][i];
        }
    }
    SymEigen { values, vectors }
}

/// Symmetric square root of a positive semidefinite matrix. Eigenvalues in
/// `[-tol * max, 0)` are clamped to zero; anything more negative is `None`.
pub fn psd_sqrt<T: Real, const N: usize>(a: &Mat<T, N>, tol: T) -> Option<Mat<T, N>> {
    let eig = sym_eigen(a);
    let top = eig.values[N - 1].abs();
    let mut out = zeros::<T, N, N>();
    for k in 0..N {
        let mut lam = eig.values[k];
        if lam < T::zero() {
            if lam < -tol * top.max(T::one()) {
                return None;
            }
            lam = T::zero();
        }
        let r = lam.sqrt();
        for i in 0..N {
            for j in 0..N {
                out[i][j] = out[i][j] + r * eig.vectors[k][i] * eig.vectors[k][j];
            }
        }
    }
    Some(out)
}

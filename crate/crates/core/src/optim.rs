//! Small-dimensional maximizers: safeguarded Newton with Levenberg damping and
//! a Nelder-Mead fallback.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, Mat};
use crate::scalar::Real;

/// A smooth objective to be maximized over `R^N`.
///
/// `value` returns `-inf` (or NaN) outside the feasible region.
pub trait Objective<T: Real, const N: usize> {
    fn value(&self, x: &[T; N]) -> T;
    /// Value, gradient and Hessian at `x`.
    fn derivs(&self, x: &[T; N]) -> (T, [T; N], Mat<T, N>);
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once the Newton decrement `g^T (-H)^{-1} g` falls below
    /// `tol * (1 + |f|)`.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 200, tol: 1e-14 }
    }
}

#[derive(Clone, Debug)]
pub struct Optimum<T, const N: usize> {
    pub x: [T; N],
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting with the initial point.
    pub trace: Vec<T>,
}

/// Damped Newton ascent. Every accepted step satisfies an Armijo condition so
/// the objective never decreases.
pub fn newton_maximize<T, const N: usize, O>(obj: &O, x0: [T; N], opts: NewtonOptions) -> Result<Optimum<T, N>>
where
    T: Real,
    O: Objective<T, N> + ?Sized,
{
    let (mut f, mut g, mut h) = obj.derivs(&x0);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("objective not finite at start {x0:?}")));
    }
    let mut x = x0;
    let mut trace = vec![f];
    let mut lambda = T::zero();
    let tol = T::lit(opts.tol);
    let armijo = T::lit(1e-4);
    let half = T::lit(0.5);
    for it in 0..opts.max_iter {
        let mut scale = T::one();
        for i in 0..N {
            scale = scale.max(h[i][i].abs());
        }
        // Levenberg-regularized ascent direction.
        let mut dir = None;
        for _ in 0..60 {
            let mut a = [[T::zero(); N]; N];
            for i in 0..N {
                for j in 0..N {
                    a[i][j] = -h[i][j];
                }
                a[i][i] = a[i][i] + lambda * scale;
            }
            if let Some(l) = cholesky(&a) {
                dir = Some(cholesky_solve(&l, &g));
                break;
            }
            lambda = (lambda * T::lit(10.0)).max(T::lit(1e-10));
        }
        let d = match dir {
            Some(d) => d,
            None => return Err(Error::Numerical("Newton system could not be regularized".into())),
        };
        let dec = dot(&g, &d);
        if dec <= tol * (T::one() + f.abs()) {
            return Ok(Optimum { x, value: f, iterations: it, converged: true, trace });
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..50 {
            let mut xn = x;
            for i in 0..N {
                xn[i] = x[i] + t * d[i];
            }
            let fnew = obj.value(&xn);
            if fnew.is_finite() && fnew >= f + armijo * t * dec {
                accepted = Some(xn);
                break;
            }
            t = t * half;
        }
        match accepted {
            Some(xn) => {
                let (fn_, gn, hn) = obj.derivs(&xn);
                if !fn_.is_finite() {
                    return Err(Error::Numerical("objective left the finite region".into()));
                }
                let gain = fn_ - f;
                x = xn;
                f = fn_;
                g = gn;
                h = hn;
                trace.push(f);
                if t == T::one() {
                    lambda = lambda * T::lit(0.1);
                    if lambda < T::lit(1e-12) {
                        lambda = T::zero();
                    }
                }
                // progress below rounding level
                if gain <= T::epsilon() * (T::one() + f.abs()) && dec <= T::lit(1e-9) * (T::one() + f.abs()) {
                    return Ok(Optimum { x, value: f, iterations: it + 1, converged: true, trace });
                }
            }
            None => {
                if dec <= T::lit(1e-9) * (T::one() + f.abs()) {
                    // rounding noise dominates the predicted gain
                    return Ok(Optimum { x, value: f, iterations: it, converged: true, trace });
                }
                if lambda > T::lit(1e12) {
                    return Ok(Optimum { x, value: f, iterations: it, converged: false, trace });
                }
                lambda = (lambda * T::lit(100.0)).max(T::lit(1e-6));
            }
        }
    }
    Ok(Optimum { x, value: f, iterations: opts.max_iter, converged: false, trace })
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    /// Initial edge length along each coordinate.
    pub step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iter: 5000, ftol: 1e-13, xtol: 1e-10, step: 0.1 }
    }
}

/// Nelder-Mead maximization.
pub fn simplex_maximize<T, const N: usize, O>(obj: &O, x0: [T; N], opts: SimplexOptions) -> Result<Optimum<T, N>>
where
    T: Real,
    O: Objective<T, N> + ?Sized,
{
    let eval = |x: &[T; N]| {
        let v = obj.value(x);
        if v.is_nan() {
            T::neg_infinity()
        } else {
            v
        }
    };
    let f0 = eval(&x0);
    if !f0.is_finite() {
        return Err(Error::Numerical(format!("objective not finite at simplex start {x0:?}")));
    }
    let mut pts: Vec<([T; N], T)> = vec![(x0, f0)];
    for i in 0..N {
        let mut x = x0;
        x[i] = x[i] + T::lit(opts.step);
        pts.push((x, eval(&x)));
    }
    let mut trace = vec![f0];
    let (two, half) = (T::lit(2.0), T::lit(0.5));
    let nf = T::lit(N as f64);
    for it in 0..opts.max_iter {
        // best first
        pts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best, worst) = (pts[0].1, pts[N].1);
        if trace.last().map_or(true, |&v| best > v) {
            trace.push(best);
        }
        let mut diam = T::zero();
        for p in &pts[1..] {
            for i in 0..N {
                diam = diam.max((p.0[i] - pts[0].0[i]).abs());
            }
        }
        if (best - worst).abs() <= T::lit(opts.ftol) * (T::one() + best.abs()) && diam <= T::lit(opts.xtol) {
            return Ok(Optimum { x: pts[0].0, value: best, iterations: it, converged: true, trace });
        }
        let mut centroid = [T::zero(); N];
        for p in &pts[..N] {
            for i in 0..N {
                centroid[i] = centroid[i] + p.0[i] / nf;
            }
        }
        let along = |c: T| {
            let mut x = centroid;
            for i in 0..N {
                x[i] = centroid[i] + c * (pts[N].0[i] - centroid[i]);
            }
            x
        };
        let xr = along(-T::one());
        let fr = eval(&xr);
        if fr > pts[0].1 {
            let xe = along(-two);
            let fe = eval(&xe);
            pts[N] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > pts[N - 1].1 {
            pts[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr > pts[N].1 {
                let x = along(-half);
                (x, eval(&x))
            } else {
                let x = along(half);
                (x, eval(&x))
            };
            if fc > pts[N].1.max(fr) {
                pts[N] = (xc, fc);
            } else {
                let x_best = pts[0].0;
                for p in pts.iter_mut().skip(1) {
                    for i in 0..N {
                        p.0[i] = x_best[i] + half * (p.0[i] - x_best[i]);
                    }
                    p.1 = eval(&p.0);
                }
            }
        }
    }
    pts.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Optimum { x: pts[0].0, value: pts[0].1, iterations: opts.max_iter, converged: false, trace })
}

/// Newton first; if it fails or stalls, a simplex search followed by a Newton
/// polish from the simplex optimum.
pub fn maximize<T, const N: usize, O>(obj: &O, x0: [T; N], opts: NewtonOptions) -> Result<Optimum<T, N>>
where
    T: Real,
    O: Objective<T, N> + ?Sized,
{
    let first = newton_maximize(obj, x0, opts);
    if let Ok(ref o) = first {
        if o.converged {
            return first;
        }
    }
    let start = match &first {
        Ok(o) => o.x,
        Err(_) => x0,
    };
    let simplex = simplex_maximize(obj, start, SimplexOptions::default())?;
    let polished = newton_maximize(obj, simplex.x, opts).unwrap_or(simplex);
    match first {
        Ok(o) if o.value > polished.value => Ok(o),
        _ => Ok(polished),
    }
}

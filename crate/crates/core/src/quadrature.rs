//! Adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-13, rel: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Clone, Debug)]
pub struct Integral<T, const N: usize> {
    pub value: [T; N],
    pub error: [T; N],
    pub intervals: usize,
}

struct Piece<T, const N: usize> {
    a: T,
    b: T,
    value: [T; N],
    error: [T; N],
    worst: T,
}

fn gk15<T: Real, const N: usize, F: FnMut(T) -> [T; N]>(f: &mut F, a: T, b: T) -> Piece<T, N> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let mut kron = [T::zero(); N];
    let mut gauss = [T::zero(); N];
    let fc = f(center);
    for i in 0..N {
        kron[i] = fc[i] * T::lit(WGK[7]);
        gauss[i] = fc[i] * T::lit(WG[3]);
    }
    for j in 0..7 {
        let dx = radius * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kron[i] = kron[i] + T::lit(WGK[j]) * s;
            if j % 2 == 1 {
                gauss[i] = gauss[i] + T::lit(WG[j / 2]) * s;
            }
        }
    }
    let mut value = [T::zero(); N];
    let mut error = [T::zero(); N];
    let mut worst = T::zero();
    for i in 0..N {
        value[i] = kron[i] * radius;
        error[i] = ((kron[i] - gauss[i]) * radius).abs();
        if error[i] > worst || error[i].is_nan() {
            worst = error[i];
        }
    }
    Piece { a, b, value, error, worst }
}

/// Integrates every component of `f` over `[a, b]`, bisecting the worst
/// subinterval until each component meets `abs + rel * |I|`.
pub fn integrate<T, const N: usize, F>(mut f: F, a: T, b: T, tol: Tolerance) -> Result<Integral<T, N>>
where
    T: Real,
    F: FnMut(T) -> [T; N],
{
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Quadrature(format!("invalid interval [{a}, {b}]")));
    }
    let mut pieces = vec![gk15(&mut f, a, b)];
    loop {
        let mut total = [T::zero(); N];
        let mut err = [T::zero(); N];
        for p in &pieces {
            for i in 0..N {
                total[i] = total[i] + p.value[i];
                err[i] = err[i] + p.error[i];
            }
        }
        if total.iter().chain(err.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a}, {b}] after {} intervals",
                pieces.len()
            )));
        }
        let converged = (0..N)
            .all(|i| err[i] <= T::lit(tol.abs).max(T::lit(tol.rel) * total[i].abs()));
        if converged {
            return Ok(Integral { value: total, error: err, intervals: pieces.len() });
        }
        if pieces.len() >= tol.max_intervals {
            let worst = err.iter().fold(T::zero(), |m, &e| m.max(e));
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] with {} intervals, error estimate {worst}",
                pieces.len()
            )));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bw), (i, p)| if p.worst > bw { (i, p.worst) } else { (bi, bw) });
        let p = pieces.swap_remove(idx);
        let mid = T::lit(0.5) * (p.a + p.b);
        pieces.push(gk15(&mut f, p.a, mid));
        pieces.push(gk15(&mut f, mid, p.b));
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: Tolerance) -> Result<T> {
    integrate(|x| [f(x)], a, b, tol).map(|r| r.value[0])
}

use mixhom::geometry::{classify_limit, score_covariance, score_covariance_scaled, CaseTag};
use mixhom::quadrature::{integrate, Tolerance};
use mixhom::rng::seeded;
use mixhom::Kernel;
use rand_distr::Distribution;

fn kernels() -> Vec<Kernel> {
    vec![
        Kernel::logistic(),
        Kernel::extreme_value(),
        Kernel::normal(),
        Kernel::student_t(6.0).unwrap(),
        Kernel::student_t(10.0).unwrap(),
        Kernel::student_t(14.0).unwrap(),
    ]
}

fn b_of(k: &Kernel, x: f64) -> [f64; 5] {
    k.score_vector(x).unwrap().to_array()
}

#[test]
fn density_integrates_to_one_and_scores_are_centred() {
    for k in kernels() {
        let sm = score_covariance::<f64>(&k).unwrap();
        let (lo, hi) = sm.range;
        let tol = Tolerance::default();
        let total = integrate(|x: f64| [k.f0(x)], lo, hi, tol).unwrap().value[0];
        assert!((total - 1.0).abs() < 1e-9, "{k}: {total}");
        let mean = integrate(
            |x: f64| {
                let b = b_of(&k, x);
                let f = k.f0(x);
                [b[0] * f, b[1] * f, b[2] * f, b[3] * f, b[4] * f]
            },
            lo,
            hi,
            tol,
        )
        .unwrap()
        .value;
        for (i, m) in mean.iter().enumerate() {
            assert!(m.abs() < 1e-6, "{k}: E[b_{i}] = {m}");
        }
    }
}

#[test]
fn residual_second_order_scores_are_orthogonal_to_first_order() {
    for k in kernels() {
        let sm = score_covariance::<f64>(&k).unwrap();
        let r = sm.regression();
        let (lo, hi) = sm.range;
        let cov = integrate(
            |x: f64| {
                let b = b_of(&k, x);
                let f = k.f0(x);
                let mut out = [0.0; 6];
                for j in 0..3 {
                    let resid = b[2 + j] - r[j][0] * b[0] - r[j][1] * b[1];
                    out[j] = b[0] * resid * f;
                    out[3 + j] = b[1] * resid * f;
                }
                out
            },
            lo,
            hi,
            Tolerance::default(),
        )
        .unwrap()
        .value;
        for c in cov {
            assert!(c.abs() < 1e-6, "{k}: {cov:?}");
        }
    }
}

#[test]
fn monte_carlo_moments_agree_with_quadrature() {
    let draws = 1_000_000;
    for (s, k) in kernels().into_iter().enumerate() {
        let sm = score_covariance::<f64>(&k).unwrap();
        let sampler = k.sampler();
        let mut rng = seeded(100 + s as u64);
        let mut sum = [[0.0f64; 5]; 5];
        let mut sum_sq = [[0.0f64; 5]; 5];
        for _ in 0..draws {
            let b = b_of(&k, sampler.sample(&mut rng));
            for i in 0..5 {
                for j in 0..5 {
                    let p = b[i] * b[j];
                    sum[i][j] += p;
                    sum_sq[i][j] += p * p;
                }
            }
        }
        let n = draws as f64;
        for i in 0..5 {
            for j in 0..5 {
                let m = sum[i][j] / n;
                let se = ((sum_sq[i][j] / n - m * m) / n).sqrt();
                assert!(
                    (m - sm.b[i][j]).abs() <= 4.0 * se + 1e-12,
                    "{k} B[{i}][{j}]: MC {m} +- {se} vs quadrature {}",
                    sm.b[i][j]
                );
            }
        }
    }
}

#[test]
fn classification_is_stable_under_grid_changes() {
    for k in kernels() {
        let base = classify_limit(&k, &score_covariance::<f64>(&k).unwrap()).unwrap();
        for scale in [0.9, 1.1] {
            let sm = score_covariance_scaled::<f64>(&k, scale).unwrap();
            assert_eq!(classify_limit(&k, &sm).unwrap().tag, base.tag, "{k} at grid scale {scale}");
        }
        assert_eq!(classify_limit(&k, &score_covariance::<f64>(&k).unwrap()).unwrap(), base);
    }
}

#[test]
fn single_precision_matrices_track_double() {
    for k in [Kernel::logistic(), Kernel::extreme_value()] {
        let d = score_covariance::<f64>(&k).unwrap();
        let s = score_covariance::<f32>(&k).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let rel = (s.tilde_b22[i][j] as f64 - d.tilde_b22[i][j]).abs() / d.tilde_b22[i][i].abs().max(1.0);
                assert!(rel < 1e-3, "{k} [{i}][{j}]");
            }
        }
        assert_eq!(classify_limit(&k, &s).unwrap().tag, CaseTag::CaseI);
    }
}

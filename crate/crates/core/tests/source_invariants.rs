use nalgebra::Vector4;
use proptest::prelude::*;
use qgs_core::source::{cross_spectral_density, gaussian_pdf, joint_pdf, mean_cov};
use qgs_core::{BeamProfile, Complex64, TwoPointParams};

/// Tensor trapezoid rule of `f` over `mean ± 8σ` per real coordinate, with
/// the integrand weighted by `weight`.
fn grid_integral<F>(p: &TwoPointParams, points: usize, weight: F) -> Complex64
where
    F: Fn(Complex64, Complex64) -> Complex64,
{
    let s1 = (p.n1 / 2.0).sqrt();
    let s2 = (p.n2 / 2.0).sqrt();
    let axis = |c: f64, s: f64| -> (Vec<f64>, f64) {
        let h = 16.0 * s / (points - 1) as f64;
        ((0..points).map(|i| c - 8.0 * s + i as f64 * h).collect(), h)
    };
    let (x1, h1) = axis(p.mu1.re, s1);
    let (y1, _) = axis(p.mu1.im, s1);
    let (x2, h2) = axis(p.mu2.re, s2);
    let (y2, _) = axis(p.mu2.im, s2);
    let mut total = Complex64::new(0.0, 0.0);
    for &a in &x1 {
        for &b in &y1 {
            let alpha = Complex64::new(a, b);
            for &c in &x2 {
                for &d in &y2 {
                    let beta = Complex64::new(c, d);
                    total += weight(alpha, beta) * joint_pdf(p, alpha, beta).unwrap();
                }
            }
        }
    }
    total * (h1 * h1 * h2 * h2)
}

fn params() -> Vec<TwoPointParams> {
    vec![
        TwoPointParams::new(1.0, 1.0, 0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).unwrap(),
        TwoPointParams::new(1.0, 4.0, 0.5, Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)).unwrap(),
        TwoPointParams::new(0.7, 0.3, 0.9, Complex64::new(-0.4, 0.3), Complex64::new(0.2, 0.1)).unwrap(),
    ]
}

#[test]
fn joint_pdf_is_normalized() {
    for p in params() {
        let total = grid_integral(&p, 49, |_, _| Complex64::new(1.0, 0.0));
        assert!((total.re - 1.0).abs() < 1e-6, "{p:?}: {total}");
    }
}

#[test]
fn joint_pdf_recovers_cross_spectral_density() {
    for p in params() {
        let w = grid_integral(&p, 49, |a, b| a.conj() * b);
        let expected = cross_spectral_density(&p);
        assert!((w - expected).norm() < 1e-6, "{p:?}: {w} vs {expected}");
        let i1 = grid_integral(&p, 49, |a, _| Complex64::new(a.norm_sqr(), 0.0));
        assert!((i1.re - (p.n1 + p.mu1.norm_sqr())).abs() < 1e-6);
    }
}

#[test]
fn covariance_determinant_closed_form() {
    for p in params() {
        let det = mean_cov(&p).determinant();
        let expected = (0.25 * p.n1 * p.n2 * (1.0 - p.g * p.g)).powi(2);
        assert!((det - expected).abs() <= 1e-14 * expected, "{det} vs {expected}");
    }
}

#[test]
fn profile_is_even_about_the_center() {
    let beam = BeamProfile::new(0.8, Complex64::new(1.0, 0.0), 4.0, 1.0).unwrap();
    for d in [0.3, 1.0, 2.5] {
        assert_eq!(beam.two_point_params(0.0, d).unwrap(), beam.two_point_params(0.0, -d).unwrap());
    }
}

proptest! {
    #[test]
    fn joint_pdf_equals_gaussian_of_mean_cov(
        gi in 0usize..3,
        n1 in 0.05f64..3.0,
        n2 in 0.05f64..3.0,
        m in prop::array::uniform4(-1.5f64..1.5),
        r in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let g = [0.0, 0.3, 0.9][gi];
        let p = TwoPointParams::new(n1, n2, g, Complex64::new(m[0], m[1]), Complex64::new(m[2], m[3])).unwrap();
        let alpha = p.mu1 + Complex64::new(r[0], r[1]) * n1.sqrt();
        let beta = p.mu2 + Complex64::new(r[2], r[3]) * n2.sqrt();
        let direct = joint_pdf(&p, alpha, beta).unwrap();
        let via = gaussian_pdf(&mean_cov(&p), &Vector4::new(alpha.re, alpha.im, beta.re, beta.im)).unwrap();
        prop_assert!((direct - via).abs() <= 1e-12 * via, "{direct} vs {via}");
    }
}

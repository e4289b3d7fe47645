//! Numerical quadrature: globally adaptive Gauss-Kronrod (7/15) on finite
//! intervals and Gauss-Hermite rules for Gaussian-weighted integrals.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{QgsError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod abscissae 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    magnitude: f64,
    error: f64,
}

fn gauss_kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_kronrod = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_kronrod += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        magnitude: abs_kronrod * half.abs(),
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrate `f` over `[a, b]` until the estimated absolute error is at most
/// `max(abs_tol, rel_tol * ∫|f|)`. Measuring the relative part against the
/// L1 norm keeps integrals that cancel to (near) zero from refining forever
/// on rounding noise.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(QgsError::Domain(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }

    // Start from a handful of panels so narrow peaks are not missed.
    const INITIAL_PANELS: usize = 8;
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut segments: Vec<Segment> = (0..INITIAL_PANELS)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == INITIAL_PANELS { b } else { lo + width };
            gauss_kronrod(&mut f, lo, hi)
        })
        .collect();
    let mut evaluations = 15 * INITIAL_PANELS;

    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let magnitude: f64 = segments.iter().map(|s| s.magnitude).sum();
        if !value.is_finite() {
            return Err(QgsError::Convergence("integrand produced a non-finite value".into()));
        }
        if error <= abs_tol.max(rel_tol * magnitude) {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(QgsError::Convergence(format!(
                "estimated error {error:.3e} above tolerance after {} subintervals",
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(QgsError::Convergence("interval bisection underflowed".into()));
        }
        segments.push(gauss_kronrod(&mut f, seg.a, mid));
        segments.push(gauss_kronrod(&mut f, mid, seg.b));
        evaluations += 30;
    }
}

/// Gauss-Hermite rule for the weight `exp(-x^2)`: nodes ascending, weights
/// summing to `sqrt(pi)`. Exact for polynomials of degree `2n - 1`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    // Golub-Welsch eigenvalues as starting points, polished by Newton on the
    // orthonormal Hermite recurrence.
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = off;
        jacobi[(k - 1, k)] = off;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let mut deriv = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = *x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            deriv = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / deriv;
            *x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        weights.push(2.0 / (deriv * deriv));
    }
    (nodes, weights)
}

/// Gauss-Hermite rule for the standard normal density: `Σ w_i g(x_i)`
/// approximates `E[g(Z)]` with `Z ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_hermite(n);
    let scale = std::f64::consts::PI.sqrt().recip();
    (
        x.into_iter().map(|t| t * std::f64::consts::SQRT_2).collect(),
        w.into_iter().map(|t| t * scale).collect(),
    )
}

//! Correlated complex-Gaussian field samples and Poisson photon counts.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QgsError, Result};
use crate::source::TwoPointParams;
use crate::specfun::ln_factorial;

/// Above this degree of coherence the covariance is factored through its
/// eigen-decomposition instead of Cholesky.
pub const EIGEN_FALLBACK_G: f64 = 0.999;

/// Means at or above this use transformed rejection instead of inversion.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    /// `r = μ + C z` with `C Cᵀ = Γ`.
    Full(Matrix4<f64>),
    /// `β - μ₂ = κ (α - μ₁)` with `α - μ₁` complex normal of variance `n̄₁`.
    Degenerate { scale: f64, kappa: f64 },
}

/// Draws `(α, β)` from the two-point amplitude distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSampler {
    mu: Vector4<f64>,
    factor: Factor,
}

impl FieldSampler {
    pub fn new(p: &TwoPointParams) -> Result<Self> {
        p.validate()?;
        let mc = p.mean_cov();
        let factor = if p.is_degenerate() {
            Factor::Degenerate {
                scale: (0.5 * p.n1).sqrt(),
                kappa: (p.n2 / p.n1).sqrt(),
            }
        } else if p.g > EIGEN_FALLBACK_G {
            Factor::Full(eigen_factor(&mc.gamma)?)
        } else {
            let chol = mc.gamma.cholesky().ok_or_else(|| {
                QgsError::Singular(format!("Cholesky factorization failed at g = {}", p.g))
            })?;
            Factor::Full(chol.l())
        };
        Ok(Self { mu: mc.mu, factor })
    }

    /// The factor `C` with `C Cᵀ = Γ`, when the covariance is not singular.
    pub fn factor(&self) -> Option<Matrix4<f64>> {
        match self.factor {
            Factor::Full(c) => Some(c),
            Factor::Degenerate { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Complex64, Complex64) {
        match self.factor {
            Factor::Full(c) => {
                let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let r = self.mu + c * z;
                (Complex64::new(r[0], r[1]), Complex64::new(r[2], r[3]))
            }
            Factor::Degenerate { scale, kappa } => {
                let dx = scale * rng.sample::<f64, _>(StandardNormal);
                let dy = scale * rng.sample::<f64, _>(StandardNormal);
                (
                    Complex64::new(self.mu[0] + dx, self.mu[1] + dy),
                    Complex64::new(self.mu[2] + kappa * dx, self.mu[3] + kappa * dy),
                )
            }
        }
    }
}

/// `V √Λ` from the symmetric eigen-decomposition, with roundoff-negative
/// eigenvalues clamped to zero.
fn eigen_factor(gamma: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let eig = SymmetricEigen::new(*gamma);
    let largest = eig.eigenvalues.max();
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * largest) {
        return Err(QgsError::Singular("covariance has a negative eigenvalue".into()));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix4::from_diagonal(&roots))
}

/// Poisson deviate: sequential inversion for small means, Hörmann's
/// transformed rejection (PTRS) otherwise.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    if lambda < POISSON_INVERSION_LIMIT {
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let u: f64 = rng.random();
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            let next = cdf + p;
            if next == cdf {
                // The remaining mass is below rounding; restart the draw.
                return sample_poisson(lambda, rng);
            }
            cdf = next;
        }
        return k;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_factorial(k as usize);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Photon counts of one ensemble member: independent Poisson deviates with
/// means `|α|²` and `|β|²`.
pub fn sample_counts<R: Rng + ?Sized>(field: (Complex64, Complex64), rng: &mut R) -> (u64, u64) {
    let n1 = sample_poisson(field.0.norm_sqr(), rng);
    let n2 = sample_poisson(field.1.norm_sqr(), rng);
    (n1, n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vacuum_never_clicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = Complex64::new(0.0, 0.0);
        for _ in 0..1000 {
            assert_eq!(sample_counts((zero, zero), &mut rng), (0, 0));
        }
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for lambda in [0.3, 4.0, 29.0, 31.0, 250.0] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| sample_poisson(lambda, &mut rng) as f64).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 5.0 * se, "λ={lambda} mean {mean}");
            assert!((var / lambda - 1.0).abs() < 0.03, "λ={lambda} var {var}");
        }
    }

    #[test]
    fn factors_reproduce_covariance() {
        let mu = Complex64::new(0.4, -0.1);
        for g in [0.0, 0.5, 0.9995] {
            let p = TwoPointParams::new(1.3, 0.6, g, mu, mu).unwrap();
            let c = FieldSampler::new(&p).unwrap().factor().unwrap();
            let gamma = p.mean_cov().gamma;
            assert!((c * c.transpose() - gamma).abs().max() < 1e-14, "g={g}");
        }
    }

    #[test]
    fn degenerate_sampler_locks_amplitudes() {
        let z = Complex64::new(0.0, 0.0);
        let p = TwoPointParams::new(2.0, 0.5, 1.0, z, z).unwrap();
        let s = FieldSampler::new(&p).unwrap();
        assert!(s.factor().is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (a, b) = s.sample(&mut rng);
            assert!((b - a * 0.5).norm() < 1e-15);
        }
    }
}

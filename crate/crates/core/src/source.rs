//! Partially coherent source: a coherent beam superposed with a
//! Gaussian-Schell thermal beam, reduced to the Gaussian statistics of the
//! field at two transverse points.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QgsError, Result};

/// Degrees of coherence at or above `1 - DEGENERACY_TOLERANCE` are treated
/// as the fully coherent (singular covariance) limit.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Transverse profile of the beam. Widths are in squared transverse units:
/// intensity falls as `exp(-s²/σ₀)`, coherence as `exp(-Δs²/σ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    /// Peak mean thermal photon number per detection mode.
    pub n_peak: f64,
    /// Peak coherent amplitude; its phase is constant across the beam.
    pub mu_peak: Complex64,
    pub sigma0: f64,
    pub sigma1: f64,
}

impl BeamProfile {
    pub fn new(n_peak: f64, mu_peak: Complex64, sigma0: f64, sigma1: f64) -> Result<Self> {
        let profile = Self {
            n_peak,
            mu_peak,
            sigma0,
            sigma1,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.n_peak) || !positive(self.sigma0) || !positive(self.sigma1) {
            return Err(QgsError::Domain(format!(
                "beam profile needs n_peak, sigma0, sigma1 > 0, got {}, {}, {}",
                self.n_peak, self.sigma0, self.sigma1
            )));
        }
        if !(self.mu_peak.re.is_finite() && self.mu_peak.im.is_finite()) {
            return Err(QgsError::Domain("beam profile has a non-finite coherent amplitude".into()));
        }
        Ok(())
    }

    /// Mean thermal photon number and coherent amplitude at position `s`.
    pub fn profile_at(&self, s: f64) -> (f64, Complex64) {
        let envelope = (-s * s / self.sigma0).exp();
        (self.n_peak * envelope, self.mu_peak * envelope)
    }

    /// Normalized degree of coherence between two points; exactly 1 when
    /// they coincide.
    pub fn degree_of_coherence(&self, s1: f64, s2: f64) -> f64 {
        let d = s1 - s2;
        (-d * d / self.sigma1).exp()
    }

    pub fn two_point_params(&self, s1: f64, s2: f64) -> Result<TwoPointParams> {
        let (n1, mu1) = self.profile_at(s1);
        let (n2, mu2) = self.profile_at(s2);
        TwoPointParams::new(n1, n2, self.degree_of_coherence(s1, s2), mu1, mu2)
    }
}

/// Free-function form of [`BeamProfile::profile_at`].
pub fn profile_at(profile: &BeamProfile, s: f64) -> (f64, Complex64) {
    profile.profile_at(s)
}

/// Free-function form of [`BeamProfile::degree_of_coherence`].
pub fn degree_of_coherence(profile: &BeamProfile, s1: f64, s2: f64) -> f64 {
    profile.degree_of_coherence(s1, s2)
}

/// Free-function form of [`BeamProfile::two_point_params`].
pub fn two_point_params(profile: &BeamProfile, s1: f64, s2: f64) -> Result<TwoPointParams> {
    profile.two_point_params(s1, s2)
}

/// Reduced description of the field at two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointParams {
    pub n1: f64,
    pub n2: f64,
    pub g: f64,
    pub mu1: Complex64,
    pub mu2: Complex64,
}

impl TwoPointParams {
    pub fn new(n1: f64, n2: f64, g: f64, mu1: Complex64, mu2: Complex64) -> Result<Self> {
        let p = Self { n1, n2, g, mu1, mu2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n1 > 0.0 && self.n1.is_finite() && self.n2 > 0.0 && self.n2.is_finite()) {
            return Err(QgsError::Domain(format!(
                "mean photon numbers must be positive, got n1 = {}, n2 = {}",
                self.n1, self.n2
            )));
        }
        if !(0.0..=1.0).contains(&self.g) {
            return Err(QgsError::Domain(format!(
                "degree of coherence must lie in [0, 1], got {}",
                self.g
            )));
        }
        let finite = |c: Complex64| c.re.is_finite() && c.im.is_finite();
        if !finite(self.mu1) || !finite(self.mu2) {
            return Err(QgsError::Domain("coherent amplitudes must be finite".into()));
        }
        Ok(())
    }

    /// True when `g` is numerically indistinguishable from 1.
    pub fn is_degenerate(&self) -> bool {
        self.g >= 1.0 - DEGENERACY_TOLERANCE
    }

    /// `1 - g²`, computed without cancellation.
    pub fn one_minus_g2(&self) -> f64 {
        (1.0 - self.g) * (1.0 + self.g)
    }

    /// Cross-spectral density `⟨α* β⟩ = μ₁* μ₂ + g √(n̄₁ n̄₂)`.
    pub fn cross_spectral_density(&self) -> Complex64 {
        self.mu1.conj() * self.mu2 + self.g * (self.n1 * self.n2).sqrt()
    }

    pub fn mean_cov(&self) -> MeanCov {
        let p = self;
        let c = 0.5 * p.g * (p.n1 * p.n2).sqrt();
        let a = 0.5 * p.n1;
        let b = 0.5 * p.n2;
        #[rustfmt::skip]
        let gamma = Matrix4::new(
            a,   0.0, c,   0.0,
            0.0, a,   0.0, c,
            c,   0.0, b,   0.0,
            0.0, c,   0.0, b,
        );
        MeanCov {
            mu: Vector4::new(p.mu1.re, p.mu1.im, p.mu2.re, p.mu2.im),
            gamma,
            degenerate: p.is_degenerate(),
        }
    }

    /// Joint density of the coherent amplitudes `(α, β)`.
    pub fn joint_pdf(&self, alpha: Complex64, beta: Complex64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(QgsError::Degenerate(format!(
                "g = {} leaves the amplitudes without a joint density",
                self.g
            )));
        }
        let eps = self.one_minus_g2();
        let da = alpha - self.mu1;
        let db = beta - self.mu2;
        let root = (self.n1 * self.n2).sqrt();
        let exponent = -da.norm_sqr() / (self.n1 * eps) - db.norm_sqr() / (self.n2 * eps)
            + 2.0 * self.g * (da.conj() * db).re / (root * eps);
        Ok(exponent.exp() / (std::f64::consts::PI.powi(2) * self.n1 * self.n2 * eps))
    }
}

pub fn cross_spectral_density(p: &TwoPointParams) -> Complex64 {
    p.cross_spectral_density()
}

pub fn mean_cov(p: &TwoPointParams) -> MeanCov {
    p.mean_cov()
}

pub fn joint_pdf(p: &TwoPointParams, alpha: Complex64, beta: Complex64) -> Result<f64> {
    p.joint_pdf(alpha, beta)
}

/// Mean and covariance of `(Re α, Im α, Re β, Im β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCov {
    pub mu: Vector4<f64>,
    pub gamma: Matrix4<f64>,
    /// Set when the covariance is singular (g = 1 limit).
    pub degenerate: bool,
}

impl MeanCov {
    /// Closed-form determinant `(n̄₁ n̄₂ (1 - g²) / 4)²` is what this should
    /// equal; computed here from the matrix itself.
    pub fn determinant(&self) -> f64 {
        self.gamma.determinant()
    }

    /// Density of the real Gaussian 4-vector at `r`, via a Cholesky factor
    /// of the covariance.
    pub fn gaussian_pdf(&self, r: &Vector4<f64>) -> Result<f64> {
        let chol = self.gamma.cholesky().ok_or_else(|| {
            QgsError::Singular("covariance is not positive definite".into())
        })?;
        let l = chol.l();
        let det_sqrt: f64 = (0..4).map(|i| l[(i, i)]).product();
        // Compare against the diagonal so the test is scale-free: the ratio
        // is the square root of the correlation-matrix determinant.
        let scale: f64 = (0..4).map(|i| self.gamma[(i, i)]).product::<f64>().sqrt();
        if !(det_sqrt > 1e-10 * scale) {
            return Err(QgsError::Singular(format!(
                "covariance determinant {:.3e} is too small",
                det_sqrt * det_sqrt
            )));
        }
        let y = l
            .solve_lower_triangular(&(r - self.mu))
            .ok_or_else(|| QgsError::Singular("triangular solve failed".into()))?;
        let quad = y.norm_squared();
        Ok((-0.5 * quad).exp() / (4.0 * std::f64::consts::PI.powi(2) * det_sqrt))
    }
}

pub fn gaussian_pdf(mc: &MeanCov, r: &Vector4<f64>) -> Result<f64> {
    mc.gaussian_pdf(r)
}

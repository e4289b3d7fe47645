//! Direct numerical evaluation of density-matrix elements, independent of
//! the closed form: the amplitude density times `exp(-|α|² - |β|²)` is again
//! a Gaussian in the four real field components, so each element is a
//! polynomial expectation under that Gaussian, which tensor-product
//! Gauss-Hermite quadrature integrates exactly.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use super::FockIndex;
use crate::error::{QgsError, Result};
use crate::source::TwoPointParams;
use crate::specfun::ln_factorial;
use crate::specfun::quad::gauss_hermite_normal;

/// Largest `N + M + K + L` accepted by the quadrature oracle.
pub const MAX_QUADRATURE_ORDER: usize = 20;

struct Rule {
    points: Vec<(Complex64, Complex64, f64)>,
}

impl Rule {
    fn new(center: &Vector4<f64>, factor: &Matrix4<f64>, nodes: usize) -> Self {
        let (x, w) = gauss_hermite_normal(nodes);
        let mut points = Vec::with_capacity(nodes.pow(4));
        for a in 0..nodes {
            for b in 0..nodes {
                for c in 0..nodes {
                    for d in 0..nodes {
                        let z = Vector4::new(x[a], x[b], x[c], x[d]);
                        let r = center + factor * z;
                        points.push((
                            Complex64::new(r[0], r[1]),
                            Complex64::new(r[2], r[3]),
                            w[a] * w[b] * w[c] * w[d],
                        ));
                    }
                }
            }
        }
        Self { points }
    }

    /// `Σ w αᴺ α*ᴷ βᴹ β*ᴸ` for every index, with the matching `Σ w |…|`.
    fn expectations(&self, indices: &[FockIndex], max_power: usize) -> (Vec<Complex64>, Vec<f64>) {
        let mut sums = vec![Complex64::new(0.0, 0.0); indices.len()];
        let mut mags = vec![0.0; indices.len()];
        let mut pa = vec![Complex64::new(1.0, 0.0); max_power + 1];
        let mut pb = pa.clone();
        for &(alpha, beta, w) in &self.points {
            for k in 1..=max_power {
                pa[k] = pa[k - 1] * alpha;
                pb[k] = pb[k - 1] * beta;
            }
            for (i, idx) in indices.iter().enumerate() {
                let t = pa[idx.n] * pa[idx.k].conj() * pb[idx.m] * pb[idx.l].conj() * w;
                sums[i] += t;
                mags[i] += t.norm();
            }
        }
        (sums, mags)
    }
}

/// Oracle evaluation of a batch of density-matrix elements.
pub fn rho_elements_quadrature(p: &TwoPointParams, indices: &[FockIndex]) -> Result<Vec<Complex64>> {
    p.validate()?;
    if p.is_degenerate() {
        return Err(QgsError::Degenerate(format!(
            "quadrature oracle needs g < 1, got g = {}",
            p.g
        )));
    }
    let order = indices.iter().map(|i| i.order()).max().unwrap_or(0);
    if order > MAX_QUADRATURE_ORDER {
        return Err(QgsError::Domain(format!(
            "quadrature oracle limited to N+M+K+L <= {MAX_QUADRATURE_ORDER}, got {order}"
        )));
    }
    let max_power = indices
        .iter()
        .map(|i| i.n.max(i.m).max(i.k).max(i.l))
        .max()
        .unwrap_or(0);

    let mc = p.mean_cov();
    let gamma_inv = mc
        .gamma
        .cholesky()
        .ok_or_else(|| QgsError::Singular("covariance is not positive definite".into()))?
        .inverse();
    let precision = gamma_inv + Matrix4::identity() * 2.0;
    let chol = precision
        .cholesky()
        .ok_or_else(|| QgsError::Singular("combined precision is not positive definite".into()))?;
    let sigma = chol.inverse();
    let pulled = gamma_inv * mc.mu;
    let center = sigma * pulled;
    let ln_c = 0.5 * (sigma.determinant() / mc.gamma.determinant()).ln()
        - 0.5 * mc.mu.dot(&pulled)
        + 0.5 * center.dot(&pulled);
    let factor = sigma
        .cholesky()
        .ok_or_else(|| QgsError::Singular("combined covariance is not positive definite".into()))?
        .l();

    // n nodes integrate degree 2n - 1 exactly; a finer rule checks it.
    let nodes = order / 2 + 1;
    let (coarse, _) = Rule::new(&center, &factor, nodes).expectations(indices, max_power);
    let (fine, mags) = Rule::new(&center, &factor, nodes + 2).expectations(indices, max_power);

    indices
        .iter()
        .enumerate()
        .map(|(i, idx)| {
            if (coarse[i] - fine[i]).norm() > 1e-11 * mags[i] {
                return Err(QgsError::Convergence(format!(
                    "quadrature rules disagree for {idx:?}: {} vs {}",
                    coarse[i], fine[i]
                )));
            }
            let ln_norm = ln_c
                - 0.5 * (ln_factorial(idx.n) + ln_factorial(idx.m) + ln_factorial(idx.k) + ln_factorial(idx.l));
            Ok(fine[i] * ln_norm.exp())
        })
        .collect()
}

/// Oracle evaluation of one density-matrix element.
pub fn rho_element_quadrature(p: &TwoPointParams, idx: FockIndex) -> Result<Complex64> {
    Ok(rho_elements_quadrature(p, &[idx])?[0])
}

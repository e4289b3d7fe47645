//! Choosing the thermal share of the beam from a target `g⁽²⁾(0)`.
//!
//! At a single point the field is thermal light of mean `n̄` on top of a
//! coherent amplitude `μ`, so with `f = n̄ / (n̄ + |μ|²)` the intensity
//! correlation is `1 + 2f - f²`.

use qgs_core::{BeamProfile, QgsError, Result};

const BISECTION_TOLERANCE: f64 = 1e-10;

/// `1 + 2f - f²`, the zero-delay intensity correlation at thermal share `f`.
pub fn g2_of_thermal_fraction(f: f64) -> f64 {
    1.0 + 2.0 * f - f * f
}

/// Thermal share `f ∈ [0, 1]` with `1 + 2f - f² = target`, by bisection.
/// The endpoints `target = 1` (pure coherent) and `2` (pure thermal) are
/// accepted here.
pub fn thermal_fraction_for_g2(target: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&target) {
        return Err(QgsError::Domain(format!("g2(0) target must lie in [1, 2], got {target}")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if g2_of_thermal_fraction(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if target == 1.0 {
        0.0
    } else if target == 2.0 {
        1.0
    } else {
        0.5 * (lo + hi)
    })
}

/// Profile with `n_peak` rescaled so that two detectors at the beam center
/// see `g⁽²⁾(0) = target`. The coherent amplitude and widths are kept.
///
/// Needs `1 < target < 2`: the endpoints would require `n_peak = 0` or an
/// infinite `n_peak`, neither of which is a valid profile.
pub fn fit_g2_zero(target: f64, profile: &BeamProfile) -> Result<BeamProfile> {
    if !(target > 1.0 && target < 2.0) {
        return Err(QgsError::Domain(format!("g2(0) target must lie in (1, 2), got {target}")));
    }
    let c = profile.mu_peak.norm_sqr();
    if !(c > 0.0) {
        return Err(QgsError::Domain(
            "fitting g2(0) needs a nonzero coherent amplitude to scale against".into(),
        ));
    }
    let f = thermal_fraction_for_g2(target)?;
    BeamProfile::new(f * c / (1.0 - f), profile.mu_peak, profile.sigma0, profile.sigma1)
}

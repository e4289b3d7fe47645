//! Fixtures shared by the benchmarks.

use qgs_core::{BeamProfile, Complex64, TwoPointParams};

/// Default beam: `|μ|² = 1` with the thermal share that gives `g⁽²⁾(0) = 1.7`.
pub fn default_beam() -> BeamProfile {
    let f = 1.0 - 0.3f64.sqrt();
    BeamProfile::new(f / (1.0 - f), Complex64::new(1.0, 0.0), 4.0, 1.0).expect("valid profile")
}

/// Two detectors of the default beam, `d` apart with detector 1 at the center.
pub fn default_params(d: f64) -> TwoPointParams {
    default_beam().two_point_params(0.0, d).expect("valid parameters")
}

/// A generic partially coherent configuration with both amplitudes nonzero.
pub fn generic_params() -> TwoPointParams {
    TwoPointParams::new(0.8, 0.5, 0.6, Complex64::new(0.6, 0.2), Complex64::new(0.3, -0.1)).expect("valid parameters")
}

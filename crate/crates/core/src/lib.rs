//! Photon-number statistics of partially coherent light.
//!
//! A coherent beam superposed with a Gaussian-Schell thermal beam is reduced
//! to the Gaussian statistics of the field at two detectors ([`source`]).
//! [`fock`] turns those statistics into Fock-basis density-matrix elements,
//! joint photon-number distributions and multiphoton correlation functions,
//! and [`mc`] samples the same state directly as an independent check.

pub mod error;
pub mod fock;
pub mod mc;
pub mod source;
pub mod specfun;

pub use num_complex::Complex64;

pub use error::{QgsError, Result};
pub use fock::{FockIndex, JointPND};
pub use source::{BeamProfile, MeanCov, TwoPointParams};
pub use mc::{EmpiricalPND, SamplerConfig};

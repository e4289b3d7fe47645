//! Command-line front end for the `qgs-core` photon statistics: separation
//! scans of the multiphoton correlations, Monte Carlo validation of the
//! analytic distribution, and `g⁽²⁾(0)` fitting.

pub mod config;
pub mod emit;
pub mod error;
pub mod fit;
pub mod scan;
pub mod validate;

pub use config::{McSettings, OutputFormat, Overrides, ScanConfig};
pub use error::{CliError, CliResult};
pub use fit::{fit_g2_zero, thermal_fraction_for_g2};
pub use scan::{run_scan, ScanRow};
pub use validate::{run_validate, ValidateOptions, ValidationReport};

/// Environment variable that sets the worker count.
pub const WORKERS_ENV: &str = "QGS_WORKERS";

/// Worker count: `QGS_WORKERS` if set, else `configured`, else the number
/// of available cores.
pub fn worker_count(configured: Option<usize>) -> CliResult<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
    }
}

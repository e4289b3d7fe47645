//! Detector-separation scans of the multiphoton correlations.

use qgs_core::fock::{classical_g2, joint_pnd_for_pairs, wavepacket_g2_certified, JointPND, PndOptions};
use qgs_core::QgsError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScanConfig;
use crate::error::{CliError, CliResult};

/// Marginal probability below which `g̃⁽²⁾` is reported as undefined.
/// Far below anything a scan of modest photon numbers produces; the
/// certified-digit check is the effective guard.
pub const SCAN_MARGINAL_FLOOR: f64 = 1e-200;

pub const FLAG_LOG_UNDEFINED: &str = "log-undefined";
pub const FLAG_UNDERFLOW: &str = "underflow";
pub const FLAG_PRECISION: &str = "precision-loss";
pub const FLAG_TRUNCATION: &str = "truncation";
pub const FLAG_FAILED: &str = "numerical-failure";
pub const FLAG_CLASSICAL: &str = "classical-g2-undefined";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub separation: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub g2_tilde: Option<f64>,
    pub log2_g2_tilde: Option<f64>,
    pub classical_g2: Option<f64>,
    pub tail_mass: Option<f64>,
    pub flags: Vec<String>,
}

impl ScanRow {
    /// A row whose distribution itself could not be computed.
    pub fn is_hard_failure(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_TRUNCATION || f == FLAG_FAILED)
    }
}

fn flag_for(e: &QgsError) -> &'static str {
    match e {
        QgsError::Underflow(_) => FLAG_UNDERFLOW,
        QgsError::PrecisionLoss { .. } | QgsError::Certification(_) => FLAG_PRECISION,
        QgsError::Truncation { .. } => FLAG_TRUNCATION,
        _ => FLAG_FAILED,
    }
}

/// Certified joint distribution for detector 2 at `separation`, with the
/// rows and columns of every pair certified against truncation.
pub fn pnd_at(cfg: &ScanConfig, separation: f64) -> Result<JointPND, QgsError> {
    let p = cfg
        .profile
        .two_point_params(cfg.fixed_position, cfg.fixed_position + separation)?;
    joint_pnd_for_pairs(&p, cfg.n_max, &cfg.pairs, &PndOptions::default())
}

/// Rows for one scan position, in configured pair order.
pub fn rows_at(cfg: &ScanConfig, separation: f64) -> Vec<ScanRow> {
    let row = |n: usize, m: usize| ScanRow {
        separation,
        n,
        m,
        g2_tilde: None,
        log2_g2_tilde: None,
        classical_g2: None,
        tail_mass: None,
        flags: Vec::new(),
    };
    let pnd = match pnd_at(cfg, separation) {
        Ok(pnd) => pnd,
        Err(e) => {
            return cfg
                .pairs
                .iter()
                .map(|&(n, m)| ScanRow {
                    flags: vec![flag_for(&e).to_string()],
                    ..row(n, m)
                })
                .collect()
        }
    };
    let classical = classical_g2(&pnd).ok();
    cfg.pairs
        .iter()
        .map(|&(n, m)| {
            let mut r = ScanRow {
                classical_g2: classical,
                tail_mass: Some(pnd.tail_mass),
                ..row(n, m)
            };
            if classical.is_none() {
                r.flags.push(FLAG_CLASSICAL.to_string());
            }
            match wavepacket_g2_certified(&pnd, n, m, SCAN_MARGINAL_FLOOR) {
                Ok(g) => {
                    r.g2_tilde = Some(g);
                    if g > 0.0 {
                        r.log2_g2_tilde = Some(g.log2());
                    } else {
                        r.flags.push(FLAG_LOG_UNDEFINED.to_string());
                    }
                }
                Err(e) => {
                    r.flags.push(flag_for(&e).to_string());
                    r.flags.push(FLAG_LOG_UNDEFINED.to_string());
                }
            }
            r
        })
        .collect()
}

/// Every row of the scan, ordered by separation and then by configured
/// pair order. Positions run on a pool of `workers` threads; the output
/// does not depend on the pool size.
pub fn run_scan(cfg: &ScanConfig, workers: usize) -> CliResult<Vec<ScanRow>> {
    let cfg = cfg.resolved()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let separations = cfg.separations();
    let per_position: Vec<Vec<ScanRow>> =
        pool.install(|| separations.par_iter().map(|&d| rows_at(&cfg, d)).collect());
    Ok(per_position.into_iter().flatten().collect())
}

//! Analytic distribution against the Monte Carlo sampler at a few
//! detector separations.

use std::fmt::Write as _;

use qgs_core::mc::{compare, empirical_pnd, ComparisonReport};
use qgs_core::{JointPND, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::config::{ScanConfig, DEFAULT_TV_THRESHOLD};
use crate::error::{CliError, CliResult};
use crate::scan::pnd_at;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValidateOptions {
    /// Defect injection: shift analytic `p(N, M)` by `delta` before comparing.
    pub perturb_cell: Option<(usize, usize, f64)>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCheck {
    pub separation: f64,
    pub seed: u64,
    pub n_max: usize,
    pub tv_threshold: f64,
    /// Total variation distance expected from sampling noise alone.
    pub expected_noise_tv: f64,
    pub comparison: ComparisonReport,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_samples: u64,
    pub seed: u64,
    pub checks: Vec<SeparationCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let r = &c.comparison;
            let _ = writeln!(
                out,
                "separation {:>8.4}: {} (flagged {}/{} cells, max |z| {:.2}, TV {:.3e} vs {:.2e}, noise {:.2e})",
                c.separation,
                if c.pass { "pass" } else { "FAIL" },
                r.flagged.len(),
                r.qualifying,
                r.max_abs_z,
                r.tv_distance,
                c.tv_threshold,
                c.expected_noise_tv,
            );
            for f in &r.flagged {
                let _ = writeln!(
                    out,
                    "    cell ({}, {}): expected {:.1}, observed {}, z = {:.2}",
                    f.n, f.m, f.expected, f.observed, f.z
                );
            }
        }
        let _ = writeln!(
            out,
            "{} with {} samples per separation",
            if self.pass { "validation passed" } else { "validation FAILED" },
            self.n_samples
        );
        out
    }
}

/// Mean total variation distance between the distribution and a histogram
/// of `n` draws from it, cell by cell with `E|p̂ - p| ≈ √(2p(1-p)/πn)`,
/// capped by the exact bound `2p`.
pub fn expected_noise_tv(pnd: &JointPND, n: u64) -> f64 {
    let n = n as f64;
    let cell = |p: f64| {
        let p = p.max(0.0);
        (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt().min(2.0 * p)
    };
    0.5 * (pnd.p.iter().map(|&p| cell(p)).sum::<f64>() + cell(pnd.tail_mass))
}

/// Compares the certified distribution with a sampled histogram at each
/// validation separation. Separation `k` uses seed `seed + k`.
pub fn run_validate(cfg: &ScanConfig, opts: &ValidateOptions) -> CliResult<ValidationReport> {
    let cfg = cfg.resolved()?;
    let mc = cfg
        .mc
        .clone()
        .ok_or_else(|| CliError::Config("validate needs an `mc` section or --samples".into()))?;
    let workers = opts.workers.max(1);
    let mut checks = Vec::new();
    for (k, separation) in cfg.validation_separations().into_iter().enumerate() {
        let mut analytic = pnd_at(&cfg, separation)?;
        let p = analytic.params;
        if let Some((n, m, delta)) = opts.perturb_cell {
            analytic = analytic
                .with_perturbed_cell(n, m, delta)
                .map_err(|e| CliError::Config(format!("--perturb-cell: {e}")))?;
        }
        let seed = mc.seed.wrapping_add(k as u64);
        let empirical = empirical_pnd(&SamplerConfig::new(p, mc.n_samples, seed, workers)?)?;
        let comparison = compare(&analytic, &empirical)?;
        let noise = expected_noise_tv(&analytic, mc.n_samples);
        let tv_threshold = mc.tv_threshold.unwrap_or(DEFAULT_TV_THRESHOLD.max(2.0 * noise));
        let pass = comparison.pass && comparison.tv_distance < tv_threshold;
        checks.push(SeparationCheck {
            separation,
            seed,
            n_max: analytic.n_max,
            tv_threshold,
            expected_noise_tv: noise,
            comparison,
            pass,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport {
        n_samples: mc.n_samples,
        seed: mc.seed,
        checks,
        pass,
    })
}

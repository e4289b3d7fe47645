//! Scan configuration: a single JSON document, with every field
//! overridable from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qgs_core::fock::MAX_N_MAX;
use qgs_core::{BeamProfile, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::fit::fit_g2_zero;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_TV_THRESHOLD: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format {other:?}, expected csv or json")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Monte Carlo settings used by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub n_samples: u64,
    pub seed: u64,
    /// Sampler threads; `QGS_WORKERS` takes precedence when set.
    pub n_workers: Option<usize>,
    /// Separations to validate at; defaults to the scan's start, middle and end.
    pub separations: Option<Vec<f64>>,
    /// Largest accepted total variation distance. When unset it is the
    /// larger of [`DEFAULT_TV_THRESHOLD`] and twice the distance expected
    /// from sampling noise alone.
    pub tv_threshold: Option<f64>,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            n_workers: None,
            separations: None,
            tv_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub profile: BeamProfile,
    /// When set, `profile.n_peak` is replaced by the value that gives this
    /// zero-separation `g⁽²⁾` at the beam center.
    pub g2_zero_target: Option<f64>,
    /// Position of detector 1; detector 2 sits at `fixed_position + separation`.
    pub fixed_position: f64,
    pub scan_min: f64,
    pub scan_max: f64,
    pub steps: usize,
    pub pairs: Vec<(usize, usize)>,
    /// Starting truncation; raised automatically until the tail is certified.
    pub n_max: usize,
    pub mc: Option<McSettings>,
    pub output_format: OutputFormat,
    pub output_path: Option<PathBuf>,
}

impl Default for ScanConfig {
    /// The default beam: `|μ_peak|² = 1`, `σ₀ = 4`, `σ₁ = 1`, with `n_peak`
    /// fitted to `g⁽²⁾(0) = 1.7`.
    fn default() -> Self {
        let base = BeamProfile {
            n_peak: 1.0,
            mu_peak: Complex64::new(1.0, 0.0),
            sigma0: 4.0,
            sigma1: 1.0,
        };
        Self {
            profile: fit_g2_zero(1.7, &base).expect("the default target is inside (1, 2)"),
            g2_zero_target: None,
            fixed_position: 0.0,
            scan_min: 0.0,
            scan_max: 4.0,
            steps: 81,
            pairs: vec![(0, 0), (1, 1), (5, 5), (8, 8), (16, 16), (5, 1), (8, 1), (16, 1)],
            n_max: 16,
            mc: Some(McSettings::default()),
            output_format: OutputFormat::Csv,
            output_path: None,
        }
    }
}

/// Command-line values that replace configuration fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n_peak: Option<f64>,
    pub mu_peak: Option<Complex64>,
    pub sigma0: Option<f64>,
    pub sigma1: Option<f64>,
    pub g2_zero_target: Option<f64>,
    pub fixed_position: Option<f64>,
    pub scan_min: Option<f64>,
    pub scan_max: Option<f64>,
    pub steps: Option<usize>,
    pub pairs: Option<Vec<(usize, usize)>>,
    pub n_max: Option<usize>,
    pub n_samples: Option<u64>,
    pub seed: Option<u64>,
    pub separations: Option<Vec<f64>>,
    pub tv_threshold: Option<f64>,
    pub output_format: Option<OutputFormat>,
    pub output_path: Option<PathBuf>,
}

impl ScanConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; `None` gives the default beam.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Self::from_json(&text).map_err(|e| match e {
                    CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                    other => other,
                })
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = o.$src.clone() { $dst = v; })*
            };
        }
        set! {
            n_peak => self.profile.n_peak,
            mu_peak => self.profile.mu_peak,
            sigma0 => self.profile.sigma0,
            sigma1 => self.profile.sigma1,
            fixed_position => self.fixed_position,
            scan_min => self.scan_min,
            scan_max => self.scan_max,
            steps => self.steps,
            pairs => self.pairs,
            n_max => self.n_max,
            output_format => self.output_format,
        }
        if o.g2_zero_target.is_some() {
            self.g2_zero_target = o.g2_zero_target;
        }
        if o.output_path.is_some() {
            self.output_path = o.output_path.clone();
        }
        let touches_mc =
            o.n_samples.is_some() || o.seed.is_some() || o.separations.is_some() || o.tv_threshold.is_some();
        if touches_mc {
            let mc = self.mc.get_or_insert_with(McSettings::default);
            set! {
                n_samples => mc.n_samples,
                seed => mc.seed,
            }
            if o.tv_threshold.is_some() {
                mc.tv_threshold = o.tv_threshold;
            }
            if o.separations.is_some() {
                mc.separations = o.separations.clone();
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.profile
            .validate()
            .map_err(|e| CliError::Config(format!("profile: {e}")))?;
        if let Some(t) = self.g2_zero_target {
            if !(t > 1.0 && t < 2.0) {
                return bad(format!("g2_zero_target must lie in (1, 2), got {t}"));
            }
        }
        let finite = [self.fixed_position, self.scan_min, self.scan_max];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("positions must be finite".into());
        }
        if !(self.scan_min < self.scan_max) {
            return bad(format!("scan_min ({}) must be below scan_max ({})", self.scan_min, self.scan_max));
        }
        if self.steps < 2 {
            return bad(format!("steps must be at least 2, got {}", self.steps));
        }
        if self.pairs.is_empty() {
            return bad("pairs must not be empty".into());
        }
        if self.n_max > MAX_N_MAX {
            return bad(format!("n_max must not exceed {MAX_N_MAX}, got {}", self.n_max));
        }
        if let Some(&(n, m)) = self.pairs.iter().find(|&&(n, m)| n.max(m) > self.n_max) {
            return bad(format!("pair ({n}, {m}) exceeds n_max = {}", self.n_max));
        }
        if let Some(mc) = &self.mc {
            if mc.n_samples == 0 {
                return bad("mc.n_samples must be positive".into());
            }
            if mc.n_workers == Some(0) {
                return bad("mc.n_workers must be positive".into());
            }
            if let Some(t) = mc.tv_threshold {
                if !(t > 0.0) {
                    return bad(format!("mc.tv_threshold must be positive, got {t}"));
                }
            }
            if let Some(s) = &mc.separations {
                if s.is_empty() || s.iter().any(|x| !x.is_finite()) {
                    return bad("mc.separations must be a nonempty list of finite numbers".into());
                }
            }
        }
        Ok(())
    }

    /// Validated copy with `g2_zero_target` folded into the profile.
    pub fn resolved(&self) -> CliResult<Self> {
        self.validate()?;
        let mut out = self.clone();
        if let Some(t) = out.g2_zero_target.take() {
            out.profile = fit_g2_zero(t, &out.profile).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(out)
    }

    /// `steps` evenly spaced separations from `scan_min` to `scan_max`.
    /// Mirrored ranges give exactly mirrored grids.
    pub fn separations(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| (self.scan_min * (last - k as f64) + self.scan_max * k as f64) / last)
            .collect()
    }

    /// Separations checked by `validate`.
    pub fn validation_separations(&self) -> Vec<f64> {
        match self.mc.as_ref().and_then(|mc| mc.separations.clone()) {
            Some(s) => s,
            None => vec![self.scan_min, 0.5 * (self.scan_min + self.scan_max), self.scan_max],
        }
    }
}

/// Parses `"0,0;5,1"` into index pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p.split_once(',').ok_or_else(|| format!("pair {p:?} is not N,M"))?;
            let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("pair {p:?}: {e}"));
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

/// Parses `"re,im"` (or a bare real part) into a complex amplitude.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse(re)?, parse(im)?)),
        None => Ok(Complex64::new(parse(s)?, 0.0)),
    }
}

/// Parses `"N,M,delta"` for the validation defect hook.
pub fn parse_perturbation(s: &str) -> Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("{s:?} is not N,M,delta"));
    }
    let idx = |x: &str| x.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    let delta = parts[2].parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
    Ok((idx(parts[0])?, idx(parts[1])?, delta))
}

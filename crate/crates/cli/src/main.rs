use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgs_core::fock::{classical_g2, classical_g2_isserlis};
use qgs_core::Complex64;
use qgs_cli::config::{parse_complex, parse_pairs, parse_perturbation, OutputFormat, Overrides, ScanConfig};
use qgs_cli::emit::{render, render_pnd, write_output};
use qgs_cli::fit::{fit_g2_zero, thermal_fraction_for_g2};
use qgs_cli::scan::{pnd_at, run_scan};
use qgs_cli::validate::{run_validate, ValidateOptions};
use qgs_cli::{worker_count, CliError, CliResult};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "qgs", version, about = "Photon statistics of partially coherent light")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correlations of the configured pairs over the separation range.
    Scan(Common),
    /// Compare the analytic distribution with Monte Carlo samples.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Shift analytic p(N, M) by delta before comparing (defect injection).
        #[arg(long, value_name = "N,M,DELTA", value_parser = parse_perturbation)]
        perturb_cell: Option<(usize, usize, f64)>,
    },
    /// Thermal share and profile giving the target zero-separation g2.
    #[command(name = "fit-g2")]
    FitG2(Common),
    /// Joint photon-number distribution at one separation.
    Pnd {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        separation: f64,
    },
}

/// Configuration file plus per-field overrides; a flag beats the file.
#[derive(Debug, Args)]
struct Common {
    /// JSON configuration; the default beam when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_peak: Option<f64>,
    /// Coherent amplitude as "re,im".
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    mu_peak: Option<Complex64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    /// Target g2 at zero separation; rescales n_peak.
    #[arg(long, alias = "g2-zero-target")]
    target: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    fixed_position: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    scan_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    scan_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Index pairs as "N,M;N,M".
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, alias = "n-samples")]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Validation separations as "d1,d2,...".
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    separations: Option<Vec<f64>>,
    #[arg(long)]
    tv_threshold: Option<f64>,
    #[arg(long, alias = "output-format")]
    format: Option<OutputFormat>,
    #[arg(long, alias = "output-path")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> CliResult<ScanConfig> {
        let mut cfg = ScanConfig::load(self.config.as_deref())?;
        let pairs = match &self.pairs {
            Some(s) => Some(parse_pairs(s).map_err(|e| CliError::Config(format!("--pairs: {e}")))?),
            None => None,
        };
        cfg.apply(&Overrides {
            n_peak: self.n_peak,
            mu_peak: self.mu_peak,
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            g2_zero_target: self.target,
            fixed_position: self.fixed_position,
            scan_min: self.scan_min,
            scan_max: self.scan_max,
            steps: self.steps,
            pairs,
            n_max: self.n_max,
            n_samples: self.samples,
            seed: self.seed,
            separations: self.separations.clone(),
            tv_threshold: self.tv_threshold,
            output_format: self.format,
            output_path: self.out.clone(),
        });
        Ok(cfg)
    }
}

fn configured_workers(cfg: &ScanConfig) -> Option<usize> {
    cfg.mc.as_ref().and_then(|mc| mc.n_workers)
}

fn scan(common: &Common) -> CliResult<()> {
    let cfg = common.load()?;
    let rows = run_scan(&cfg, worker_count(configured_workers(&cfg))?)?;
    let text = render(&cfg, &rows, cfg.output_format)?;
    write_output(&text, cfg.output_path.as_deref())?;
    let failed = rows.iter().filter(|r| r.is_hard_failure()).count();
    if failed > 0 {
        return Err(CliError::Numerical(qgs_core::QgsError::Certification(format!(
            "{failed} rows have no certified distribution"
        ))));
    }
    Ok(())
}

fn validate(common: &Common, perturb_cell: Option<(usize, usize, f64)>) -> CliResult<()> {
    let cfg = common.load()?;
    let opts = ValidateOptions {
        perturb_cell,
        workers: worker_count(configured_workers(&cfg))?,
    };
    let report = run_validate(&cfg, &opts)?;
    eprint!("{}", report.summary());
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write_output(&text, cfg.output_path.as_deref())?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{} of {} separations disagree",
            report.checks.iter().filter(|c| !c.pass).count(),
            report.checks.len()
        )))
    }
}

fn fit(common: &Common) -> CliResult<()> {
    let mut cfg = common.load()?;
    let target = cfg
        .g2_zero_target
        .take()
        .ok_or_else(|| CliError::Config("fit-g2 needs --target".into()))?;
    cfg.validate()?;
    let fraction = thermal_fraction_for_g2(target).map_err(|e| CliError::Config(e.to_string()))?;
    // The endpoints fix the thermal share but have no finite profile.
    let doc = if target > 1.0 && target < 2.0 {
        let profile = fit_g2_zero(target, &cfg.profile).map_err(|e| CliError::Config(e.to_string()))?;
        let fitted = ScanConfig { profile, ..cfg.clone() };
        let p = profile.two_point_params(cfg.fixed_position, cfg.fixed_position)?;
        let pnd = pnd_at(&fitted, 0.0)?;
        json!({
            "target": target,
            "thermal_fraction": fraction,
            "profile": profile,
            "classical_g2_pnd": classical_g2(&pnd)?,
            "classical_g2_moments": classical_g2_isserlis(&p),
        })
    } else {
        json!({ "target": target, "thermal_fraction": fraction, "profile": null })
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write_output(&text, cfg.output_path.as_deref())
}

fn pnd(common: &Common, separation: f64) -> CliResult<()> {
    let cfg = common.load()?.resolved()?;
    if !separation.is_finite() {
        return Err(CliError::Config(format!("separation must be finite, got {separation}")));
    }
    let dist = pnd_at(&cfg, separation)?;
    eprintln!("n_max {}, tail mass {:.3e}", dist.n_max, dist.tail_mass);
    let text = render_pnd(&dist, separation, cfg.output_format)?;
    write_output(&text, cfg.output_path.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scan(common) => scan(common),
        Command::Validate { common, perturb_cell } => validate(common, *perturb_cell),
        Command::FitG2(common) => fit(common),
        Command::Pnd { common, separation } => pnd(common, *separation),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qgs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

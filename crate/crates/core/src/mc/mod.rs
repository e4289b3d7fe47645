//! Monte Carlo realization of the two-detector state: sample the field
//! amplitudes, then count photons. Serves as an independent check of the
//! closed-form statistics in [`crate::fock`].
//!
//! Samples are grouped in fixed-size blocks, and block `b` draws from a
//! ChaCha8 stream seeded by the master seed with stream number `b`. Workers
//! take blocks round-robin, so the output depends only on the seed and the
//! sample count, never on the number of workers.

mod sampler;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QgsError, Result};
use crate::fock::{FockIndex, JointPND};
use crate::source::TwoPointParams;
use crate::specfun::accum::Neumaier;
use crate::specfun::ln_factorial;

pub use sampler::{sample_counts, sample_poisson, FieldSampler, EIGEN_FALLBACK_G};

/// Samples per random stream.
pub const BLOCK_SIZE: u64 = 1 << 16;

/// Largest photon number tracked per detector; larger counts go to
/// `overflow_count`.
pub const MAX_COUNT_DIM: usize = 512;

/// Expected count a cell needs before its z-score is judged.
pub const MIN_EXPECTED: f64 = 25.0;

/// |z| above which a cell is flagged.
pub const Z_THRESHOLD: f64 = 4.0;

/// Largest fraction of qualifying cells that may be flagged.
pub const MAX_FLAGGED_FRACTION: f64 = 0.005;

/// Marginal count below which [`empirical_g2`] marks its estimate unreliable.
pub const MIN_RELIABLE_COUNTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub params: TwoPointParams,
    pub n_samples: u64,
    pub seed: u64,
    pub n_workers: usize,
}

impl SamplerConfig {
    pub fn new(params: TwoPointParams, n_samples: u64, seed: u64, n_workers: usize) -> Result<Self> {
        let cfg = Self {
            params,
            n_samples,
            seed,
            n_workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_samples == 0 || self.n_workers == 0 {
            return Err(QgsError::Domain(format!(
                "sampler needs n_samples >= 1 and n_workers >= 1, got {} and {}",
                self.n_samples, self.n_workers
            )));
        }
        Ok(())
    }

    fn blocks(&self) -> u64 {
        self.n_samples.div_ceil(BLOCK_SIZE)
    }

    fn block_len(&self, block: u64) -> u64 {
        BLOCK_SIZE.min(self.n_samples - block * BLOCK_SIZE)
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Runs `work` on every block and returns the results in block order.
fn run_blocks<S, F>(cfg: &SamplerConfig, work: F) -> Result<Vec<S>>
where
    S: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> S + Sync,
{
    cfg.validate()?;
    let blocks = cfg.blocks();
    let workers = (cfg.n_workers as u64).min(blocks).max(1);
    let mut results: Vec<(u64, S)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let work = &work;
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut b = w;
                    while b < blocks {
                        let mut rng = block_rng(cfg.seed, b);
                        out.push((b, work(&mut rng, cfg.block_len(b))));
                        b += workers;
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    });
    results.sort_by_key(|(b, _)| *b);
    Ok(results.into_iter().map(|(_, s)| s).collect())
}

/// All field samples of the configuration, in sample order.
pub fn sample_fields(cfg: &SamplerConfig) -> Result<Vec<(Complex64, Complex64)>> {
    let sampler = FieldSampler::new(&cfg.params)?;
    let blocks = run_blocks(cfg, |rng, len| {
        (0..len).map(|_| sampler.sample(rng)).collect::<Vec<_>>()
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Monte Carlo photon-count histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPND {
    /// Side of the square count matrix: one past the largest observed count.
    pub dim: usize,
    /// Row-major `dim²` counts.
    pub counts: Vec<u64>,
    pub total: u64,
    pub seed: u64,
    /// Events with a count beyond [`MAX_COUNT_DIM`] at either detector.
    pub overflow_count: u64,
    pub params: TwoPointParams,
}

impl EmpiricalPND {
    fn from_cells(cells: &BTreeMap<(usize, usize), u64>, overflow: u64, seed: u64, params: TwoPointParams) -> Self {
        let dim = cells.keys().map(|&(n, m)| n.max(m) + 1).max().unwrap_or(1);
        let mut counts = vec![0u64; dim * dim];
        for (&(n, m), &c) in cells {
            counts[n * dim + m] += c;
        }
        let total = counts.iter().sum::<u64>() + overflow;
        Self {
            dim,
            counts,
            total,
            seed,
            overflow_count: overflow,
            params,
        }
    }

    pub fn get(&self, n: usize, m: usize) -> u64 {
        if n < self.dim && m < self.dim {
            self.counts[n * self.dim + m]
        } else {
            0
        }
    }

    pub fn row_sum(&self, n: usize) -> u64 {
        (0..self.dim).map(|m| self.get(n, m)).sum()
    }

    pub fn col_sum(&self, m: usize) -> u64 {
        (0..self.dim).map(|n| self.get(n, m)).sum()
    }

    /// Sample means and standard errors of `n₁`, `n₂` and `n₁ n₂`, over the
    /// events inside the matrix.
    pub fn moments(&self) -> [(f64, f64); 3] {
        let total = self.total as f64;
        let stat = |f: &dyn Fn(usize, usize) -> f64| {
            let (mut s, mut s2) = (Neumaier::new(), Neumaier::new());
            for n in 0..self.dim {
                for m in 0..self.dim {
                    let c = self.get(n, m) as f64;
                    let x = f(n, m);
                    s.add(c * x);
                    s2.add(c * x * x);
                }
            }
            let mean = s.value() / total;
            let var = (s2.value() / total - mean * mean).max(0.0) * total / (total - 1.0).max(1.0);
            (mean, (var / total).sqrt())
        };
        [
            stat(&|n, _| n as f64),
            stat(&|_, m| m as f64),
            stat(&|n, m| (n * m) as f64),
        ]
    }
}

/// Count histogram of `cfg.n_samples` independent field-then-count draws.
pub fn empirical_pnd(cfg: &SamplerConfig) -> Result<EmpiricalPND> {
    let sampler = FieldSampler::new(&cfg.params)?;
    let blocks = run_blocks(cfg, |rng, len| {
        let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        let mut overflow = 0u64;
        for _ in 0..len {
            let field = sampler.sample(rng);
            let (n1, n2) = sample_counts(field, rng);
            if n1 < MAX_COUNT_DIM as u64 && n2 < MAX_COUNT_DIM as u64 {
                *cells.entry((n1 as usize, n2 as usize)).or_default() += 1;
            } else {
                overflow += 1;
            }
        }
        (cells, overflow)
    })?;
    let mut cells = BTreeMap::new();
    let mut overflow = 0;
    for (block, o) in blocks {
        for (k, c) in block {
            *cells.entry(k).or_default() += c;
        }
        overflow += o;
    }
    Ok(EmpiricalPND::from_cells(&cells, overflow, cfg.seed, cfg.params))
}

/// Multinomial draw of `total` events from an analytic distribution; the
/// tail mass is drawn as overflow.
pub fn multinomial_counts(pnd: &JointPND, total: u64, seed: u64) -> Result<EmpiricalPND> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = total;
    let mut mass_left = 1.0f64;
    let mut cells = BTreeMap::new();
    let dim = pnd.n_max + 1;
    for n in 0..dim {
        for m in 0..dim {
            let p = pnd.get(n, m);
            if remaining == 0 || p <= 0.0 {
                continue;
            }
            let q = (p / mass_left).clamp(0.0, 1.0);
            let k = Binomial::new(remaining, q)
                .map_err(|e| QgsError::Domain(format!("binomial draw: {e}")))?
                .sample(&mut rng);
            if k > 0 {
                cells.insert((n, m), k);
            }
            remaining -= k;
            mass_left -= p;
        }
    }
    Ok(EmpiricalPND::from_cells(&cells, remaining, seed, pnd.params))
}

/// Empirical wavepacket correlation with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub estimate: f64,
    pub std_error: f64,
    /// False when either marginal has fewer than [`MIN_RELIABLE_COUNTS`].
    pub reliable: bool,
}

/// `counts(N, M) · total / (rowsum(N) · colsum(M))`.
pub fn empirical_g2(e: &EmpiricalPND, n: usize, m: usize) -> Result<G2Estimate> {
    let row = e.row_sum(n);
    let col = e.col_sum(m);
    if row == 0 || col == 0 {
        return Err(QgsError::Underflow(format!(
            "no events with N = {n} (row {row}) or M = {m} (column {col})"
        )));
    }
    let t = e.total as f64;
    let a = e.get(n, m) as f64;
    let (r, c) = (row as f64 / t, col as f64 / t);
    let pa = a / t;
    let estimate = pa / (r * c);
    // Gradient of g = p_a / ((p_a + p_b)(p_a + p_c)) over the multinomial
    // cells {(N,M)}, {(N,¬M)}, {(¬N,M)}, rest.
    let pb = r - pa;
    let pc = c - pa;
    let grad = [
        1.0 / (r * c) - pa / (r * r * c) - pa / (r * c * c),
        -pa / (r * r * c),
        -pa / (r * c * c),
        0.0,
    ];
    let probs = [pa, pb, pc, (1.0 - r - c + pa).max(0.0)];
    let mean: f64 = grad.iter().zip(&probs).map(|(g, p)| g * p).sum();
    let second: f64 = grad.iter().zip(&probs).map(|(g, p)| g * g * p).sum();
    let mut std_error = ((second - mean * mean).max(0.0) / t).sqrt();
    if a == 0.0 {
        // No events in the cell: one count is the resolution.
        std_error = 1.0 / (t * r * c);
    }
    Ok(G2Estimate {
        estimate,
        std_error,
        reliable: row >= MIN_RELIABLE_COUNTS && col >= MIN_RELIABLE_COUNTS,
    })
}

/// One cell of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub n: usize,
    pub m: usize,
    pub expected: f64,
    pub observed: u64,
    pub z: f64,
}

/// Outcome of [`compare`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub total: u64,
    /// Cells with expected count at least [`MIN_EXPECTED`].
    pub qualifying: usize,
    /// Qualifying cells with |z| above [`Z_THRESHOLD`].
    pub flagged: Vec<CellCheck>,
    pub max_abs_z: f64,
    /// Total variation distance, counting everything outside the analytic
    /// truncation as one extra bucket.
    pub tv_distance: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn flagged_fraction(&self) -> f64 {
        if self.qualifying == 0 {
            0.0
        } else {
            self.flagged.len() as f64 / self.qualifying as f64
        }
    }
}

/// Per-cell agreement between an analytic distribution and a histogram.
pub fn compare(analytic: &JointPND, empirical: &EmpiricalPND) -> Result<ComparisonReport> {
    if analytic.params != empirical.params {
        return Err(QgsError::ParameterMismatch(format!(
            "analytic {:?} vs empirical {:?}",
            analytic.params, empirical.params
        )));
    }
    let t = empirical.total as f64;
    let dim = analytic.n_max + 1;
    let mut qualifying = 0usize;
    let mut flagged = Vec::new();
    let mut max_abs_z = 0.0f64;
    let mut tv = Neumaier::new();
    let mut inside = 0u64;
    for n in 0..dim {
        for m in 0..dim {
            let p = analytic.get(n, m);
            let obs = empirical.get(n, m);
            inside += obs;
            tv.add((obs as f64 / t - p).abs());
            let expected = t * p;
            if expected < MIN_EXPECTED {
                continue;
            }
            qualifying += 1;
            let z = (obs as f64 - expected) / (expected * (1.0 - p)).sqrt();
            max_abs_z = max_abs_z.max(z.abs());
            if z.abs() > Z_THRESHOLD {
                flagged.push(CellCheck {
                    n,
                    m,
                    expected,
                    observed: obs,
                    z,
                });
            }
        }
    }
    let outside = empirical.total - inside;
    tv.add((outside as f64 / t - analytic.tail_mass.max(0.0)).abs());
    let tv_distance = 0.5 * tv.value();
    let pass = (flagged.len() as f64) <= MAX_FLAGGED_FRACTION * qualifying as f64;
    Ok(ComparisonReport {
        total: empirical.total,
        qualifying,
        flagged,
        max_abs_z,
        tv_distance,
        pass,
    })
}

/// Mean of `exp(-|α|² - |β|²) αᴺ α*ᴷ βᴹ β*ᴸ / √(N! M! K! L!)` over field
/// samples: an unbiased, low-variance estimate of a density-matrix element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub value: Complex64,
    /// Standard error of the real and imaginary parts.
    pub std_error: (f64, f64),
}

pub fn poisson_mixing_element(cfg: &SamplerConfig, idx: FockIndex) -> Result<MixingEstimate> {
    Ok(poisson_mixing_elements(cfg, &[idx])?[0])
}

/// Batch form of [`poisson_mixing_element`], sharing the field samples.
pub fn poisson_mixing_elements(cfg: &SamplerConfig, indices: &[FockIndex]) -> Result<Vec<MixingEstimate>> {
    let sampler = FieldSampler::new(&cfg.params)?;
    let ln_norms: Vec<f64> = indices
        .iter()
        .map(|i| -0.5 * (ln_factorial(i.n) + ln_factorial(i.m) + ln_factorial(i.k) + ln_factorial(i.l)))
        .collect();
    let blocks = run_blocks(cfg, |rng, len| {
        // Per index: Σ re, Σ re², Σ im, Σ im².
        let mut acc = vec![[0.0f64; 4]; indices.len()];
        for _ in 0..len {
            let (a, b) = sampler.sample(rng);
            let damp = -a.norm_sqr() - b.norm_sqr();
            for (i, idx) in indices.iter().enumerate() {
                let v = a.powu(idx.n as u32)
                    * a.conj().powu(idx.k as u32)
                    * b.powu(idx.m as u32)
                    * b.conj().powu(idx.l as u32)
                    * (damp + ln_norms[i]).exp();
                acc[i][0] += v.re;
                acc[i][1] += v.re * v.re;
                acc[i][2] += v.im;
                acc[i][3] += v.im * v.im;
            }
        }
        acc
    })?;
    let t = cfg.n_samples as f64;
    Ok((0..indices.len())
        .map(|i| {
            let mut s = [Neumaier::new(), Neumaier::new(), Neumaier::new(), Neumaier::new()];
            for block in &blocks {
                for (acc, x) in s.iter_mut().zip(block[i]) {
                    acc.add(x);
                }
            }
            let se = |sum: f64, sq: f64| {
                let mean = sum / t;
                ((sq / t - mean * mean).max(0.0) / (t - 1.0).max(1.0)).sqrt()
            };
            MixingEstimate {
                value: Complex64::new(s[0].value() / t, s[2].value() / t),
                std_error: (se(s[0].value(), s[1].value()), se(s[2].value(), s[3].value())),
            }
        })
        .collect())
}

/// Poisson-mixing estimate of a single-detector distribution: the mean of
/// `Poisson(N; |α|²)` over samples of one complex Gaussian amplitude.
pub fn poisson_mixing_single_mode(
    nbar: f64,
    mu: Complex64,
    n_max: usize,
    n_samples: u64,
    seed: u64,
    n_workers: usize,
) -> Result<Vec<(f64, f64)>> {
    let params = TwoPointParams::new(nbar, nbar, 0.0, mu, mu)?;
    let cfg = SamplerConfig::new(params, n_samples, seed, n_workers)?;
    let sampler = FieldSampler::new(&params)?;
    let lnf: Vec<f64> = (0..=n_max).map(ln_factorial).collect();
    let blocks = run_blocks(&cfg, |rng, len| {
        let mut acc = vec![[0.0f64; 2]; n_max + 1];
        for _ in 0..len {
            let (a, _) = sampler.sample(rng);
            let lambda = a.norm_sqr();
            for (n, slot) in acc.iter_mut().enumerate() {
                let ln_rate = if n == 0 { 0.0 } else { n as f64 * lambda.ln() };
                let p = (ln_rate - lambda - lnf[n]).exp();
                slot[0] += p;
                slot[1] += p * p;
            }
        }
        acc
    })?;
    let t = n_samples as f64;
    Ok((0..=n_max)
        .map(|n| {
            let (mut s, mut s2) = (Neumaier::new(), Neumaier::new());
            for block in &blocks {
                s.add(block[n][0]);
                s2.add(block[n][1]);
            }
            let mean = s.value() / t;
            let var = (s2.value() / t - mean * mean).max(0.0);
            (mean, (var / (t - 1.0).max(1.0)).sqrt())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(g: f64) -> TwoPointParams {
        TwoPointParams::new(0.8, 0.5, g, Complex64::new(0.6, 0.0), Complex64::new(0.3, 0.2)).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(params(0.5), 0, 1, 1).is_err());
        assert!(SamplerConfig::new(params(0.5), 10, 1, 0).is_err());
    }

    #[test]
    fn single_sample_hits_one_cell() {
        let cfg = SamplerConfig::new(params(0.5), 1, 9, 4).unwrap();
        let e = empirical_pnd(&cfg).unwrap();
        assert_eq!(e.total, 1);
        assert_eq!(e.counts.iter().sum::<u64>() + e.overflow_count, 1);
        assert_eq!(e.counts.iter().filter(|&&c| c == 1).count(), 1);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = SamplerConfig::new(params(0.7), 3 * BLOCK_SIZE + 17, 42, 1).unwrap();
        let one = empirical_pnd(&base).unwrap();
        for workers in [2, 3, 8] {
            let cfg = SamplerConfig { n_workers: workers, ..base };
            assert_eq!(empirical_pnd(&cfg).unwrap(), one);
            assert_eq!(sample_fields(&cfg).unwrap(), sample_fields(&base).unwrap());
        }
        let other = SamplerConfig { seed: 43, ..base };
        assert_ne!(empirical_pnd(&other).unwrap(), one);
    }

    #[test]
    fn g2_estimator_algebra() {
        let p = params(0.0);
        let mut cells = BTreeMap::new();
        cells.insert((2, 3), 1);
        cells.insert((0, 0), 9);
        let e = EmpiricalPND::from_cells(&cells, 0, 0, p);
        let g = empirical_g2(&e, 2, 3).unwrap();
        assert!((g.estimate - 10.0).abs() < 1e-12);
        assert!(!g.reliable);
        assert!(matches!(empirical_g2(&e, 1, 1), Err(QgsError::Underflow(_))));
    }

    #[test]
    fn compare_rejects_mismatched_parameters() {
        let pnd = crate::fock::joint_pnd(&params(0.2), 10).unwrap();
        let e = multinomial_counts(&pnd, 1000, 1).unwrap();
        let other = crate::fock::joint_pnd(&params(0.3), 10).unwrap();
        assert!(matches!(compare(&other, &e), Err(QgsError::ParameterMismatch(_))));
        assert!(compare(&pnd, &e).unwrap().pass);
    }
}

//! Joint photon-number distributions and the correlation functions built
//! on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{DensityMatrix, MIN_DIGITS};
use crate::error::{QgsError, Result};
use crate::source::TwoPointParams;
use crate::specfun::accum::{DoubleDouble, Neumaier};
use crate::specfun::ln_factorial;

/// Default bound on the probability mass beyond the truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

/// Default floor below which a marginal is treated as never occurring.
pub const DEFAULT_MARGINAL_FLOOR: f64 = 1e-12;

/// Hard cap on the adaptive truncation.
pub const MAX_N_MAX: usize = 150;

/// Most negative cell value still attributed to roundoff.
const NEGATIVE_SLACK: f64 = 1e-12;
/// Largest absolute error accepted on a single cell.
const MAX_CELL_ERROR: f64 = 1e-9;

/// Truncation policy for [`joint_pnd_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PndOptions {
    pub tail_tolerance: f64,
    pub max_n_max: usize,
    /// Relative tolerance on the truncated mass of individual rows and
    /// columns, used by [`joint_pnd_for_pairs`].
    pub line_tolerance: f64,
}

impl Default for PndOptions {
    fn default() -> Self {
        Self {
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            max_n_max: MAX_N_MAX,
            line_tolerance: 1e-9,
        }
    }
}

/// Truncated joint photon-number distribution `p(N, M)`, `N, M <= n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPND {
    pub n_max: usize,
    /// Row-major `(n_max + 1)²` probabilities, clamped at zero.
    pub p: Vec<f64>,
    /// Estimated absolute error of each cell.
    pub errors: Vec<f64>,
    /// `1 - Σ p`, accumulated in double-double.
    pub tail_mass: f64,
    pub params: TwoPointParams,
    /// Exact single-detector distributions, for certifying rows and columns.
    pub marginal1: Vec<f64>,
    pub marginal2: Vec<f64>,
}

impl JointPND {
    fn dim(&self) -> usize {
        self.n_max + 1
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.p[n * self.dim() + m]
    }

    #[inline]
    pub fn error(&self, n: usize, m: usize) -> f64 {
        self.errors[n * self.dim() + m]
    }

    /// Truncated marginal of detector 1, `Σₘ p(N, m)`.
    pub fn row_sum(&self, n: usize) -> f64 {
        let mut s = Neumaier::new();
        (0..self.dim()).for_each(|m| s.add(self.get(n, m)));
        s.value()
    }

    /// Truncated marginal of detector 2, `Σₙ p(n, M)`.
    pub fn col_sum(&self, m: usize) -> f64 {
        let mut s = Neumaier::new();
        (0..self.dim()).for_each(|n| s.add(self.get(n, m)));
        s.value()
    }

    fn row_error(&self, n: usize) -> f64 {
        (0..self.dim()).map(|m| self.error(n, m)).sum()
    }

    fn col_error(&self, m: usize) -> f64 {
        (0..self.dim()).map(|n| self.error(n, m)).sum()
    }

    /// Fraction of row `N`'s exact marginal that lies beyond the truncation.
    pub fn row_tail(&self, n: usize) -> f64 {
        line_tail(self.marginal1[n], self.row_sum(n))
    }

    /// Fraction of column `M`'s exact marginal beyond the truncation.
    pub fn col_tail(&self, m: usize) -> f64 {
        line_tail(self.marginal2[m], self.col_sum(m))
    }

    /// Sum of estimated cell errors.
    pub fn total_error(&self) -> f64 {
        self.errors.iter().sum()
    }

    /// Mean photon numbers `(⟨n₁⟩, ⟨n₂⟩)` of the truncated distribution.
    pub fn means(&self) -> (f64, f64) {
        let (mut a, mut b) = (Neumaier::new(), Neumaier::new());
        for n in 0..self.dim() {
            for m in 0..self.dim() {
                let p = self.get(n, m);
                a.add(n as f64 * p);
                b.add(m as f64 * p);
            }
        }
        (a.value(), b.value())
    }

    /// Copy with `p(N, M)` shifted by `delta` and the tail adjusted so the
    /// total stays one. A defect-injection hook for the validation suite.
    pub fn with_perturbed_cell(&self, n: usize, m: usize, delta: f64) -> Result<Self> {
        if n > self.n_max || m > self.n_max {
            return Err(QgsError::Domain(format!(
                "cell ({n}, {m}) outside n_max = {}",
                self.n_max
            )));
        }
        let mut out = self.clone();
        let i = n * self.dim() + m;
        out.p[i] = (out.p[i] + delta).max(0.0);
        out.tail_mass -= out.p[i] - self.p[i];
        Ok(out)
    }
}

fn line_tail(exact: f64, truncated: f64) -> f64 {
    if exact > 0.0 {
        (exact - truncated) / exact
    } else {
        0.0
    }
}

/// Starting truncation: a dozen standard deviations above the larger mean
/// photon number.
pub fn suggested_n_max(p: &TwoPointParams) -> usize {
    let spread = |n: f64, mu: Complex64| {
        let c = mu.norm_sqr();
        let mean = n + c;
        let var = n * (1.0 + n) + c * (1.0 + 2.0 * n);
        mean + 12.0 * var.sqrt() + 10.0
    };
    let guess = spread(p.n1, p.mu1).max(spread(p.n2, p.mu2)).ceil() as usize;
    guess.clamp(16, MAX_N_MAX)
}

/// Distribution at a fixed truncation, with no tail requirement.
pub fn joint_pnd_truncated(p: &TwoPointParams, n_max: usize) -> Result<JointPND> {
    let dm = DensityMatrix::new(p, n_max, n_max)?;
    let dim = n_max + 1;
    let weights: Vec<Vec<f64>> = (0..dim).map(|n| dm.diagonal_weights(n)).collect();
    let mut probs = Vec::with_capacity(dim * dim);
    let mut errors = Vec::with_capacity(dim * dim);
    let mut total = DoubleDouble::ZERO;
    for n in 0..dim {
        for m in 0..dim {
            let (value, error) = dm.diagonal_with(n, m, &weights[n], &weights[m]);
            if value < -NEGATIVE_SLACK.max(error) {
                return Err(QgsError::PrecisionLoss {
                    digits: 0.0,
                    context: format!("p({n}, {m}) = {value:.3e} is negative"),
                });
            }
            if error > MAX_CELL_ERROR {
                return Err(QgsError::PrecisionLoss {
                    digits: -(error.max(f64::MIN_POSITIVE)).log10(),
                    context: format!("p({n}, {m}) = {value:.3e} carries error {error:.3e}"),
                });
            }
            let value = value.max(0.0);
            total += value;
            probs.push(value);
            errors.push(error);
        }
    }
    let tail_mass = (DoubleDouble::ONE - total).to_f64();
    let budget: f64 = errors.iter().sum();
    if tail_mass < -(budget + NEGATIVE_SLACK) {
        return Err(QgsError::PrecisionLoss {
            digits: 0.0,
            context: format!("tail mass {tail_mass:.3e} is below the error budget {budget:.3e}"),
        });
    }
    Ok(JointPND {
        n_max,
        p: probs,
        errors,
        tail_mass,
        params: *p,
        marginal1: single_mode_pnd(p.n1, p.mu1, n_max)?,
        marginal2: single_mode_pnd(p.n2, p.mu2, n_max)?,
    })
}

fn next_n_max(n: usize, cap: usize) -> usize {
    (n + 8).max(n * 3 / 2).min(cap)
}

/// Joint distribution starting at `n_max` and growing the truncation until
/// the tail mass is below the default tolerance.
pub fn joint_pnd(p: &TwoPointParams, n_max: usize) -> Result<JointPND> {
    joint_pnd_with(p, n_max, &PndOptions::default())
}

/// [`joint_pnd`] with an explicit truncation policy.
pub fn joint_pnd_with(p: &TwoPointParams, n_max: usize, opts: &PndOptions) -> Result<JointPND> {
    joint_pnd_for_pairs(p, n_max, &[], opts)
}

/// Adaptive distribution that additionally certifies the truncation of the
/// rows `N` and columns `M` of every requested pair: the mass each loses to
/// the truncation must be below `opts.line_tolerance` of its exact marginal.
pub fn joint_pnd_for_pairs(
    p: &TwoPointParams,
    n_max: usize,
    pairs: &[(usize, usize)],
    opts: &PndOptions,
) -> Result<JointPND> {
    let cap = opts.max_n_max;
    let needed = pairs.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
    let mut n = n_max.max(needed).min(cap);
    loop {
        let pnd = joint_pnd_truncated(p, n)?;
        let lines_ok = pairs.iter().all(|&(a, b)| {
            let row = (pnd.marginal1[a] - pnd.row_sum(a)).abs() - pnd.row_error(a);
            let col = (pnd.marginal2[b] - pnd.col_sum(b)).abs() - pnd.col_error(b);
            row <= opts.line_tolerance * pnd.marginal1[a] && col <= opts.line_tolerance * pnd.marginal2[b]
        });
        if pnd.tail_mass < opts.tail_tolerance && lines_ok {
            return Ok(pnd);
        }
        if n >= cap {
            return Err(QgsError::Truncation {
                tail_mass: pnd.tail_mass,
                tolerance: opts.tail_tolerance,
                n_max: n,
            });
        }
        n = next_n_max(n, cap);
    }
}

/// Photon-number distribution of one mode carrying a coherent amplitude `μ`
/// on top of thermal light with mean `n̄`.
pub fn single_mode_pnd(nbar: f64, mu: Complex64, n_max: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0) || !nbar.is_finite() || !mu.norm_sqr().is_finite() {
        return Err(QgsError::Domain(format!(
            "single-mode distribution needs n̄ >= 0, got {nbar}"
        )));
    }
    let c = mu.norm_sqr();
    let lead = -c / (1.0 + nbar) - (1.0 + nbar).ln();
    let ln_t = (nbar / (1.0 + nbar)).ln();
    let ln_s = (c / (1.0 + nbar).powi(2)).ln();
    let lnf: Vec<f64> = (0..=n_max).map(ln_factorial).collect();
    Ok((0..=n_max)
        .map(|n| {
            let mut sum = Neumaier::new();
            for k in 0..=n {
                let thermal = if n - k == 0 { 0.0 } else { (n - k) as f64 * ln_t };
                let coherent = if k == 0 { 0.0 } else { k as f64 * ln_s };
                let ln = lead + lnf[n] - lnf[n - k] - 2.0 * lnf[k] + thermal + coherent;
                sum.add(ln.exp());
            }
            sum.value()
        })
        .collect())
}

/// Correlation of `N`-photon events at detector 1 with `M`-photon events at
/// detector 2, with the default marginal floor.
pub fn wavepacket_g2(pnd: &JointPND, n: usize, m: usize) -> Result<f64> {
    wavepacket_g2_with_floor(pnd, n, m, DEFAULT_MARGINAL_FLOOR)
}

/// `p(N, M) / (Σₘ p(N, m) · Σₙ p(n, M))`.
pub fn wavepacket_g2_with_floor(pnd: &JointPND, n: usize, m: usize, floor: f64) -> Result<f64> {
    if n > pnd.n_max || m > pnd.n_max {
        return Err(QgsError::Domain(format!(
            "pair ({n}, {m}) outside n_max = {}",
            pnd.n_max
        )));
    }
    let row = pnd.row_sum(n);
    let col = pnd.col_sum(m);
    if !(row > floor) || !(col > floor) {
        return Err(QgsError::Underflow(format!(
            "marginals P1({n}) = {row:.3e}, P2({m}) = {col:.3e} below floor {floor:.1e}"
        )));
    }
    Ok(pnd.get(n, m) / (row * col))
}

/// [`wavepacket_g2_with_floor`] that also requires at least
/// [`MIN_DIGITS`] certified digits in the numerator and both marginals.
pub fn wavepacket_g2_certified(pnd: &JointPND, n: usize, m: usize, floor: f64) -> Result<f64> {
    let value = wavepacket_g2_with_floor(pnd, n, m, floor)?;
    let rel = |err: f64, x: f64| if x > 0.0 { err / x } else { f64::INFINITY };
    let cell = pnd.get(n, m);
    let cell_rel = if cell == 0.0 && pnd.error(n, m) == 0.0 {
        0.0
    } else {
        rel(pnd.error(n, m), cell)
    };
    let total = cell_rel + rel(pnd.row_error(n), pnd.row_sum(n)) + rel(pnd.col_error(m), pnd.col_sum(m));
    let digits = if total > 0.0 { -total.log10() } else { 16.0 };
    if digits < MIN_DIGITS {
        return Err(QgsError::PrecisionLoss {
            digits,
            context: format!("wavepacket g2({n}, {m})"),
        });
    }
    Ok(value)
}

/// Intensity correlation `⟨n₁ n₂⟩ / (⟨n₁⟩ ⟨n₂⟩)` from the distribution,
/// with the default tail tolerance.
pub fn classical_g2(pnd: &JointPND) -> Result<f64> {
    classical_g2_with(pnd, DEFAULT_TAIL_TOLERANCE)
}

pub fn classical_g2_with(pnd: &JointPND, tail_tolerance: f64) -> Result<f64> {
    if !(pnd.tail_mass < tail_tolerance) {
        return Err(QgsError::Truncation {
            tail_mass: pnd.tail_mass,
            tolerance: tail_tolerance,
            n_max: pnd.n_max,
        });
    }
    let mut cross = Neumaier::new();
    for n in 1..=pnd.n_max {
        for m in 1..=pnd.n_max {
            cross.add((n * m) as f64 * pnd.get(n, m));
        }
    }
    let (m1, m2) = pnd.means();
    Ok(cross.value() / (m1 * m2))
}

/// Intensity correlation from the Gaussian moments of the field:
/// `⟨I₁ I₂⟩ = ⟨I₁⟩⟨I₂⟩ + g² n̄₁ n̄₂ + 2 g √(n̄₁ n̄₂) Re(μ₁* μ₂)`.
pub fn classical_g2_isserlis(p: &TwoPointParams) -> f64 {
    let i1 = p.mu1.norm_sqr() + p.n1;
    let i2 = p.mu2.norm_sqr() + p.n2;
    let root = (p.n1 * p.n2).sqrt();
    let cross = i1 * i2 + p.g * p.g * p.n1 * p.n2 + 2.0 * p.g * root * (p.mu1.conj() * p.mu2).re;
    cross / (i1 * i2)
}

//! Two-dimensional Gaussian moment integrals behind the density-matrix
//! elements.
//!
//! After splitting the amplitudes into real and imaginary parts, every
//! element reduces to products of
//! `T(i, j) = ∫∫ pⁱ qʲ exp(-x p² - y q² + 2z p q + u p + v q + w) dp dq`
//! for the real-part and the imaginary-part coefficient sets. Substituting
//! `q = (z/y)(p - r)` removes the cross term and leaves a single sum of
//! products of one-dimensional moments; that form backs
//! [`moment_integral_closed`]. The tables used for density-matrix elements
//! come from the bivariate-normal moment recurrence instead, which does not
//! cancel when `n̄₁ ≪ n̄₂` at high coherence.

use crate::error::{QgsError, Result};
use crate::source::TwoPointParams;
use crate::specfun::accum::ExtendedSum;
use crate::specfun::{ln_gaussian_moment_scaled, MomentParams, SignedLog};

/// Which quadrature of the complex amplitudes a coefficient set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Real,
    Imag,
}

impl Component {
    fn means(self, p: &TwoPointParams) -> (f64, f64) {
        match self {
            Component::Real => (p.mu1.re, p.mu2.re),
            Component::Imag => (p.mu1.im, p.mu2.im),
        }
    }
}

/// Quantities the closed form actually uses, derived from `(x, y, z, u, v, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Reduced {
    /// Quadratic coefficient `x - z²/y` left for `p` after the substitution.
    a_alpha: f64,
    /// Linear coefficient `-(u + z v / y)` in the `exp(-a p² - b p)` convention.
    b_alpha: f64,
    z_over_y: f64,
    ln_y: f64,
    /// `v / √y`, the linear coefficient of the rescaled `r` integral.
    v_scaled: f64,
    /// Maximum of the exponent over the plane.
    peak: f64,
}

/// Coefficients of the exponent
/// `-x p² - y q² + 2z p q + u p + v q + w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffSet {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    reduced: Reduced,
}

impl CoeffSet {
    /// A coefficient set from raw values. Rejects exponents that are not
    /// negative definite.
    pub fn new(x: f64, y: f64, z: f64, u: f64, v: f64, w: f64) -> Result<Self> {
        let all_finite = [x, y, z, u, v, w].iter().all(|c| c.is_finite());
        if !all_finite || !(x > 0.0) || !(y > 0.0) || !(x * y > z * z) {
            return Err(QgsError::Domain(format!(
                "coefficient set needs x > 0, y > 0, xy > z², got x = {x}, y = {y}, z = {z}"
            )));
        }
        let a_alpha = x - z * z / y;
        let b_alpha = -(u + z * v / y);
        let reduced = Reduced {
            a_alpha,
            b_alpha,
            z_over_y: z / y,
            ln_y: y.ln(),
            v_scaled: v / y.sqrt(),
            peak: w + b_alpha * b_alpha / (4.0 * a_alpha) + v * v / (4.0 * y),
        };
        Ok(Self {
            x,
            y,
            z,
            u,
            v,
            w,
            reduced,
        })
    }

    /// `x y - z²`, positive for every valid set.
    pub fn discriminant(&self) -> f64 {
        self.x * self.y - self.z * self.z
    }
}

/// Coefficient set of one quadrature component for a non-degenerate
/// two-point configuration.
///
/// The reduced quantities are evaluated from closed forms in `n̄₁, n̄₂, g`
/// that stay finite as `g → 1`, where `x`, `y` and `z` themselves diverge.
pub fn coeffs(p: &TwoPointParams, component: Component) -> Result<CoeffSet> {
    p.validate()?;
    if p.is_degenerate() {
        return Err(QgsError::Degenerate(format!(
            "g = {} has no coefficient set; the amplitude density is singular",
            p.g
        )));
    }
    let (mu, eta) = component.means(p);
    let (n1, n2, g) = (p.n1, p.n2, p.g);
    let eps = p.one_minus_g2();
    let root = (n1 * n2).sqrt();
    let ratio = (n2 / n1).sqrt();

    let x = (1.0 + n1 * eps) / (n1 * eps);
    let y = (1.0 + n2 * eps) / (n2 * eps);
    let z = g / (root * eps);
    let u = 2.0 * (mu - eta * g / ratio) / (n1 * eps);
    let v = 2.0 * (eta - mu * g * ratio) / (n2 * eps);
    let w = 2.0 * mu * eta * z - mu * mu / (n1 * eps) - eta * eta / (n2 * eps);

    let one_n2 = 1.0 + n2 * eps;
    let d = 1.0 + n1 + n2 + n1 * n2 * eps;
    let reduced = Reduced {
        a_alpha: d / (n1 * one_n2),
        b_alpha: -2.0 * (mu * (1.0 + n2) - eta * g * root) / (n1 * one_n2),
        z_over_y: g * ratio / one_n2,
        ln_y: one_n2.ln() - (n2 * eps).ln(),
        v_scaled: v * (n2 * eps / one_n2).sqrt(),
        peak: -((n2 + 1.0) * mu * mu - 2.0 * g * root * mu * eta + (n1 + 1.0) * eta * eta) / d,
    };
    Ok(CoeffSet {
        x,
        y,
        z,
        u,
        v,
        w,
        reduced,
    })
}

/// Relative error attributed to one term assembled from logarithms whose
/// absolute values sum to `log_mass`, with moment orders up to `order`.
fn term_rel_error(log_mass: f64, order: usize) -> f64 {
    f64::EPSILON * (16.0 + 2.0 * order as f64 + 2.0 * log_mass)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        // Exact for small k; the ln_gamma route is within an ulp anyway.
        acc += (k as f64).ln();
        out.push(if k < 20 { acc } else { crate::specfun::ln_factorial(k) });
    }
    out
}

fn ln_choose(lnf: &[f64], n: usize, k: usize) -> f64 {
    lnf[n] - lnf[k] - lnf[n - k]
}

fn moment_logs(a: f64, b: f64, max_order: usize) -> Result<Vec<SignedLog>> {
    (0..=max_order)
        .map(|n| ln_gaussian_moment_scaled(MomentParams::new(a, b, n as u32)?))
        .collect()
}

/// One entry of a moment table: value and an estimated absolute error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Entry {
    pub value: f64,
    pub error: f64,
}

/// Precomputed one-dimensional moments for a coefficient set, enough to
/// evaluate every `T(i, j)` with `i <= max_i`, `j <= max_j`.
struct ClosedForm {
    reduced: Reduced,
    separable: Option<(Vec<SignedLog>, Vec<SignedLog>)>,
    h_alpha: Vec<SignedLog>,
    h_r: Vec<SignedLog>,
}

impl ClosedForm {
    fn new(c: &CoeffSet, max_i: usize, max_j: usize) -> Result<Self> {
        let r = c.reduced;
        if c.z == 0.0 {
            // The substitution divides by z; at z = 0 the integral factorizes.
            let hx = moment_logs(c.x, -c.u, max_i)?;
            let hy = moment_logs(c.y, -c.v, max_j)?;
            return Ok(Self {
                reduced: r,
                separable: Some((hx, hy)),
                h_alpha: Vec::new(),
                h_r: Vec::new(),
            });
        }
        Ok(Self {
            reduced: r,
            separable: None,
            h_alpha: moment_logs(r.a_alpha, r.b_alpha, max_i + max_j)?,
            h_r: moment_logs(1.0, r.v_scaled, max_j)?,
        })
    }

    /// `T(i, j) · exp(offset)`, summed in double-double.
    fn entry(&self, lnf: &[f64], i: usize, j: usize, offset: f64) -> Entry {
        let r = &self.reduced;
        let base = r.peak + offset;
        if let Some((hx, hy)) = &self.separable {
            let (a, b) = (hx[i], hy[j]);
            let sign = a.sign * b.sign;
            if sign == 0.0 {
                return Entry::default();
            }
            let ln = a.ln_abs + b.ln_abs + base;
            let value = sign * ln.exp();
            let mass = a.ln_abs.abs() + b.ln_abs.abs() + base.abs();
            return Entry {
                value,
                error: value.abs() * term_rel_error(mass, i + j),
            };
        }

        let ln_zy = r.z_over_y.abs().ln();
        let zy_sign = r.z_over_y.signum();
        let mut acc = ExtendedSum::new();
        let mut error = 0.0;
        for k in 0..=j {
            let ha = self.h_alpha[i + j - k];
            let hr = self.h_r[k];
            let mut sign = ha.sign * hr.sign;
            if sign == 0.0 {
                continue;
            }
            if k % 2 == 1 {
                sign = -sign;
            }
            if (j - k) % 2 == 1 {
                sign *= zy_sign;
            }
            let spread = (j - k) as f64 * ln_zy;
            let shrink = -0.5 * (k + 1) as f64 * r.ln_y;
            let ln = ln_choose(lnf, j, k) + ha.ln_abs + hr.ln_abs + spread + shrink + base;
            let term = sign * ln.exp();
            acc.add(term);
            let mass = ha.ln_abs.abs() + hr.ln_abs.abs() + spread.abs() + shrink.abs() + base.abs();
            error += term.abs() * term_rel_error(mass, i + j);
        }
        Entry {
            value: acc.value(),
            error: error + f64::EPSILON * acc.value().abs(),
        }
    }
}

/// Closed form of `∫∫ pᴺ qᴹ exp(-x p² - y q² + 2z p q + u p + v q + w) dp dq`.
pub fn moment_integral_closed(c: &CoeffSet, n: usize, m: usize) -> Result<f64> {
    Ok(moment_integral_closed_with_error(c, n, m)?.value)
}

/// [`moment_integral_closed`] together with its estimated absolute error.
pub fn moment_integral_closed_with_error(c: &CoeffSet, n: usize, m: usize) -> Result<Entry> {
    let form = ClosedForm::new(c, n, m)?;
    let lnf = ln_factorials(n + m);
    let entry = form.entry(&lnf, n, m, 0.0);
    if !entry.value.is_finite() {
        return Err(QgsError::Overflow(format!(
            "moment integral of order ({n}, {m}) is not representable"
        )));
    }
    Ok(entry)
}

/// `T(i, j) / √(i! j!)` for one quadrature component, normalized by the
/// amplitude density so that the product of the real and imaginary tables
/// carries the full `1/(π² n̄₁ n̄₂ (1-g²))` prefactor.
///
/// The factorial scaling keeps entries of order one for large `i, j`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    max_i: usize,
    max_j: usize,
    entries: Vec<Entry>,
}

impl MomentTable {
    pub fn max_i(&self) -> usize {
        self.max_i
    }

    pub fn max_j(&self) -> usize {
        self.max_j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Entry {
        self.entries[i * (self.max_j + 1) + j]
    }

    /// Table of a non-degenerate configuration.
    pub fn build(p: &TwoPointParams, component: Component, max_i: usize, max_j: usize) -> Result<Self> {
        let c = coeffs(p, component)?;
        let form = ClosedForm::new(&c, max_i, max_j)?;
        let lnf = ln_factorials(max_i.max(max_j));
        let ln_norm = -(std::f64::consts::PI.ln() + 0.5 * (p.n1 * p.n2 * p.one_minus_g2()).ln());
        let mut entries = Vec::with_capacity((max_i + 1) * (max_j + 1));
        for i in 0..=max_i {
            for j in 0..=max_j {
                let offset = ln_norm - 0.5 * (lnf[i] + lnf[j]);
                entries.push(form.entry(&lnf, i, j, offset));
            }
        }
        Self::finish(max_i, max_j, entries)
    }

    /// Table of the fully coherent limit, where `β - μ₂ = κ (α - μ₁)` with
    /// `κ = √(n̄₂/n̄₁)` and only one amplitude is integrated.
    pub fn build_degenerate(
        p: &TwoPointParams,
        component: Component,
        max_i: usize,
        max_j: usize,
    ) -> Result<Self> {
        p.validate()?;
        let (mu, eta) = component.means(p);
        let kappa = (p.n2 / p.n1).sqrt();
        let delta = eta - kappa * mu;
        let a = 1.0 / p.n1 + 1.0 + kappa * kappa;
        let b = -2.0 * mu / p.n1 + 2.0 * kappa * delta;
        let c = mu * mu / p.n1 + delta * delta;
        let exponent = b * b / (4.0 * a) - c;
        let ln_norm = -0.5 * (std::f64::consts::PI * p.n1).ln();

        let h = moment_logs(a, b, max_i + max_j)?;
        let lnf = ln_factorials(max_i.max(max_j));
        let ln_kappa = kappa.ln();
        let ln_delta = delta.abs().ln();
        let mut entries = Vec::with_capacity((max_i + 1) * (max_j + 1));
        for i in 0..=max_i {
            for j in 0..=max_j {
                let base = exponent + ln_norm - 0.5 * (lnf[i] + lnf[j]);
                let mut acc = ExtendedSum::new();
                let mut error = 0.0;
                for q in 0..=j {
                    let rest = j - q;
                    let hq = h[i + q];
                    let mut sign = hq.sign;
                    if sign == 0.0 || (rest > 0 && delta == 0.0) {
                        continue;
                    }
                    if rest % 2 == 1 && delta < 0.0 {
                        sign = -sign;
                    }
                    let spread = q as f64 * ln_kappa + if rest > 0 { rest as f64 * ln_delta } else { 0.0 };
                    let ln = ln_choose(&lnf, j, q) + spread + hq.ln_abs + base;
                    let term = sign * ln.exp();
                    acc.add(term);
                    let mass = spread.abs() + hq.ln_abs.abs() + base.abs();
                    error += term.abs() * term_rel_error(mass, i + j);
                }
                entries.push(Entry {
                    value: acc.value(),
                    error: error + f64::EPSILON * acc.value().abs(),
                });
            }
        }
        Self::finish(max_i, max_j, entries)
    }

    /// Table from the moment recurrence of the normalized Gaussian
    /// `(p, q) ~ N(m, Σ)`:
    /// `E[p^{i+1} qʲ] = m_p E[pⁱqʲ] + i Σ_pp E[p^{i-1}qʲ] + j Σ_pq E[pⁱq^{j-1}]`.
    ///
    /// `Σ` and `m` have closed forms in `n̄₁, n̄₂, g` that stay finite at
    /// `g = 1`, so one builder covers both regimes. When the two means share
    /// a sign every term is nonnegative; the error bound comes from the same
    /// recurrence run on absolute values.
    pub fn build_recurrence(
        p: &TwoPointParams,
        component: Component,
        max_i: usize,
        max_j: usize,
    ) -> Result<Self> {
        p.validate()?;
        let (mu, eta) = component.means(p);
        let (n1, n2, g) = (p.n1, p.n2, p.g);
        let eps = p.one_minus_g2();
        let root = (n1 * n2).sqrt();
        let d = 1.0 + n1 + n2 + n1 * n2 * eps;
        let s_pp = n1 * (1.0 + n2 * eps) / (2.0 * d);
        let s_qq = n2 * (1.0 + n1 * eps) / (2.0 * d);
        let s_pq = g * root / (2.0 * d);
        let m_p = (mu * (1.0 + n2) - eta * g * root) / d;
        let m_q = (eta * (1.0 + n1) - mu * g * root) / d;
        let peak = -((n2 + 1.0) * mu * mu - 2.0 * g * root * mu * eta + (n1 + 1.0) * eta * eta) / d;
        let scale = peak.exp() / d.sqrt();

        let cols = max_j + 1;
        let len = (max_i + 1) * cols;
        // Scaled moments S(i, j) = E[pⁱqʲ] / √(i! j!) and their absolute bounds.
        let mut val = vec![0.0f64; len];
        let mut mag = vec![0.0f64; len];
        val[0] = 1.0;
        mag[0] = 1.0;
        let sq: Vec<f64> = (0..=max_i.max(max_j) + 1).map(|k| (k as f64).sqrt()).collect();
        for j in 1..=max_j {
            let (v2, a2) = if j >= 2 { (val[j - 2], mag[j - 2]) } else { (0.0, 0.0) };
            val[j] = (m_q * val[j - 1] + s_qq * sq[j - 1] * v2) / sq[j];
            mag[j] = (m_q.abs() * mag[j - 1] + s_qq * sq[j - 1] * a2) / sq[j];
        }
        for i in 1..=max_i {
            for j in 0..=max_j {
                let at = |r: usize, c: usize| r * cols + c;
                let mut v = m_p * val[at(i - 1, j)];
                let mut a = m_p.abs() * mag[at(i - 1, j)];
                if i >= 2 {
                    v += s_pp * sq[i - 1] * val[at(i - 2, j)];
                    a += s_pp * sq[i - 1] * mag[at(i - 2, j)];
                }
                if j >= 1 {
                    v += s_pq * sq[j] * val[at(i - 1, j - 1)];
                    a += s_pq.abs() * sq[j] * mag[at(i - 1, j - 1)];
                }
                val[at(i, j)] = v / sq[i];
                mag[at(i, j)] = a / sq[i];
            }
        }
        let head = f64::EPSILON * (8.0 + 2.0 * peak.abs());
        let entries = (0..len)
            .map(|k| {
                let order = (k / cols + k % cols) as f64;
                let value = scale * val[k];
                let bound = scale * mag[k];
                Entry {
                    value,
                    error: bound * (f64::EPSILON * (4.0 + 3.0 * order)) + value.abs() * head,
                }
            })
            .collect();
        Self::finish(max_i, max_j, entries)
    }

    /// Table used by the density-matrix code.
    pub fn build_auto(p: &TwoPointParams, component: Component, max_i: usize, max_j: usize) -> Result<Self> {
        Self::build_recurrence(p, component, max_i, max_j)
    }

    fn finish(max_i: usize, max_j: usize, entries: Vec<Entry>) -> Result<Self> {
        if let Some(bad) = entries.iter().position(|e| !e.value.is_finite() || !e.error.is_finite()) {
            return Err(QgsError::Overflow(format!(
                "moment table entry ({}, {}) is not representable",
                bad / (max_j + 1),
                bad % (max_j + 1)
            )));
        }
        Ok(Self {
            max_i,
            max_j,
            entries,
        })
    }
}

pub(crate) fn ln_factorial_table(n: usize) -> Vec<f64> {
    ln_factorials(n)
}

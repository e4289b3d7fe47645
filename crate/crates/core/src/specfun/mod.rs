//! Special functions behind the closed-form density-matrix elements.
//!
//! The central object is the generalized Gaussian moment
//! `f(a, b, n) = ∫ qⁿ exp(-a q² - b q) dq`, evaluated through confluent
//! hypergeometric functions. Values that can overflow are also available in
//! *scaled* form, with the factor `exp(b² / 4a)` removed, so that callers can
//! combine exponents in the log domain.

pub mod accum;
pub mod quad;

use std::sync::OnceLock;

use crate::error::{QgsError, Result};
use accum::{cancellation_digits, DoubleDouble, ExtendedSum, Neumaier};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Largest |z| for which the Taylor series of 1F1 is attempted.
pub const TAYLOR_LIMIT: f64 = 50.0;

/// Relative accuracy that [`hyp1f1`] must certify before returning.
const HYP1F1_TARGET: f64 = 1e-12;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn zeta(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        2 => PI * PI / 6.0,
        3 => 1.202_056_903_159_594,
        4 => PI.powi(4) / 90.0,
        5 => 1.036_927_755_143_37,
        6 => PI.powi(6) / 945.0,
        7 => 1.008_349_277_381_922_8,
        8 => PI.powi(8) / 9450.0,
        9 => 1.002_008_392_826_082_2,
        10 => PI.powi(10) / 93_555.0,
        _ => {
            // n^-k < 1e-18 well before n = 64 once k > 10.
            let mut s = 0.0;
            for n in (2..64).rev() {
                s += (n as f64).powi(-(k as i32));
            }
            1.0 + s
        }
    }
}

/// ln Γ(1 + ε) by its Taylor series; used where ln Γ has a root so that the
/// result keeps full relative accuracy.
fn ln_gamma_1p(eps: f64) -> f64 {
    let mut sum = -EULER_GAMMA * eps;
    let mut power = -eps;
    for k in 2..80 {
        power *= -eps;
        let term = zeta(k) * power / k as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn lanczos_gamma(x: f64) -> f64 {
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

fn stirling_ln_gamma(x: f64) -> f64 {
    let inv = x.recip();
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// Natural logarithm of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(QgsError::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma_unchecked(x + 1.0) - x.ln();
    }
    if (x - 1.0).abs() <= 0.25 {
        return ln_gamma_1p(x - 1.0);
    }
    if (x - 2.0).abs() <= 0.25 {
        let eps = x - 2.0;
        return ln_gamma_1p(eps) + eps.ln_1p();
    }
    if x < 15.0 {
        lanczos_gamma(x).ln()
    } else {
        stirling_ln_gamma(x)
    }
}

fn nonpositive_integer(x: f64) -> Option<usize> {
    (x <= 0.0 && x.fract() == 0.0 && x > -1e9).then(|| (-x) as usize)
}

/// Sum of the 1F1 power series, stopping after `max_terms` terms or once the
/// remaining tail is negligible. Fails if the rounding error of the summed
/// terms, amplified by cancellation, exceeds the certification target.
fn kummer_series(a: f64, b: f64, z: f64, max_terms: usize) -> Result<f64> {
    let mut sum = ExtendedSum::new();
    let mut term = 1.0f64;
    let mut used = 0usize;
    for k in 0..max_terms {
        sum.add(term);
        used = k + 1;
        let kf = k as f64;
        let ratio = (a + kf) / (b + kf) * z / (kf + 1.0);
        term *= ratio;
        if term == 0.0 {
            break;
        }
        let settled = a + kf > 0.0 && b + kf > 0.0 && ratio.abs() < 0.5;
        if settled && term.abs() <= 1e-17 * sum.value().abs() {
            break;
        }
        if !term.is_finite() {
            return Err(QgsError::Certification(format!(
                "1F1({a}; {b}; {z}) series overflowed"
            )));
        }
        if k + 1 == max_terms && max_terms == MAX_SERIES_TERMS {
            return Err(QgsError::Certification(format!(
                "1F1({a}; {b}; {z}) series did not converge in {MAX_SERIES_TERMS} terms"
            )));
        }
    }
    let value = sum.value();
    // Each term carries about three roundings per recurrence step.
    let term_error = 3.0 * used as f64 * f64::EPSILON;
    if certified(value, sum.magnitude(), term_error) {
        Ok(value)
    } else {
        kummer_series_dd(a, b, z, max_terms)
    }
}

/// Values below one, which only arise near roots of the terminating
/// polynomials, are certified in absolute terms.
fn certified(value: f64, magnitude: f64, term_error: f64) -> bool {
    let lost = cancellation_digits(value.abs().max(1.0), magnitude);
    term_error * 10f64.powf(lost) <= HYP1F1_TARGET
}

/// The series of [`kummer_series`] with double-double terms, for arguments
/// whose terms cancel beyond what f64 can certify.
fn kummer_series_dd(a: f64, b: f64, z: f64, max_terms: usize) -> Result<f64> {
    let mut sum = DoubleDouble::ZERO;
    let mut magnitude = 0.0f64;
    let mut term = DoubleDouble::ONE;
    let mut used = 0usize;
    let zd = DoubleDouble::new(z);
    for k in 0..max_terms {
        sum += term;
        magnitude += term.to_f64().abs();
        used = k + 1;
        let kf = k as f64;
        let num = (DoubleDouble::new(a) + kf) * zd;
        let den = (DoubleDouble::new(b) + kf).mul_f64(kf + 1.0);
        term = term * num / den;
        let t = term.to_f64();
        if t == 0.0 || !t.is_finite() {
            break;
        }
        let settled = a + kf > 0.0 && b + kf > 0.0 && (t / (magnitude + 1.0)).abs() < 1e-3;
        if settled && t.abs() <= 1e-34 * magnitude {
            break;
        }
    }
    let value = sum.to_f64();
    // About ten roundings of 2^-104 per step.
    let term_error = 10.0 * used as f64 * DD_EPSILON;
    if certified(value, magnitude, term_error) {
        Ok(value)
    } else {
        let lost = cancellation_digits(value, magnitude);
        Err(QgsError::Certification(format!(
            "1F1({a}; {b}; {z}) loses {lost:.1} digits to cancellation"
        )))
    }
}

const DD_EPSILON: f64 = 4.93e-32;

const MAX_SERIES_TERMS: usize = 4000;

fn check_lower_parameter(b: f64) -> Result<()> {
    if nonpositive_integer(b).is_some() || !b.is_finite() {
        return Err(QgsError::Domain(format!(
            "1F1 lower parameter must not be zero or a negative integer, got {b}"
        )));
    }
    Ok(())
}

/// Kummer's confluent hypergeometric function ₁F₁(a; b; z).
///
/// Terminating cases (either `a` or `b - a` a non-positive integer, the
/// latter via Kummer's transformation) are summed exactly for any `z`.
/// Otherwise the Taylor series is used for `|z| <= 50`, with negative
/// arguments mapped to positive ones by Kummer's transformation. A series
/// that cancels beyond what f64 can certify is re-summed in double-double;
/// anything still uncertified is refused rather than returned with unknown
/// accuracy.
pub fn hyp1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    check_lower_parameter(b)?;
    if z == 0.0 {
        return Ok(1.0);
    }
    if let Some(m) = nonpositive_integer(a) {
        return kummer_series(a, b, z, m + 1);
    }
    if let Some(m) = nonpositive_integer(b - a) {
        let poly = kummer_series(b - a, b, -z, m + 1)?;
        return finite(z.exp() * poly, a, b, z);
    }
    if z.abs() > TAYLOR_LIMIT {
        return Err(QgsError::Certification(format!(
            "1F1({a}; {b}; {z}): |z| beyond the certified series range"
        )));
    }
    if z > 0.0 {
        kummer_series(a, b, z, MAX_SERIES_TERMS)
    } else {
        let tail = kummer_series(b - a, b, -z, MAX_SERIES_TERMS)?;
        finite(z.exp() * tail, a, b, z)
    }
}

/// `exp(-z) · ₁F₁(a; b; z)`, which stays finite for large positive `z` when
/// the Kummer-transformed series terminates.
pub fn hyp1f1_scaled(a: f64, b: f64, z: f64) -> Result<f64> {
    check_lower_parameter(b)?;
    if let Some(m) = nonpositive_integer(b - a) {
        return kummer_series(b - a, b, -z, m + 1);
    }
    let value = hyp1f1(a, b, z)?;
    finite(value * (-z).exp(), a, b, z)
}

fn finite(value: f64, a: f64, b: f64, z: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(QgsError::Overflow(format!("1F1({a}; {b}; {z}) is not representable")))
    }
}

/// Parameters of `f(a, b, n) = ∫ qⁿ exp(-a q² - b q) dq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams {
    pub a: f64,
    pub b: f64,
    pub n: u32,
}

impl MomentParams {
    /// The integral converges only for a positive quadratic coefficient.
    pub fn new(a: f64, b: f64, n: u32) -> Result<Self> {
        let p = Self { a, b, n };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(QgsError::Domain(format!(
                "Gaussian moment needs a > 0 and finite b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// The exponent `b² / 4a` removed by the scaled evaluation.
    pub fn peak_exponent(&self) -> f64 {
        self.b * self.b / (4.0 * self.a)
    }
}

/// `f(a, b, n) · exp(-b² / 4a)`.
///
/// Only the hypergeometric term that survives for the parity of `n` is
/// evaluated: for even `n` the `(1 + n)/2; 1/2` term, for odd `n` the
/// `1 + n/2; 3/2` term.
pub fn gaussian_moment_scaled(p: MomentParams) -> Result<f64> {
    p.validate()?;
    let MomentParams { a, b, n } = p;
    let z = p.peak_exponent();
    let nf = f64::from(n);
    if n % 2 == 0 {
        let shape = 0.5 * (nf + 1.0);
        let prefactor = (ln_gamma_unchecked(shape) - shape * a.ln()).exp();
        Ok(prefactor * hyp1f1_scaled(shape, 0.5, z)?)
    } else {
        if b == 0.0 {
            return Ok(0.0);
        }
        let shape = 1.0 + 0.5 * nf;
        let prefactor = (ln_gamma_unchecked(shape) - shape * a.ln()).exp();
        Ok(-b * prefactor * hyp1f1_scaled(shape, 1.5, z)?)
    }
}

/// A real number stored as `sign · exp(ln_abs)`; `sign` is 0 for an exact
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    pub const ZERO: Self = Self {
        ln_abs: f64::NEG_INFINITY,
        sign: 0.0,
    };

    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }
}

/// [`gaussian_moment_scaled`] in signed-log form, for moment orders whose
/// gamma prefactor alone would overflow.
pub fn ln_gaussian_moment_scaled(p: MomentParams) -> Result<SignedLog> {
    p.validate()?;
    let MomentParams { a, b, n } = p;
    let z = p.peak_exponent();
    let nf = f64::from(n);
    let (shape, lower, factor) = if n % 2 == 0 {
        (0.5 * (nf + 1.0), 0.5, 1.0)
    } else {
        if b == 0.0 {
            return Ok(SignedLog::ZERO);
        }
        (1.0 + 0.5 * nf, 1.5, -b)
    };
    Ok(SignedLog {
        ln_abs: ln_gamma_unchecked(shape) - shape * a.ln() + ln_scaled_series(shape, lower, z) + factor.abs().ln(),
        sign: factor.signum(),
    })
}

/// `ln(exp(-z) ₁F₁(a; b; z))` for `z >= 0` and `b - a = -m` a non-positive
/// integer: the Kummer-transformed polynomial `₁F₁(-m; b; -z)`, whose terms
/// are all positive, summed in log space so that no term can overflow.
fn ln_scaled_series(a: f64, b: f64, z: f64) -> f64 {
    let m = nonpositive_integer(b - a).expect("moment parameters give a terminating series");
    if z == 0.0 || m == 0 {
        return 0.0;
    }
    let ln_z = z.ln();
    let mut ln_terms = Vec::with_capacity(m + 1);
    let mut ln_t = 0.0;
    ln_terms.push(ln_t);
    for k in 0..m {
        let kf = k as f64;
        ln_t += ((m - k) as f64).ln() + ln_z - (b + kf).ln() - (kf + 1.0).ln();
        ln_terms.push(ln_t);
    }
    let top = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = Neumaier::new();
    for t in &ln_terms {
        sum.add((t - top).exp());
    }
    top + sum.value().ln()
}

/// Closed form of `f(a, b, n) = ∫ qⁿ exp(-a q² - b q) dq` for `a > 0`.
pub fn gaussian_moment(p: MomentParams) -> Result<f64> {
    let scaled = gaussian_moment_scaled(p)?;
    let value = scaled * p.peak_exponent().exp();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(QgsError::Overflow(format!("Gaussian moment {p:?} is not representable")))
    }
}

/// Adaptive quadrature of the same integral, used as an independent check of
/// [`gaussian_moment`]. The truncated domain is wide enough that the tail
/// mass is below 1e-15 of the result.
pub fn quadrature_moment(p: MomentParams) -> Result<f64> {
    p.validate()?;
    let MomentParams { a, b, n } = p;
    let half_width =
        20f64.max((b.abs() + 10.0 * f64::from(n + 1).sqrt()) / a + 10.0 / a.sqrt());
    let integrand = |q: f64| q.powi(n as i32) * (-a * q * q - b * q).exp();
    let r = quad::integrate(integrand, -half_width, half_width, 1e-13, 1e-13)?;
    if r.error > 1e-10 * (1.0 + r.value.abs()) {
        return Err(QgsError::Convergence(format!(
            "quadrature of {p:?} certified only to {:.3e}",
            r.error
        )));
    }
    Ok(r.value)
}

/// Largest `n` supported by [`binomial`].
pub const MAX_BINOMIAL_N: usize = 128;

fn pascal() -> &'static [Vec<u128>] {
    static TABLE: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(MAX_BINOMIAL_N + 1);
        rows.push(vec![1]);
        for n in 1..=MAX_BINOMIAL_N {
            let prev = &rows[n - 1];
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    })
}

/// Exact binomial coefficient for `k <= n <= 128`.
pub fn binomial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Err(QgsError::Domain(format!("binomial({n}, {k}) needs k <= n")));
    }
    if n > MAX_BINOMIAL_N {
        return Err(QgsError::Overflow(format!(
            "binomial({n}, {k}) is beyond the exact range n <= {MAX_BINOMIAL_N}"
        )));
    }
    Ok(pascal()[n][k])
}

/// ln(n!) for a non-negative integer.
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma_unchecked(n as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn ln_gamma_examples() {
        assert!(ln_gamma(1.0).unwrap().abs() < 1e-16);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-16);
        assert!(rel(ln_gamma(0.5).unwrap(), 0.572_364_942_924_700_1) < 1e-15);
        assert!(rel(ln_gamma(10.0).unwrap(), 362_880f64.ln()) < 1e-15);
    }

    #[test]
    fn ln_gamma_rejects_nonpositive() {
        assert!(matches!(ln_gamma(0.0), Err(QgsError::Domain(_))));
        assert!(matches!(ln_gamma(-2.5), Err(QgsError::Domain(_))));
        assert!(matches!(ln_gamma(f64::NAN), Err(QgsError::Domain(_))));
    }

    #[test]
    fn ln_gamma_branch_seams_are_continuous() {
        for x in [0.75, 1.25, 1.75, 2.25, 15.0] {
            let below = ln_gamma(x - 1e-12).unwrap();
            let above = ln_gamma(x + 1e-12).unwrap();
            assert!((below - above).abs() < 1e-11, "seam at {x}");
        }
    }

    #[test]
    fn hyp1f1_examples() {
        assert_eq!(hyp1f1(2.5, 1.5, 0.0).unwrap(), 1.0);
        assert!(rel(hyp1f1(1.0, 1.0, 1.0).unwrap(), std::f64::consts::E) < 1e-15);
    }

    #[test]
    fn hyp1f1_forbidden_lower_parameter() {
        for b in [0.0, -1.0, -7.0] {
            assert!(matches!(hyp1f1(1.0, b, 0.3), Err(QgsError::Domain(_))));
        }
    }

    #[test]
    fn hyp1f1_refuses_large_nonterminating_argument() {
        assert!(matches!(hyp1f1(0.3, 0.7, 55.0), Err(QgsError::Certification(_))));
        assert!(matches!(hyp1f1(0.3, 0.7, -55.0), Err(QgsError::Certification(_))));
    }

    #[test]
    fn hyp1f1_terminating_any_argument() {
        // 1F1(-2; 1/2; z) = 1 - 4z + 4z²/3
        let z = 250.0;
        let expected = 1.0 - 4.0 * z + 4.0 * z * z / 3.0;
        assert!(rel(hyp1f1(-2.0, 0.5, z).unwrap(), expected) < 1e-14);
        // 1F1(3/2; 1/2; z) = e^z (1 + 2z), reached through Kummer.
        let z = 80.0;
        assert!(rel(hyp1f1_scaled(1.5, 0.5, z).unwrap(), 1.0 + 2.0 * z) < 1e-14);
    }

    #[test]
    fn gaussian_moment_examples() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!(rel(gaussian_moment(MomentParams::new(1.0, 0.0, 0).unwrap()).unwrap(), sqrt_pi) < 1e-15);
        assert_eq!(gaussian_moment(MomentParams::new(1.0, 0.0, 1).unwrap()).unwrap(), 0.0);
        assert!(rel(gaussian_moment(MomentParams::new(1.0, 0.0, 2).unwrap()).unwrap(), sqrt_pi / 2.0) < 1e-15);
    }

    #[test]
    fn gaussian_moment_rejects_nonpositive_a() {
        assert!(matches!(MomentParams::new(0.0, 1.0, 2), Err(QgsError::Domain(_))));
        let bad = MomentParams { a: -1.0, b: 0.0, n: 0 };
        assert!(matches!(gaussian_moment(bad), Err(QgsError::Domain(_))));
        assert!(matches!(quadrature_moment(bad), Err(QgsError::Domain(_))));
    }

    #[test]
    fn gaussian_moment_first_odd_moment() {
        // ∫ q e^{-a q² - b q} dq = -b/(2a) √(π/a) e^{b²/4a}
        let (a, b) = (1.7, -0.9);
        let expected = -b / (2.0 * a) * (std::f64::consts::PI / a).sqrt() * (b * b / (4.0 * a)).exp();
        let got = gaussian_moment(MomentParams::new(a, b, 1).unwrap()).unwrap();
        assert!(rel(got, expected) < 1e-14);
    }

    #[test]
    fn quadrature_moment_examples() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let m2 = quadrature_moment(MomentParams::new(1.0, 0.0, 2).unwrap()).unwrap();
        assert!((m2 - sqrt_pi / 2.0).abs() < 1e-12);
        let m0 = quadrature_moment(MomentParams::new(1.0, 0.0, 0).unwrap()).unwrap();
        assert!((m0 - sqrt_pi).abs() < 1e-12);
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial(5, 0).unwrap(), 1);
        assert_eq!(binomial(16, 8).unwrap(), 12_870);
        assert_eq!(binomial(128, 64).unwrap(), 23_951_146_041_928_082_866_135_587_776_380_551_750);
        assert!(matches!(binomial(3, 4), Err(QgsError::Domain(_))));
        assert!(matches!(binomial(129, 4), Err(QgsError::Overflow(_))));
    }
}

//! Fock-basis density-matrix elements `⟨N, M| ρ |K, L⟩`.
//!
//! With `α = αᵣ + i αᵢ`, the factor `αᴺ α*ᴷ` expands as
//! `Σₛ c_{NK}(s) αᵣˢ αᵢ^{N+K-s}` where `c_{NK}(s) = [xˢ] (x + i)ᴺ (x - i)ᴷ`
//! is a Gaussian integer. The amplitude density factorizes over real and
//! imaginary parts, so an element is a double sum of products of one entry
//! from each [`MomentTable`].

use num_complex::{Complex, Complex64};

use super::moments::{ln_factorial_table, Component, MomentTable};
use super::FockIndex;
use crate::error::{QgsError, Result};
use crate::source::TwoPointParams;
use crate::specfun::accum::{cancellation_digits, DoubleDouble, ExtendedSum, Neumaier};

/// Fewer surviving digits than this is reported as precision loss.
pub const MIN_DIGITS: f64 = 6.0;

/// Cancellation beyond this many digits triggers the double-double pass.
pub const ESCALATION_DIGITS: f64 = 8.0;

/// Largest index sum for which the Gaussian-integer coefficient products
/// are exact in 128-bit arithmetic.
pub const MAX_EXACT_ORDER: usize = 64;

/// Coefficients of `(x + i)ⁿ (x - i)ᵏ`, lowest power first.
pub fn phase_coefficients(n: usize, k: usize) -> Vec<Complex<i128>> {
    let mut poly = vec![Complex::new(1i128, 0)];
    let mut times = |root: Complex<i128>| {
        let mut next = vec![Complex::new(0i128, 0); poly.len() + 1];
        for (s, c) in poly.iter().enumerate() {
            next[s + 1] += *c;
            next[s] += *c * root;
        }
        poly = next;
    };
    for _ in 0..n {
        times(Complex::new(0, 1));
    }
    for _ in 0..k {
        times(Complex::new(0, -1));
    }
    poly
}

/// A density-matrix element with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub value: Complex64,
    /// Estimated absolute error of either part.
    pub error: f64,
    /// Decimal digits that survive relative to the element's natural scale
    /// `max(|ρ|, √(p_NM p_KL))`.
    pub digits: f64,
    /// Whether the double-double pass was needed.
    pub escalated: bool,
}

/// Moment tables for one configuration, reusable across many elements.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    params: TwoPointParams,
    re: MomentTable,
    im: MomentTable,
    lnf: Vec<f64>,
}

impl DensityMatrix {
    /// Tables covering every element with `N, K <= max1` and `M, L <= max2`.
    ///
    /// The degenerate (`g = 1`) limit is supported here; the public element
    /// functions refuse it.
    pub fn new(p: &TwoPointParams, max1: usize, max2: usize) -> Result<Self> {
        p.validate()?;
        let (mi, mj) = (2 * max1, 2 * max2);
        Ok(Self {
            params: *p,
            re: MomentTable::build_auto(p, Component::Real, mi, mj)?,
            im: MomentTable::build_auto(p, Component::Imag, mi, mj)?,
            lnf: ln_factorial_table(mi.max(mj)),
        })
    }

    pub fn params(&self) -> &TwoPointParams {
        &self.params
    }

    pub fn max1(&self) -> usize {
        self.re.max_i() / 2
    }

    pub fn max2(&self) -> usize {
        self.re.max_j() / 2
    }

    fn check_bounds(&self, idx: FockIndex) -> Result<()> {
        if idx.n.max(idx.k) > self.max1() || idx.m.max(idx.l) > self.max2() {
            return Err(QgsError::Domain(format!(
                "index {idx:?} outside the prepared range ({}, {})",
                self.max1(),
                self.max2()
            )));
        }
        Ok(())
    }

    /// `√(s! (n+k-s)! / (n! k!))` for every `s`.
    fn split_weights(&self, n: usize, k: usize) -> Vec<f64> {
        let lnf = &self.lnf;
        (0..=n + k)
            .map(|s| (0.5 * (lnf[s] + lnf[n + k - s] - lnf[n] - lnf[k])).exp())
            .collect()
    }

    /// Diagonal element `p(N, M)` and its estimated absolute error. Every
    /// term is nonnegative, so no cancellation occurs at this level.
    pub fn diagonal(&self, n: usize, m: usize) -> (f64, f64) {
        let a = self.diagonal_weights(n);
        let b = self.diagonal_weights(m);
        self.diagonal_with(n, m, &a, &b)
    }

    /// `C(n, r) √((2r)! (2n-2r)!) / n!` for `r = 0..=n`.
    pub(crate) fn diagonal_weights(&self, n: usize) -> Vec<f64> {
        let lnf = &self.lnf;
        (0..=n)
            .map(|r| {
                let choose = lnf[n] - lnf[r] - lnf[n - r];
                (choose + 0.5 * (lnf[2 * r] + lnf[2 * n - 2 * r]) - lnf[n]).exp()
            })
            .collect()
    }

    pub(crate) fn diagonal_with(&self, n: usize, m: usize, wa: &[f64], wb: &[f64]) -> (f64, f64) {
        let mut sum = Neumaier::new();
        let mut error = 0.0;
        for (r, &a) in wa.iter().enumerate() {
            for (q, &b) in wb.iter().enumerate() {
                let tr = self.re.get(2 * r, 2 * q);
                let ti = self.im.get(2 * n - 2 * r, 2 * m - 2 * q);
                let w = a * b;
                let term = w * tr.value * ti.value;
                sum.add(term);
                error += w * (tr.value.abs() * ti.error + tr.error * ti.value.abs())
                    + 4.0 * f64::EPSILON * term.abs();
            }
        }
        (sum.value(), error + f64::EPSILON * sum.magnitude())
    }

    /// General element with error estimate, including the degenerate limit.
    pub fn element_unchecked(&self, idx: FockIndex) -> Result<Element> {
        self.check_bounds(idx)?;
        let FockIndex { n, m, k, l } = idx;
        if n + m + k + l > MAX_EXACT_ORDER {
            return Err(QgsError::Domain(format!(
                "index {idx:?} exceeds the exact coefficient range N+M+K+L <= {MAX_EXACT_ORDER}"
            )));
        }
        let c1 = phase_coefficients(n, k);
        let c2 = phase_coefficients(m, l);
        let w1 = self.split_weights(n, k);
        let w2 = self.split_weights(m, l);

        // Products W·T_re·T_im with their absolute errors.
        let mut terms = Vec::with_capacity(c1.len() * c2.len());
        for (s, cs) in c1.iter().enumerate() {
            if *cs == Complex::new(0, 0) {
                continue;
            }
            for (t, ct) in c2.iter().enumerate() {
                if *ct == Complex::new(0, 0) {
                    continue;
                }
                let tr = self.re.get(s, t);
                let ti = self.im.get(n + k - s, m + l - t);
                let w = w1[s] * w2[t];
                let prod = w * tr.value * ti.value;
                let err = w * (tr.value.abs() * ti.error + tr.error * ti.value.abs())
                    + 4.0 * f64::EPSILON * prod.abs();
                terms.push((*cs * *ct, prod, err));
            }
        }

        let mut re = Neumaier::new();
        let mut im = Neumaier::new();
        let mut error = 0.0;
        for &(c, prod, err) in &terms {
            re.add(c.re as f64 * prod);
            im.add(c.im as f64 * prod);
            error += (c.re.abs().max(c.im.abs())) as f64 * err;
        }
        let lost = cancellation_digits(re.value(), re.magnitude())
            .max(cancellation_digits(im.value(), im.magnitude()));
        let escalated = lost > ESCALATION_DIGITS;
        let value = if escalated {
            let mut re_dd = ExtendedSum::new();
            let mut im_dd = ExtendedSum::new();
            for &(c, prod, _) in &terms {
                re_dd.add_dd(DoubleDouble::from_i128(c.re) * DoubleDouble::new(prod));
                im_dd.add_dd(DoubleDouble::from_i128(c.im) * DoubleDouble::new(prod));
            }
            error += 1e-30 * (re.magnitude() + im.magnitude());
            Complex64::new(re_dd.value(), im_dd.value())
        } else {
            error += 2.0 * f64::EPSILON * (re.magnitude() + im.magnitude());
            Complex64::new(re.value(), im.value())
        };

        let scale = if n == k && m == l {
            value.norm()
        } else {
            let (p1, _) = self.diagonal(n, m);
            let (p2, _) = self.diagonal(k, l);
            value.norm().max((p1.max(0.0) * p2.max(0.0)).sqrt())
        };
        let digits = if error == 0.0 {
            16.0
        } else if scale == 0.0 {
            0.0
        } else {
            (scale / error).log10().min(16.0)
        };
        Ok(Element {
            value,
            error,
            digits,
            escalated,
        })
    }

    /// Certified element; refuses the degenerate limit and reports
    /// precision loss below [`MIN_DIGITS`] surviving digits.
    pub fn element(&self, idx: FockIndex) -> Result<Complex64> {
        if self.params.is_degenerate() {
            return Err(QgsError::Degenerate(format!(
                "density-matrix elements need g < 1, got g = {}",
                self.params.g
            )));
        }
        let e = self.element_unchecked(idx)?;
        if e.digits < MIN_DIGITS {
            return Err(QgsError::PrecisionLoss {
                digits: e.digits,
                context: format!("rho element {idx:?}"),
            });
        }
        Ok(e.value)
    }
}

/// Density-matrix element `⟨N, M| ρ |K, L⟩` of the two-detector state.
pub fn rho_element(p: &TwoPointParams, idx: FockIndex) -> Result<Complex64> {
    let dm = DensityMatrix::new(p, idx.n.max(idx.k), idx.m.max(idx.l))?;
    dm.element(idx)
}

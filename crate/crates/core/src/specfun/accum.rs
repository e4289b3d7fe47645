//! Compensated and extended-precision summation.
//!
//! [`DoubleDouble`] carries an unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi) / 2`, which gives roughly 32 significant decimal digits.
//! [`Neumaier`] is the cheaper first-pass accumulator; both track the sum of
//! absolute values so callers can estimate how many digits cancellation
//! consumed.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Paired-limb floating point value `hi + lo`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Exact conversion of an integer up to 2^106 in magnitude.
    pub fn from_i128(x: i128) -> Self {
        let hi = x as f64;
        // `hi` is within half an ulp of `x`, so the residual fits an f64
        // exactly whenever |x| < 2^106.
        let rest = x - hi as i128;
        let (hi, lo) = fast_two_sum(hi, rest as f64);
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = self.lo.mul_add(b, e);
        let (hi, lo) = fast_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    /// Long division with three correction steps.
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs.mul_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs.mul_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = fast_two_sum(q1, q2);
        Self { hi, lo } + q3
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Add<f64> for DoubleDouble {
    type Output = Self;

    fn add(self, rhs: f64) -> Self {
        let (s, e) = two_sum(self.hi, rhs);
        let (hi, lo) = fast_two_sum(s, e + self.lo);
        Self { hi, lo }
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl AddAssign<f64> for DoubleDouble {
    fn add_assign(&mut self, rhs: f64) {
        *self = *self + rhs;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = fast_two_sum(p, e);
        Self { hi, lo }
    }
}

/// Neumaier's improved Kahan summation, with a running sum of magnitudes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
    magnitude: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.magnitude += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of absolute values of everything added so far.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

/// Extended-precision accumulator that also tracks the sum of magnitudes.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtendedSum {
    sum: DoubleDouble,
    magnitude: f64,
}

impl ExtendedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        self.sum += x;
        self.magnitude += x.abs();
    }

    #[inline]
    pub fn add_dd(&mut self, x: DoubleDouble) {
        self.magnitude += x.to_f64().abs();
        self.sum += x;
    }

    pub fn value(&self) -> f64 {
        self.sum.to_f64()
    }

    pub fn value_dd(&self) -> DoubleDouble {
        self.sum
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

/// Decimal digits lost to cancellation in a sum with the given total and
/// magnitude: `log10(Σ|t| / |Σ t|)`. Infinite when the total is exactly zero
/// but the terms are not.
pub fn cancellation_digits(total: f64, magnitude: f64) -> f64 {
    if magnitude == 0.0 {
        0.0
    } else if total == 0.0 {
        f64::INFINITY
    } else {
        (magnitude / total.abs()).log10().max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_keeps_tiny_addends() {
        let mut acc = DoubleDouble::new(1.0);
        for _ in 0..1000 {
            acc += 1e-20;
        }
        acc += -1.0;
        assert!((acc.to_f64() - 1e-17).abs() < 1e-30);
    }

    #[test]
    fn from_i128_is_exact() {
        let x: i128 = (1 << 70) + 12345;
        let d = DoubleDouble::from_i128(x);
        assert_eq!(d.hi() as i128 + d.lo() as i128, x);
    }

    #[test]
    fn neumaier_handles_large_cancellation() {
        let mut s = Neumaier::new();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
        assert!(cancellation_digits(s.value(), s.magnitude()) > 99.0);
    }

    #[test]
    fn extended_sum_alternating_binomials() {
        // Σ (-1)^k C(40,k) = 0 with terms up to ~1.4e11; double-double
        // recovers the zero exactly.
        let mut acc = ExtendedSum::new();
        let mut c = 1.0f64;
        for k in 0..=40u32 {
            acc.add(if k % 2 == 0 { c } else { -c });
            c = c * f64::from(40 - k) / f64::from(k + 1);
        }
        assert_eq!(acc.value(), 0.0);
    }

    #[test]
    fn product_carries_low_limb() {
        let a = DoubleDouble::new(1.0) + 1e-20;
        let b = a * a;
        assert!((b.lo() - 2e-20).abs() < 1e-35);
    }
}

//! Double-double arithmetic: a value `hi + lo` with `|lo| <= ulp(hi) / 2`,
//! about 106 bits of precision.
//!
//! Mixture weights for close scales are large and of alternating sign, so
//! sums of weighted densities cancel heavily. Carrying the weights and the
//! Erlang densities in this format keeps those sums accurate.

use core::ops::{Add, Div, Mul, Neg, Sub};

#[cfg(not(feature = "std"))]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1

#[inline]
fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    // Scale down where SPLITTER * a would overflow.
    if a.abs() > 6.7e299 {
        let (hi, lo) = split(a * 3.725_290_298_461_914e-9); // 2^-28
        return (hi * 268_435_456.0, lo * 268_435_456.0);
    }
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

// Dekker's product; avoids relying on a hardware fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    Dd { hi: p, lo: ((ah * bh - p) + ah * bl + al * bh) + al * bl }
}

// ln 2 to double-double precision.
const LN2: Dd = Dd { hi: 6.931_471_805_599_453e-1, lo: 2.319_046_813_846_299_6e-17 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn powi(self, n: u32) -> Self {
        let mut result = Dd::ONE;
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            n >>= 1;
        }
        result
    }

    fn mul_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    /// `e^x`; zero below about -745, infinite above about 709.
    pub fn exp(self) -> Self {
        if self.hi < -745.5 {
            return Dd::ZERO;
        }
        if self.hi > 709.7 {
            return Dd::from_f64(f64::INFINITY);
        }
        // x = k ln2 + r, then e^r = (e^{r / 2^10})^{2^10}.
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * k).mul_pow2(-10);
        // Taylor series of e^r - 1; |r| < 4e-4, so 12 terms are plenty.
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / (n as f64);
            sum = sum + term;
        }
        // (1 + s)^2 - 1 = s (2 + s), kept relative to 1 to avoid losing
        // the small part.
        for _ in 0..10 {
            sum = sum * (sum + 2.0);
        }
        let e = sum + 1.0;
        if k > 1023.0 {
            e.mul_pow2(1023).mul_pow2(k as i32 - 1023)
        } else if k < -1022.0 {
            e.mul_pow2(-1022).mul_pow2(k as i32 + 1022)
        } else {
            e.mul_pow2(k as i32)
        }
    }

    /// Natural logarithm of a positive value, by one Newton step on `e^y`.
    pub fn ln(self) -> Self {
        let y = Dd::from_f64(self.hi.ln());
        y + self * (-y).exp() - 1.0
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let s = two_sum(self.hi, b.hi);
        let t = two_sum(self.lo, b.lo);
        let s = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(s.hi, s.lo + t.lo)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, b: f64) -> Dd {
        let s = two_sum(self.hi, b);
        quick_two_sum(s.hi, s.lo + self.lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, b: f64) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = two_prod(self.hi, b.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let p = two_prod(self.hi, b);
        quick_two_sum(p.hi, p.lo + self.lo * b)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        quick_two_sum(q1, q2) + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::from_f64(b)
    }
}

impl core::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        ((a - b).to_f64()).abs() <= tol * b.to_f64().abs()
    }

    #[test]
    fn keeps_the_small_part() {
        let a = Dd::from_f64(1.0) + 1e-20;
        assert_eq!(a.hi, 1.0);
        assert_eq!(a.lo, 1e-20);
        assert_eq!((a - 1.0).to_f64(), 1e-20);
        let third = Dd::ONE / 3.0;
        assert!(((third * 3.0) - 1.0).to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_and_ln_round_trip() {
        for &x in &[-600.0, -30.5, -1.0, -1e-8, 0.0, 0.3, 1.0, 2.5, 50.0, 300.0] {
            let d = Dd::from_f64(x);
            let e = d.exp();
            assert!((e.to_f64() - x.exp()).abs() <= 4e-16 * x.exp(), "{x}");
            assert!((e.ln() - d).to_f64().abs() <= 1e-29 * x.abs().max(1.0), "{x}");
        }
        // e = Σ 1/n! to double-double accuracy.
        let mut term = Dd::ONE;
        let mut e = Dd::ONE;
        for n in 1..30 {
            term = term / n as f64;
            e = e + term;
        }
        assert!(close(Dd::ONE.exp(), e, 1e-30));
        assert!(close(Dd::from_f64(2.0).ln(), LN2, 1e-31));
        assert_eq!(Dd::from_f64(-800.0).exp(), Dd::ZERO);
    }

    #[test]
    fn integer_powers() {
        let x = Dd::from_f64(1.0) + 1e-17;
        let p = x.powi(10);
        // (1 + ε)^10 ≈ 1 + 10 ε
        assert!(((p - 1.0).to_f64() - 1e-16).abs() < 1e-30);
        assert_eq!(Dd::from_f64(3.0).powi(0), Dd::ONE);
    }
}

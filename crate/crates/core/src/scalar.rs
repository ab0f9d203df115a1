//! The coefficient field: real or complex double precision.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
{
    fn from_f64(x: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// Modulus.
    fn modulus(self) -> f64;
    fn exp(self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn is_finite(self) -> bool;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }
}

/// `n!` as a float; exact through 20!, a running product beyond.
pub fn factorial(n: usize) -> f64 {
    if n <= 20 {
        (1..=n as u64).product::<u64>() as f64
    } else {
        let mut acc = factorial(20);
        for k in 21..=n {
            acc *= k as f64;
        }
        acc
    }
}

/// `ln(k!)` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Shared `ln(k!)` table for `k = 0..=LN_FACTORIAL_TABLE`.
pub const LN_FACTORIAL_TABLE: usize = 30_000;

pub fn ln_factorial_table() -> &'static [f64] {
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| ln_factorials(LN_FACTORIAL_TABLE))
}

/// Binomial coefficient as a float (multiplicative formula).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round_if_small()
}

trait RoundIfSmall {
    fn round_if_small(self) -> Self;
}

impl RoundIfSmall for f64 {
    fn round_if_small(self) -> Self {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

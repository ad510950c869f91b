//! Scalar abstraction used by the constitutive models.
//!
//! The cohesive law is written once, generically over [`Real`], and evaluated
//! either with plain `f64` (stress update) or with [`Dual2`] (two-directional
//! forward-mode derivatives). Running the same code path with dual numbers
//! yields the consistent tangent of the traction with respect to the
//! displacement jump, including every mode-mixity and implicit-damage chain.

use core::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic required by the constitutive models.
pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Value part (the primal), discarding derivative information.
    fn val(self) -> f64;
    fn sqrt(self) -> Self;
    /// Power with a constant exponent.
    fn powf(self, e: f64) -> Self;
    /// Power with a scalar exponent (`self > 0` assumed unless `self == 0`).
    fn pows(self, e: Self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn log10(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// Macaulay bracket `<x> = max(x, 0)`, branching on the value part.
    fn macaulay(self) -> Self {
        if self.val() > 0.0 {
            self
        } else {
            Self::zero()
        }
    }
    /// Branch on value parts; ties keep `self`.
    fn max_branch(self, other: Self) -> Self {
        if other.val() > self.val() {
            other
        } else {
            self
        }
    }
    fn min_branch(self, other: Self) -> Self {
        if other.val() < self.val() {
            other
        } else {
            self
        }
    }
    fn clamp_branch(self, lo: f64, hi: f64) -> Self {
        if self.val() < lo {
            Self::from_f64(lo)
        } else if self.val() > hi {
            Self::from_f64(hi)
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn powf(self, e: f64) -> Self {
        libm::pow(self, e)
    }
    #[inline]
    fn pows(self, e: Self) -> Self {
        libm::pow(self, e)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn log10(self) -> Self {
        libm::log10(self)
    }
}

/// Forward-mode dual number carrying two derivative directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub d: [f64; 2],
}

impl Dual2 {
    pub const fn new(v: f64, d: [f64; 2]) -> Self {
        Self { v, d }
    }
    /// Constant (zero derivative).
    pub const fn c(v: f64) -> Self {
        Self { v, d: [0.0, 0.0] }
    }
    /// Seed for input component `k` of a two-component argument.
    pub fn seed(v: f64, k: usize) -> Self {
        let mut d = [0.0, 0.0];
        d[k] = 1.0;
        Self { v, d }
    }
}

impl Add for Dual2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, [self.d[0] + o.d[0], self.d[1] + o.d[1]])
    }
}

impl Sub for Dual2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, [self.d[0] - o.d[0], self.d[1] - o.d[1]])
    }
}

impl Mul for Dual2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.v * o.v,
            [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
            ],
        )
    }
}

impl Div for Dual2 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        Self::new(
            v,
            [
                (self.d[0] - v * o.d[0]) * inv,
                (self.d[1] - v * o.d[1]) * inv,
            ],
        )
    }
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, [-self.d[0], -self.d[1]])
    }
}

impl PartialOrd for Dual2 {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

impl Real for Dual2 {
    fn from_f64(x: f64) -> Self {
        Self::c(x)
    }
    fn val(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let r = libm::sqrt(self.v);
        if r == 0.0 {
            // Subgradient at the origin; callers branch before reaching it.
            return Self::c(0.0);
        }
        let g = 0.5 / r;
        Self::new(r, [self.d[0] * g, self.d[1] * g])
    }
    fn powf(self, e: f64) -> Self {
        if self.v == 0.0 {
            return Self::c(if e == 0.0 { 1.0 } else { 0.0 });
        }
        let v = libm::pow(self.v, e);
        let g = e * libm::pow(self.v, e - 1.0);
        Self::new(v, [self.d[0] * g, self.d[1] * g])
    }
    fn pows(self, e: Self) -> Self {
        if self.v == 0.0 {
            return Self::c(if e.v == 0.0 { 1.0 } else { 0.0 });
        }
        // x^y = exp(y ln x)
        (e * self.ln()).exp()
    }
    fn ln(self) -> Self {
        let g = 1.0 / self.v;
        Self::new(libm::log(self.v), [self.d[0] * g, self.d[1] * g])
    }
    fn exp(self) -> Self {
        let v = libm::exp(self.v);
        Self::new(v, [self.d[0] * v, self.d[1] * v])
    }
    fn log10(self) -> Self {
        const LN10: f64 = core::f64::consts::LN_10;
        let g = 1.0 / (self.v * LN10);
        Self::new(libm::log10(self.v), [self.d[0] * g, self.d[1] * g])
    }
}

/// `sqrt(a^2 + b^2)` for plain floats.
#[inline]
pub fn hypot(a: f64, b: f64) -> f64 {
    libm::sqrt(a * a + b * b)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

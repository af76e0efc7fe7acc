//! Scalar abstraction so that the same field and generator code runs in
//! `f64` for simulation and in exact rationals for identity checks.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::rational::{q, sqrt_exact, to_f64, Q};

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_q(x: &Q) -> Self;
    fn from_i64(x: i64) -> Self;
    fn to_f64(&self) -> f64;

    /// `n^(e/2)` when representable; rationals need a perfect square for odd `e`.
    fn n_pow_half(n: u64, e: i64) -> Option<Self>;

    fn powi(&self, m: usize) -> Self {
        let mut out = Self::one();
        for _ in 0..m {
            out = out * self.clone();
        }
        out
    }
}

impl Scalar for f64 {
    fn from_q(x: &Q) -> Self {
        to_f64(x)
    }
    fn from_i64(x: i64) -> Self {
        x as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn n_pow_half(n: u64, e: i64) -> Option<Self> {
        Some((n as f64).powf(e as f64 / 2.0))
    }
    fn powi(&self, m: usize) -> Self {
        f64::powi(*self, m as i32)
    }
}

impl Scalar for Q {
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn from_i64(x: i64) -> Self {
        q(x)
    }
    fn to_f64(&self) -> f64 {
        to_f64(self)
    }
    fn n_pow_half(n: u64, e: i64) -> Option<Self> {
        let base = q(n as i64);
        let root = if e % 2 == 0 { base } else { sqrt_exact(&base)? };
        let p = if e % 2 == 0 { e / 2 } else { e };
        let mag = (0..p.unsigned_abs()).fold(Q::one(), |acc, _| acc * root.clone());
        Some(if p < 0 { Q::one() / mag } else { mag })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qr;

    #[test]
    fn half_powers() {
        assert_eq!(Q::n_pow_half(16, -1), Some(qr(1, 4)));
        assert_eq!(Q::n_pow_half(4, -3), Some(qr(1, 8)));
        assert_eq!(Q::n_pow_half(6, 2), Some(q(6)));
        assert_eq!(Q::n_pow_half(6, 1), None);
        assert!((f64::n_pow_half(8, -3).unwrap() - 8f64.powf(-1.5)).abs() < 1e-15);
    }
}

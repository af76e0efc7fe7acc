//! Truncated formal power series. A series is a coefficient vector
//! `[c0, c1, ..., c_{N}]`; products are truncated to the shorter length.

use num_traits::{One, Zero};

use crate::rational::{binom_q, factorial, q, Q};
use crate::scalar::Scalar;

pub fn mul<S: Scalar>(a: &[S], b: &[S], len: usize) -> Vec<S> {
    let mut out = vec![S::zero(); len];
    mul_into(a, b, &mut out);
    out
}

/// `out = a * b` truncated to `out.len()`.
pub fn mul_into<S: Scalar>(a: &[S], b: &[S], out: &mut [S]) {
    let len = out.len();
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = S::zero();
        for i in 0..=k.min(a.len().saturating_sub(1)) {
            let j = k - i;
            if j < b.len() {
                acc = acc + a[i].clone() * b[j].clone();
            }
        }
        *slot = acc;
    }
    debug_assert_eq!(out.len(), len);
}

/// Multiplicative inverse; requires an invertible constant term.
pub fn inv<S: Scalar>(a: &[S], len: usize) -> Vec<S> {
    assert!(!a.is_empty() && a[0] != S::zero(), "series inverse needs a0 != 0");
    let a0_inv = S::one() / a[0].clone();
    let mut out = vec![S::zero(); len];
    if len == 0 {
        return out;
    }
    out[0] = a0_inv.clone();
    for k in 1..len {
        let mut acc = S::zero();
        for i in 1..=k.min(a.len() - 1) {
            acc = acc + a[i].clone() * out[k - i].clone();
        }
        out[k] = -(acc * a0_inv.clone());
    }
    out
}

pub fn pow<S: Scalar>(a: &[S], n: usize, len: usize) -> Vec<S> {
    let mut result = vec![S::zero(); len];
    if len > 0 {
        result[0] = S::one();
    }
    let mut base: Vec<S> = a.iter().take(len).cloned().collect();
    base.resize(len, S::zero());
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = mul(&result, &base, len);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base, len);
        }
    }
    result
}

/// `(1 + s t)^a` for rational `a`.
pub fn binomial(a: &Q, s: &Q, len: usize) -> Vec<Q> {
    (0..len).map(|m| binom_q(a, m as u64) * pow_q(s, m)).collect()
}

/// `exp(s t)`.
pub fn exp(s: &Q, len: usize) -> Vec<Q> {
    (0..len)
        .map(|m| pow_q(s, m) / Q::from_integer(factorial(m as u64)))
        .collect()
}

/// `(1 - a t) / (1 - b t)`.
pub fn mobius(a: &Q, b: &Q, len: usize) -> Vec<Q> {
    let num = vec![Q::one(), -a.clone()];
    let den_inv: Vec<Q> = (0..len).map(|m| pow_q(b, m)).collect();
    mul(&num, &den_inv, len)
}

/// Substitute `t -> s t`.
pub fn scale(a: &[Q], s: &Q) -> Vec<Q> {
    a.iter().enumerate().map(|(m, c)| c * pow_q(s, m)).collect()
}

pub fn pow_q(x: &Q, m: usize) -> Q {
    let mut out = Q::one();
    for _ in 0..m {
        out *= x;
    }
    out
}

pub fn is_zero_series(a: &[Q]) -> bool {
    a.iter().all(|c| c.is_zero())
}

pub fn unit<S: Scalar>(len: usize) -> Vec<S> {
    let mut out = vec![S::zero(); len];
    if len > 0 {
        out[0] = S::one();
    }
    out
}

/// Helper for tests: the polynomial `c0 + c1 t + ...` from integers.
pub fn from_ints(c: &[i64]) -> Vec<Q> {
    c.iter().map(|&v| q(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qr;
    use proptest::prelude::*;

    #[test]
    fn exp_and_binomial_coefficients() {
        assert_eq!(exp(&q(-1), 4), vec![q(1), q(-1), qr(1, 2), qr(-1, 6)]);
        assert_eq!(binomial(&q(2), &q(1), 4), from_ints(&[1, 2, 1, 0]));
        assert_eq!(binomial(&q(-1), &q(-1), 4), from_ints(&[1, 1, 1, 1]));
    }

    #[test]
    fn mobius_expansion() {
        let m = mobius(&q(3), &q(1), 4);
        assert_eq!(m, from_ints(&[1, -2, -2, -2]));
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(c in proptest::collection::vec(-5i64..5, 1..6)) {
            let mut a = from_ints(&c);
            a[0] = q(1);
            let len = 6;
            let prod = mul(&a, &inv(&a, len), len);
            prop_assert_eq!(prod, unit::<Q>(len));
        }

        #[test]
        fn pow_matches_repeated_mul(c in proptest::collection::vec(-3i64..3, 1..4), n in 0usize..5) {
            let a = from_ints(&c);
            let len = 5;
            let mut expect = unit::<Q>(len);
            for _ in 0..n { expect = mul(&expect, &a, len); }
            prop_assert_eq!(pow(&a, n, len), expect);
        }
    }
}

//! Exact rational helpers built on `num-rational`.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Q = num_rational::BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3"`, `"-2/7"` or a finite decimal such as `"0.125"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse rational {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let num = BigInt::from_str(a.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(b.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int_part = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            BigInt::from_str(int).map_err(|_| bad())?
        };
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let frac_part = BigInt::from_str(frac).map_err(|_| bad())?;
        let mag = int_part.abs() * &scale + frac_part;
        let num = if neg { -mag } else { mag };
        return Ok(Q::new(num, scale));
    }
    BigInt::from_str(s).map(Q::from_integer).map_err(|_| bad())
}

pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Integer value of `x` if it is a non-negative integer that fits in `u64`.
pub fn as_nonneg_integer(x: &Q) -> Option<u64> {
    if x.is_integer() && !x.is_negative() {
        x.numer().to_u64()
    } else {
        None
    }
}

/// Exact square root of a non-negative rational, if it is a perfect square.
pub fn sqrt_exact(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let (n, d) = (x.numer(), x.denom());
    let rn = n.sqrt();
    let rd = d.sqrt();
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        Some(Q::new(rn, rd))
    } else {
        None
    }
}

pub fn factorial(m: u64) -> BigInt {
    (1..=m).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Generalized binomial coefficient `binom(a, m)` for rational `a`.
pub fn binom_q(a: &Q, m: u64) -> Q {
    let mut out = Q::one();
    for i in 0..m {
        out = out * (a - q(i as i64)) / q(i as i64 + 1);
    }
    out
}

/// Rising factorial `a (a+1) ... (a+m-1)`.
pub fn rising(a: &Q, m: u64) -> Q {
    (0..m).fold(Q::one(), |acc, i| acc * (a + q(i as i64)))
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Serde adapter: rationals travel as strings (`"1/2"`), integers also accepted.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let v = RationalInput::deserialize(d)?;
        v.into_q().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RationalInput {
    Int(i64),
    Text(String),
    Float(f64),
}

impl RationalInput {
    pub fn into_q(self) -> Result<Q> {
        match self {
            RationalInput::Int(i) => Ok(q(i)),
            RationalInput::Text(s) => parse_q(&s),
            RationalInput::Float(f) => parse_q(&format!("{f}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_q("3").unwrap(), q(3));
        assert_eq!(parse_q("-2/6").unwrap(), qr(-1, 3));
        assert_eq!(parse_q("0.125").unwrap(), qr(1, 8));
        assert_eq!(parse_q("-1.5").unwrap(), qr(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn exact_sqrt() {
        assert_eq!(sqrt_exact(&qr(9, 16)), Some(qr(3, 4)));
        assert_eq!(sqrt_exact(&qr(2, 1)), None);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom_q(&q(5), 2), q(10));
        assert_eq!(binom_q(&q(2), 3), q(0));
        assert_eq!(binom_q(&qr(1, 2), 2), qr(-1, 8));
        assert_eq!(rising(&q(1), 3), q(6));
    }
}

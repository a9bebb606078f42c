//! Exact rationals with scientific-notation rendering in the compact style
//! used by published probability tables (`0.08e-44`).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Truncate,
    HalfUp,
}

/// A non-negative exact rational number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SciNumber(BigRational);

pub(crate) fn pow10(e: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u32), e as usize)
}

/// `10^e` as an exact rational, for any sign of `e`.
pub(crate) fn pow10_ratio(e: i64) -> BigRational {
    let p = BigRational::from_integer(pow10(e.unsigned_abs() as u32));
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

impl SciNumber {
    pub fn new(r: BigRational) -> Self {
        assert!(!r.is_negative(), "SciNumber is non-negative");
        SciNumber(r)
    }

    pub fn zero() -> Self {
        SciNumber(BigRational::zero())
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        SciNumber::new(BigRational::from_integer(n.into()))
    }

    pub fn from_ratio(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        SciNumber::new(BigRational::new(numer.into(), denom.into()))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `floor(log10(self))`; `None` for zero.
    pub fn exponent10(&self) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        let bits = |x: &BigInt| x.bits() as f64;
        let approx = (bits(self.0.numer()) - bits(self.0.denom())) * std::f64::consts::LOG10_2;
        let mut e = approx.floor() as i64;
        // Correct the estimate exactly: 10^e <= v < 10^(e+1).
        while pow10_ratio(e) > self.0 {
            e -= 1;
        }
        while pow10_ratio(e + 1) <= self.0 {
            e += 1;
        }
        Some(e)
    }

    /// Approximate base-10 logarithm, valid far outside the `f64` range.
    pub fn log10(&self) -> f64 {
        match self.exponent10() {
            None => f64::NEG_INFINITY,
            Some(e) => {
                let m = (&self.0 / pow10_ratio(e)).to_f64().unwrap_or(1.0);
                e as f64 + m.log10()
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(0.0)
    }

    /// `self / 10^exp` scaled to `decimals` places, as an integer.
    fn scaled_digits(&self, exp: i64, decimals: usize, mode: Rounding) -> BigInt {
        let scaled = &self.0 / pow10_ratio(exp) * BigRational::from_integer(pow10(decimals as u32));
        match mode {
            Rounding::Truncate => scaled.floor().to_integer(),
            Rounding::HalfUp => (scaled + BigRational::new(BigInt::one(), BigInt::from(2))).floor().to_integer(),
        }
    }

    /// Mantissa at a caller-chosen exponent, e.g. `render_at(-44, 2, ..)`
    /// gives `0.08e-44` for 8.85e-46.
    pub fn render_at(&self, exp: i64, decimals: usize, mode: Rounding) -> String {
        let digits = self.scaled_digits(exp, decimals, mode);
        let (int, frac) = digits.div_rem(&BigInt::from(pow10(decimals as u32)));
        let mantissa = if decimals == 0 {
            int.to_string()
        } else {
            format!("{int}.{:0>width$}", frac.to_string(), width = decimals)
        };
        format!("{mantissa}e{exp}")
    }

    /// Normalized scientific form `d.ddd…e±x` with `sig` significant digits.
    pub fn render_scientific(&self, sig: usize, mode: Rounding) -> String {
        let sig = sig.max(1);
        let Some(mut e) = self.exponent10() else {
            return format!("0.{}e0", "0".repeat(sig - 1)).replace(".e", "e");
        };
        let mut digits = self.scaled_digits(e, sig - 1, mode);
        if digits >= pow10(sig as u32) {
            // Rounding carried into a new digit.
            e += 1;
            digits = self.scaled_digits(e, sig - 1, mode);
        }
        let s = digits.to_string();
        let (head, tail) = s.split_at(1);
        if tail.is_empty() {
            format!("{head}e{e}")
        } else {
            format!("{head}.{tail}e{e}")
        }
    }

    /// Compact form: leading-zero mantissa at exponent `floor(log10)+1`,
    /// e.g. `0.4272e-108`.
    pub fn render_compact(&self, decimals: usize) -> String {
        match self.exponent10() {
            None => "0".into(),
            Some(e) => self.render_at(e + 1, decimals, Rounding::HalfUp),
        }
    }

    /// Exact value of a decimal literal such as `0.43e-108`, `2.15E3`, `12`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Range {
            param: "number",
            reason: format!("cannot parse {s:?}"),
        };
        let s = s.trim();
        let (mant, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
        let v = BigRational::from_integer(digits) * pow10_ratio(exp - frac.len() as i64);
        Ok(SciNumber(v))
    }

    /// One unit in the last place of a printed decimal literal.
    pub fn last_place_unit(printed: &str) -> Result<SciNumber> {
        let s = printed.trim();
        let (mant, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| Error::Range {
                param: "number",
                reason: format!("cannot parse {printed:?}"),
            })?),
            None => (s, 0),
        };
        let decimals = mant.split_once('.').map_or(0, |(_, f)| f.len()) as i64;
        Ok(SciNumber(pow10_ratio(exp - decimals)))
    }

    /// True when `self` lies within one unit of the last printed digit of
    /// `printed`.
    pub fn matches_printed(&self, printed: &str) -> Result<bool> {
        let p = SciNumber::parse(printed)?;
        let unit = SciNumber::last_place_unit(printed)?;
        let diff = (&self.0 - &p.0).abs();
        Ok(diff.cmp(&unit.0) != Ordering::Greater)
    }

    pub fn mul(&self, o: &SciNumber) -> SciNumber {
        SciNumber(&self.0 * &o.0)
    }

    pub fn one_minus(&self) -> SciNumber {
        SciNumber::new(BigRational::one() - &self.0)
    }

    pub fn pow(&self, k: u32) -> SciNumber {
        SciNumber(num_traits::pow(self.0.clone(), k as usize))
    }
}

impl From<BigUint> for SciNumber {
    fn from(n: BigUint) -> Self {
        SciNumber::from_integer(BigInt::from(n))
    }
}

impl FromStr for SciNumber {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SciNumber::parse(s)
    }
}

impl fmt::Display for SciNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_scientific(4, Rounding::HalfUp))
    }
}

impl Serialize for SciNumber {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.render_scientific(6, Rounding::HalfUp))
    }
}

//! Analytic security metrics: DPA trace counts, key extraction probability
//! under an attempt limit, and the multi-device fault-attack trial bound.

mod sci;
mod tables;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sci::{Rounding, SciNumber};
pub use tables::{reproduce_tables, Table3Row, Table4Row, TablesReport};

fn range(param: &'static str, reason: impl Into<String>) -> Error {
    Error::Range {
        param,
        reason: reason.into(),
    }
}

/// Input-switching to MUX-power correlation, `sqrt(p / q)`.
pub fn correlation_r0(p: u32, q: u32) -> Result<f64> {
    if p < 1 || p > q {
        return Err(range("p", format!("need 1 <= p <= q, got p={p}, q={q}")));
    }
    Ok((p as f64 / q as f64).sqrt())
}

/// Traces to disclose an isolated MUX key bit, `C / r0^2`.
pub fn mtd0(r0: f64, c: f64) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(range("r0", "must be positive"));
    }
    if !(c > 0.0) {
        return Err(range("C", "must be positive"));
    }
    Ok(c / (r0 * r0))
}

/// Traces to disclose a key bit embedded among `m` key bits over `n`
/// control steps, `(M N / r1^2) * MTD0`.
pub fn mtd1(m: u32, n: u32, r1_sq: f64, mtd0_value: f64) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(range("M, N", "must be positive"));
    }
    if !(r1_sq > 0.0) {
        return Err(range("r1_sq", "must be positive"));
    }
    if !(mtd0_value > 0.0) {
        return Err(range("mtd0", "must be positive"));
    }
    Ok(m as f64 * n as f64 / r1_sq * mtd0_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpaParams {
    pub p: u32,
    pub q: u32,
    #[serde(rename = "M")]
    pub key_size: u32,
    #[serde(rename = "N")]
    pub control_steps: u32,
    pub r1_sq: f64,
    #[serde(rename = "C", default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl DpaParams {
    pub fn mtd0(&self) -> Result<f64> {
        mtd0(correlation_r0(self.p, self.q)?, self.c)
    }

    pub fn mtd1(&self) -> Result<f64> {
        mtd1(self.key_size, self.control_steps, self.r1_sq, self.mtd0()?)
    }
}

fn factorial(n: u32) -> BigUint {
    (1..=n).map(BigUint::from).product()
}

/// Probability of guessing the key: `1 / (n! * 2^m)`, exact.
pub fn key_prob(m: u32, n: u32) -> Result<SciNumber> {
    if m < 1 || n < 1 {
        return Err(range("m, n", "must be at least 1"));
    }
    let denom = factorial(n) << m as usize;
    Ok(SciNumber::from_ratio(1, BigInt::from(denom)))
}

pub fn binomial(n: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptForm {
    /// `C(X,K) * P * (1-P)`, the form the published table was computed with.
    #[default]
    Verbatim,
    /// Binomial pmf `C(X,K) * P^K * (1-P)^(X-K)`.
    StandardBinomial,
}

/// Probability of extracting the key at attempt `k` of `x`.
pub fn attempt_prob(k: u32, x: u32, p: &SciNumber, form: AttemptForm) -> Result<SciNumber> {
    if k < 1 || k > x {
        return Err(range("K", format!("need 1 <= K <= X, got K={k}, X={x}")));
    }
    if p.value() > &num_rational::BigRational::one() {
        return Err(range("P", "must lie in [0, 1]"));
    }
    let c = SciNumber::from(binomial(x, k));
    Ok(match form {
        AttemptForm::Verbatim => c.mul(p).mul(&p.one_minus()),
        AttemptForm::StandardBinomial => c.mul(&p.pow(k)).mul(&p.one_minus().pow(x - k)),
    })
}

/// Trials an attacker with `n_dev` devices, each allowing `x` attempts and
/// faulting at attempt `x - 1`, needs to cover a `2^m` key space:
/// `ceil(2^m / (n_dev * (x - 1)))`.
pub fn fault_trials(m: u32, n_dev: u32, x: u32) -> Result<BigUint> {
    if n_dev < 1 {
        return Err(range("n_dev", "must be at least 1"));
    }
    if x < 2 {
        return Err(range("X", "must be at least 2"));
    }
    let space = BigUint::one() << m as usize;
    let per = BigUint::from(n_dev) * BigUint::from(x - 1);
    Ok(space.div_ceil(&per))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r0_and_mtd0() {
        assert_eq!(correlation_r0(32, 32).unwrap(), 1.0);
        assert_eq!(correlation_r0(8, 32).unwrap(), 0.5);
        assert!((correlation_r0(16, 32).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(correlation_r0(33, 32).is_err());
        assert_eq!(mtd0(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(mtd0(0.5, 1.0).unwrap(), 4.0);
        assert!((mtd0(0.5f64.sqrt(), 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(mtd0(0.0, 1.0).is_err());
    }

    #[test]
    fn mtd1_examples() {
        assert_eq!(mtd1(32, 4, 0.060, 4.0).unwrap().round(), 8533.0);
        assert_eq!(mtd1(32, 5, 0.022, 2.0).unwrap().round(), 14545.0);
        assert_eq!(mtd1(1, 1, 1.0, 1.0).unwrap(), 1.0);
        assert!(mtd1(1, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn mtd1_trend_over_grid() {
        for p in [8, 16, 32] {
            for n in [4, 5] {
                let a = DpaParams { p, q: 32, key_size: 32, control_steps: n, r1_sq: 0.05, c: 1.0 };
                let b = DpaParams { control_steps: n + 1, ..a };
                assert!(b.mtd1().unwrap() > a.mtd1().unwrap());
            }
        }
        for n in [4, 5, 6] {
            let at = |p| DpaParams { p, q: 32, key_size: 32, control_steps: n, r1_sq: 0.05, c: 1.0 }.mtd1().unwrap();
            assert!(at(8) > at(16) && at(16) > at(32));
        }
    }

    #[test]
    fn key_prob_small_cases() {
        assert_eq!(key_prob(1, 1).unwrap(), SciNumber::from_ratio(1, 2));
        assert_eq!(key_prob(2, 2).unwrap(), SciNumber::from_ratio(1, 8));
        // Brute-force product oracle.
        for m in 1..=10u32 {
            for n in 1..=10u32 {
                let mut denom: u64 = 1;
                for i in 1..=n {
                    denom *= i as u64;
                }
                for _ in 0..m {
                    denom *= 2;
                }
                assert_eq!(key_prob(m, n).unwrap(), SciNumber::from_ratio(1, denom));
            }
        }
        assert_eq!(key_prob(32, 32).unwrap().render_at(-44, 2, Rounding::Truncate), "0.08e-44");
        assert!(key_prob(128, 128).unwrap().exponent10().unwrap() < -250);
    }

    #[test]
    fn attempt_prob_examples() {
        let p = key_prob(32, 32).unwrap();
        let f1 = attempt_prob(1, 5, &p, AttemptForm::Verbatim).unwrap();
        let f2 = attempt_prob(2, 5, &p, AttemptForm::Verbatim).unwrap();
        assert!(f1.matches_printed("0.4e-44").unwrap());
        assert!(f2.matches_printed("0.8e-44").unwrap());
        assert!(attempt_prob(3, 5, &SciNumber::zero(), AttemptForm::Verbatim).unwrap().is_zero());
        assert!(attempt_prob(6, 5, &p, AttemptForm::Verbatim).is_err());
        let half = SciNumber::from_ratio(1, 2);
        // C(5,2) / 32
        assert_eq!(
            attempt_prob(2, 5, &half, AttemptForm::StandardBinomial).unwrap(),
            SciNumber::from_ratio(10, 32)
        );
    }

    proptest! {
        #[test]
        fn attempt_prob_is_symmetric(x in 2u32..20, k in 1u32..19, num in 0u64..1000) {
            prop_assume!(k < x);
            let p = SciNumber::from_ratio(num, 1000u64);
            prop_assert_eq!(
                attempt_prob(k, x, &p, AttemptForm::Verbatim).unwrap(),
                attempt_prob(x - k, x, &p, AttemptForm::Verbatim).unwrap()
            );
        }

        #[test]
        fn doubling_devices_halves_trials(m in 0u32..200, n in 1u32..50, x in 2u32..20) {
            let a = fault_trials(m, n, x).unwrap();
            let b = fault_trials(m, 2 * n, x).unwrap();
            prop_assert_eq!(a.clone().div_ceil(&BigUint::from(2u32)), b);
        }
    }

    #[test]
    fn fault_trial_examples() {
        assert_eq!(fault_trials(8, 2, 5).unwrap(), BigUint::from(32u32));
        assert_eq!(fault_trials(1, 1, 2).unwrap(), BigUint::from(2u32));
        assert_eq!(fault_trials(3, 1, 4).unwrap(), BigUint::from(3u32));
        assert!(fault_trials(8, 2, 1).is_err());
    }
}

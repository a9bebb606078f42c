//! Stuck-at fault injection on comparator outputs combined with brute force
//! over several device copies.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{try_key, AttackReport, FaultSummary, GoldenSet, KeyStream, Oracle, Strategy};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::metrics::fault_trials;
use crate::sim::StuckAt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FaultPolarity {
    Saf0,
    Saf1,
}

impl std::str::FromStr for FaultPolarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "saf0" | "saf-0" | "0" => Ok(FaultPolarity::Saf0),
            "saf1" | "saf-1" | "1" => Ok(FaultPolarity::Saf1),
            _ => Err(Error::Range {
                param: "polarity",
                reason: format!("expected saf0 or saf1, got {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    /// Obfuscation points whose primary comparator output is forced;
    /// empty means every point.
    pub points: Vec<usize>,
    pub polarity: FaultPolarity,
    pub n_dev: u32,
    /// Query index (0-based, per copy) from which the fault is active.
    /// 0 faults every attempt; `X - 2` faults from the (X-1)-th attempt.
    pub inject_from: usize,
}

impl FaultSpec {
    pub fn all_points(polarity: FaultPolarity, n_dev: u32) -> Self {
        FaultSpec {
            points: Vec::new(),
            polarity,
            n_dev,
            inject_from: 0,
        }
    }
}

/// Brute force with faulted comparators over `n_dev` copies (keys dealt
/// round-robin). Any error-detection alarm aborts the run.
pub fn fault_attack(
    d: &Design,
    f: &FaultSpec,
    golden: &GoldenSet,
    stream: &KeyStream,
    budget: usize,
) -> Result<AttackReport> {
    let start = Instant::now();
    if f.n_dev < 1 {
        return Err(Error::Range {
            param: "n_dev",
            reason: "must be at least 1".into(),
        });
    }
    let mut copies: Vec<Oracle> = (0..f.n_dev).map(|_| Oracle::new(d)).collect::<Result<_>>()?;
    let cmp = copies[0].simulator().comparator_nets().to_vec();
    if cmp.is_empty() {
        return Err(Error::InvalidFaultSite("design has no comparators".into()));
    }
    let points: Vec<usize> = if f.points.is_empty() {
        (0..cmp.len()).collect()
    } else {
        f.points.clone()
    };
    let mut faults = Vec::new();
    for &p in &points {
        let net = *cmp
            .get(p)
            .ok_or_else(|| Error::InvalidFaultSite(format!("point {p} (design has {})", cmp.len())))?;
        faults.push(StuckAt {
            net,
            value: f.polarity == FaultPolarity::Saf1,
        });
    }
    for c in &mut copies {
        c.arm_faults(faults.clone(), f.inject_from);
    }
    let threshold = copies[0].lockout_state_for_evaluation().threshold;
    let theoretical = if threshold >= 2 {
        fault_trials(d.key_width as u32, f.n_dev, threshold)?.to_string()
    } else {
        "undefined (X < 2)".to_string()
    };

    let mut report = AttackReport {
        strategy: Strategy::Fault,
        attempts_used: 0,
        keys_tried: 0,
        oracle_queries: 0,
        recovered_key: None,
        locked_out: false,
        seed: 0,
        bits: Vec::new(),
        fault: None,
        wall_clock: Duration::ZERO,
    };
    let mut alarm = false;
    let mut next = 0usize;
    for key in stream.keys().take(budget) {
        // Next copy that still responds.
        let Some(ci) = (0..copies.len())
            .map(|i| (next + i) % copies.len())
            .find(|&i| !copies[i].is_locked_out())
        else {
            break;
        };
        next = ci + 1;
        let (ok, q, a) = try_key(&mut copies[ci], golden, &key)?;
        report.attempts_used += 1;
        report.keys_tried += 1;
        report.oracle_queries += q;
        if a {
            alarm = true;
            break;
        }
        if ok {
            report.recovered_key = Some(key);
            break;
        }
    }
    report.locked_out = copies.iter().all(Oracle::is_locked_out);
    report.fault = Some(FaultSummary {
        polarity: f.polarity,
        points,
        n_dev: f.n_dev,
        threshold,
        theoretical_trials: theoretical,
        fault_alarm: alarm,
        aborted: alarm,
        copy_counters: copies.iter().map(|c| c.lockout_state_for_evaluation().counter).collect(),
    });
    report.wall_clock = start.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::tests::hardened;
    use super::*;
    use crate::dlockout::{attach_edu, harden, HardenOptions};
    use crate::bits::KeyBits;

    #[test]
    fn saf0_bypasses_lockout_without_edu() {
        let (_, h, spec) = hardened(6, 5, 7);
        let golden = GoldenSet::from_design(&h, &spec.correct_key, 1).unwrap();
        let f = FaultSpec::all_points(FaultPolarity::Saf0, 1);
        let r = fault_attack(&h, &f, &golden, &KeyStream::Exhaustive { width: 6 }, 64).unwrap();
        assert_eq!(r.recovered_key, Some(spec.correct_key.clone()));
        assert!(!r.locked_out);
        assert_eq!(r.fault.as_ref().unwrap().copy_counters, vec![0]);
    }

    #[test]
    fn saf0_with_edu_aborts_on_alarm() {
        let (_, h, spec) = hardened(6, 5, 7);
        let h = attach_edu(&h).unwrap();
        let golden = GoldenSet::from_design(&h, &spec.correct_key, 1).unwrap();
        let f = FaultSpec::all_points(FaultPolarity::Saf0, 1);
        let stream = KeyStream::List { keys: vec![spec.correct_key.flipped(0), spec.correct_key.clone()] };
        let r = fault_attack(&h, &f, &golden, &stream, 64).unwrap();
        assert!(r.fault.as_ref().unwrap().aborted);
        assert_eq!(r.recovered_key, None);
    }

    #[test]
    fn saf1_with_edu_on_correct_key_alarms_and_counts() {
        let d = crate::design::generate_benchmark(crate::design::BenchmarkKind::Fir, 8, 3).unwrap();
        let nets = crate::obfuscate::select_points(&d, 4, crate::obfuscate::SelectionPolicy::MaxSlack).unwrap();
        let (o, spec) = crate::obfuscate::insert_key_muxes(&d, &nets, 3).unwrap();
        let (h, spec) = harden(&o, &spec, HardenOptions { edu: true, ..Default::default() }).unwrap();
        let golden = GoldenSet::from_design(&h, &spec.correct_key, 1).unwrap();
        let f = FaultSpec { points: vec![0], ..FaultSpec::all_points(FaultPolarity::Saf1, 1) };
        let r = fault_attack(&h, &f, &golden, &KeyStream::List { keys: vec![spec.correct_key.clone()] }, 1).unwrap();
        let s = r.fault.unwrap();
        assert!(s.fault_alarm);
        assert_eq!(s.copy_counters, vec![1]);
    }

    #[test]
    fn reports_theoretical_trials_and_rejects_bad_sites() {
        let (_, h, spec) = hardened(8, 5, 2);
        let golden = GoldenSet::from_design(&h, &spec.correct_key, 1).unwrap();
        let f = FaultSpec::all_points(FaultPolarity::Saf0, 2);
        let r = fault_attack(&h, &f, &golden, &KeyStream::List { keys: vec![KeyBits::zeros(8)] }, 1).unwrap();
        assert_eq!(r.fault.unwrap().theoretical_trials, "32");
        let bad = FaultSpec { points: vec![99], ..f };
        assert!(matches!(
            fault_attack(&h, &bad, &golden, &KeyStream::Exhaustive { width: 8 }, 1),
            Err(Error::InvalidFaultSite(_))
        ));
    }
}

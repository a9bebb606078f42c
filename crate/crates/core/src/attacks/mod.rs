//! Attack harnesses under an oracle-only threat model: the attacker sees
//! primary inputs and outputs of an activated device and nothing else.

mod dpa;
mod fault;

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::KeyBits;
use crate::design::Design;
use crate::dlockout::LockoutState;
use crate::error::{Error, Result};
use crate::sim::{InputVector, SimOptions, Simulator, StuckAt};

pub use dpa::{dpa_attack, DpaConfig};
pub use fault::{fault_attack, FaultPolarity, FaultSpec};

/// Number of random probe vectors (the all-zeros vector is added on top).
pub const RANDOM_PROBES: usize = 8;

/// What the attacker sees for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub outputs: BTreeMap<String, u64>,
    /// Error-detection alarm pin.
    pub fault_alarm: bool,
}

/// Black-box activated device. Each query is one schedule pass and counts
/// as one key attempt; the lockout state persists across queries.
pub struct Oracle {
    sim: Simulator,
    lockout: LockoutState,
    faults: Vec<StuckAt>,
    fault_from: usize,
    queries: usize,
}

impl Oracle {
    pub fn new(d: &Design) -> Result<Self> {
        let sim = Simulator::new(d)?;
        let lockout = sim.fresh_lockout();
        Ok(Self::with_state(sim, lockout))
    }

    pub fn with_lockout(d: &Design, lockout: LockoutState) -> Result<Self> {
        Ok(Self::with_state(Simulator::new(d)?, lockout))
    }

    fn with_state(sim: Simulator, lockout: LockoutState) -> Self {
        Oracle {
            sim,
            lockout,
            faults: Vec::new(),
            fault_from: 0,
            queries: 0,
        }
    }

    /// Arms stuck-at faults from the `from`-th query on (0-based).
    pub(crate) fn arm_faults(&mut self, faults: Vec<StuckAt>, from: usize) {
        self.faults = faults;
        self.fault_from = from;
    }

    pub fn query(&mut self, key: &KeyBits, input: &InputVector) -> Result<Observation> {
        let opts = SimOptions {
            faults: if self.queries >= self.fault_from {
                self.faults.clone()
            } else {
                Vec::new()
            },
            ..SimOptions::default()
        };
        self.queries += 1;
        let r = self.sim.pass(key, input, &mut self.lockout, &opts)?;
        Ok(Observation {
            outputs: r.outputs,
            fault_alarm: r.fault_alarm,
        })
    }

    /// Observable permanent lock (outputs pinned, device unresponsive).
    pub fn is_locked_out(&self) -> bool {
        self.lockout.is_full() && self.sim.blackhole_state().is_some()
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    /// Evaluation-only: the internal counter. Not part of the attacker view.
    pub fn lockout_state_for_evaluation(&self) -> LockoutState {
        self.lockout
    }

    pub(crate) fn simulator(&self) -> &Simulator {
        &self.sim
    }
}

/// Probe inputs with their known-good outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenSet {
    pub pairs: Vec<(InputVector, BTreeMap<String, u64>)>,
}

impl GoldenSet {
    /// Eight seeded random vectors followed by the all-zeros vector,
    /// evaluated on a fault-free device holding `key`.
    pub fn from_design(d: &Design, key: &KeyBits, seed: u64) -> Result<Self> {
        let sim = Simulator::new(d)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs: Vec<InputVector> = (0..RANDOM_PROBES)
            .map(|_| {
                d.inputs
                    .iter()
                    .map(|p| (p.name.clone(), rng.random::<u64>() & crate::design::width_mask(p.width)))
                    .collect()
            })
            .collect();
        inputs.push(d.inputs.iter().map(|p| (p.name.clone(), 0)).collect());
        let pairs = inputs
            .into_iter()
            .map(|x| {
                let mut lockout = sim.fresh_lockout();
                let out = sim.pass(key, &x, &mut lockout, &SimOptions::default())?.outputs;
                Ok((x, out))
            })
            .collect::<Result<_>>()?;
        Ok(GoldenSet { pairs })
    }
}

/// Deterministic key enumerators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KeyStream {
    /// `0, 1, 2, ...` up to `2^width - 1`.
    Exhaustive { width: usize },
    /// `count` uniformly random keys.
    Random { width: usize, seed: u64, count: usize },
    List { keys: Vec<KeyBits> },
}

impl KeyStream {
    pub fn width(&self) -> Option<usize> {
        match self {
            KeyStream::Exhaustive { width } | KeyStream::Random { width, .. } => Some(*width),
            KeyStream::List { keys } => keys.first().map(KeyBits::len),
        }
    }

    pub fn keys(&self) -> Box<dyn Iterator<Item = KeyBits> + '_> {
        match self {
            KeyStream::Exhaustive { width } => {
                let w = *width;
                let end: u128 = 1u128 << w.min(127);
                Box::new((0..end).map(move |v| {
                    let mut k = KeyBits::zeros(w);
                    for i in 0..w.min(128) {
                        k.set(i, (v >> i) & 1 == 1);
                    }
                    k
                }))
            }
            KeyStream::Random { width, seed, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let w = *width;
                Box::new((0..*count).map(move |_| {
                    let mut k = KeyBits::zeros(w);
                    for i in 0..w {
                        k.set(i, rng.random());
                    }
                    k
                }))
            }
            KeyStream::List { keys } => Box::new(keys.iter().cloned()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    BruteForce,
    Dpa,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitStat {
    pub key_bit: usize,
    pub masked: bool,
    /// Pearson correlation between residual power and the differential
    /// prediction for this bit.
    pub correlation: f64,
    pub guess: bool,
    /// Sign and significance held over the final stability window.
    pub stable: bool,
    /// Smallest trace count after which the correct hypothesis leads for
    /// the whole stability window (evaluation-side; uses the true key).
    pub empirical_mtd: Option<usize>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultSummary {
    pub polarity: FaultPolarity,
    pub points: Vec<usize>,
    pub n_dev: u32,
    pub threshold: u32,
    /// `ceil(2^m / (n_dev (X - 1)))`, decimal.
    pub theoretical_trials: String,
    pub fault_alarm: bool,
    pub aborted: bool,
    /// Evaluation-only counter value of each copy at the end of the run.
    pub copy_counters: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub strategy: Strategy,
    /// Keys submitted to the device(s).
    pub attempts_used: usize,
    /// Distinct keys evaluated (for DPA: hypotheses scored).
    pub keys_tried: usize,
    pub oracle_queries: usize,
    pub recovered_key: Option<KeyBits>,
    pub locked_out: bool,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bits: Vec<BitStat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultSummary>,
    /// Kept out of the serialized report so identical runs serialize
    /// identically.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl AttackReport {
    pub fn success(&self) -> bool {
        self.recovered_key.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Submits `key` and checks it against every golden pair, stopping at the
/// first mismatch. Returns `(matched, queries, alarm)`.
pub(crate) fn try_key(o: &mut Oracle, golden: &GoldenSet, key: &KeyBits) -> Result<(bool, usize, bool)> {
    let mut queries = 0;
    for (x, want) in &golden.pairs {
        let obs = o.query(key, x)?;
        queries += 1;
        if obs.fault_alarm {
            return Ok((false, queries, true));
        }
        if &obs.outputs != want || o.is_locked_out() {
            return Ok((false, queries, false));
        }
    }
    Ok((true, queries, false))
}

/// Tries keys in stream order until one reproduces every golden pair, the
/// device locks out, or `budget` keys have been submitted.
pub fn brute_force(o: &mut Oracle, golden: &GoldenSet, stream: &KeyStream, budget: usize) -> Result<AttackReport> {
    if budget < 1 {
        return Err(Error::Range {
            param: "budget",
            reason: "must be at least 1".into(),
        });
    }
    let start = std::time::Instant::now();
    let mut report = AttackReport {
        strategy: Strategy::BruteForce,
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
    for key in stream.keys().take(budget) {
        if o.is_locked_out() {
            break;
        }
        let (ok, q, _) = try_key(o, golden, &key)?;
        report.attempts_used += 1;
        report.keys_tried += 1;
        report.oracle_queries += q;
        if ok {
            report.recovered_key = Some(key);
            break;
        }
    }
    report.locked_out = o.is_locked_out();
    report.wall_clock = start.elapsed();
    Ok(report)
}

//! Attempt-counting lockout: comparator annotation, the checker FSM with its
//! non-volatile counter, controller hardening and the error detection unit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{
    validate_design, Condition, Design, DpComp, LockoutBlock, MuxSelect, NodeKind, Transition,
};
use crate::error::{Error, Result};
use crate::obfuscate::KeySpec;
use crate::sim::LockoutMode;

pub const DEFAULT_THRESHOLD: u32 = 5;
pub const COMPARATOR_DELAY_NS: f64 = 0.3;
pub const BLACKHOLE: &str = "BLACKHOLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LockoutPhase {
    Free,
    Partial,
    Full,
}

impl fmt::Display for LockoutPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LockoutPhase::Free => "FREE",
            LockoutPhase::Partial => "PARTIAL",
            LockoutPhase::Full => "FULL",
        })
    }
}

impl FromStr for LockoutPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FREE" => Ok(LockoutPhase::Free),
            "PARTIAL" => Ok(LockoutPhase::Partial),
            "FULL" => Ok(LockoutPhase::Full),
            other => Err(Error::InvalidLockoutState(format!("unknown phase {other:?}"))),
        }
    }
}

/// Persistent attempt counter. Survives every simulated reset; only the
/// designer may clear it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLockout")]
pub struct LockoutState {
    pub counter: u32,
    pub threshold: u32,
    pub phase: LockoutPhase,
}

#[derive(Deserialize)]
struct RawLockout {
    counter: u32,
    threshold: u32,
    phase: LockoutPhase,
}

impl TryFrom<RawLockout> for LockoutState {
    type Error = Error;

    fn try_from(r: RawLockout) -> Result<Self> {
        LockoutState::from_parts(r.counter, r.threshold, r.phase)
    }
}

impl LockoutState {
    /// Fresh state: counter 0, FREE.
    pub fn new(threshold: u32) -> Self {
        LockoutState {
            counter: 0,
            threshold,
            phase: LockoutPhase::Free,
        }
    }

    /// Builds a state, rejecting combinations the counter can never reach.
    pub fn from_parts(counter: u32, threshold: u32, phase: LockoutPhase) -> Result<Self> {
        if threshold < 1 {
            return Err(Error::InvalidThreshold(threshold));
        }
        let expected = match counter {
            0 => LockoutPhase::Free,
            c if c < threshold => LockoutPhase::Partial,
            c if c == threshold => LockoutPhase::Full,
            c => {
                return Err(Error::InvalidLockoutState(format!(
                    "counter {c} exceeds threshold {threshold}"
                )))
            }
        };
        if phase != expected {
            return Err(Error::InvalidLockoutState(format!(
                "phase {phase} inconsistent with counter {counter}/{threshold}"
            )));
        }
        Ok(LockoutState {
            counter,
            threshold,
            phase,
        })
    }

    pub fn is_full(&self) -> bool {
        self.phase == LockoutPhase::Full
    }

    pub(crate) fn check_threshold(&self, threshold: u32) -> Result<()> {
        if self.threshold != threshold {
            return Err(Error::InvalidLockoutState(format!(
                "state threshold {} but design threshold {threshold}",
                self.threshold
            )));
        }
        Self::from_parts(self.counter, self.threshold, self.phase).map(|_| ())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lockout state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidLockoutState(e.to_string()))
    }
}

/// One checker evaluation. A mismatch increments the counter unless it is
/// already at the threshold; reaching the threshold means FULL.
pub fn lockout_step(s: LockoutState, mismatch: bool) -> LockoutState {
    if !mismatch || s.is_full() {
        return s;
    }
    let counter = s.counter + 1;
    LockoutState {
        counter,
        threshold: s.threshold,
        phase: if counter >= s.threshold {
            LockoutPhase::Full
        } else {
            LockoutPhase::Partial
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckerState {
    Idle,
    Check,
    PartialLock,
    FullLock,
}

/// The checker FSM sitting between the comparators, the counter and the
/// controller.
pub struct CheckerFsm;

impl CheckerFsm {
    /// `at_check` is true in the key-check controller state; `mismatch` is
    /// the OR of all comparator outputs. In [`LockoutMode::Frozen`] the
    /// counter is left untouched.
    pub fn step(
        lockout: LockoutState,
        at_check: bool,
        mismatch: bool,
        mode: LockoutMode,
    ) -> (LockoutState, CheckerState, DpComp) {
        if lockout.is_full() {
            return (lockout, CheckerState::FullLock, DpComp::Full);
        }
        if !at_check {
            return (lockout, CheckerState::Idle, DpComp::Ok);
        }
        if mode == LockoutMode::Frozen || !mismatch {
            return (lockout, CheckerState::Check, DpComp::Ok);
        }
        let next = lockout_step(lockout, true);
        if next.is_full() {
            (next, CheckerState::FullLock, DpComp::Full)
        } else {
            (next, CheckerState::PartialLock, DpComp::Partial)
        }
    }
}

/// Width of a counter that can hold `0..=threshold`.
pub fn counter_bits(threshold: u32) -> u32 {
    (u32::BITS - threshold.leading_zeros()).max(1)
}

fn key_net(d: &Design, index: usize) -> Result<String> {
    d.nodes
        .iter()
        .find(|n| matches!(n.kind, NodeKind::KeyBit { index: i } if i == index))
        .and_then(|n| d.output_net_of(&n.id))
        .map(|n| n.id.clone())
        .ok_or_else(|| Error::Precondition(format!("no key bit {index} in design")))
}

fn mask_net(d: &Design, index: usize) -> Result<String> {
    d.nodes
        .iter()
        .find(|n| matches!(n.kind, NodeKind::MaskBit { index: i, .. } if i == index))
        .and_then(|n| d.output_net_of(&n.id))
        .map(|n| n.id.clone())
        .ok_or_else(|| Error::Precondition(format!("no mask bit {index} in design")))
}

/// Output nets of the primary comparators, in point order.
pub fn primary_comparators(d: &Design) -> Vec<String> {
    d.nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Comparator { shadow: false, .. }))
        .filter_map(|n| d.output_net_of(&n.id))
        .map(|n| n.id.clone())
        .collect()
}

fn finish(d: Design) -> Result<Design> {
    let report = validate_design(&d);
    if report.is_empty() {
        Ok(d)
    } else {
        Err(Error::Semantic(report))
    }
}

/// Adds one XOR comparator per obfuscation point: key bit against the
/// reference bit (a constant) or, for masked points, against the mask bit.
pub fn attach_comparators(d: &Design, spec: &KeySpec) -> Result<Design> {
    let mut out = d.clone();
    for p in &spec.points {
        let key = key_net(d, p.key_bit_index)?;
        let annotated = d.nodes.iter().any(|n| {
            matches!(&n.kind, NodeKind::Comparator { inputs, shadow: false, .. } if inputs[0] == key)
        });
        if annotated {
            return Err(Error::AlreadyAnnotated(p.point_id));
        }
        let reference = if p.masked {
            mask_net(d, p.key_bit_index)?
        } else {
            let id = out.fresh_id("cref");
            out.add_node(
                id.clone(),
                id,
                NodeKind::Const {
                    value: p.reference_bit as u64,
                    width: 1,
                },
            )
        };
        let id = out.fresh_id("cmp");
        out.add_node(
            id.clone(),
            id,
            NodeKind::Comparator {
                delay_ns: COMPARATOR_DELAY_NS,
                inputs: [key, reference],
                shadow: false,
            },
        );
    }
    finish(out)
}

/// Adds the attempt counter and checker FSM. The key-check state is the
/// unique successor of reset.
pub fn attach_checker(d: &Design, threshold: u32) -> Result<Design> {
    if threshold < 1 {
        return Err(Error::InvalidThreshold(threshold));
    }
    if d.dlockout.is_some() {
        return Err(Error::AlreadyHardened);
    }
    let comparators = primary_comparators(d);
    if comparators.is_empty() {
        return Err(Error::Precondition("comparators must be attached first".into()));
    }
    let c = &d.controller;
    let check_state = match c.sole_successor(&c.reset) {
        Some(s) if s != c.reset => s.to_string(),
        _ => return Err(Error::NoFirstScheduleState(c.reset.clone())),
    };
    let alarms: Vec<String> = d
        .nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::EduCell { .. }))
        .filter_map(|n| d.output_net_of(&n.id))
        .map(|n| n.id.clone())
        .collect();
    let mut out = d.clone();
    let counter_id = out.fresh_id("lock_ctr");
    let counter = out.add_node(
        counter_id.clone(),
        counter_id.clone(),
        NodeKind::Counter {
            bits: counter_bits(threshold),
            threshold,
        },
    );
    let checker_id = out.fresh_id("lock_chk");
    let dp_net = out.fresh_id("dp_comp");
    out.add_node(
        checker_id.clone(),
        dp_net,
        NodeKind::Checker {
            comparators,
            alarms: alarms.clone(),
            counter,
        },
    );
    out.dlockout = Some(LockoutBlock {
        threshold,
        checker: checker_id,
        counter: counter_id,
        check_state,
        blackhole_state: None,
        edu: !alarms.is_empty(),
    });
    finish(out)
}

/// Rewrites the key-check state's exit: OK continues the schedule, PARTIAL
/// reverts to reset, FULL enters an absorbing BLACKHOLE state whose outputs
/// are constant zero.
pub fn harden_controller(d: &Design) -> Result<Design> {
    let block = d
        .dlockout
        .as_ref()
        .ok_or_else(|| Error::Precondition("checker must be attached first".into()))?;
    if block.blackhole_state.is_some() {
        return Err(Error::AlreadyHardened);
    }
    let s1 = block.check_state.clone();
    let c = &d.controller;
    let s2 = c
        .sole_successor(&s1)
        .ok_or_else(|| Error::NoFirstScheduleState(s1.clone()))?
        .to_string();
    let mut bh = BLACKHOLE.to_string();
    while c.state_index(&bh).is_some() {
        bh.push('_');
    }
    let mut out = d.clone();
    let fsm = &mut out.controller;
    fsm.transitions.retain(|t| t.from != s1);
    for (cond, to) in [
        (DpComp::Ok, s2),
        (DpComp::Partial, fsm.reset.clone()),
        (DpComp::Full, bh.clone()),
    ] {
        fsm.transitions.push(Transition {
            from: s1.clone(),
            cond: Condition::DpComp(cond),
            to,
        });
    }
    fsm.states.push(bh.clone());
    fsm.transitions.push(Transition {
        from: bh.clone(),
        cond: Condition::Always,
        to: bh.clone(),
    });
    fsm.control_words.insert(bh.clone(), Default::default());
    out.dlockout.as_mut().unwrap().blackhole_state = Some(bh);
    finish(out)
}

/// Error detection unit: a shadow comparator per point and a cross-check
/// cell raising an alarm when the observed comparator disagrees with it.
pub fn attach_edu(d: &Design) -> Result<Design> {
    if d
        .nodes
        .iter()
        .any(|n| matches!(n.kind, NodeKind::Comparator { shadow: true, .. } | NodeKind::EduCell { .. }))
    {
        return Err(Error::EduAlreadyAttached);
    }
    let primaries: Vec<(String, [String; 2])> = d
        .nodes
        .iter()
        .filter_map(|n| match &n.kind {
            NodeKind::Comparator {
                inputs,
                shadow: false,
                ..
            } => Some((d.output_net_of(&n.id)?.id.clone(), inputs.clone())),
            _ => None,
        })
        .collect();
    if primaries.is_empty() {
        return Err(Error::Precondition("comparators must be attached first".into()));
    }
    let mut out = d.clone();
    let mut alarms = Vec::new();
    for (primary, inputs) in primaries {
        let sid = out.fresh_id("scmp");
        let shadow = out.add_node(
            sid.clone(),
            sid,
            NodeKind::Comparator {
                delay_ns: COMPARATOR_DELAY_NS,
                inputs,
                shadow: true,
            },
        );
        let eid = out.fresh_id("edu");
        alarms.push(out.add_node(
            eid.clone(),
            eid,
            NodeKind::EduCell {
                delay_ns: COMPARATOR_DELAY_NS,
                primary,
                shadow,
            },
        ));
    }
    if let Some(block) = out.dlockout.as_mut() {
        block.edu = true;
        let checker = block.checker.clone();
        if let Some(node) = out.nodes.iter_mut().find(|n| n.id == checker) {
            if let NodeKind::Checker { alarms: a, .. } = &mut node.kind {
                a.extend(alarms);
            }
        }
    }
    finish(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardenOptions {
    pub threshold: u32,
    /// Seed for the secret mask; `None` leaves the key unmasked.
    pub mask_seed: Option<u64>,
    pub edu: bool,
}

impl Default for HardenOptions {
    fn default() -> Self {
        HardenOptions {
            threshold: DEFAULT_THRESHOLD,
            mask_seed: None,
            edu: false,
        }
    }
}

/// Full hardening of an obfuscated design: optional masking, comparators,
/// optional EDU, checker with counter, then the controller rewrite.
pub fn harden(d: &Design, spec: &KeySpec, opts: HardenOptions) -> Result<(Design, KeySpec)> {
    let (d, spec) = match opts.mask_seed {
        Some(seed) => crate::obfuscate::apply_masking(d, spec, seed)?,
        None => (d.clone(), spec.clone()),
    };
    let mut d = attach_comparators(&d, &spec)?;
    if opts.edu {
        d = attach_edu(&d)?;
    }
    let d = attach_checker(&d, opts.threshold)?;
    Ok((harden_controller(&d)?, spec))
}

/// True when a key-controlled MUX selector depends on a mask bit.
pub fn is_masked(d: &Design) -> bool {
    d.count_nodes(|k| matches!(k, NodeKind::MaskBit { .. })) > 0
}

/// Nets selecting key-controlled MUXes.
pub fn key_mux_selectors(d: &Design) -> Vec<String> {
    d.nodes
        .iter()
        .filter_map(|n| match &n.kind {
            NodeKind::Mux {
                select: MuxSelect::Net(s),
                ..
            } => Some(s.clone()),
            _ => None,
        })
        .collect()
}

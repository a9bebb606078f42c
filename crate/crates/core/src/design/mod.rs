//! Datapath/controller design model (a Glushkov-style split into a datapath
//! graph and a controller FSM), its JSON format, validation, timing and
//! synthetic benchmarks.

mod bench;
mod timing;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bench::{generate_benchmark, BenchmarkConfig, BenchmarkKind};
pub use timing::{compute_slack, longest_path_ns, DelayModel, SlackMap, TimingGraph};
pub use validate::{validate_design, Issue, IssueKind, ValidationReport};
#[cfg(test)]
pub(crate) use timing::test_graphs as timing_test_graphs;

/// Current value of the `ir_version` field.
pub const IR_VERSION: u32 = 1;

/// Maximum bit width of any net.
pub const MAX_WIDTH: u32 = 64;

pub type NetId = String;
pub type NodeId = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub ir_version: u32,
    pub name: String,
    pub clock_period_ns: f64,
    pub inputs: Vec<Port>,
    pub outputs: Vec<OutputPort>,
    pub nodes: Vec<Node>,
    pub nets: Vec<Net>,
    pub controller: ControllerFsm,
    #[serde(default)]
    pub key_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dlockout: Option<LockoutBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputPort {
    pub name: String,
    pub width: u32,
    pub net: NetId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(flatten)]
    pub kind: NodeKind,
}

/// A net has exactly one driver node; its sinks are the nodes that name it
/// as an input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: NetId,
    pub width: u32,
    pub driver: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
}

impl FuOp {
    pub fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            FuOp::Add => a.wrapping_add(b),
            FuOp::Sub => a.wrapping_sub(b),
            FuOp::Mul => a.wrapping_mul(b),
            FuOp::And => a & b,
            FuOp::Or => a | b,
            FuOp::Xor => a ^ b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuxSelect {
    /// Driven by a controller control-word field.
    Control(String),
    /// Driven by a datapath net (key-controlled MUXes).
    Net(NetId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum NodeKind {
    /// Primary input port.
    Input { port: String, width: u32 },
    Const { value: u64, width: u32 },
    /// One bit of the applied key.
    KeyBit { index: usize },
    /// A secret mask bit held in the same protected storage as the key.
    MaskBit { index: usize, value: bool },
    FunctionalUnit {
        op: FuOp,
        width: u32,
        delay_ns: f64,
        inputs: Vec<NetId>,
    },
    Register {
        width: u32,
        input: NetId,
        enable: String,
    },
    Mux {
        width: u32,
        delay_ns: f64,
        inputs: Vec<NetId>,
        select: MuxSelect,
    },
    /// 2-input XOR annotating an obfuscation point. `shadow` marks the
    /// duplicate used by the error detection unit.
    Comparator {
        delay_ns: f64,
        inputs: [NetId; 2],
        shadow: bool,
    },
    /// Per-point EDU cross-check: observed comparator XOR shadow comparator.
    EduCell {
        delay_ns: f64,
        primary: NetId,
        shadow: NetId,
    },
    /// Non-volatile attempt counter.
    Counter { bits: u32, threshold: u32 },
    /// Checker FSM; drives the 2-bit `dp_comp` signal to the controller.
    Checker {
        comparators: Vec<NetId>,
        alarms: Vec<NetId>,
        counter: NetId,
    },
}

impl NodeKind {
    /// Width of the single net this node drives.
    pub fn output_width(&self) -> u32 {
        match self {
            NodeKind::Input { width, .. }
            | NodeKind::Const { width, .. }
            | NodeKind::FunctionalUnit { width, .. }
            | NodeKind::Register { width, .. }
            | NodeKind::Mux { width, .. } => *width,
            NodeKind::KeyBit { .. }
            | NodeKind::MaskBit { .. }
            | NodeKind::Comparator { .. }
            | NodeKind::EduCell { .. } => 1,
            NodeKind::Counter { bits, .. } => *bits,
            NodeKind::Checker { .. } => 2,
        }
    }

    /// Nets read by this node (including a net-driven MUX selector).
    pub fn input_nets(&self) -> Vec<&NetId> {
        match self {
            NodeKind::Input { .. }
            | NodeKind::Const { .. }
            | NodeKind::KeyBit { .. }
            | NodeKind::MaskBit { .. }
            | NodeKind::Counter { .. } => Vec::new(),
            NodeKind::FunctionalUnit { inputs, .. } => inputs.iter().collect(),
            NodeKind::Register { input, .. } => vec![input],
            NodeKind::Mux { inputs, select, .. } => {
                let mut v: Vec<&NetId> = inputs.iter().collect();
                if let MuxSelect::Net(n) = select {
                    v.push(n);
                }
                v
            }
            NodeKind::Comparator { inputs, .. } => inputs.iter().collect(),
            NodeKind::EduCell { primary, shadow, .. } => vec![primary, shadow],
            NodeKind::Checker {
                comparators,
                alarms,
                counter,
            } => comparators.iter().chain(alarms).chain(Some(counter)).collect(),
        }
    }

    pub(crate) fn input_nets_mut(&mut self) -> Vec<&mut NetId> {
        match self {
            NodeKind::Input { .. }
            | NodeKind::Const { .. }
            | NodeKind::KeyBit { .. }
            | NodeKind::MaskBit { .. }
            | NodeKind::Counter { .. } => Vec::new(),
            NodeKind::FunctionalUnit { inputs, .. } => inputs.iter_mut().collect(),
            NodeKind::Register { input, .. } => vec![input],
            NodeKind::Mux { inputs, select, .. } => {
                let mut v: Vec<&mut NetId> = inputs.iter_mut().collect();
                if let MuxSelect::Net(n) = select {
                    v.push(n);
                }
                v
            }
            NodeKind::Comparator { inputs, .. } => inputs.iter_mut().collect(),
            NodeKind::EduCell { primary, shadow, .. } => vec![primary, shadow],
            NodeKind::Checker {
                comparators,
                alarms,
                counter,
            } => comparators
                .iter_mut()
                .chain(alarms.iter_mut())
                .chain(Some(counter))
                .collect(),
        }
    }

    /// Propagation delay for combinational nodes; `None` for sources and
    /// sequential elements.
    pub fn delay_ns(&self) -> Option<f64> {
        match self {
            NodeKind::FunctionalUnit { delay_ns, .. }
            | NodeKind::Mux { delay_ns, .. }
            | NodeKind::Comparator { delay_ns, .. }
            | NodeKind::EduCell { delay_ns, .. } => Some(*delay_ns),
            _ => None,
        }
    }

    pub fn is_combinational(&self) -> bool {
        self.delay_ns().is_some()
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NodeKind::Input { .. } => "input",
            NodeKind::Const { .. } => "const",
            NodeKind::KeyBit { .. } => "key_bit",
            NodeKind::MaskBit { .. } => "mask_bit",
            NodeKind::FunctionalUnit { .. } => "functional_unit",
            NodeKind::Register { .. } => "register",
            NodeKind::Mux { .. } => "mux",
            NodeKind::Comparator { .. } => "comparator",
            NodeKind::EduCell { .. } => "edu_cell",
            NodeKind::Counter { .. } => "counter",
            NodeKind::Checker { .. } => "checker",
        }
    }
}

/// Encoded checker-to-controller signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DpComp {
    Ok,
    Partial,
    Full,
}

impl DpComp {
    pub const ALL: [DpComp; 3] = [DpComp::Ok, DpComp::Partial, DpComp::Full];

    pub fn code(self) -> u64 {
        match self {
            DpComp::Ok => 0,
            DpComp::Partial => 1,
            DpComp::Full => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Always,
    DpComp(DpComp),
}

impl Condition {
    pub fn holds(self, dp: DpComp) -> bool {
        match self {
            Condition::Always => true,
            Condition::DpComp(v) => v == dp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub cond: Condition,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerFsm {
    pub states: Vec<String>,
    pub reset: String,
    pub transitions: Vec<Transition>,
    /// state -> (control field -> value). Fields absent from a word read 0.
    pub control_words: BTreeMap<String, BTreeMap<String, u64>>,
}

impl ControllerFsm {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn transitions_from<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition> {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    /// The unique unconditional successor of `state`, if it has exactly one
    /// outgoing `Always` transition and nothing else.
    pub fn sole_successor<'a>(&'a self, state: &'a str) -> Option<&'a str> {
        let mut it = self.transitions_from(state);
        let t = it.next()?;
        if it.next().is_some() || t.cond != Condition::Always {
            return None;
        }
        Some(&t.to)
    }
}

/// Extension block present on lockout-hardened designs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockoutBlock {
    pub threshold: u32,
    pub checker: NodeId,
    pub counter: NodeId,
    /// Controller state in which comparator outputs are sampled.
    pub check_state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blackhole_state: Option<String>,
    #[serde(default)]
    pub edu: bool,
}

impl Design {
    /// Parses and validates a design in the JSON design format.
    pub fn from_json(text: &str) -> Result<Design> {
        let d: Design = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if d.ir_version != IR_VERSION {
            return Err(Error::UnsupportedVersion(d.ir_version));
        }
        let report = validate_design(&d);
        if !report.is_empty() {
            return Err(Error::Semantic(report));
        }
        Ok(d)
    }

    /// Canonical serialized form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serialization is infallible")
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn net(&self, id: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.id == id)
    }

    /// The net driven by node `id`.
    pub fn output_net_of(&self, id: &str) -> Option<&Net> {
        self.nets.iter().find(|n| n.driver == id)
    }

    pub fn is_hardened(&self) -> bool {
        self.dlockout.is_some()
    }

    /// Number of controller states on the schedule path (the blackhole
    /// state is not part of the schedule).
    pub fn schedule_length(&self) -> usize {
        let bh = self.dlockout.as_ref().and_then(|b| b.blackhole_state.as_deref());
        self.controller
            .states
            .iter()
            .filter(|s| Some(s.as_str()) != bh)
            .count()
    }

    pub fn total_input_width(&self) -> u32 {
        self.inputs.iter().map(|p| p.width).sum()
    }

    pub fn count_nodes(&self, pred: impl Fn(&NodeKind) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.kind)).count()
    }

    /// Returns an identifier with `prefix` that is unused by any node or net.
    pub(crate) fn fresh_id(&self, prefix: &str) -> String {
        let mut i = 0usize;
        loop {
            let cand = format!("{prefix}{i}");
            if self.node(&cand).is_none() && self.net(&cand).is_none() {
                return cand;
            }
            i += 1;
        }
    }

    /// Adds a node together with the net it drives.
    pub(crate) fn add_node(&mut self, id: NodeId, net: NetId, kind: NodeKind) -> NetId {
        let width = kind.output_width();
        self.nodes.push(Node {
            id: id.clone(),
            kind,
        });
        self.nets.push(Net {
            id: net.clone(),
            width,
            driver: id,
        });
        net
    }
}

/// Parses a design and returns it only when it validates.
pub fn parse_design(text: &str) -> Result<Design> {
    Design::from_json(text)
}

pub fn serialize_design(d: &Design) -> String {
    d.to_json()
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// 1 input, 1 register, 1 output, 2-state FSM.
    pub fn minimal() -> Design {
        let mut cw = BTreeMap::new();
        cw.insert("S0".to_string(), BTreeMap::from([("en_r".to_string(), 1)]));
        cw.insert("S1".to_string(), BTreeMap::new());
        Design {
            ir_version: IR_VERSION,
            name: "minimal".into(),
            clock_period_ns: 10.0,
            inputs: vec![Port {
                name: "a".into(),
                width: 8,
            }],
            outputs: vec![OutputPort {
                name: "y".into(),
                width: 8,
                net: "r_q".into(),
            }],
            nodes: vec![
                Node {
                    id: "in_a".into(),
                    kind: NodeKind::Input {
                        port: "a".into(),
                        width: 8,
                    },
                },
                Node {
                    id: "r".into(),
                    kind: NodeKind::Register {
                        width: 8,
                        input: "a_n".into(),
                        enable: "en_r".into(),
                    },
                },
            ],
            nets: vec![
                Net {
                    id: "a_n".into(),
                    width: 8,
                    driver: "in_a".into(),
                },
                Net {
                    id: "r_q".into(),
                    width: 8,
                    driver: "r".into(),
                },
            ],
            controller: ControllerFsm {
                states: vec!["S0".into(), "S1".into()],
                reset: "S0".into(),
                transitions: vec![
                    Transition {
                        from: "S0".into(),
                        cond: Condition::Always,
                        to: "S1".into(),
                    },
                    Transition {
                        from: "S1".into(),
                        cond: Condition::Always,
                        to: "S0".into(),
                    },
                ],
                control_words: cw,
            },
            key_width: 0,
            dlockout: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_design_parses_with_zero_key_width() {
        let text = fixtures::minimal().to_json();
        let d = parse_design(&text).unwrap();
        assert_eq!(d.key_width, 0);
        assert_eq!(d.schedule_length(), 2);
    }

    #[test]
    fn duplicate_net_is_multiple_drivers() {
        let mut d = fixtures::minimal();
        d.nodes.push(Node {
            id: "c".into(),
            kind: NodeKind::Const { value: 3, width: 8 },
        });
        d.nets.push(Net {
            id: "a_n".into(),
            width: 8,
            driver: "c".into(),
        });
        match parse_design(&d.to_json()) {
            Err(Error::Semantic(r)) => {
                assert!(r.to_string().contains("multiple drivers"), "{r}");
            }
            other => panic!("expected semantic error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_design("{\n  \"name\": ,\n}").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn node_json_shape() {
        let v: serde_json::Value = serde_json::from_str(&fixtures::minimal().to_json()).unwrap();
        let n = &v["nodes"][1];
        assert_eq!(n["id"], "r");
        assert_eq!(n["kind"], "register");
        assert_eq!(n["params"]["enable"], "en_r");
        assert_eq!(v["ir_version"], 1);
    }
}

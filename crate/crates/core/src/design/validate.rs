use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::timing::{TimingGraph, EPS};
use super::{Condition, Design, DpComp, MuxSelect, NodeKind, MAX_WIDTH};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    MultipleDrivers,
    DanglingNet,
    MissingDriver,
    DriverArity,
    DuplicateNode,
    Width,
    Delay,
    CombinationalCycle,
    TimingViolation,
    Controller,
    ControlField,
    Port,
    KeyWidth,
    Lockout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    /// Offending nodes / nets / states.
    pub subjects: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn of_kind(&self, kind: IssueKind) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(move |i| i.kind == kind)
    }

    fn push(&mut self, kind: IssueKind, subjects: Vec<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            kind,
            subjects,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} [{}]", issue.message, issue.subjects.join(", "))?;
        }
        Ok(())
    }
}

/// Checks every structural, timing and controller invariant. An empty
/// report means the design is valid.
pub fn validate_design(d: &Design) -> ValidationReport {
    let mut r = ValidationReport::default();

    let mut node_ids = HashSet::new();
    for n in &d.nodes {
        if !node_ids.insert(n.id.as_str()) {
            r.push(IssueKind::DuplicateNode, vec![n.id.clone()], "duplicate node id");
        }
    }

    let mut drivers: HashMap<&str, Vec<&str>> = HashMap::new();
    for net in &d.nets {
        drivers.entry(&net.id).or_default().push(&net.driver);
        if net.width == 0 || net.width > MAX_WIDTH {
            r.push(IssueKind::Width, vec![net.id.clone()], format!("net width {} outside 1..=64", net.width));
        }
        if !node_ids.contains(net.driver.as_str()) {
            r.push(IssueKind::MissingDriver, vec![net.id.clone()], format!("driver {} does not exist", net.driver));
        }
    }
    let mut multi: Vec<&str> = drivers.iter().filter(|(_, v)| v.len() > 1).map(|(k, _)| *k).collect();
    multi.sort_unstable();
    for net in multi {
        r.push(IssueKind::MultipleDrivers, vec![net.to_string()], "multiple drivers");
    }

    let mut driven: HashMap<&str, usize> = HashMap::new();
    for net in &d.nets {
        *driven.entry(net.driver.as_str()).or_default() += 1;
    }
    let net_width: HashMap<&str, u32> = d.nets.iter().map(|n| (n.id.as_str(), n.width)).collect();

    let mut control_fields: HashMap<String, Option<usize>> = HashMap::new();
    for n in &d.nodes {
        match driven.get(n.id.as_str()).copied().unwrap_or(0) {
            1 => {}
            k => r.push(IssueKind::DriverArity, vec![n.id.clone()], format!("node drives {k} nets, expected 1")),
        }
        if let Some(net) = d.output_net_of(&n.id) {
            if net.width != n.kind.output_width() {
                r.push(
                    IssueKind::Width,
                    vec![n.id.clone(), net.id.clone()],
                    format!("node output width {} but net width {}", n.kind.output_width(), net.width),
                );
            }
        }
        for input in n.kind.input_nets() {
            if !net_width.contains_key(input.as_str()) {
                r.push(IssueKind::DanglingNet, vec![n.id.clone(), input.clone()], "dangling net");
            }
        }
        if let Some(delay) = n.kind.delay_ns() {
            if !(delay > 0.0) || !delay.is_finite() {
                r.push(IssueKind::Delay, vec![n.id.clone()], format!("delay {delay} is not positive"));
            }
        }
        let w = |id: &str| net_width.get(id).copied();
        match &n.kind {
            NodeKind::FunctionalUnit { width, inputs, .. } => {
                if inputs.len() != 2 {
                    r.push(IssueKind::Width, vec![n.id.clone()], "functional unit needs exactly 2 inputs");
                }
                for i in inputs {
                    if w(i).is_some_and(|iw| iw > *width) {
                        r.push(IssueKind::Width, vec![n.id.clone(), i.clone()], "operand wider than unit");
                    }
                }
            }
            NodeKind::Register { width, input, enable } => {
                if w(input).is_some_and(|iw| iw != *width) {
                    r.push(IssueKind::Width, vec![n.id.clone(), input.clone()], "register input width mismatch");
                }
                control_fields.insert(enable.clone(), None);
            }
            NodeKind::Mux { width, inputs, select, .. } => {
                if inputs.len() < 2 {
                    r.push(IssueKind::Width, vec![n.id.clone()], "mux needs at least 2 inputs");
                }
                for i in inputs {
                    if w(i).is_some_and(|iw| iw != *width) {
                        r.push(IssueKind::Width, vec![n.id.clone(), i.clone()], "mux input width mismatch");
                    }
                }
                match select {
                    MuxSelect::Control(f) => {
                        control_fields.insert(f.clone(), Some(inputs.len()));
                    }
                    MuxSelect::Net(s) => {
                        if w(s).is_some_and(|sw| (1u64 << sw.min(63)) > inputs.len() as u64) {
                            r.push(IssueKind::Width, vec![n.id.clone(), s.clone()], "selector can address missing inputs");
                        }
                    }
                }
            }
            NodeKind::Comparator { inputs, .. } => {
                for i in inputs {
                    if w(i).is_some_and(|iw| iw != 1) {
                        r.push(IssueKind::Width, vec![n.id.clone(), i.clone()], "comparator inputs are 1-bit");
                    }
                }
            }
            NodeKind::KeyBit { index } if *index >= d.key_width => {
                r.push(IssueKind::KeyWidth, vec![n.id.clone()], format!("key bit {index} beyond key_width {}", d.key_width));
            }
            NodeKind::Input { port, width } => match d.inputs.iter().find(|p| &p.name == port) {
                Some(p) if p.width == *width => {}
                Some(_) => r.push(IssueKind::Port, vec![n.id.clone()], "input node width differs from port"),
                None => r.push(IssueKind::Port, vec![n.id.clone(), port.clone()], "input node for undeclared port"),
            },
            NodeKind::Const { value, width } => {
                if *width < 64 && value >> width != 0 {
                    r.push(IssueKind::Width, vec![n.id.clone()], "constant exceeds its width");
                }
            }
            _ => {}
        }
    }

    for p in &d.inputs {
        let count = d
            .nodes
            .iter()
            .filter(|n| matches!(&n.kind, NodeKind::Input { port, .. } if port == &p.name))
            .count();
        if count != 1 {
            r.push(IssueKind::Port, vec![p.name.clone()], format!("input port has {count} input nodes"));
        }
    }
    for o in &d.outputs {
        match net_width.get(o.net.as_str()) {
            None => r.push(IssueKind::DanglingNet, vec![o.name.clone(), o.net.clone()], "output drives from dangling net"),
            Some(&nw) if nw != o.width => r.push(IssueKind::Port, vec![o.name.clone()], "output width mismatch"),
            _ => {}
        }
    }

    // Key bits form exactly [0, key_width).
    let key_indices: BTreeSet<usize> = d
        .nodes
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::KeyBit { index } => Some(index),
            _ => None,
        })
        .collect();
    let key_nodes = d.count_nodes(|k| matches!(k, NodeKind::KeyBit { .. }));
    if key_nodes != d.key_width || key_indices.len() != d.key_width {
        r.push(
            IssueKind::KeyWidth,
            vec![],
            format!("key_width {} but {} distinct key bits", d.key_width, key_indices.len()),
        );
    }

    check_timing(d, &mut r);
    check_controller(d, &control_fields, &mut r);
    check_lockout(d, &mut r);
    r
}

fn check_timing(d: &Design, r: &mut ValidationReport) {
    // Structural problems make the graph meaningless; report them first.
    if r.issues.iter().any(|i| matches!(i.kind, IssueKind::MultipleDrivers | IssueKind::MissingDriver)) {
        return;
    }
    match TimingGraph::new(d) {
        Err(Error::CombinationalCycle(nets)) => {
            r.push(IssueKind::CombinationalCycle, nets, "combinational cycle");
        }
        Err(e) => r.push(IssueKind::CombinationalCycle, vec![], e.to_string()),
        Ok(g) => {
            let crit = g.critical_path_ns();
            if crit > d.clock_period_ns + EPS {
                let worst = (0..g.net_ids.len())
                    .max_by(|&a, &b| g.through(a).total_cmp(&g.through(b)))
                    .unwrap();
                r.push(
                    IssueKind::TimingViolation,
                    g.path_through(worst),
                    format!("longest path {crit} ns exceeds clock period {} ns", d.clock_period_ns),
                );
            }
        }
    }
    if !(d.clock_period_ns > 0.0) {
        r.push(IssueKind::TimingViolation, vec![], "clock period must be positive");
    }
}

fn check_controller(d: &Design, fields: &HashMap<String, Option<usize>>, r: &mut ValidationReport) {
    let c = &d.controller;
    let states: HashSet<&str> = c.states.iter().map(String::as_str).collect();
    if states.len() != c.states.len() {
        r.push(IssueKind::Controller, vec![], "duplicate state names");
    }
    if !states.contains(c.reset.as_str()) {
        r.push(IssueKind::Controller, vec![c.reset.clone()], "reset state is not declared");
        return;
    }
    for t in &c.transitions {
        for s in [&t.from, &t.to] {
            if !states.contains(s.as_str()) {
                r.push(IssueKind::Controller, vec![s.clone()], "transition references unknown state");
            }
        }
        if matches!(t.cond, Condition::DpComp(_)) && d.dlockout.is_none() {
            r.push(IssueKind::Controller, vec![t.from.clone()], "dp_comp condition without a checker");
        }
    }
    for s in &c.states {
        let outs: Vec<_> = c.transitions_from(s).collect();
        let always = outs.iter().filter(|t| t.cond == Condition::Always).count();
        let deterministic = if always > 0 {
            always == 1 && outs.len() == 1
        } else {
            outs.len() == 3
                && DpComp::ALL
                    .iter()
                    .all(|v| outs.iter().filter(|t| t.cond == Condition::DpComp(*v)).count() == 1)
        };
        if !deterministic {
            r.push(IssueKind::Controller, vec![s.clone()], "transition conditions do not partition the input space");
        }
    }
    // Reachability from reset.
    let mut seen: HashSet<&str> = HashSet::new();
    let mut stack = vec![c.reset.as_str()];
    while let Some(s) = stack.pop() {
        if seen.insert(s) {
            stack.extend(c.transitions_from(s).map(|t| t.to.as_str()));
        }
    }
    for s in &c.states {
        if !seen.contains(s.as_str()) {
            r.push(IssueKind::Controller, vec![s.clone()], "state unreachable from reset");
        }
    }
    for (state, word) in &c.control_words {
        if !states.contains(state.as_str()) {
            r.push(IssueKind::ControlField, vec![state.clone()], "control word for unknown state");
        }
        for (field, value) in word {
            match fields.get(field) {
                None => r.push(
                    IssueKind::ControlField,
                    vec![state.clone(), field.clone()],
                    "control field references no mux selector or register enable",
                ),
                Some(Some(n)) if *value >= *n as u64 => r.push(
                    IssueKind::ControlField,
                    vec![state.clone(), field.clone()],
                    format!("mux select value {value} out of range"),
                ),
                Some(None) if *value > 1 => r.push(
                    IssueKind::ControlField,
                    vec![state.clone(), field.clone()],
                    "register enable must be 0 or 1",
                ),
                _ => {}
            }
        }
    }
}

fn check_lockout(d: &Design, r: &mut ValidationReport) {
    let Some(b) = &d.dlockout else { return };
    if b.threshold < 1 {
        r.push(IssueKind::Lockout, vec![], "threshold must be at least 1");
    }
    if !matches!(d.node(&b.checker).map(|n| &n.kind), Some(NodeKind::Checker { .. })) {
        r.push(IssueKind::Lockout, vec![b.checker.clone()], "checker node missing");
    }
    match d.node(&b.counter).map(|n| &n.kind) {
        Some(NodeKind::Counter { threshold, .. }) if *threshold == b.threshold => {}
        _ => r.push(IssueKind::Lockout, vec![b.counter.clone()], "counter node missing or threshold mismatch"),
    }
    if d.controller.state_index(&b.check_state).is_none() {
        r.push(IssueKind::Lockout, vec![b.check_state.clone()], "check state not in controller");
    }
    if let Some(bh) = &b.blackhole_state {
        let absorbing = d.controller.sole_successor(bh) == Some(bh.as_str());
        if !absorbing {
            r.push(IssueKind::Lockout, vec![bh.clone()], "blackhole state is not absorbing");
        }
    }
    // dp_comp only feeds the controller.
    if let Some(dp) = d.output_net_of(&b.checker) {
        let readers: Vec<String> = d
            .nodes
            .iter()
            .filter(|n| n.kind.input_nets().contains(&&dp.id))
            .map(|n| n.id.clone())
            .collect();
        if !readers.is_empty() {
            r.push(IssueKind::Lockout, readers, "dp_comp may only drive the controller");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::minimal;
    use super::super::timing::test_graphs::comb_design;
    use super::*;

    #[test]
    fn minimal_is_valid() {
        assert!(validate_design(&minimal()).is_empty());
    }

    #[test]
    fn cycle_entry_lists_cycle_nets() {
        let d = comb_design(&[("x", 1.0, &["a", "y"]), ("y", 1.0, &["x", "b"])], &["y"], 10.0);
        let r = validate_design(&d);
        let cycles: Vec<_> = r.of_kind(IssueKind::CombinationalCycle).collect();
        assert_eq!(cycles.len(), 1);
        let mut nets = cycles[0].subjects.clone();
        nets.sort();
        assert_eq!(nets, ["x", "y"]);
    }

    /// Longest path of a 5-node graph by explicit DFS over every path.
    #[test]
    fn timing_violation_names_longest_path() {
        // a -> u1(4) -> u3(3) -> reg ; b -> u2(2) -> u3 ; a -> u4(5) -> reg
        let units: [(&str, f64, &[&str]); 4] = [
            ("u1", 4.0, &["a", "a"]),
            ("u2", 2.0, &["b", "b"]),
            ("u3", 3.0, &["u1", "u2"]),
            ("u4", 5.0, &["a", "b"]),
        ];
        let d = comb_design(&units, &["u3", "u4"], 6.0);
        fn dfs(units: &[(&str, f64, &[&str])], at: &str, len: f64, path: Vec<String>, best: &mut (f64, Vec<String>)) {
            let next: Vec<_> = units.iter().filter(|(_, _, ins)| ins.contains(&at)).collect();
            if next.is_empty() && len > best.0 {
                *best = (len, path.clone());
            }
            for (id, dl, _) in next {
                let mut p = path.clone();
                p.push(id.to_string());
                dfs(units, id, len + dl, p, best);
            }
        }
        let mut best = (0.0, vec![]);
        for s in ["a", "b"] {
            dfs(&units, s, 0.0, vec![s.to_string()], &mut best);
        }
        assert_eq!(best.0, 7.0);
        let r = validate_design(&d);
        let v: Vec<_> = r.of_kind(IssueKind::TimingViolation).collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subjects, best.1);
    }

    #[test]
    fn unknown_control_field_is_reported() {
        let mut d = minimal();
        d.controller
            .control_words
            .get_mut("S1")
            .unwrap()
            .insert("bogus".into(), 1);
        let r = validate_design(&d);
        assert_eq!(r.of_kind(IssueKind::ControlField).count(), 1);
    }

    #[test]
    fn unreachable_state_is_reported() {
        let mut d = minimal();
        d.controller.states.push("S9".into());
        d.controller.transitions.push(crate::design::Transition {
            from: "S9".into(),
            cond: Condition::Always,
            to: "S0".into(),
        });
        let r = validate_design(&d);
        assert!(r.of_kind(IssueKind::Controller).any(|i| i.subjects == ["S9"]));
    }

    #[test]
    fn dangling_input_net() {
        let mut d = minimal();
        if let NodeKind::Register { input, .. } = &mut d.nodes[1].kind {
            *input = "nope".into();
        }
        let r = validate_design(&d);
        assert_eq!(r.of_kind(IssueKind::DanglingNet).count(), 1);
    }
}

//! Static slack analysis over the combinational part of the datapath.
//!
//! Launch points are sources and sequential elements (inputs, constants,
//! key/mask bits, registers, counter, checker); capture points are register
//! inputs, checker inputs and primary outputs. Wires have no delay.

use std::collections::{BTreeMap, HashMap};

use super::Design;
use crate::error::{Error, Result};

/// Tolerance for comparisons between accumulated nanosecond delays.
pub(crate) const EPS: f64 = 1e-9;

/// Cell delays used when inserting obfuscation logic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub mux_ns: f64,
    pub xor_ns: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel {
            mux_ns: 0.5,
            xor_ns: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlackMap {
    pub clock_period_ns: f64,
    pub critical_path_ns: f64,
    pub slack: BTreeMap<String, f64>,
}

impl SlackMap {
    pub fn get(&self, net: &str) -> Option<f64> {
        self.slack.get(net).copied()
    }

    /// Slack measured against the current critical path instead of the
    /// clock: how much a net's longest path may grow without lengthening
    /// the critical path.
    pub fn critical_margin(&self, net: &str) -> Option<f64> {
        let margin_to_clock = self.clock_period_ns - self.critical_path_ns;
        self.get(net).map(|s| s - margin_to_clock)
    }
}

/// Indexed view of the design used by slack analysis and the simulator.
#[derive(Debug, Clone)]
pub struct TimingGraph {
    pub net_ids: Vec<String>,
    pub net_index: HashMap<String, usize>,
    pub net_driver: Vec<Option<usize>>,
    pub net_sinks: Vec<Vec<usize>>,
    pub node_inputs: Vec<Vec<usize>>,
    pub node_output: Vec<Option<usize>>,
    pub node_delay: Vec<Option<f64>>,
    /// Combinational nodes in topological order.
    pub comb_order: Vec<usize>,
    pub arrival: Vec<f64>,
    pub tail: Vec<f64>,
    /// Per-net predecessor net on the longest arriving path.
    arrival_pred: Vec<Option<usize>>,
    tail_succ: Vec<Option<usize>>,
}

impl TimingGraph {
    pub fn new(d: &Design) -> Result<Self> {
        let net_ids: Vec<String> = d.nets.iter().map(|n| n.id.clone()).collect();
        let mut net_index = HashMap::new();
        for (i, id) in net_ids.iter().enumerate() {
            net_index.entry(id.clone()).or_insert(i);
        }
        let node_index: HashMap<&str, usize> = d
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut net_driver = vec![None; net_ids.len()];
        let mut node_output = vec![None; d.nodes.len()];
        for (i, net) in d.nets.iter().enumerate() {
            if let Some(&ni) = node_index.get(net.driver.as_str()) {
                net_driver[i] = Some(ni);
                node_output[ni].get_or_insert(i);
            }
        }
        let mut net_sinks = vec![Vec::new(); net_ids.len()];
        let mut node_inputs = Vec::with_capacity(d.nodes.len());
        let mut node_delay = Vec::with_capacity(d.nodes.len());
        for (ni, node) in d.nodes.iter().enumerate() {
            let ins: Vec<usize> = node
                .kind
                .input_nets()
                .into_iter()
                .filter_map(|n| net_index.get(n).copied())
                .collect();
            for &i in &ins {
                net_sinks[i].push(ni);
            }
            node_inputs.push(ins);
            node_delay.push(node.kind.delay_ns());
        }

        // Kahn over combinational nodes; an edge u -> v exists when v reads
        // the output net of combinational node u.
        let n = d.nodes.len();
        let mut indeg = vec![0usize; n];
        for v in 0..n {
            if node_delay[v].is_none() {
                continue;
            }
            for &i in &node_inputs[v] {
                if let Some(u) = net_driver[i] {
                    if node_delay[u].is_some() {
                        indeg[v] += 1;
                    }
                }
            }
        }
        let mut queue: Vec<usize> = (0..n)
            .filter(|&v| node_delay[v].is_some() && indeg[v] == 0)
            .collect();
        queue.reverse();
        let mut comb_order = Vec::new();
        while let Some(u) = queue.pop() {
            comb_order.push(u);
            if let Some(o) = node_output[u] {
                for &v in &net_sinks[o] {
                    if node_delay[v].is_some() {
                        indeg[v] -= 1;
                        if indeg[v] == 0 {
                            queue.push(v);
                        }
                    }
                }
            }
        }
        let comb_total = node_delay.iter().filter(|x| x.is_some()).count();
        if comb_order.len() != comb_total {
            let stuck: Vec<usize> = (0..n)
                .filter(|&v| node_delay[v].is_some() && indeg[v] > 0)
                .collect();
            return Err(Error::CombinationalCycle(find_cycle_nets(
                &stuck,
                &node_inputs,
                &net_driver,
                &net_ids,
            )));
        }

        let mut g = TimingGraph {
            arrival: vec![0.0; net_ids.len()],
            tail: vec![0.0; net_ids.len()],
            arrival_pred: vec![None; net_ids.len()],
            tail_succ: vec![None; net_ids.len()],
            net_ids,
            net_index,
            net_driver,
            net_sinks,
            node_inputs,
            node_output,
            node_delay,
            comb_order,
        };
        g.propagate();
        Ok(g)
    }

    fn propagate(&mut self) {
        for &u in &self.comb_order {
            let Some(o) = self.node_output[u] else { continue };
            let delay = self.node_delay[u].unwrap_or(0.0);
            let mut best = 0.0;
            let mut pred = None;
            for &i in &self.node_inputs[u] {
                if pred.is_none() || self.arrival[i] > best {
                    best = self.arrival[i];
                    pred = Some(i);
                }
            }
            self.arrival[o] = best + delay;
            self.arrival_pred[o] = pred;
        }
        for &u in self.comb_order.iter().rev() {
            let Some(o) = self.node_output[u] else { continue };
            let delay = self.node_delay[u].unwrap_or(0.0);
            let t = delay + self.tail[o];
            for &i in &self.node_inputs[u] {
                if self.tail_succ[i].is_none() || t > self.tail[i] {
                    self.tail[i] = t;
                    self.tail_succ[i] = Some(o);
                }
            }
        }
    }

    /// Longest register-to-register path through net `i`.
    pub fn through(&self, i: usize) -> f64 {
        self.arrival[i] + self.tail[i]
    }

    pub fn critical_path_ns(&self) -> f64 {
        (0..self.net_ids.len())
            .map(|i| self.through(i))
            .fold(0.0, f64::max)
    }

    /// Nets along the longest path through net `i`, source first.
    pub fn path_through(&self, i: usize) -> Vec<String> {
        let mut back = vec![i];
        let mut cur = i;
        while let Some(p) = self.arrival_pred[cur] {
            back.push(p);
            cur = p;
        }
        back.reverse();
        let mut cur = i;
        while let Some(s) = self.tail_succ[cur] {
            back.push(s);
            cur = s;
        }
        back.into_iter().map(|n| self.net_ids[n].clone()).collect()
    }

    /// True when `target` is reachable from `from` through combinational
    /// nodes only.
    pub fn comb_reachable(&self, from: usize, target: usize) -> bool {
        let mut seen = vec![false; self.net_ids.len()];
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            for &v in &self.net_sinks[n] {
                if self.node_delay[v].is_some() {
                    if let Some(o) = self.node_output[v] {
                        stack.push(o);
                    }
                }
            }
        }
        false
    }
}

fn find_cycle_nets(
    stuck: &[usize],
    node_inputs: &[Vec<usize>],
    net_driver: &[Option<usize>],
    net_ids: &[String],
) -> Vec<String> {
    // Every stuck node has a stuck predecessor; walking predecessors must
    // revisit a node.
    let in_stuck = |v: usize| stuck.contains(&v);
    let Some(&start) = stuck.first() else {
        return Vec::new();
    };
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut cur = start;
    loop {
        if let Some(pos) = order.iter().position(|&(v, _)| v == cur) {
            let mut nets: Vec<String> = order[pos..]
                .iter()
                .map(|&(_, net)| net_ids[net].clone())
                .collect();
            nets.reverse();
            return nets;
        }
        let Some((net, pred)) = node_inputs[cur]
            .iter()
            .filter_map(|&i| net_driver[i].map(|u| (i, u)))
            .find(|&(_, u)| in_stuck(u))
        else {
            return Vec::new();
        };
        order.push((cur, net));
        cur = pred;
    }
}

pub fn compute_slack(d: &Design) -> Result<SlackMap> {
    let g = TimingGraph::new(d)?;
    let slack = g
        .net_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), d.clock_period_ns - g.through(i)))
        .collect();
    Ok(SlackMap {
        clock_period_ns: d.clock_period_ns,
        critical_path_ns: g.critical_path_ns(),
        slack,
    })
}

/// Longest combinational path and the nets along it.
pub fn longest_path_ns(d: &Design) -> Result<(f64, Vec<String>)> {
    let g = TimingGraph::new(d)?;
    let best = (0..g.net_ids.len()).max_by(|&a, &b| g.through(a).total_cmp(&g.through(b)));
    Ok(match best {
        Some(i) => (g.through(i), g.path_through(i)),
        None => (0.0, Vec::new()),
    })
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use std::collections::BTreeMap;

    use crate::design::*;

    /// Builds a single-state design from `(id, delay, inputs)` functional
    /// units over inputs `a`, `b`; nets are named after their driver, and
    /// `capture` nets feed registers.
    pub fn comb_design(units: &[(&str, f64, &[&str])], capture: &[&str], clock: f64) -> Design {
        let mut d = Design {
            ir_version: IR_VERSION,
            name: "t".into(),
            clock_period_ns: clock,
            inputs: vec![
                Port {
                    name: "a".into(),
                    width: 8,
                },
                Port {
                    name: "b".into(),
                    width: 8,
                },
            ],
            outputs: vec![],
            nodes: vec![],
            nets: vec![],
            controller: ControllerFsm {
                states: vec!["S0".into()],
                reset: "S0".into(),
                transitions: vec![Transition {
                    from: "S0".into(),
                    cond: Condition::Always,
                    to: "S0".into(),
                }],
                control_words: BTreeMap::new(),
            },
            key_width: 0,
            dlockout: None,
        };
        for p in ["a", "b"] {
            d.add_node(
                p.to_string(),
                p.to_string(),
                NodeKind::Input {
                    port: p.to_string(),
                    width: 8,
                },
            );
        }
        for (id, delay, ins) in units {
            d.add_node(
                id.to_string(),
                id.to_string(),
                NodeKind::FunctionalUnit {
                    op: FuOp::Add,
                    width: 8,
                    delay_ns: *delay,
                    inputs: ins.iter().map(|s| s.to_string()).collect(),
                },
            );
        }
        for (k, c) in capture.iter().enumerate() {
            d.add_node(
                format!("r{k}"),
                format!("r{k}_q"),
                NodeKind::Register {
                    width: 8,
                    input: c.to_string(),
                    enable: "en".into(),
                },
            );
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::test_graphs::comb_design;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chain_of_two_units() {
        let d = comb_design(&[("u1", 3.0, &["a", "a"]), ("u2", 3.0, &["u1", "u1"])], &["u2"], 10.0);
        let s = compute_slack(&d).unwrap();
        for net in ["a", "u1", "u2"] {
            assert!((s.get(net).unwrap() - 4.0).abs() < EPS, "{net}");
        }
        assert!((s.critical_path_ns - 6.0).abs() < EPS);
    }

    #[test]
    fn single_unit_at_clock_period_has_zero_slack() {
        let d = comb_design(&[("u", 10.0, &["a", "b"])], &["u"], 10.0);
        let s = compute_slack(&d).unwrap();
        assert!(s.get("u").unwrap().abs() < EPS);
        assert!(s.get("a").unwrap().abs() < EPS);
    }

    #[test]
    fn parallel_branches() {
        let d = comb_design(
            &[
                ("short", 2.0, &["a", "a"]),
                ("long", 8.0, &["b", "b"]),
                ("join", 1.0, &["short", "long"]),
            ],
            &["join"],
            10.0,
        );
        let s = compute_slack(&d).unwrap();
        let diff = s.get("short").unwrap() - s.get("long").unwrap();
        assert!((diff - 6.0).abs() < EPS);
        assert!((s.get("long").unwrap() - 1.0).abs() < EPS);
        assert!(s.get("join").unwrap() - 1.0 < EPS);
    }

    #[test]
    fn cycle_is_reported_with_its_nets() {
        let d = comb_design(&[("x", 1.0, &["a", "y"]), ("y", 1.0, &["x", "b"])], &["y"], 10.0);
        match compute_slack(&d) {
            Err(Error::CombinationalCycle(nets)) => {
                let mut nets = nets;
                nets.sort();
                assert_eq!(nets, vec!["x".to_string(), "y".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    /// Enumerates every source-to-sink path explicitly.
    fn brute_force_slack(units: &[(String, f64, Vec<String>)], clock: f64) -> BTreeMap<String, f64> {
        let mut paths: Vec<(Vec<String>, f64)> = Vec::new();
        fn extend(
            units: &[(String, f64, Vec<String>)],
            path: &mut Vec<String>,
            len: f64,
            out: &mut Vec<(Vec<String>, f64)>,
        ) {
            let last = path.last().unwrap().clone();
            let mut any = false;
            for (id, delay, ins) in units {
                if ins.contains(&last) {
                    any = true;
                    path.push(id.clone());
                    extend(units, path, len + delay, out);
                    path.pop();
                }
            }
            if !any {
                out.push((path.clone(), len));
            }
        }
        for src in ["a", "b"] {
            extend(units, &mut vec![src.to_string()], 0.0, &mut paths);
        }
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for (p, len) in &paths {
            for n in p {
                let e = best.entry(n.clone()).or_insert(0.0);
                *e = e.max(*len);
            }
        }
        best.into_iter().map(|(k, v)| (k, clock - v)).collect()
    }

    fn random_dag() -> impl Strategy<Value = Vec<(String, f64, Vec<String>)>> {
        (1usize..=10).prop_flat_map(|n| {
            proptest::collection::vec((1u32..=9, any::<u64>(), any::<u64>()), n).prop_map(|specs| {
                let mut units: Vec<(String, f64, Vec<String>)> = Vec::new();
                for (i, (delay, x, y)) in specs.into_iter().enumerate() {
                    let avail = i + 2;
                    let name = |k: u64| {
                        let k = (k % avail as u64) as usize;
                        match k {
                            0 => "a".to_string(),
                            1 => "b".to_string(),
                            j => format!("u{}", j - 2),
                        }
                    };
                    units.push((format!("u{i}"), delay as f64 * 0.5, vec![name(x), name(y)]));
                }
                units
            })
        })
    }

    proptest! {
        #[test]
        fn slack_matches_path_enumeration(units in random_dag()) {
            let unit_refs: Vec<(&str, f64, Vec<&str>)> = units
                .iter()
                .map(|(id, d, ins)| (id.as_str(), *d, ins.iter().map(|s| s.as_str()).collect()))
                .collect();
            let spec: Vec<(&str, f64, &[&str])> =
                unit_refs.iter().map(|(id, d, ins)| (*id, *d, ins.as_slice())).collect();
            // Only sink units are captured; interior ones feed other units.
            let sinks: Vec<&str> = units
                .iter()
                .filter(|(id, _, _)| !units.iter().any(|(_, _, ins)| ins.contains(id)))
                .map(|(id, _, _)| id.as_str())
                .collect();
            let d = comb_design(&spec, &sinks, 50.0);
            let got = compute_slack(&d).unwrap();
            let want = brute_force_slack(&units, 50.0);
            for (net, s) in want {
                prop_assert!((got.get(&net).unwrap() - s).abs() < 1e-9, "{} {} {}", net, got.get(&net).unwrap(), s);
            }
        }
    }
}

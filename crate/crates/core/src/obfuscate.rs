//! Key-controlled MUX insertion and key masking.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::KeyBits;
use crate::design::{
    compute_slack, validate_design, Design, DelayModel, FuOp, MuxSelect, NetId, NodeKind, TimingGraph,
};
use crate::error::{Error, Result};

/// Tolerance for slack comparisons (matches the timing module).
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "seed")]
pub enum SelectionPolicy {
    /// Largest critical margin first, ties broken by net id.
    MaxSlack,
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscationPoint {
    pub point_id: usize,
    pub host_net: NetId,
    pub mux_node: String,
    pub key_bit_index: usize,
    /// Key bit value selecting the original operand.
    pub reference_bit: bool,
    pub decoy_net: NetId,
    pub masked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_bit: Option<bool>,
}

/// Designer-side secret: the correct key, the mask and the point table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySpec {
    pub correct_key: KeyBits,
    pub mask_vector: KeyBits,
    pub points: Vec<ObfuscationPoint>,
}

impl KeySpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("key spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn is_masked(&self) -> bool {
        self.points.iter().any(|p| p.masked)
    }
}

fn host_kind_ok(kind: &NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::Input { .. }
            | NodeKind::Register { .. }
            | NodeKind::FunctionalUnit { .. }
            | NodeKind::Mux {
                select: MuxSelect::Control(_),
                ..
            }
    )
}

/// Nets in the transitive fan-in of a primary output.
fn observable_nets(d: &Design) -> HashSet<String> {
    let mut seen = HashSet::new();
    let mut stack: Vec<String> = d.outputs.iter().map(|o| o.net.clone()).collect();
    while let Some(n) = stack.pop() {
        if !seen.insert(n.clone()) {
            continue;
        }
        if let Some(node) = d.net(&n).and_then(|net| d.node(&net.driver)) {
            stack.extend(node.kind.input_nets().into_iter().cloned());
        }
    }
    seen
}

fn candidate_nets(d: &Design) -> Vec<String> {
    let observable = observable_nets(d);
    d.nets
        .iter()
        .filter(|n| observable.contains(&n.id))
        .filter(|n| d.node(&n.driver).is_some_and(|x| host_kind_ok(&x.kind)))
        .filter(|n| {
            d.nets.iter().any(|o| {
                o.id != n.id && o.width == n.width && d.node(&o.driver).is_some_and(|x| host_kind_ok(&x.kind))
            })
        })
        .map(|n| n.id.clone())
        .collect()
}

/// Cuts `host` and routes every reader through a new MUX output net. Key
/// MUXes that use `host` as their decoy keep reading the raw net.
fn rewire_readers(d: &mut Design, host: &str, new_net: &str, skip_node: &str) {
    let is_key_mux = |k: &NodeKind| matches!(k, NodeKind::Mux { select: MuxSelect::Net(_), .. });
    for node in d.nodes.iter_mut().filter(|n| n.id != skip_node && !is_key_mux(&n.kind)) {
        for input in node.kind.input_nets_mut() {
            if input == host {
                *input = new_net.to_string();
            }
        }
    }
    for o in d.outputs.iter_mut().filter(|o| o.net == host) {
        o.net = new_net.to_string();
    }
}

fn unused_id(d: &Design, id: String) -> String {
    if d.node(&id).is_none() && d.net(&id).is_none() {
        id
    } else {
        d.fresh_id(&format!("{id}_"))
    }
}

/// Picks `m` nets whose critical margin can absorb a key MUX plus a mask
/// XOR without lengthening the critical path. After every pick the MUX is
/// inserted virtually so later picks see its delay.
pub fn select_points(d: &Design, m: usize, policy: SelectionPolicy) -> Result<Vec<NetId>> {
    select_points_with(d, m, policy, DelayModel::default())
}

pub fn select_points_with(
    d: &Design,
    m: usize,
    policy: SelectionPolicy,
    delays: DelayModel,
) -> Result<Vec<NetId>> {
    let budget = delays.mux_ns + delays.xor_ns;
    let candidates = candidate_nets(d);
    let eligible = |work: &Design, picked: &[String]| -> Result<Vec<(String, f64)>> {
        let slack = compute_slack(work)?;
        Ok(candidates
            .iter()
            .filter(|c| !picked.contains(c))
            .filter_map(|c| slack.critical_margin(c).map(|s| (c.clone(), s)))
            .filter(|(_, s)| *s + EPS >= budget)
            .collect())
    };
    let initial = eligible(d, &[])?;
    if initial.len() < m {
        return Err(Error::InsufficientPoints {
            requested: m,
            qualifying: initial.len(),
        });
    }
    let mut order: Vec<String> = Vec::new();
    if let SelectionPolicy::Random(seed) = policy {
        let mut ids: Vec<String> = initial.iter().map(|(c, _)| c.clone()).collect();
        ids.sort();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order = ids;
    }

    let mut work = d.clone();
    let mut picked: Vec<String> = Vec::new();
    while picked.len() < m {
        let mut now = eligible(&work, &picked)?;
        let next = match policy {
            SelectionPolicy::MaxSlack => {
                now.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                // Treat margins within EPS as equal so the id decides.
                let best = now.first().map(|x| x.1);
                now.into_iter()
                    .filter(|x| best.is_some_and(|b| b - x.1 <= EPS))
                    .map(|x| x.0)
                    .min()
            }
            SelectionPolicy::Random(_) => {
                let ok: HashSet<String> = now.into_iter().map(|x| x.0).collect();
                let pos = order.iter().position(|c| ok.contains(c));
                pos.map(|p| order.remove(p))
            }
        };
        let Some(host) = next else {
            return Err(Error::InsufficientPoints {
                requested: m,
                qualifying: picked.len(),
            });
        };
        let width = work.net(&host).expect("candidate exists").width;
        let probe = work.fresh_id("probe");
        let out = work.add_node(
            probe.clone(),
            probe.clone(),
            NodeKind::Mux {
                width,
                delay_ns: budget,
                inputs: vec![host.clone(), host.clone()],
                select: MuxSelect::Control("probe".into()),
            },
        );
        rewire_readers(&mut work, &host, &out, &probe);
        picked.push(host);
    }
    Ok(picked)
}

/// Inserts one 2-input key MUX per host net. The decoy operand is another
/// existing net of equal width that is not in the host's combinational
/// fan-out and whose path through the MUX fits the original critical path.
/// Returns the obfuscated design and its key spec (point table included).
pub fn insert_key_muxes(d: &Design, nets: &[NetId], key_seed: u64) -> Result<(Design, KeySpec)> {
    insert_key_muxes_with(d, nets, key_seed, DelayModel::default())
}

pub fn insert_key_muxes_with(
    d: &Design,
    nets: &[NetId],
    key_seed: u64,
    delays: DelayModel,
) -> Result<(Design, KeySpec)> {
    if d.key_width != 0 {
        return Err(Error::Precondition("design already carries key inputs".into()));
    }
    let unique: BTreeSet<&NetId> = nets.iter().collect();
    if unique.len() != nets.len() {
        return Err(Error::Precondition("obfuscation nets must be distinct".into()));
    }
    let m = nets.len();
    let mut rng = ChaCha8Rng::seed_from_u64(key_seed);
    let mut bit_index: Vec<usize> = (0..m).collect();
    bit_index.shuffle(&mut rng);
    let reference: Vec<bool> = (0..m).map(|_| rng.random()).collect();

    let original_crit = TimingGraph::new(d)?.critical_path_ns();
    let original_nets: Vec<String> = d.nets.iter().map(|n| n.id.clone()).collect();
    let mut out = d.clone();
    out.key_width = m;
    let mut points = Vec::with_capacity(m);

    for (i, host) in nets.iter().enumerate() {
        let host_net = out
            .net(host)
            .ok_or_else(|| Error::Precondition(format!("unknown net {host}")))?
            .clone();
        let g = TimingGraph::new(&out)?;
        let hi = g.net_index[host];
        let mut decoys: Vec<&String> = original_nets
            .iter()
            .filter(|c| *c != host)
            .filter(|c| {
                let net = out.net(c).expect("original net");
                net.width == host_net.width && out.node(&net.driver).is_some_and(|x| host_kind_ok(&x.kind))
            })
            .filter(|c| {
                let ci = g.net_index[c.as_str()];
                !g.comb_reachable(hi, ci) && g.arrival[ci] + delays.mux_ns <= original_crit + EPS
            })
            .collect();
        decoys.shuffle(&mut rng);

        let key_node = unused_id(&out, format!("key{}", bit_index[i]));
        let key_net = out.add_node(key_node.clone(), key_node, NodeKind::KeyBit { index: bit_index[i] });
        let mux_id = out.fresh_id("km");
        let mux_net = format!("{mux_id}_o");

        let mut placed = None;
        for decoy in decoys {
            let inputs = if reference[i] {
                vec![decoy.clone(), host.clone()]
            } else {
                vec![host.clone(), decoy.clone()]
            };
            let mut trial = out.clone();
            trial.add_node(
                mux_id.clone(),
                mux_net.clone(),
                NodeKind::Mux {
                    width: host_net.width,
                    delay_ns: delays.mux_ns,
                    inputs,
                    select: MuxSelect::Net(key_net.clone()),
                },
            );
            rewire_readers(&mut trial, host, &mux_net, &mux_id);
            match TimingGraph::new(&trial) {
                Ok(tg) if tg.critical_path_ns() <= original_crit + EPS => {
                    placed = Some((trial, decoy.clone()));
                    break;
                }
                _ => {}
            }
        }
        let Some((trial, decoy)) = placed else {
            return Err(Error::NoDecoy(host.clone()));
        };
        out = trial;
        points.push(ObfuscationPoint {
            point_id: i,
            host_net: host.clone(),
            mux_node: mux_id,
            key_bit_index: bit_index[i],
            reference_bit: reference[i],
            decoy_net: decoy,
            masked: false,
            mask_bit: None,
        });
    }

    let mut correct_key = KeyBits::zeros(m);
    for p in &points {
        correct_key.set(p.key_bit_index, p.reference_bit);
    }
    let report = validate_design(&out);
    if !report.is_empty() {
        return Err(Error::Semantic(report));
    }
    Ok((
        out,
        KeySpec {
            correct_key,
            mask_vector: KeyBits::zeros(m),
            points,
        },
    ))
}

/// Replaces each MUX selector `k_i` by `k_i XOR mask_i` with a secret mask
/// bit and moves the original operand to input 0, so the correct key equals
/// the mask vector. Must run before comparators are attached.
pub fn apply_masking(d: &Design, spec: &KeySpec, mask_seed: u64) -> Result<(Design, KeySpec)> {
    apply_masking_with(d, spec, mask_seed, DelayModel::default())
}

pub fn apply_masking_with(
    d: &Design,
    spec: &KeySpec,
    mask_seed: u64,
    delays: DelayModel,
) -> Result<(Design, KeySpec)> {
    if spec.is_masked() || d.count_nodes(|k| matches!(k, NodeKind::MaskBit { .. })) > 0 {
        return Err(Error::AlreadyMasked);
    }
    if d.count_nodes(|k| matches!(k, NodeKind::EduCell { .. })) > 0 {
        return Err(Error::Precondition("masking must precede the error detection unit".into()));
    }
    if d.count_nodes(|k| matches!(k, NodeKind::Comparator { .. })) > 0 {
        return Err(Error::Precondition("masking must precede comparator annotation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let mut out = d.clone();
    let mut new_spec = spec.clone();
    let mut mask = KeyBits::zeros(spec.correct_key.len());
    for p in new_spec.points.iter_mut() {
        let bit: bool = rng.random();
        mask.set(p.key_bit_index, bit);
        let mid = unused_id(&out, format!("mask{}", p.key_bit_index));
        let mask_net = out.add_node(
            mid.clone(),
            mid,
            NodeKind::MaskBit {
                index: p.key_bit_index,
                value: bit,
            },
        );
        let mux_pos = out
            .nodes
            .iter()
            .position(|n| n.id == p.mux_node)
            .ok_or_else(|| Error::Precondition(format!("missing key mux {}", p.mux_node)))?;
        let key_net = match &out.nodes[mux_pos].kind {
            NodeKind::Mux {
                select: MuxSelect::Net(s),
                ..
            } => s.clone(),
            _ => return Err(Error::Precondition(format!("{} is not a key mux", p.mux_node))),
        };
        let xid = out.fresh_id("kx");
        let sel = out.add_node(
            xid.clone(),
            xid,
            NodeKind::FunctionalUnit {
                op: FuOp::Xor,
                width: 1,
                delay_ns: delays.xor_ns,
                inputs: vec![key_net, mask_net],
            },
        );
        if let NodeKind::Mux { inputs, select, .. } = &mut out.nodes[mux_pos].kind {
            if p.reference_bit {
                inputs.swap(0, 1);
            }
            *select = MuxSelect::Net(sel);
        }
        p.masked = true;
        p.mask_bit = Some(bit);
        p.reference_bit = bit;
    }
    new_spec.correct_key = mask.clone();
    new_spec.mask_vector = mask;
    let report = validate_design(&out);
    if !report.is_empty() {
        return Err(Error::Semantic(report));
    }
    Ok((out, new_spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::timing_test_graphs::comb_design;
    use crate::design::{generate_benchmark, longest_path_ns, BenchmarkKind};
    use crate::sim::{functional_output, InputVector};
    use proptest::prelude::*;

    /// Ten register-to-register paths of different lengths (one net each).
    fn ten_paths() -> Design {
        let units: Vec<(String, f64)> = (0..10).map(|i| (format!("u{i}"), 1.0 + i as f64 * 0.5)).collect();
        let spec: Vec<(&str, f64, &[&str])> = units.iter().map(|(n, dl)| (n.as_str(), *dl, &["a", "b"][..])).collect();
        let mut d = comb_design(&spec, &[], 10.0);
        for (n, _) in &units {
            d.outputs.push(crate::design::OutputPort {
                name: format!("y_{n}"),
                width: 8,
                net: n.clone(),
            });
        }
        d
    }

    #[test]
    fn max_slack_matches_exhaustive_order() {
        let d = ten_paths();
        let got = select_points(&d, 4, SelectionPolicy::MaxSlack).unwrap();
        // Exhaustive oracle: margin of each candidate computed directly.
        let (crit, _) = longest_path_ns(&d).unwrap();
        let slack = compute_slack(&d).unwrap();
        let mut all: Vec<(String, f64)> = candidate_nets(&d)
            .into_iter()
            .map(|n| {
                let m = crit - (d.clock_period_ns - slack.get(&n).unwrap());
                (n, m)
            })
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut want: Vec<String> = all.into_iter().take(4).map(|x| x.0).collect();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        want.sort();
        assert_eq!(got_sorted, want);
    }

    #[test]
    fn insufficient_points_reports_count() {
        let d = ten_paths();
        match select_points(&d, 500, SelectionPolicy::MaxSlack) {
            Err(Error::InsufficientPoints { requested: 500, qualifying }) => assert!(qualifying > 0),
            other => panic!("{other:?}"),
        }
    }

    fn random_input(d: &Design, rng: &mut ChaCha8Rng) -> InputVector {
        d.inputs.iter().map(|p| (p.name.clone(), rng.random::<u64>() & 0xff)).collect()
    }

    #[test]
    fn correct_key_preserves_function_and_timing() {
        let d = generate_benchmark(BenchmarkKind::Fir, 16, 1).unwrap();
        let nets = select_points(&d, 16, SelectionPolicy::MaxSlack).unwrap();
        let (o, spec) = insert_key_muxes(&d, &nets, 7).unwrap();
        assert_eq!(o.key_width, 16);
        assert!(longest_path_ns(&o).unwrap().0 <= longest_path_ns(&d).unwrap().0 + EPS);
        let (mo, mspec) = apply_masking(&o, &spec, 3).unwrap();
        assert_eq!(mspec.correct_key, mspec.mask_vector);
        assert!(longest_path_ns(&mo).unwrap().0 <= longest_path_ns(&d).unwrap().0 + EPS);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = random_input(&d, &mut rng);
            let want = functional_output(&d, &KeyBits::zeros(0), &x).unwrap();
            assert_eq!(functional_output(&o, &spec.correct_key, &x).unwrap(), want);
            assert_eq!(functional_output(&mo, &mspec.correct_key, &x).unwrap(), want);
        }
        assert!(matches!(apply_masking(&mo, &mspec, 1), Err(Error::AlreadyMasked)));
    }

    #[test]
    fn wrong_keys_corrupt_outputs() {
        let d = generate_benchmark(BenchmarkKind::Elliptic, 12, 2).unwrap();
        let nets = select_points(&d, 8, SelectionPolicy::Random(4)).unwrap();
        let (o, spec) = insert_key_muxes(&d, &nets, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inputs: Vec<InputVector> = (0..8).map(|_| random_input(&d, &mut rng)).collect();
        for bit in 0..8 {
            let wrong = spec.correct_key.flipped(bit);
            let differs = inputs.iter().any(|x| {
                functional_output(&o, &wrong, x).unwrap() != functional_output(&d, &KeyBits::zeros(0), x).unwrap()
            });
            assert!(differs, "flipping key bit {bit} is invisible");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn obfuscation_keeps_design_valid(seed in 0u64..1000, m in 1usize..12) {
            let d = generate_benchmark(BenchmarkKind::Lattice, 12, seed).unwrap();
            let nets = select_points(&d, m, SelectionPolicy::Random(seed)).unwrap();
            let (o, spec) = insert_key_muxes(&d, &nets, seed).unwrap();
            prop_assert!(validate_design(&o).is_empty());
            prop_assert_eq!(spec.points.len(), m);
            let idx: BTreeSet<usize> = spec.points.iter().map(|p| p.key_bit_index).collect();
            prop_assert_eq!(idx.len(), m);
            let round = KeySpec::from_json(&spec.to_json()).unwrap();
            prop_assert_eq!(round, spec);
        }
    }
}

//! Truth tables of masked obfuscation and of the error detection unit.

use std::collections::BTreeMap;

use dlockout_core::design::{generate_benchmark, BenchmarkKind, Design, MuxSelect, NodeKind};
use dlockout_core::dlockout::{harden, HardenOptions, LockoutState};
use dlockout_core::obfuscate::{insert_key_muxes, select_points, KeySpec, SelectionPolicy};
use dlockout_core::sim::{InputVector, LockoutMode, SimOptions, Simulator, StuckAt};
use dlockout_core::KeyBits;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build(seed: u64, opts: HardenOptions) -> (Design, KeySpec) {
    let d = generate_benchmark(BenchmarkKind::Fir, 8, seed).unwrap();
    let nets = select_points(&d, 8, SelectionPolicy::MaxSlack).unwrap();
    let (o, spec) = insert_key_muxes(&d, &nets, seed).unwrap();
    harden(&o, &spec, opts).unwrap()
}

fn inputs(d: &Design, seed: u64, n: usize) -> Vec<InputVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            d.inputs
                .iter()
                .map(|p| (p.name.clone(), rng.random::<u64>() & ((1u64 << p.width) - 1)))
                .collect()
        })
        .collect()
}

#[derive(Debug, PartialEq)]
enum Selects {
    Host,
    Decoy,
}

/// Observed (mux behaviour, selector xor output, comparator output) for
/// point `i` with key bit `k`.
fn observe(d: &Design, spec: &KeySpec, i: usize, k: bool) -> (Selects, bool, bool) {
    let sim = Simulator::new(d).unwrap();
    let p = &spec.points[i];
    let mux_net = d.output_net_of(&p.mux_node).unwrap().id.clone();
    let NodeKind::Mux { select: MuxSelect::Net(sel), .. } = &d.node(&p.mux_node).unwrap().kind else {
        panic!("not a key mux");
    };
    let (host, decoy, mux, sel) = (
        sim.net_index(&p.host_net).unwrap(),
        sim.net_index(&p.decoy_net).unwrap(),
        sim.net_index(&mux_net).unwrap(),
        sim.net_index(sel).unwrap(),
    );
    let cmp = sim.comparator_nets()[i];
    let mut key = spec.correct_key.clone();
    key.set(p.key_bit_index, k);
    let (mut host_ok, mut decoy_ok, mut differ) = (true, true, false);
    let (mut xor, mut c) = (BTreeMap::new(), BTreeMap::new());
    for x in inputs(d, i as u64, 20) {
        sim.run(&key, &[x], d.schedule_length(), sim.fresh_lockout(), &SimOptions::frozen(), |v| {
            host_ok &= v.values[mux] == v.values[host];
            decoy_ok &= v.values[mux] == v.values[decoy];
            differ |= v.values[host] != v.values[decoy];
            xor.insert(v.values[sel], ());
            c.insert(v.values[cmp], ());
            true
        })
        .unwrap();
    }
    assert!(differ, "host and decoy never differ; test inconclusive");
    assert_eq!((xor.len(), c.len()), (1, 1));
    let selects = match (host_ok, decoy_ok) {
        (true, false) => Selects::Host,
        (false, true) => Selects::Decoy,
        other => panic!("mux followed neither operand consistently: {other:?}"),
    };
    (selects, *xor.keys().next().unwrap() == 1, *c.keys().next().unwrap() == 1)
}

#[test]
fn masked_obfuscation_truth_table() {
    let mut seen = [false; 4];
    for seed in 0..4 {
        let (d, spec) = build(seed, HardenOptions { mask_seed: Some(seed + 100), ..Default::default() });
        for i in 0..spec.points.len() {
            let mask = spec.points[i].mask_bit.expect("masked point");
            for k in [false, true] {
                let (selects, xor, cmp) = observe(&d, &spec, i, k);
                let correct = k == mask;
                assert_eq!(selects, if correct { Selects::Host } else { Selects::Decoy });
                assert_eq!(xor, k ^ mask);
                assert_eq!(cmp, !correct);
                seen[(k as usize) << 1 | mask as usize] = true;
            }
        }
    }
    assert_eq!(seen, [true; 4], "every (K, Mask) row exercised");
}

/// (counter increment, EDU output) for a single stuck-at on point `i`'s
/// primary comparator with the key bit right or wrong.
fn edu_row(d: &Design, spec: &KeySpec, i: usize, saf: bool, expected: bool) -> (bool, bool) {
    let sim = Simulator::new(d).unwrap();
    let mut key: KeyBits = spec.correct_key.clone();
    if expected {
        key.set(spec.points[i].key_bit_index, !key.get(spec.points[i].key_bit_index));
    }
    let opts = SimOptions {
        mode: LockoutMode::Enforced,
        faults: vec![StuckAt { net: sim.comparator_nets()[i], value: saf }],
    };
    let before = LockoutState::new(5);
    let mut after = before;
    let x = inputs(d, 1, 1).remove(0);
    let r = sim.pass(&key, &x, &mut after, &opts).unwrap();
    (after.counter > before.counter, r.fault_alarm)
}

#[test]
fn edu_truth_table_under_single_faults() {
    let (d, spec) = build(7, HardenOptions { edu: true, ..Default::default() });
    for i in 0..spec.points.len() {
        // (SAF, expected) -> (lockout, EDU)
        assert_eq!(edu_row(&d, &spec, i, false, false), (false, false));
        assert_eq!(edu_row(&d, &spec, i, false, true), (false, true));
        assert_eq!(edu_row(&d, &spec, i, true, false), (true, true));
        assert_eq!(edu_row(&d, &spec, i, true, true), (true, false));
    }
}

#[test]
fn without_edu_stuck_at_zero_hides_a_wrong_bit() {
    let (d, spec) = build(7, HardenOptions::default());
    assert_eq!(edu_row(&d, &spec, 0, false, true), (false, false));
}

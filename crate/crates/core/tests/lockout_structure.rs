use dlockout_core::design::{generate_benchmark, BenchmarkKind, Design};
use dlockout_core::dlockout::{harden, HardenOptions, LockoutPhase, LockoutState};
use dlockout_core::obfuscate::{insert_key_muxes, select_points, KeySpec, SelectionPolicy};
use dlockout_core::overhead::{overhead_report, StructureCounts};
use dlockout_core::sim::{InputVector, SimOptions, Simulator};
use dlockout_core::KeyBits;
use proptest::prelude::*;

fn obfuscated(kind: BenchmarkKind, m: usize, seed: u64) -> (Design, Design, KeySpec) {
    let d = generate_benchmark(kind, m.max(8), seed).unwrap();
    let nets = select_points(&d, m, SelectionPolicy::MaxSlack).unwrap();
    let (o, spec) = insert_key_muxes(&d, &nets, seed).unwrap();
    (d, o, spec)
}

fn zero_input(d: &Design) -> InputVector {
    d.inputs.iter().map(|p| (p.name.clone(), 3)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn wrong_keys_lock_at_exactly_threshold(
        x in prop::sample::select(vec![1u32, 3, 5]),
        seed in 0u64..1000,
        flips in prop::collection::vec(1u64..256, 5),
    ) {
        let (_, o, spec) = obfuscated(BenchmarkKind::Fir, 8, seed % 7);
        let (h, spec) = harden(&o, &spec, HardenOptions { threshold: x, ..Default::default() }).unwrap();
        let input = zero_input(&h);
        let mut state = LockoutState::new(x);
        for (n, f) in flips.iter().take(x as usize).enumerate() {
            prop_assert!(!state.is_full());
            let wrong = KeyBits::from_u64(spec.correct_key.to_u64().unwrap() ^ f, 8);
            // Each attempt runs in a fresh simulator restored from JSON,
            // standing in for a process restart.
            let sim = Simulator::new(&h).unwrap();
            state = LockoutState::from_json(&state.to_json()).unwrap();
            let r = sim.pass(&wrong, &input, &mut state, &SimOptions::default()).unwrap();
            prop_assert_eq!(state.counter, n as u32 + 1);
            prop_assert_eq!(r.blackhole, state.is_full());
        }
        prop_assert_eq!(state.phase, LockoutPhase::Full);
        let sim = Simulator::new(&h).unwrap();
        let mut reloaded = LockoutState::from_json(&state.to_json()).unwrap();
        let r = sim.pass(&spec.correct_key, &input, &mut reloaded, &SimOptions::default()).unwrap();
        prop_assert!(r.blackhole);
        prop_assert!(r.outputs.values().all(|&v| v == 0));
        prop_assert_eq!(reloaded, state);
    }

    #[test]
    fn correct_key_never_counts(seed in 0u64..1000) {
        let (_, o, spec) = obfuscated(BenchmarkKind::Elliptic, 8, seed % 5);
        let (h, spec) = harden(&o, &spec, HardenOptions::default()).unwrap();
        let sim = Simulator::new(&h).unwrap();
        let mut s = LockoutState::new(5);
        for _ in 0..10 {
            let r = sim.pass(&spec.correct_key, &zero_input(&h), &mut s, &SimOptions::default()).unwrap();
            prop_assert!(!r.blackhole);
        }
        prop_assert_eq!(s.counter, 0);
    }
}

#[test]
fn serialized_design_never_holds_the_key() {
    for k in 0..100u64 {
        let (_, o, spec) = obfuscated(BenchmarkKind::ALL[k as usize % 4], 32, 1000 + k);
        let (h, spec) = harden(&o, &spec, HardenOptions::default()).unwrap();
        let text = h.to_json();
        let key = &spec.correct_key;
        for needle in [key.to_hex(), key.to_hex().to_uppercase(), key.to_bit_string()] {
            assert!(!text.contains(&needle), "key {needle} found in design");
        }
    }
}

#[test]
fn hardening_overhead_counts() {
    let mut nets = Vec::new();
    for m in [8usize, 16, 32] {
        for edu in [false, true] {
            let (_, o, spec) = obfuscated(BenchmarkKind::Fir, m, 2);
            let (h, _) = harden(&o, &spec, HardenOptions { edu, ..Default::default() }).unwrap();
            let r = overhead_report(&o, &h);
            assert_eq!(StructureCounts::of(&o).key_muxes, m);
            assert_eq!(r.added.key_muxes, 0, "hardening adds no key muxes");
            assert_eq!(r.added.comparators, if edu { 2 * m } else { m });
            assert_eq!(r.added.shadow_comparators, if edu { m } else { 0 });
            assert_eq!(r.added.edu_cells, if edu { m } else { 0 });
            assert_eq!((r.added.counters, r.added.checkers, r.added.states), (1, 1, 1));
            if !edu {
                nets.push(StructureCounts::of(&h).nets);
            }
        }
    }
    assert!(nets.windows(2).all(|w| w[0] < w[1]), "{nets:?}");
}

//! Differential power analysis on key-MUX switching.
//!
//! The device runs with the correct key in frozen-counter measurement mode
//! and leaks the Hamming distance of every register and MUX per cycle plus
//! Gaussian noise. For each key bit the attacker simulates its view of the
//! netlist under both hypotheses, correlates the measured power (minus the
//! hypotheses' mean) with their difference, and takes the sign. Guesses for
//! the other bits are refined over a few rounds.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{try_key, AttackReport, BitStat, GoldenSet, Oracle, Strategy};
use crate::bits::KeyBits;
use crate::design::{width_mask, Design, FuOp, MuxSelect, NodeKind};
use crate::error::{Error, Result};
use crate::sim::{gaussian, mix_seed, InputVector, SimOptions, Simulator};

const NOISE_SALT: u64 = 0x6e6f_6973_6500_0001;
const COIN_SALT: u64 = 0x636f_696e_0000_0002;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpaConfig {
    pub traces: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Low input bits per port that switch under attacker control and are
    /// known to the attacker; the remaining bits vary unobserved. `None`
    /// means the full port width.
    pub known_bits: Option<u32>,
    /// Consecutive trace counts a lead must hold to count as disclosed.
    pub window: usize,
    /// Coordinate-descent sweeps per restart.
    pub max_rounds: usize,
    pub restarts: usize,
}

impl DpaConfig {
    pub fn new(traces: usize, noise_sigma: f64, seed: u64) -> Self {
        DpaConfig {
            traces,
            noise_sigma,
            seed,
            known_bits: None,
            window: 10,
            max_rounds: 6,
            restarts: 3,
        }
    }
}

/// Per key bit: `Some(false)` for a directly key-selected MUX, `Some(true)`
/// when the selector is masked, `None` when no MUX uses the bit.
fn classify_bits(d: &Design) -> Vec<Option<bool>> {
    let mut out = vec![None; d.key_width];
    let key_of_net = |net: &str| {
        d.net(net).and_then(|n| d.node(&n.driver)).and_then(|n| match n.kind {
            NodeKind::KeyBit { index } => Some(index),
            _ => None,
        })
    };
    for n in &d.nodes {
        let NodeKind::Mux {
            select: MuxSelect::Net(sel),
            ..
        } = &n.kind
        else {
            continue;
        };
        if let Some(i) = key_of_net(sel) {
            out[i] = Some(false);
            continue;
        }
        if let Some(NodeKind::FunctionalUnit { op: FuOp::Xor, inputs, .. }) =
            d.net(sel).and_then(|x| d.node(&x.driver)).map(|x| &x.kind)
        {
            for i in inputs.iter().filter_map(|x| key_of_net(x)) {
                out[i] = Some(true);
            }
        }
    }
    out
}

/// The attacker's copy of the netlist: mask values are not observable.
fn redact(d: &Design) -> Design {
    let mut v = d.clone();
    for n in &mut v.nodes {
        if let NodeKind::MaskBit { value, .. } = &mut n.kind {
            *value = false;
        }
    }
    v
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.yy += y * y;
        self.xy += x * y;
    }

    /// Covariance scaled by `n^2`; only the sign is used.
    fn covariance(&self) -> f64 {
        self.n * self.xy - self.x * self.y
    }

    fn pearson(&self) -> f64 {
        let vx = self.n * self.xx - self.x * self.x;
        let vy = self.n * self.yy - self.y * self.y;
        if vx <= 1e-12 || vy <= 1e-12 {
            return 0.0;
        }
        (self.n * self.xy - self.x * self.y) / (vx * vy).sqrt()
    }
}

fn significant(r: f64, samples: f64) -> bool {
    samples > 0.0 && r.abs() >= 3.0 / samples.sqrt()
}

/// Per-trace differential predictions for one round.
fn predict(
    attacker: &Simulator,
    known: &[InputVector],
    guess: &KeyBits,
    bits: &[usize],
    cycles: usize,
    observed: u64,
) -> Result<Vec<Vec<(Vec<f64>, Vec<f64>)>>> {
    let frozen = SimOptions::frozen();
    known
        .par_iter()
        .map(|x| {
            bits.iter()
                .map(|&i| {
                    let mut g = guess.clone();
                    g.set(i, true);
                    let lockout = attacker.fresh_lockout();
                    let t1 = attacker.toggle_profile_masked(&g, std::slice::from_ref(x), cycles, lockout, &frozen, observed)?;
                    g.set(i, false);
                    let t0 = attacker.toggle_profile_masked(&g, std::slice::from_ref(x), cycles, lockout, &frozen, observed)?;
                    let diff = t1.iter().zip(&t0).map(|(a, b)| *a as f64 - *b as f64).collect();
                    let mid = t1.iter().zip(&t0).map(|(a, b)| (*a as f64 + *b as f64) / 2.0).collect();
                    Ok((diff, mid))
                })
                .collect()
        })
        .collect()
}

fn coin(seed: u64, bit: usize) -> bool {
    ChaCha8Rng::seed_from_u64(mix_seed(seed ^ COIN_SALT, bit as u64)).random()
}

/// Runs the attack. `device_key` is programmed into the simulated device
/// and doubles as the evaluation truth for empirical MTD; the attacker
/// side only ever sees power samples and its own hypotheses.
pub fn dpa_attack(d: &Design, device_key: &KeyBits, cfg: &DpaConfig) -> Result<AttackReport> {
    let start = Instant::now();
    if cfg.traces < 1 {
        return Err(Error::Range {
            param: "traces",
            reason: "must be at least 1".into(),
        });
    }
    let device = Simulator::new(d)?;
    let view = redact(d);
    let attacker = Simulator::new(&view)?;
    let cycles = d.schedule_length();
    let classes = classify_bits(d);
    let bits: Vec<usize> = (0..d.key_width).filter(|&i| classes[i] == Some(false)).collect();

    let observed = match cfg.known_bits {
        None => u64::MAX,
        Some(0) => 0,
        Some(p) => width_mask(p.min(64)),
    };
    // Inputs: full values on the device, known low bits for the attacker.
    let (full, known): (Vec<InputVector>, Vec<InputVector>) = (0..cfg.traces)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, t as u64));
            let mut f = InputVector::new();
            let mut k = InputVector::new();
            for p in &d.inputs {
                let v = rng.random::<u64>() & width_mask(p.width);
                f.insert(p.name.clone(), v);
                k.insert(p.name.clone(), v & observed);
            }
            (f, k)
        })
        .unzip();

    let frozen = SimOptions::frozen();
    let power: Vec<Vec<f64>> = full
        .par_iter()
        .enumerate()
        .map(|(t, x)| {
            let prof = device.toggle_profile(
                device_key,
                std::slice::from_ref(x),
                cycles,
                device.fresh_lockout(),
                &frozen,
            )?;
            Ok(prof
                .iter()
                .enumerate()
                .map(|(c, h)| *h as f64 + gaussian(cfg.noise_sigma, mix_seed(cfg.seed ^ NOISE_SALT, t as u64), c as u64))
                .collect())
        })
        .collect::<Result<_>>()?;

    // Sequential coordinate descent on the correlation between measured
    // power and the modelled toggles of the observed bits. Unobserved bits
    // scale and offset the leakage, so the fit is affine rather than exact.
    // A few seeded restarts avoid poor local optima.
    let profiles = |g: &KeyBits| -> Result<Vec<Vec<f64>>> {
        known
            .par_iter()
            .map(|x| {
                let t = attacker.toggle_profile_masked(g, std::slice::from_ref(x), cycles, attacker.fresh_lockout(), &frozen, observed)?;
                Ok(t.into_iter().map(f64::from).collect())
            })
            .collect()
    };
    let fit = |model: &[Vec<f64>]| -> Moments {
        let mut m = Moments::default();
        for (y, p) in power.iter().zip(model) {
            for c in 0..y.len() {
                m.add(p[c], y[c]);
            }
        }
        m
    };
    let mut best: Option<(f64, KeyBits)> = None;
    let mut keys_tried = 0;
    for restart in 0..cfg.restarts.max(1) {
        let mut guess = KeyBits::zeros(d.key_width);
        for i in 0..d.key_width {
            guess.set(i, coin(mix_seed(cfg.seed, restart as u64), i));
        }
        let mut score = fit(&profiles(&guess)?).pearson();
        keys_tried += 1;
        for _ in 0..cfg.max_rounds.max(1) {
            let mut changed = false;
            for &i in &bits {
                let mut g = guess.clone();
                g.set(i, !g.get(i));
                keys_tried += 1;
                let s = fit(&profiles(&g)?).pearson();
                if s > score {
                    guess = g;
                    score = s;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, guess));
        }
    }
    let mut guess = best.expect("at least one restart").1;
    for i in (0..d.key_width).filter(|i| !bits.contains(i)) {
        guess.set(i, coin(cfg.seed, i));
    }
    let pred = predict(&attacker, &known, &guess, &bits, cycles, observed)?;
    // Leakage gain of the observed model, used to form residuals.
    let gain = {
        let m = fit(&profiles(&guess)?);
        let v = m.n * m.xx - m.x * m.x;
        if v > 1e-12 { m.covariance() / v } else { 1.0 }
    };

    // Running statistics over the trace count for the final predictions.
    let mut stats: Vec<BitStat> = Vec::with_capacity(d.key_width);
    let window = cfg.window.max(1);
    for i in 0..d.key_width {
        let truth = device_key.get(i);
        let Some(b) = bits.iter().position(|&x| x == i) else {
            stats.push(BitStat {
                key_bit: i,
                masked: classes[i] == Some(true),
                correlation: 0.0,
                guess: guess.get(i),
                stable: false,
                empirical_mtd: None,
                correct: guess.get(i) == truth,
            });
            continue;
        };
        let mut m = Moments::default();
        let mut leads = Vec::with_capacity(cfg.traces);
        let mut signs = Vec::with_capacity(cfg.traces);
        for (y, p) in power.iter().zip(&pred) {
            let (diff, mid) = &p[b];
            for c in 0..y.len() {
                m.add(diff[c], y[c] - gain * mid[c]);
            }
            let r = m.pearson();
            let sig = significant(r, m.n);
            leads.push(sig && (r > 0.0) == truth);
            signs.push(if sig { r.signum() } else { 0.0 });
        }
        let r = m.pearson();
        let empirical_mtd = (0..cfg.traces)
            .find(|&n| n + window <= cfg.traces && leads[n..n + window].iter().all(|&l| l))
            .map(|n| n + 1);
        let tail = &signs[cfg.traces.saturating_sub(window)..];
        let stable = tail.len() == window && r != 0.0 && tail.iter().all(|&s| s == r.signum());
        stats.push(BitStat {
            key_bit: i,
            masked: false,
            correlation: r,
            guess: guess.get(i),
            stable,
            empirical_mtd,
            correct: guess.get(i) == truth,
        });
    }

    let mut report = AttackReport {
        strategy: Strategy::Dpa,
        attempts_used: 0,
        keys_tried,
        oracle_queries: 0,
        recovered_key: None,
        locked_out: false,
        seed: cfg.seed,
        bits: stats,
        fault: None,
        wall_clock: Duration::ZERO,
    };
    if d.key_width > 0 && report.bits.iter().all(|b| b.stable) {
        let golden = GoldenSet::from_design(d, device_key, cfg.seed)?;
        let mut oracle = Oracle::new(d)?;
        let (ok, q, _) = try_key(&mut oracle, &golden, &guess)?;
        report.attempts_used = 1;
        report.oracle_queries = q;
        report.locked_out = oracle.is_locked_out();
        if ok {
            report.recovered_key = Some(guess);
        }
    }
    report.wall_clock = start.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::tests::hardened;
    use crate::dlockout::{harden, HardenOptions};
    use crate::design::{generate_benchmark, BenchmarkKind};
    use crate::obfuscate::{insert_key_muxes, select_points, SelectionPolicy};

    #[test]
    fn noiseless_unmasked_recovers_quickly() {
        let (_, h, spec) = hardened(8, 5, 3);
        let r = dpa_attack(&h, &spec.correct_key, &DpaConfig::new(200, 0.0, 1)).unwrap();
        assert_eq!(r.recovered_key, Some(spec.correct_key.clone()), "{}", r.to_json());
        assert!(r.bits.iter().all(|b| b.empirical_mtd.is_some_and(|m| m <= 60)), "{}", r.to_json());
    }

    #[test]
    fn masked_design_leaks_nothing() {
        let d = generate_benchmark(BenchmarkKind::Fir, 8, 3).unwrap();
        let nets = select_points(&d, 8, SelectionPolicy::MaxSlack).unwrap();
        let (o, spec) = insert_key_muxes(&d, &nets, 3).unwrap();
        let (h, spec) = harden(&o, &spec, HardenOptions { mask_seed: Some(5), ..Default::default() }).unwrap();
        let r = dpa_attack(&h, &spec.correct_key, &DpaConfig::new(300, 1.0, 2)).unwrap();
        assert!(r.bits.iter().all(|b| b.masked && b.correlation.abs() < 0.1));
        assert_eq!(r.recovered_key, None);
    }

    #[test]
    fn overwhelming_noise_gives_no_stable_ranking() {
        let (_, h, spec) = hardened(8, 5, 3);
        let r = dpa_attack(&h, &spec.correct_key, &DpaConfig::new(100, 1e6, 1)).unwrap();
        assert_eq!(r.recovered_key, None);
        assert!(r.bits.iter().any(|b| !b.stable));
    }

    #[test]
    fn reports_are_deterministic() {
        let (_, h, spec) = hardened(8, 5, 3);
        let a = dpa_attack(&h, &spec.correct_key, &DpaConfig::new(80, 1.0, 9)).unwrap();
        let b = dpa_attack(&h, &spec.correct_key, &DpaConfig::new(80, 1.0, 9)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}

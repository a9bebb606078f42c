//! Synthetic datapath benchmarks shaped after common HLS test kernels.
//!
//! Each kernel is built as a dataflow graph of two-operand operations,
//! list-scheduled onto `N - 1` compute states (state `S0` loads the primary
//! inputs) with operation chaining bounded by a fraction of the clock. Every
//! operation result is registered in its control step.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::obfuscate::{select_points, SelectionPolicy};
use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    Fir,
    Elliptic,
    Lattice,
    FftLike,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::Fir,
        BenchmarkKind::Elliptic,
        BenchmarkKind::Lattice,
        BenchmarkKind::FftLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Fir => "fir",
            BenchmarkKind::Elliptic => "elliptic",
            BenchmarkKind::Lattice => "lattice",
            BenchmarkKind::FftLike => "fft-like",
        }
    }
}

impl std::str::FromStr for BenchmarkKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown benchmark kind {s:?} (fir, elliptic, lattice, fft-like)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub kind: BenchmarkKind,
    /// Minimum number of MUX-insertable nets.
    pub size: usize,
    pub seed: u64,
    /// Requested number of controller states N (at least 4). The schedule
    /// may need more states than requested.
    pub steps: usize,
    /// Data width of every datapath net.
    pub width: u32,
    pub clock_period_ns: f64,
}

impl BenchmarkConfig {
    pub fn new(kind: BenchmarkKind, size: usize, seed: u64) -> Self {
        BenchmarkConfig {
            kind,
            size,
            seed,
            steps: 5,
            width: 8,
            clock_period_ns: 10.0,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_width(mut self, width: u32) -> Self {
        self.width = width;
        self
    }

    pub fn generate(&self) -> Result<Design> {
        const MIN_SIZE: usize = 4;
        if self.size < MIN_SIZE {
            return Err(Error::SizeTooSmall {
                size: self.size,
                min: MIN_SIZE,
            });
        }
        if !(1..=MAX_WIDTH).contains(&self.width) || self.steps < 4 {
            return Err(Error::Precondition(
                "benchmark needs width in 1..=64 and at least 4 states".into(),
            ));
        }
        // Grow the kernel until enough nets can host a key MUX.
        let mut ops = self.size;
        for _ in 0..16 {
            let d = self.build(ops);
            if select_points(&d, self.size, SelectionPolicy::MaxSlack).is_ok() {
                return Ok(d);
            }
            ops += self.size.div_ceil(2);
        }
        Err(Error::SizeTooSmall {
            size: self.size,
            min: MIN_SIZE,
        })
    }

    fn build(&self, ops: usize) -> Design {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (self.kind as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let graph = match self.kind {
            BenchmarkKind::Fir => fir(ops, self.width, &mut rng),
            BenchmarkKind::Elliptic => elliptic(ops, self.width, &mut rng),
            BenchmarkKind::Lattice => lattice(ops, self.width, &mut rng),
            BenchmarkKind::FftLike => fft_like(ops, self.width, &mut rng),
        };
        lower(self, &graph)
    }
}

/// Deterministic in `(kind, size, seed)`.
pub fn generate_benchmark(kind: BenchmarkKind, size: usize, seed: u64) -> Result<Design> {
    BenchmarkConfig::new(kind, size, seed).generate()
}

#[derive(Debug, Clone, Copy)]
enum Operand {
    Input(usize),
    Const(u64),
    Op(usize),
}

#[derive(Debug, Clone, Copy)]
struct Op {
    op: FuOp,
    a: Operand,
    b: Operand,
}

struct Dataflow {
    inputs: usize,
    ops: Vec<Op>,
}

fn odd_const(width: u32, rng: &mut ChaCha8Rng) -> Operand {
    Operand::Const((rng.random::<u64>() & width_mask(width)) | 1)
}

fn fir(ops: usize, width: u32, rng: &mut ChaCha8Rng) -> Dataflow {
    let taps = ops.div_ceil(2).max(2);
    let mut order: Vec<usize> = (0..taps).collect();
    order.shuffle(rng);
    let mut g = Dataflow { inputs: taps, ops: Vec::new() };
    let mut products: Vec<Operand> = order
        .iter()
        .map(|&i| {
            g.ops.push(Op {
                op: FuOp::Mul,
                a: Operand::Input(i),
                b: odd_const(width, rng),
            });
            Operand::Op(g.ops.len() - 1)
        })
        .collect();
    // Adder tree or chain, chosen by the seed.
    let tree = rng.random_bool(0.5);
    while products.len() > 1 {
        let (a, b) = if tree {
            (products.remove(0), products.remove(0))
        } else {
            let a = products.remove(0);
            (a, products.remove(0))
        };
        g.ops.push(Op { op: FuOp::Add, a, b });
        let r = Operand::Op(g.ops.len() - 1);
        if tree {
            products.push(r);
        } else {
            products.insert(0, r);
        }
    }
    g
}

fn elliptic(ops: usize, width: u32, rng: &mut ChaCha8Rng) -> Dataflow {
    let inputs = (ops / 4).clamp(2, 6);
    let mut g = Dataflow { inputs, ops: Vec::new() };
    // Every input is consumed once before the random phase starts.
    let mut live: Vec<Operand> = Vec::new();
    for i in 0..inputs {
        let op = if rng.random_bool(0.5) { FuOp::Add } else { FuOp::Sub };
        g.ops.push(Op { op, a: Operand::Input(i), b: Operand::Input((i + 1) % inputs) });
        live.push(Operand::Op(g.ops.len() - 1));
    }
    while g.ops.len() < ops {
        let op = if rng.random_ratio(1, 4) { FuOp::Mul } else if rng.random_bool(0.5) { FuOp::Add } else { FuOp::Sub };
        let a = live.remove(rng.random_range(0..live.len()));
        let b = if op == FuOp::Mul || live.is_empty() {
            odd_const(width, rng)
        } else {
            live[rng.random_range(0..live.len())]
        };
        g.ops.push(Op { op, a, b });
        live.push(Operand::Op(g.ops.len() - 1));
    }
    g
}

fn lattice(ops: usize, width: u32, rng: &mut ChaCha8Rng) -> Dataflow {
    let stages = ops.div_ceil(4).max(1);
    let mut g = Dataflow { inputs: 2, ops: Vec::new() };
    let (mut f, mut b) = (Operand::Input(0), Operand::Input(1));
    for _ in 0..stages {
        let k = odd_const(width, rng);
        g.ops.push(Op { op: FuOp::Mul, a: b, b: k });
        let kb = Operand::Op(g.ops.len() - 1);
        g.ops.push(Op { op: FuOp::Mul, a: f, b: k });
        let kf = Operand::Op(g.ops.len() - 1);
        g.ops.push(Op { op: FuOp::Add, a: f, b: kb });
        let nf = Operand::Op(g.ops.len() - 1);
        g.ops.push(Op { op: FuOp::Add, a: b, b: kf });
        b = Operand::Op(g.ops.len() - 1);
        f = nf;
    }
    g
}

fn fft_like(ops: usize, width: u32, rng: &mut ChaCha8Rng) -> Dataflow {
    // Radix-2 butterflies over 4 lanes: (a + w*b, a - w*b).
    let lanes = 4;
    let mut g = Dataflow { inputs: lanes, ops: Vec::new() };
    let mut v: Vec<Operand> = (0..lanes).map(Operand::Input).collect();
    let mut span = 1;
    while g.ops.len() < ops {
        let mut next = v.clone();
        for i in 0..lanes {
            if i & span != 0 {
                continue;
            }
            let j = i | span;
            g.ops.push(Op { op: FuOp::Mul, a: v[j], b: odd_const(width, rng) });
            let wb = Operand::Op(g.ops.len() - 1);
            g.ops.push(Op { op: FuOp::Add, a: v[i], b: wb });
            next[i] = Operand::Op(g.ops.len() - 1);
            g.ops.push(Op { op: FuOp::Sub, a: v[i], b: wb });
            next[j] = Operand::Op(g.ops.len() - 1);
        }
        v = next;
        span = if span * 2 >= lanes { 1 } else { span * 2 };
    }
    g
}

fn op_delay(op: FuOp) -> f64 {
    match op {
        FuOp::Mul => 4.0,
        FuOp::Add | FuOp::Sub => 2.0,
        FuOp::And | FuOp::Or | FuOp::Xor => 1.0,
    }
}

/// Schedules the dataflow graph and emits the design.
fn lower(cfg: &BenchmarkConfig, g: &Dataflow) -> Design {
    // The lattice recurrence is one long multiply-add chain; without a
    // tighter budget every net would sit on the critical path.
    let chain_budget = match cfg.kind {
        BenchmarkKind::Lattice => 0.5,
        _ => 0.6,
    } * cfg.clock_period_ns;
    let compute_steps = cfg.steps - 1;
    let cap = g.ops.len().div_ceil(compute_steps).max(1);
    let mut step_of = vec![0usize; g.ops.len()];
    let mut arrival = vec![0.0f64; g.ops.len()];
    let mut per_step: BTreeMap<usize, usize> = BTreeMap::new();
    for (j, op) in g.ops.iter().enumerate() {
        let deps: Vec<usize> = [op.a, op.b]
            .iter()
            .filter_map(|o| match o {
                Operand::Op(k) => Some(*k),
                _ => None,
            })
            .collect();
        let mut s = deps.iter().map(|&k| step_of[k]).max().unwrap_or(1).max(1);
        loop {
            let start = deps
                .iter()
                .filter(|&&k| step_of[k] == s)
                .map(|&k| arrival[k])
                .fold(0.0, f64::max);
            let arr = start + op_delay(op.op);
            if arr <= chain_budget && per_step.get(&s).copied().unwrap_or(0) < cap {
                step_of[j] = s;
                arrival[j] = arr;
                *per_step.entry(s).or_default() += 1;
                break;
            }
            s += 1;
        }
    }
    let last_step = step_of.iter().copied().max().unwrap_or(1);
    let states = (last_step + 1).max(cfg.steps);

    let w = cfg.width;
    let mut d = Design {
        ir_version: IR_VERSION,
        name: format!("{}_{}_{}", cfg.kind.name(), cfg.size, cfg.seed),
        clock_period_ns: cfg.clock_period_ns,
        inputs: (0..g.inputs)
            .map(|i| Port {
                name: format!("x{i}"),
                width: w,
            })
            .collect(),
        outputs: Vec::new(),
        nodes: Vec::new(),
        nets: Vec::new(),
        controller: ControllerFsm {
            states: (0..states).map(|s| format!("S{s}")).collect(),
            reset: "S0".into(),
            transitions: (0..states)
                .map(|s| Transition {
                    from: format!("S{s}"),
                    cond: Condition::Always,
                    to: format!("S{}", (s + 1) % states),
                })
                .collect(),
            control_words: (0..states).map(|s| (format!("S{s}"), BTreeMap::new())).collect(),
        },
        key_width: 0,
        dlockout: None,
    };

    let mut input_reg = Vec::new();
    for i in 0..g.inputs {
        let port = format!("x{i}");
        let net = d.add_node(format!("in{i}"), format!("x{i}_n"), NodeKind::Input { port, width: w });
        let q = d.add_node(
            format!("rx{i}"),
            format!("rx{i}_q"),
            NodeKind::Register {
                width: w,
                input: net,
                enable: format!("ld_x{i}"),
            },
        );
        d.controller
            .control_words
            .get_mut("S0")
            .unwrap()
            .insert(format!("ld_x{i}"), 1);
        input_reg.push(q);
    }

    let mut fu_net: Vec<NetId> = Vec::new();
    let mut reg_net: Vec<NetId> = Vec::new();
    let mut const_count = 0usize;
    for (j, op) in g.ops.iter().enumerate() {
        let mut operand = |o: Operand, d: &mut Design| -> NetId {
            match o {
                Operand::Input(i) => input_reg[i].clone(),
                Operand::Const(v) => {
                    const_count += 1;
                    d.add_node(
                        format!("c{}", const_count - 1),
                        format!("c{}_n", const_count - 1),
                        NodeKind::Const { value: v, width: w },
                    )
                }
                Operand::Op(k) => {
                    if step_of[k] == step_of[j] {
                        fu_net[k].clone()
                    } else {
                        reg_net[k].clone()
                    }
                }
            }
        };
        let a = operand(op.a, &mut d);
        let b = operand(op.b, &mut d);
        let out = d.add_node(
            format!("fu{j}"),
            format!("t{j}"),
            NodeKind::FunctionalUnit {
                op: op.op,
                width: w,
                delay_ns: op_delay(op.op),
                inputs: vec![a, b],
            },
        );
        let en = format!("en_r{j}");
        let q = d.add_node(
            format!("r{j}"),
            format!("r{j}_q"),
            NodeKind::Register {
                width: w,
                input: out.clone(),
                enable: en.clone(),
            },
        );
        d.controller
            .control_words
            .get_mut(&format!("S{}", step_of[j]))
            .unwrap()
            .insert(en, 1);
        fu_net.push(out);
        reg_net.push(q);
    }

    // Results nobody consumes become primary outputs.
    let mut used = vec![false; g.ops.len()];
    for op in &g.ops {
        for o in [op.a, op.b] {
            if let Operand::Op(k) = o {
                used[k] = true;
            }
        }
    }
    for (j, q) in reg_net.iter().enumerate() {
        if !used[j] {
            d.outputs.push(OutputPort {
                name: format!("y{}", d.outputs.len()),
                width: w,
                net: q.clone(),
            });
        }
    }
    d
}

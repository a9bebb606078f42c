//! Cycle-accurate execution of a design and Hamming-distance power traces.
//!
//! Each cycle the controller's control word is applied, the datapath is
//! evaluated combinationally, the checker samples the comparators (in the
//! key-check state only), the controller takes its transition and enabled
//! registers latch. Every run starts from reset; only the lockout state
//! persists between runs.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::bits::KeyBits;
use crate::design::{width_mask, Condition, Design, DpComp, FuOp, MuxSelect, NodeKind, TimingGraph};
use crate::dlockout::{CheckerFsm, LockoutState};
use crate::error::{Error, Result};

/// Port name -> value for one cycle.
pub type InputVector = BTreeMap<String, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LockoutMode {
    /// Comparator mismatches at the key-check step count as attempts.
    #[default]
    Enforced,
    /// Counter frozen: passive measurement (power trace collection).
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StuckAt {
    /// Net index inside the simulator.
    pub net: usize,
    pub value: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub mode: LockoutMode,
    pub faults: Vec<StuckAt>,
}

impl SimOptions {
    pub fn frozen() -> Self {
        SimOptions {
            mode: LockoutMode::Frozen,
            faults: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub state: String,
    pub registers: Vec<u64>,
    pub mux_outputs: Vec<u64>,
    pub comparators: Vec<bool>,
    pub edu: Vec<bool>,
    pub dp_comp: DpComp,
    pub outputs: Vec<u64>,
    /// Hamming distance vs. the previous snapshot, registers then MUXes.
    pub toggles: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionTrace {
    pub register_ids: Vec<String>,
    pub mux_ids: Vec<String>,
    pub output_names: Vec<String>,
    /// Element 0 is the reset snapshot; element `c + 1` follows cycle `c`.
    pub snapshots: Vec<Snapshot>,
}

impl ExecutionTrace {
    pub fn cycles(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }

    pub fn final_outputs(&self) -> BTreeMap<String, u64> {
        let last = self.snapshots.last().expect("trace has a reset snapshot");
        self.output_names.iter().cloned().zip(last.outputs.iter().copied()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTrace {
    pub samples: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PowerTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cycle,sample\n");
        for (c, v) in self.samples.iter().enumerate() {
            s.push_str(&format!("{c},{v}\n"));
        }
        s
    }
}

/// Deterministic per-sample seed derived from `(seed, index)`.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `sample[c]` = total toggles of cycle `c` plus Gaussian noise seeded by
/// `(seed, c)`.
pub fn extract_power_trace(t: &ExecutionTrace, noise_sigma: f64, seed: u64) -> PowerTrace {
    let samples = t
        .snapshots
        .iter()
        .skip(1)
        .enumerate()
        .map(|(c, s)| {
            let hd: u32 = s.toggles.iter().sum();
            hd as f64 + gaussian(noise_sigma, seed, c as u64)
        })
        .collect();
    PowerTrace {
        samples,
        noise_sigma,
        seed,
    }
}

pub(crate) fn gaussian(sigma: f64, seed: u64, index: u64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, index));
    Normal::new(0.0, sigma).expect("finite sigma").sample(&mut rng)
}

#[derive(Debug, Clone)]
enum Eval {
    Input(usize),
    Const(u64),
    Key(usize),
    Mask(bool),
    Reg(usize),
    Counter,
    Checker,
    Fu { op: FuOp, a: usize, b: usize },
    Mux { inputs: Vec<usize>, sel: Sel },
    Xor2 { a: usize, b: usize },
}

#[derive(Debug, Clone, Copy)]
enum Sel {
    Control(usize),
    Net(usize),
}

#[derive(Debug, Clone)]
struct CheckerPlan {
    comparators: Vec<usize>,
    alarms: Vec<usize>,
    out: usize,
    check_state: usize,
    blackhole: Option<usize>,
    threshold: u32,
}

/// Compiled, index-based form of a design.
#[derive(Debug, Clone)]
pub struct Simulator {
    design: Design,
    net_index: HashMap<String, usize>,
    net_mask: Vec<u64>,
    /// `(node output net, evaluation)` for launch nodes.
    launch: Vec<(usize, Eval)>,
    comb: Vec<(usize, Eval)>,
    /// `(output net, input net, enable field)`.
    registers: Vec<(usize, usize, usize)>,
    register_ids: Vec<String>,
    mux_nets: Vec<usize>,
    mux_ids: Vec<String>,
    primary_cmp: Vec<usize>,
    edu_nets: Vec<usize>,
    outputs: Vec<(String, usize)>,
    outputs_need_eval: bool,
    input_ports: HashMap<String, usize>,
    control: Vec<Vec<u64>>,
    transitions: Vec<Vec<(Condition, usize)>>,
    reset: usize,
    checker: Option<CheckerPlan>,
}

/// Everything visible at the end of one simulated cycle.
pub struct CycleView<'a> {
    pub cycle: usize,
    pub state: usize,
    pub next_state: usize,
    /// Net values during the cycle (indexed like [`Simulator::net_index`]).
    pub values: &'a [u64],
    pub registers: &'a [u64],
    pub outputs: &'a [u64],
    pub dp_comp: DpComp,
    pub mismatch: bool,
    pub alarm: bool,
    pub lockout: LockoutState,
}

/// Result of one schedule pass seen from the primary outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PassResult {
    pub outputs: BTreeMap<String, u64>,
    pub fault_alarm: bool,
    pub cycles: usize,
    pub blackhole: bool,
}

impl Simulator {
    pub fn new(design: &Design) -> Result<Self> {
        let g = TimingGraph::new(design)?;
        let net_index = g.net_index.clone();
        let net_mask: Vec<u64> = design.nets.iter().map(|n| width_mask(n.width)).collect();
        let idx = |id: &str| net_index[id];

        let mut field_index: HashMap<String, usize> = HashMap::new();
        let mut field = |name: &str| {
            let n = field_index.len();
            *field_index.entry(name.to_string()).or_insert(n)
        };
        let input_ports: HashMap<String, usize> = design
            .inputs
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();

        let mut launch = Vec::new();
        let mut comb_eval: HashMap<usize, (usize, Eval)> = HashMap::new();
        let mut registers = Vec::new();
        let mut register_ids = Vec::new();
        let mut mux_nets = Vec::new();
        let mut mux_ids = Vec::new();
        let mut primary_cmp = Vec::new();
        let mut edu_nets = Vec::new();
        for (ni, node) in design.nodes.iter().enumerate() {
            let out = g.node_output[ni].expect("validated: node drives a net");
            let e = match &node.kind {
                NodeKind::Input { port, .. } => Eval::Input(input_ports[port]),
                NodeKind::Const { value, .. } => Eval::Const(*value),
                NodeKind::KeyBit { index } => Eval::Key(*index),
                NodeKind::MaskBit { value, .. } => Eval::Mask(*value),
                NodeKind::Register { input, enable, .. } => {
                    registers.push((out, idx(input), field(enable)));
                    register_ids.push(node.id.clone());
                    Eval::Reg(registers.len() - 1)
                }
                NodeKind::Counter { .. } => Eval::Counter,
                NodeKind::Checker { .. } => Eval::Checker,
                NodeKind::FunctionalUnit { op, inputs, .. } => Eval::Fu {
                    op: *op,
                    a: idx(&inputs[0]),
                    b: idx(&inputs[1]),
                },
                NodeKind::Mux { inputs, select, .. } => {
                    mux_nets.push(out);
                    mux_ids.push(node.id.clone());
                    Eval::Mux {
                        inputs: inputs.iter().map(|i| idx(i)).collect(),
                        sel: match select {
                            MuxSelect::Control(f) => Sel::Control(field(f)),
                            MuxSelect::Net(n) => Sel::Net(idx(n)),
                        },
                    }
                }
                NodeKind::Comparator { inputs, shadow, .. } => {
                    if !shadow {
                        primary_cmp.push(out);
                    }
                    Eval::Xor2 {
                        a: idx(&inputs[0]),
                        b: idx(&inputs[1]),
                    }
                }
                NodeKind::EduCell { primary, shadow, .. } => {
                    edu_nets.push(out);
                    Eval::Xor2 {
                        a: idx(primary),
                        b: idx(shadow),
                    }
                }
            };
            if node.kind.is_combinational() {
                comb_eval.insert(ni, (out, e));
            } else if !matches!(e, Eval::Checker) {
                launch.push((out, e));
            }
        }
        let comb: Vec<(usize, Eval)> = g
            .comb_order
            .iter()
            .map(|ni| comb_eval.remove(ni).expect("comb node compiled"))
            .collect();

        let c = &design.controller;
        let state_idx = |s: &str| c.state_index(s).expect("validated state");
        let control: Vec<Vec<u64>> = c
            .states
            .iter()
            .map(|s| {
                let mut w = vec![0u64; field_index.len()];
                if let Some(word) = c.control_words.get(s) {
                    for (f, v) in word {
                        if let Some(&i) = field_index.get(f) {
                            w[i] = *v;
                        }
                    }
                }
                w
            })
            .collect();
        let mut transitions = vec![Vec::new(); c.states.len()];
        for t in &c.transitions {
            transitions[state_idx(&t.from)].push((t.cond, state_idx(&t.to)));
        }

        let checker = match &design.dlockout {
            None => None,
            Some(b) => {
                let (comparators, alarms) = match design.node(&b.checker).map(|n| &n.kind) {
                    Some(NodeKind::Checker {
                        comparators, alarms, ..
                    }) => (
                        comparators.iter().map(|n| idx(n)).collect(),
                        alarms.iter().map(|n| idx(n)).collect(),
                    ),
                    _ => return Err(Error::Precondition("lockout block without checker".into())),
                };
                let out = idx(&design.output_net_of(&b.checker).expect("checker net").id);
                Some(CheckerPlan {
                    comparators,
                    alarms,
                    out,
                    check_state: state_idx(&b.check_state),
                    blackhole: b.blackhole_state.as_deref().map(state_idx),
                    threshold: b.threshold,
                })
            }
        };

        let outputs: Vec<(String, usize)> = design
            .outputs
            .iter()
            .map(|o| (o.name.clone(), idx(&o.net)))
            .collect();
        let launch_nets: Vec<usize> = launch.iter().map(|(o, _)| *o).collect();
        let outputs_need_eval = outputs.iter().any(|(_, n)| !launch_nets.contains(n));

        Ok(Simulator {
            reset: state_idx(&c.reset),
            design: design.clone(),
            net_index,
            net_mask,
            launch,
            comb,
            registers,
            register_ids,
            mux_nets,
            mux_ids,
            primary_cmp,
            edu_nets,
            outputs,
            outputs_need_eval,
            input_ports,
            control,
            transitions,
            checker,
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn net_index(&self, id: &str) -> Option<usize> {
        self.net_index.get(id).copied()
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.design.controller.states[i]
    }

    pub fn reset_state(&self) -> usize {
        self.reset
    }

    pub fn blackhole_state(&self) -> Option<usize> {
        self.checker.as_ref().and_then(|c| c.blackhole)
    }

    /// Default lockout state for this design (threshold from the lockout
    /// block, 5 for unhardened designs).
    pub fn fresh_lockout(&self) -> LockoutState {
        LockoutState::new(self.checker.as_ref().map_or(5, |c| c.threshold))
    }

    fn resolve_inputs(&self, inputs: &[InputVector]) -> Result<Vec<Vec<u64>>> {
        inputs
            .iter()
            .map(|v| {
                let mut row = vec![0u64; self.design.inputs.len()];
                for (name, value) in v {
                    let i = *self
                        .input_ports
                        .get(name)
                        .ok_or_else(|| Error::UndefinedInput(name.clone()))?;
                    row[i] = value & width_mask(self.design.inputs[i].width);
                }
                Ok(row)
            })
            .collect()
    }

    fn check_key(&self, key: &KeyBits) -> Result<()> {
        if key.len() != self.design.key_width {
            return Err(Error::KeyWidth {
                expected: self.design.key_width,
                got: key.len(),
            });
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        values: &mut [u64],
        inputs: &[u64],
        key: &KeyBits,
        regs: &[u64],
        counter: u32,
        word: &[u64],
        faults: &[StuckAt],
    ) {
        for (out, e) in &self.launch {
            values[*out] = match e {
                Eval::Input(i) => inputs[*i],
                Eval::Const(v) => *v,
                Eval::Key(i) => key.get(*i) as u64,
                Eval::Mask(b) => *b as u64,
                Eval::Reg(r) => regs[*r],
                Eval::Counter => counter as u64,
                _ => unreachable!("launch nodes only"),
            };
        }
        for (out, e) in &self.comb {
            let v = match e {
                Eval::Fu { op, a, b } => op.apply(values[*a], values[*b]),
                Eval::Mux { inputs, sel } => {
                    let s = match sel {
                        Sel::Control(f) => word[*f],
                        Sel::Net(n) => values[*n],
                    } as usize;
                    values[inputs[s.min(inputs.len() - 1)]]
                }
                Eval::Xor2 { a, b } => values[*a] ^ values[*b],
                _ => unreachable!("combinational nodes only"),
            };
            values[*out] = v & self.net_mask[*out];
            for f in faults {
                if f.net == *out {
                    values[*out] = f.value as u64;
                }
            }
        }
    }

    /// Core execution loop. `observe` is called after every cycle and may
    /// return `false` to stop early.
    pub fn run(
        &self,
        key: &KeyBits,
        inputs: &[InputVector],
        cycles: usize,
        lockout: LockoutState,
        opts: &SimOptions,
        mut observe: impl FnMut(&CycleView) -> bool,
    ) -> Result<LockoutState> {
        self.check_key(key)?;
        let rows = self.resolve_inputs(inputs)?;
        let zero_row = vec![0u64; self.design.inputs.len()];
        let mut lockout = lockout;
        if let Some(ch) = &self.checker {
            lockout.check_threshold(ch.threshold)?;
        }
        let mut values = vec![0u64; self.net_mask.len()];
        let mut scratch = vec![0u64; self.net_mask.len()];
        let mut regs = vec![0u64; self.registers.len()];
        let mut outs = vec![0u64; self.outputs.len()];
        let mut state = self.initial_state(&lockout);

        for cycle in 0..cycles {
            let row = rows.get(cycle).or(rows.last()).unwrap_or(&zero_row);
            let word = &self.control[state];
            self.evaluate(&mut values, row, key, &regs, lockout.counter, word, &opts.faults);

            let (dp, mismatch, alarm) = match &self.checker {
                None => (DpComp::Ok, false, false),
                Some(ch) => {
                    let mismatch = ch.comparators.iter().any(|&n| values[n] != 0);
                    let alarm = ch.alarms.iter().any(|&n| values[n] != 0);
                    let (next, _, dp) =
                        CheckerFsm::step(lockout, state == ch.check_state, mismatch, opts.mode);
                    lockout = next;
                    values[ch.out] = dp.code();
                    (dp, mismatch, alarm)
                }
            };
            let next_state = self.transitions[state]
                .iter()
                .find(|(c, _)| c.holds(dp))
                .map(|&(_, s)| s)
                .expect("validated controller is complete");

            for (r, &(_, input, en)) in self.registers.iter().enumerate() {
                if word[en] != 0 {
                    regs[r] = values[input];
                }
            }

            if Some(next_state) == self.blackhole_state() {
                outs.iter_mut().for_each(|o| *o = 0);
            } else if self.outputs_need_eval {
                self.evaluate(
                    &mut scratch,
                    row,
                    key,
                    &regs,
                    lockout.counter,
                    &self.control[next_state],
                    &opts.faults,
                );
                for (o, (_, n)) in outs.iter_mut().zip(&self.outputs) {
                    *o = scratch[*n];
                }
            } else {
                for (o, (_, n)) in outs.iter_mut().zip(&self.outputs) {
                    // Launch-driven outputs: re-read the source after latching.
                    *o = self.read_launch(*n, row, key, &regs, lockout.counter);
                }
            }

            let view = CycleView {
                cycle,
                state,
                next_state,
                values: &values,
                registers: &regs,
                outputs: &outs,
                dp_comp: dp,
                mismatch,
                alarm,
                lockout,
            };
            let go_on = observe(&view);
            state = next_state;
            if !go_on {
                break;
            }
        }
        Ok(lockout)
    }

    fn read_launch(&self, net: usize, row: &[u64], key: &KeyBits, regs: &[u64], counter: u32) -> u64 {
        let (_, e) = self.launch.iter().find(|(o, _)| *o == net).expect("launch net");
        match e {
            Eval::Input(i) => row[*i],
            Eval::Const(v) => *v,
            Eval::Key(i) => key.get(*i) as u64,
            Eval::Mask(b) => *b as u64,
            Eval::Reg(r) => regs[*r],
            Eval::Counter => counter as u64,
            _ => 0,
        }
    }

    fn initial_state(&self, lockout: &LockoutState) -> usize {
        match self.blackhole_state() {
            Some(bh) if lockout.is_full() => bh,
            _ => self.reset,
        }
    }

    /// Runs `cycles` cycles and records the full execution trace.
    pub fn simulate(
        &self,
        key: &KeyBits,
        inputs: &[InputVector],
        cycles: usize,
        lockout: LockoutState,
        opts: &SimOptions,
    ) -> Result<(ExecutionTrace, LockoutState)> {
        self.record(key, inputs, cycles, lockout, opts, false)
    }

    /// Records one schedule pass: stops when the controller returns to
    /// reset or after N cycles, like [`Simulator::pass`].
    pub fn simulate_pass(
        &self,
        key: &KeyBits,
        inputs: &[InputVector],
        lockout: LockoutState,
        opts: &SimOptions,
    ) -> Result<(ExecutionTrace, LockoutState)> {
        self.record(key, inputs, self.design.schedule_length(), lockout, opts, true)
    }

    fn record(
        &self,
        key: &KeyBits,
        inputs: &[InputVector],
        cycles: usize,
        lockout: LockoutState,
        opts: &SimOptions,
        one_pass: bool,
    ) -> Result<(ExecutionTrace, LockoutState)> {
        if cycles < 1 {
            return Err(Error::Precondition("cycles must be at least 1".into()));
        }
        let initial = self.initial_state(&lockout);
        let mut snapshots = vec![Snapshot {
            state: self.state_name(initial).to_string(),
            registers: vec![0; self.registers.len()],
            mux_outputs: vec![0; self.mux_nets.len()],
            comparators: vec![false; self.primary_cmp.len()],
            edu: vec![false; self.edu_nets.len()],
            dp_comp: DpComp::Ok,
            outputs: vec![0; self.outputs.len()],
            toggles: vec![0; self.registers.len() + self.mux_nets.len()],
        }];
        let after = self.run(key, inputs, cycles, lockout, opts, |v| {
            let prev = snapshots.last().unwrap();
            let mux_outputs: Vec<u64> = self.mux_nets.iter().map(|&n| v.values[n]).collect();
            let toggles = v
                .registers
                .iter()
                .zip(&prev.registers)
                .chain(mux_outputs.iter().zip(&prev.mux_outputs))
                .map(|(a, b)| (a ^ b).count_ones())
                .collect();
            snapshots.push(Snapshot {
                state: self.state_name(v.next_state).to_string(),
                registers: v.registers.to_vec(),
                comparators: self.primary_cmp.iter().map(|&n| v.values[n] != 0).collect(),
                edu: self.edu_nets.iter().map(|&n| v.values[n] != 0).collect(),
                dp_comp: v.dp_comp,
                outputs: v.outputs.to_vec(),
                mux_outputs,
                toggles,
            });
            !one_pass || v.next_state != self.reset
        })?;
        Ok((
            ExecutionTrace {
                register_ids: self.register_ids.clone(),
                mux_ids: self.mux_ids.clone(),
                output_names: self.outputs.iter().map(|(n, _)| n.clone()).collect(),
                snapshots,
            },
            after,
        ))
    }

    /// One schedule pass with `input` held constant: runs until the
    /// controller returns to reset (a completed pass or a partial-lockout
    /// revert) or for N cycles, whichever comes first.
    pub fn pass(
        &self,
        key: &KeyBits,
        input: &InputVector,
        lockout: &mut LockoutState,
        opts: &SimOptions,
    ) -> Result<PassResult> {
        let n = self.design.schedule_length();
        let mut outs = vec![0u64; self.outputs.len()];
        let mut alarm = false;
        let mut cycles = 0;
        let mut last_state = self.initial_state(lockout);
        let next = self.run(key, std::slice::from_ref(input), n, *lockout, opts, |v| {
            outs.copy_from_slice(v.outputs);
            alarm |= v.alarm;
            cycles += 1;
            last_state = v.next_state;
            v.next_state != self.reset
        })?;
        *lockout = next;
        Ok(PassResult {
            outputs: self
                .outputs
                .iter()
                .map(|(name, _)| name.clone())
                .zip(outs)
                .collect(),
            fault_alarm: alarm,
            cycles,
            blackhole: Some(last_state) == self.blackhole_state(),
        })
    }

    /// Total register and MUX toggles per cycle (the noiseless power
    /// profile), without materializing snapshots.
    pub fn toggle_profile(
        &self,
        key: &KeyBits,
        inputs: &[InputVector],
        cycles: usize,
        lockout: LockoutState,
        opts: &SimOptions,
    ) -> Result<Vec<u32>> {
        self.toggle_profile_masked(key, inputs, cycles, lockout, opts, u64::MAX)
    }

    /// As [`Simulator::toggle_profile`], counting only the bits of each
    /// register and MUX output selected by `bits`.
    pub fn toggle_profile_masked(
        &self,
        key: &KeyBits,
        inputs: &[InputVector],
        cycles: usize,
        lockout: LockoutState,
        opts: &SimOptions,
        bits: u64,
    ) -> Result<Vec<u32>> {
        let mut prev_regs = vec![0u64; self.registers.len()];
        let mut prev_mux = vec![0u64; self.mux_nets.len()];
        let mut out = Vec::with_capacity(cycles);
        self.run(key, inputs, cycles, lockout, opts, |v| {
            let mut hd = 0;
            for (p, r) in prev_regs.iter_mut().zip(v.registers) {
                hd += ((*p ^ r) & bits).count_ones();
                *p = *r;
            }
            for (p, &n) in prev_mux.iter_mut().zip(&self.mux_nets) {
                hd += ((*p ^ v.values[n]) & bits).count_ones();
                *p = v.values[n];
            }
            out.push(hd);
            true
        })?;
        Ok(out)
    }

    /// Output nets of the primary (non-shadow) comparators, point order.
    pub fn comparator_nets(&self) -> &[usize] {
        &self.primary_cmp
    }
}

/// Runs `cycles` cycles of `d` from reset.
pub fn simulate(
    d: &Design,
    key: &KeyBits,
    inputs: &[InputVector],
    cycles: usize,
    lockout: LockoutState,
) -> Result<(ExecutionTrace, LockoutState)> {
    Simulator::new(d)?.simulate(key, inputs, cycles, lockout, &SimOptions::default())
}

/// Black-box view of one schedule pass from a fresh (FREE) lockout state.
pub fn functional_output(d: &Design, key: &KeyBits, input: &InputVector) -> Result<BTreeMap<String, u64>> {
    let sim = Simulator::new(d)?;
    let mut lockout = sim.fresh_lockout();
    Ok(sim.pass(key, input, &mut lockout, &SimOptions::default())?.outputs)
}

/// As [`functional_output`] but against an explicit lockout state, which is
/// updated in place.
pub fn functional_output_with(
    d: &Design,
    key: &KeyBits,
    input: &InputVector,
    lockout: &mut LockoutState,
) -> Result<BTreeMap<String, u64>> {
    Ok(Simulator::new(d)?.pass(key, input, lockout, &SimOptions::default())?.outputs)
}

//! The `dlockout` command-line tool: generate, obfuscate, harden, simulate,
//! attack and evaluate designs, with the attempt counter persisted in a
//! project state directory between invocations.

pub mod state;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dlockout_core::attacks::{
    brute_force, dpa_attack, fault_attack, DpaConfig, FaultPolarity, FaultSpec, GoldenSet, KeyStream, Oracle,
};
use dlockout_core::design::{compute_slack, longest_path_ns, parse_design, serialize_design, BenchmarkConfig, BenchmarkKind, Design};
use dlockout_core::dlockout::{harden, HardenOptions, LockoutState};
use dlockout_core::metrics::{
    attempt_prob, correlation_r0, fault_trials, key_prob, mtd0, mtd1, reproduce_tables, AttemptForm, SciNumber,
};
use dlockout_core::obfuscate::{insert_key_muxes, select_points, KeySpec, SelectionPolicy};
use dlockout_core::overhead::{overhead_report, StructureCounts};
use dlockout_core::sim::{extract_power_trace, InputVector, SimOptions, Simulator};
use dlockout_core::KeyBits;
use serde::Serialize;

use state::{absolute, write_atomic, DeviceKey, StateDir};

#[derive(Debug, Parser)]
#[command(name = "dlockout", version, about = "Design lockout hardening for key-obfuscated RTL designs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark design.
    Generate(GenerateArgs),
    /// Insert key-controlled MUXes; writes the design and a keyspec.
    Obfuscate(ObfuscateArgs),
    /// Harden an obfuscated design and provision a fresh device.
    Lockout(LockoutArgs),
    /// Run the provisioned device, updating the persisted attempt counter.
    Simulate(SimulateArgs),
    /// Attack the provisioned device.
    Attack {
        #[command(subcommand)]
        mode: AttackMode,
    },
    /// Evaluate security metrics or reproduce the reference tables.
    Metrics {
        #[command(subcommand)]
        what: MetricsCmd,
    },
    /// Structural and timing summary of a design.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Fir,
    Elliptic,
    Lattice,
    FftLike,
}

impl From<Kind> for BenchmarkKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Fir => BenchmarkKind::Fir,
            Kind::Elliptic => BenchmarkKind::Elliptic,
            Kind::Lattice => BenchmarkKind::Lattice,
            Kind::FftLike => BenchmarkKind::FftLike,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "fir")]
    pub kind: Kind,
    /// Number of datapath operations (lower bound).
    #[arg(long, default_value_t = 16)]
    pub size: usize,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Policy {
    MaxSlack,
    Random,
}

#[derive(Debug, Args)]
pub struct ObfuscateArgs {
    pub design: PathBuf,
    /// Key width.
    #[arg(short)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "max-slack")]
    pub policy: Policy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Keyspec destination; defaults to `keys/keyspec.json` beside the
    /// output design.
    #[arg(long)]
    pub keyspec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LockoutArgs {
    pub design: PathBuf,
    #[arg(long)]
    pub keyspec: Option<PathBuf>,
    /// Attempt threshold.
    #[arg(short = 'X', long = "threshold", default_value_t = 5)]
    pub threshold: u32,
    /// Mask the key-MUX selectors with secret mask bits.
    #[arg(long)]
    pub mask: bool,
    /// Attach the error detection unit.
    #[arg(long)]
    pub edu: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Designer only: overwrite an existing attempt counter.
    #[arg(long)]
    pub reset_state: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub design: PathBuf,
    /// Applied key, hex.
    #[arg(long)]
    pub key: String,
    /// JSON object of port values, or an array of them (one per cycle,
    /// the last held). All ports default to zero when omitted.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Cycles to run. By default a single schedule pass runs (one key
    /// attempt); a fixed cycle count may span several attempts.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Execution trace destination (JSON).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Power trace destination (CSV).
    #[arg(long)]
    pub power: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Designer only: restore the attempt counter to zero before running.
    #[arg(long)]
    pub reset_state: bool,
}

#[derive(Debug, Args)]
pub struct AttackCommon {
    pub design: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report destination; defaults to the project's report directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StreamKind {
    Exhaustive,
    Random,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Maximum number of keys to submit.
    #[arg(long, default_value_t = 1 << 16)]
    pub budget: usize,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub stream: StreamKind,
}

#[derive(Debug, Subcommand)]
pub enum AttackMode {
    /// Oracle-guided brute force against the persisted device.
    Brute {
        #[command(flatten)]
        common: AttackCommon,
        #[command(flatten)]
        stream: StreamArgs,
    },
    /// Differential power analysis on key-MUX switching.
    Dpa {
        #[command(flatten)]
        common: AttackCommon,
        #[arg(long, default_value_t = 5000)]
        traces: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Low input bits per port known to the attacker (default: all).
        #[arg(short = 'p', long)]
        known_bits: Option<u32>,
    },
    /// Stuck-at faults on comparator outputs plus brute force over fresh
    /// device copies.
    Fault {
        #[command(flatten)]
        common: AttackCommon,
        #[command(flatten)]
        stream: StreamArgs,
        /// Stuck-at polarity, 0 or 1.
        #[arg(long, value_parser = ["0", "1"])]
        saf: String,
        #[arg(long, default_value_t = 1)]
        n_dev: u32,
        /// Point indices to fault (default: all).
        #[arg(long, value_delimiter = ',')]
        points: Vec<usize>,
        /// Per-copy attempt index from which the fault is active.
        #[arg(long, default_value_t = 0)]
        inject_from: usize,
        /// Require the target to carry an error detection unit.
        #[arg(long, conflicts_with = "no_edu")]
        edu: bool,
        /// Require the target to lack an error detection unit.
        #[arg(long)]
        no_edu: bool,
    },
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Regenerate the MTD and key-guessing tables with discrepancy flags.
    Tables {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Input-to-MUX correlation sqrt(p/q).
    R0 {
        #[arg(short)]
        p: u32,
        #[arg(short)]
        q: u32,
    },
    /// Measurements to disclose a key bit.
    Mtd {
        #[arg(short = 'M')]
        m: u32,
        #[arg(short = 'N')]
        n: u32,
        #[arg(short)]
        p: u32,
        #[arg(short)]
        q: u32,
        #[arg(long)]
        r1sq: f64,
        #[arg(short = 'C', default_value_t = 1.0)]
        c: f64,
    },
    /// Probability of guessing the key and schedule, 1/(n! 2^m).
    Keyprob {
        #[arg(short)]
        m: u32,
        #[arg(short)]
        n: u32,
    },
    /// Probability of extracting the key at attempt K of X.
    Attempt {
        #[arg(short = 'K')]
        k: u32,
        #[arg(short = 'X', default_value_t = 5)]
        x: u32,
        /// Guessing probability, e.g. `0.43e-108`.
        #[arg(short = 'P', conflicts_with_all = ["m", "n"])]
        p: Option<String>,
        #[arg(short, requires = "n")]
        m: Option<u32>,
        #[arg(short, requires = "m")]
        n: Option<u32>,
        /// Use the standard binomial pmf instead of the tabulated form.
        #[arg(long)]
        standard_binomial: bool,
    },
    /// Trials needed by a multi-copy fault attacker.
    FaultTrials {
        #[arg(short)]
        m: u32,
        #[arg(long)]
        n_dev: u32,
        #[arg(short = 'X', default_value_t = 5)]
        x: u32,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub design: PathBuf,
    /// Design to diff structural counts against.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Obfuscate(a) => obfuscate(a, out),
        Command::Lockout(a) => lockout(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Attack { mode } => attack(mode, out),
        Command::Metrics { what } => metrics(what, out),
        Command::Report(a) => report(a, out),
    }
}

fn read_design(p: &Path) -> Result<Design> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    parse_design(&text).with_context(|| format!("parsing {}", p.display()))
}

fn write_design(p: &Path, d: &Design) -> Result<()> {
    write_atomic(p, &serialize_design(d))
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = BenchmarkConfig::new(a.kind.into(), a.size, a.seed);
    if let Some(w) = a.width {
        cfg = cfg.with_width(w);
    }
    let d = cfg.generate()?;
    write_design(&a.output, &d)?;
    let st = StateDir::open()?;
    let mut p = st.project()?;
    p.designs.insert("original".into(), absolute(&a.output)?);
    p.seed = Some(a.seed);
    st.save_project(&p)?;
    writeln!(
        out,
        "{}: {} nodes, {} states, critical path {:.2} ns of {:.2} ns",
        a.output.display(),
        d.nodes.len(),
        d.controller.states.len(),
        longest_path_ns(&d)?.0,
        d.clock_period_ns
    )?;
    Ok(())
}

fn obfuscate(a: ObfuscateArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_design(&a.design)?;
    let policy = match a.policy {
        Policy::MaxSlack => SelectionPolicy::MaxSlack,
        Policy::Random => SelectionPolicy::Random(a.seed),
    };
    let nets = select_points(&d, a.m, policy)?;
    let (o, spec) = insert_key_muxes(&d, &nets, a.seed)?;
    let keyspec = a.keyspec.unwrap_or_else(|| {
        a.output
            .parent()
            .unwrap_or(Path::new(""))
            .join("keys")
            .join("keyspec.json")
    });
    write_design(&a.output, &o)?;
    write_atomic(&keyspec, &spec.to_json())?;
    let st = StateDir::open()?;
    let mut p = st.project()?;
    p.designs.insert("original".into(), absolute(&a.design)?);
    p.designs.insert("obfuscated".into(), absolute(&a.output)?);
    p.keyspec = Some(absolute(&keyspec)?);
    p.seed = Some(a.seed);
    st.save_project(&p)?;
    writeln!(out, "key_width {}", o.key_width)?;
    write!(out, "{}", overhead_report(&d, &o).to_text())?;
    Ok(())
}

fn lockout(a: LockoutArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_design(&a.design)?;
    if d.is_hardened() {
        bail!("{} is already lockout-hardened", a.design.display());
    }
    if a.threshold < 1 {
        bail!("threshold X must be at least 1, got {}", a.threshold);
    }
    let st = StateDir::open()?;
    let mut p = st.project()?;
    let ks_path = a
        .keyspec
        .clone()
        .or_else(|| p.keyspec.clone())
        .context("no keyspec given and none recorded for this project")?;
    let spec = KeySpec::from_json(&fs::read_to_string(&ks_path).with_context(|| format!("reading {}", ks_path.display()))?)?;
    if st.lockout_exists()? && !a.reset_state {
        bail!(
            "an attempt counter already exists at {}; pass --reset-state (designer only) to provision a new device",
            p.lockout_state.display()
        );
    }
    let opts = HardenOptions {
        threshold: a.threshold,
        mask_seed: a.mask.then_some(a.seed),
        edu: a.edu,
    };
    let (h, spec) = harden(&d, &spec, opts)?;
    write_design(&a.output, &h)?;
    write_atomic(&ks_path, &spec.to_json())?;
    let fresh = LockoutState::new(a.threshold);
    st.store_lockout(&fresh)?;
    st.store_device(&DeviceKey::new(&spec.correct_key))?;
    p.designs.insert("hardened".into(), absolute(&a.output)?);
    p.keyspec = Some(absolute(&ks_path)?);
    st.save_project(&p)?;
    // Overhead against the unobfuscated design when it is known.
    let base = p
        .designs
        .get("original")
        .and_then(|o| read_design(o).ok())
        .filter(|o| o.key_width == 0)
        .unwrap_or(d);
    write!(out, "{}", overhead_report(&base, &h).to_text())?;
    writeln!(out, "lockout state: counter {} threshold {} phase {}", fresh.counter, fresh.threshold, fresh.phase)?;
    Ok(())
}

fn read_inputs(p: Option<&Path>, d: &Design) -> Result<Vec<InputVector>> {
    let Some(p) = p else {
        return Ok(vec![d.inputs.iter().map(|i| (i.name.clone(), 0)).collect()]);
    };
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let rows = match v {
        serde_json::Value::Array(rows) => rows,
        other => vec![other],
    };
    let rows: Vec<InputVector> = rows
        .into_iter()
        .map(serde_json::from_value)
        .collect::<std::result::Result<_, _>>()
        .context("inputs must be objects mapping port names to unsigned integers")?;
    if rows.is_empty() {
        bail!("inputs file holds no vectors");
    }
    Ok(rows)
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_design(&a.design)?;
    let key = KeyBits::from_hex(&a.key, d.key_width)?;
    let inputs = read_inputs(a.inputs.as_deref(), &d)?;
    let sim = Simulator::new(&d)?;
    let st = if d.is_hardened() { Some(StateDir::open()?) } else { None };
    let before = match &st {
        Some(_) if a.reset_state => sim.fresh_lockout(),
        Some(s) => s.load_lockout()?,
        None => sim.fresh_lockout(),
    };
    let (trace, after) = match a.cycles {
        Some(n) => sim.simulate(&key, &inputs, n, before, &SimOptions::default())?,
        None => sim.simulate_pass(&key, &inputs, before, &SimOptions::default())?,
    };
    if let Some(s) = &st {
        s.store_lockout(&after)?;
    }
    if let Some(o) = &a.output {
        write_atomic(o, &trace.to_json())?;
    }
    if let Some(pw) = &a.power {
        write_atomic(pw, &extract_power_trace(&trace, a.sigma, a.seed).to_csv())?;
    }
    let last = trace.snapshots.last().expect("initial snapshot");
    for (name, v) in trace.final_outputs() {
        writeln!(out, "{name} = {v}")?;
    }
    writeln!(out, "state {}", last.state)?;
    if st.is_some() {
        writeln!(out, "phase {} (counter {}/{})", after.phase, after.counter, after.threshold)?;
    }
    Ok(())
}

fn stream_for(s: &StreamArgs, width: usize, seed: u64) -> KeyStream {
    match s.stream {
        StreamKind::Exhaustive => KeyStream::Exhaustive { width },
        StreamKind::Random => KeyStream::Random {
            width,
            seed,
            count: s.budget,
        },
    }
}

fn attack(mode: AttackMode, out: &mut dyn Write) -> Result<()> {
    let st = StateDir::open()?;
    let common = match &mode {
        AttackMode::Brute { common, .. } | AttackMode::Dpa { common, .. } | AttackMode::Fault { common, .. } => common,
    };
    let project = st.project()?;
    st.check_attack_path(&common.design)?;
    st.check_attack_path(st.root())?;
    let report_path = match &common.output {
        Some(p) => p.clone(),
        None => {
            let name = match &mode {
                AttackMode::Brute { .. } => "brute",
                AttackMode::Dpa { .. } => "dpa",
                AttackMode::Fault { .. } => "fault",
            };
            project.report_dir.join(format!("attack-{name}-{}.json", common.seed))
        }
    };
    st.check_attack_path(&report_path)?;
    let d = read_design(&common.design)?;
    let device = st.load_device()?;
    if device.key_width != d.key_width {
        bail!(
            "provisioned device holds a {}-bit key but {} expects {}",
            device.key_width,
            common.design.display(),
            d.key_width
        );
    }
    let key = device.bits()?;
    let golden = GoldenSet::from_design(&d, &key, common.seed)?;
    let report = match &mode {
        AttackMode::Brute { stream, .. } => {
            let mut oracle = Oracle::with_lockout(&d, st.load_lockout()?)?;
            let r = brute_force(&mut oracle, &golden, &stream_for(stream, d.key_width, common.seed), stream.budget);
            // The device counter advances even if the attack errors out.
            st.store_lockout(&oracle.lockout_state_for_evaluation())?;
            r?
        }
        AttackMode::Dpa {
            traces,
            sigma,
            known_bits,
            ..
        } => {
            let lockout = st.load_lockout()?;
            let mut cfg = DpaConfig::new(*traces, *sigma, common.seed);
            cfg.known_bits = *known_bits;
            // Measurement runs do not advance the counter, but the final
            // key check is a real attempt on the device.
            let mut r = dpa_attack(&d, &key, &cfg)?;
            if let Some(k) = r.recovered_key.clone() {
                let mut oracle = Oracle::with_lockout(&d, lockout)?;
                let ok = golden.pairs.iter().all(|(x, want)| {
                    oracle.query(&k, x).is_ok_and(|o| &o.outputs == want && !o.fault_alarm)
                });
                st.store_lockout(&oracle.lockout_state_for_evaluation())?;
                r.locked_out = oracle.is_locked_out();
                if !ok {
                    r.recovered_key = None;
                }
            }
            r
        }
        AttackMode::Fault {
            stream,
            saf,
            n_dev,
            points,
            inject_from,
            edu,
            no_edu,
            ..
        } => {
            let has_edu = d.dlockout.as_ref().is_some_and(|b| b.edu);
            if *edu && !has_edu {
                bail!("--edu given but {} has no error detection unit", common.design.display());
            }
            if *no_edu && has_edu {
                bail!("--no-edu given but {} carries an error detection unit", common.design.display());
            }
            let polarity: FaultPolarity = format!("saf{saf}").parse()?;
            let spec = FaultSpec {
                points: points.clone(),
                polarity,
                n_dev: *n_dev,
                inject_from: *inject_from,
            };
            let mut r = fault_attack(&d, &spec, &golden, &stream_for(stream, d.key_width, common.seed), stream.budget)?;
            r.seed = common.seed;
            r
        }
    };
    write_atomic(&report_path, &report.to_json())?;
    writeln!(
        out,
        "{}: success {} attempts {} locked_out {}",
        report_path.display(),
        report.success(),
        report.attempts_used,
        report.locked_out
    )?;
    Ok(())
}

fn metrics(what: MetricsCmd, out: &mut dyn Write) -> Result<()> {
    let value = match what {
        MetricsCmd::Tables { format } => {
            let t = reproduce_tables();
            let text = match format {
                Format::Text => t.to_text(),
                Format::Csv => t.to_csv(),
                Format::Json => t.to_json(),
            };
            write!(out, "{text}")?;
            if !text.ends_with('\n') {
                writeln!(out)?;
            }
            return Ok(());
        }
        MetricsCmd::R0 { p, q } => format!("{:.6}", correlation_r0(p, q)?),
        MetricsCmd::Mtd { m, n, p, q, r1sq, c } => {
            let m0 = mtd0(correlation_r0(p, q)?, c)?;
            format!("{}", mtd1(m, n, r1sq, m0)?.round())
        }
        MetricsCmd::Keyprob { m, n } => key_prob(m, n)?.render_compact(2),
        MetricsCmd::Attempt {
            k,
            x,
            p,
            m,
            n,
            standard_binomial,
        } => {
            let pv = match (p, m, n) {
                (Some(p), _, _) => SciNumber::parse(&p)?,
                (None, Some(m), Some(n)) => key_prob(m, n)?,
                _ => bail!("give either -P or both -m and -n"),
            };
            let form = if standard_binomial {
                AttemptForm::StandardBinomial
            } else {
                AttemptForm::Verbatim
            };
            attempt_prob(k, x, &pv, form)?.render_compact(2)
        }
        MetricsCmd::FaultTrials { m, n_dev, x } => fault_trials(m, n_dev, x)?.to_string(),
    };
    writeln!(out, "{value}")?;
    Ok(())
}

#[derive(Serialize)]
struct DesignSummary {
    key_width: usize,
    hardened: bool,
    schedule_length: usize,
    clock_period_ns: f64,
    critical_path_ns: f64,
    min_slack_ns: f64,
    counts: StructureCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    added: Option<StructureCounts>,
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_design(&a.design)?;
    let slack = compute_slack(&d)?;
    let min_slack = slack.slack.values().copied().fold(f64::INFINITY, f64::min);
    let added = match &a.baseline {
        Some(b) => Some(overhead_report(&read_design(b)?, &d)),
        None => None,
    };
    let s = DesignSummary {
        key_width: d.key_width,
        hardened: d.is_hardened(),
        schedule_length: d.schedule_length(),
        clock_period_ns: d.clock_period_ns,
        critical_path_ns: longest_path_ns(&d)?.0,
        min_slack_ns: min_slack,
        counts: StructureCounts::of(&d),
        added: added.as_ref().map(|r| r.added),
    };
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?,
        Format::Csv => {
            let c = &s.counts;
            writeln!(out, "key_width,hardened,critical_path_ns,min_slack_ns,key_muxes,comparators,edu_cells,mask_xors,counters,checkers,states,nodes,nets")?;
            writeln!(
                out,
                "{},{},{:.3},{:.3},{},{},{},{},{},{},{},{},{}",
                s.key_width,
                s.hardened,
                s.critical_path_ns,
                s.min_slack_ns,
                c.key_muxes,
                c.comparators,
                c.edu_cells,
                c.mask_xors,
                c.counters,
                c.checkers,
                c.states,
                c.nodes,
                c.nets
            )?;
        }
        Format::Text => {
            let c = &s.counts;
            let rows: BTreeMap<&str, String> = [
                ("key width", s.key_width.to_string()),
                ("hardened", s.hardened.to_string()),
                ("schedule length", s.schedule_length.to_string()),
                ("critical path", format!("{:.2} / {:.2} ns", s.critical_path_ns, s.clock_period_ns)),
                ("min slack", format!("{:.2} ns", s.min_slack_ns)),
                ("key muxes", c.key_muxes.to_string()),
                ("comparators", format!("{} ({} shadow)", c.comparators, c.shadow_comparators)),
                ("states", c.states.to_string()),
                ("nodes", c.nodes.to_string()),
                ("nets", c.nets.to_string()),
            ]
            .into_iter()
            .collect();
            for (k, v) in rows {
                writeln!(out, "{k:<16} {v}")?;
            }
            if let Some(r) = added {
                writeln!(out, "-- against {}", a.baseline.as_ref().unwrap().display())?;
                write!(out, "{}", r.to_text())?;
            }
        }
    }
    Ok(())
}

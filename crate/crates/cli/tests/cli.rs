use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

struct Project {
    dir: tempfile::TempDir,
}

impl Project {
    fn new() -> Self {
        Project {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dlockout"))
            .args(args)
            .current_dir(self.dir.path())
            .env("DLOCKOUT_STATE_DIR", self.path("state"))
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn err(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
        String::from_utf8(o.stderr).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    fn key(&self) -> String {
        self.json("keys/keyspec.json")["correct_key"]["hex"].as_str().unwrap().to_string()
    }

    /// generate + obfuscate (+ lockout with `extra` flags).
    fn hardened(m: &str, extra: &[&str]) -> Self {
        let p = Project::new();
        p.ok(&["generate", "--kind", "fir", "--size", "16", "--seed", "2", "-o", "d.json"]);
        p.ok(&["obfuscate", "d.json", "-m", m, "--seed", "2", "-o", "o.json"]);
        let mut args = vec!["lockout", "o.json", "-o", "h.json"];
        args.extend_from_slice(extra);
        p.ok(&args);
        p
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = Project::hardened("16", &["--mask", "--seed", "4"]);
    let b = Project::hardened("16", &["--mask", "--seed", "4"]);
    for f in ["d.json", "o.json", "h.json", "keys/keyspec.json"] {
        assert_eq!(a.read(f), b.read(f), "{f} differs");
    }
    let out = a.read("o.json");
    assert!(out.contains("\"key_width\": 16"), "header lacks key width");
}

#[test]
fn lockout_initialises_state_and_refuses_second_provisioning() {
    let p = Project::hardened("8", &[]);
    let s = p.json("state/lockout.json");
    assert_eq!((s["counter"].as_u64(), s["threshold"].as_u64()), (Some(0), Some(5)));
    assert!(p.err(&["lockout", "o.json", "-o", "h2.json"]).contains("--reset-state"));
    assert!(p.err(&["lockout", "h.json", "-o", "h3.json", "--reset-state"]).contains("already"));
    assert!(p.err(&["lockout", "o.json", "-X", "0", "-o", "h4.json", "--reset-state"]).contains("at least 1"));
}

#[test]
fn correct_key_stays_free_and_corrupt_state_fails_closed() {
    let p = Project::hardened("8", &[]);
    let out = p.ok(&["simulate", "h.json", "--key", &p.key()]);
    assert!(out.contains("phase FREE (counter 0/5)"), "{out}");
    std::fs::write(p.path("state/lockout.json"), "{ not json").unwrap();
    assert!(p.err(&["simulate", "h.json", "--key", &p.key()]).contains("refusing to run"));
    // The designer can restore it explicitly.
    let out = p.ok(&["simulate", "h.json", "--key", &p.key(), "--reset-state"]);
    assert!(out.contains("phase FREE"), "{out}");
}

#[test]
fn simulate_writes_trace_and_power() {
    let p = Project::hardened("8", &[]);
    std::fs::write(p.path("in.json"), r#"{"x0": 3, "x1": 200}"#).unwrap();
    p.ok(&[
        "simulate", "h.json", "--key", &p.key(), "--inputs", "in.json", "-o", "t.json", "--power", "p.csv", "--sigma",
        "0.5", "--seed", "1",
    ]);
    let t = p.json("t.json");
    let n = t["snapshots"].as_array().unwrap().len();
    let csv = p.read("p.csv");
    assert!(csv.starts_with("cycle,sample"));
    assert_eq!(csv.lines().count(), n, "one sample per cycle after the initial snapshot, plus header");
    let bad = p.run(&["simulate", "h.json", "--key", "zz"]);
    assert!(!bad.status.success());
}

#[test]
fn brute_force_is_stopped_by_the_threshold() {
    let p = Project::hardened("8", &[]);
    p.ok(&["attack", "brute", "h.json", "--budget", "100", "--stream", "random", "-o", "r.json"]);
    let r = p.json("r.json");
    assert_eq!(r["locked_out"], true);
    assert_eq!(r["attempts_used"], 5);
    assert_eq!(p.json("state/lockout.json")["phase"], "FULL");
}

#[test]
fn attacks_may_not_touch_the_keyspec_directory() {
    let p = Project::hardened("8", &[]);
    std::fs::copy(p.path("h.json"), p.path("keys/h.json")).unwrap();
    assert!(p.err(&["attack", "brute", "keys/h.json"]).contains("policy violation"));
    assert!(p.err(&["attack", "dpa", "h.json", "-o", "keys/r.json"]).contains("policy violation"));
    assert!(p.err(&["attack", "fault", "h.json", "--saf", "0", "-o", "./keys/../keys/r.json"]).contains("policy violation"));
}

#[test]
fn dpa_unmasked_recovers_masked_does_not() {
    let plain = Project::hardened("8", &[]);
    plain.ok(&["attack", "dpa", "h.json", "--traces", "400", "--sigma", "1.0", "--seed", "3", "-o", "r.json"]);
    let r = plain.json("r.json");
    assert_eq!(r["recovered_key"]["hex"].as_str(), Some(plain.key().as_str()), "{r}");
    let masked = Project::hardened("8", &["--mask", "--seed", "9"]);
    masked.ok(&["attack", "dpa", "h.json", "--traces", "400", "--sigma", "1.0", "--seed", "3", "-o", "r.json"]);
    let r = masked.json("r.json");
    assert!(r["recovered_key"].is_null());
    assert!(r["bits"].as_array().unwrap().iter().all(|b| b["masked"] == true));
}

#[test]
fn attack_exit_code_is_zero_on_failure() {
    let p = Project::hardened("8", &["--edu"]);
    let out = p.ok(&["attack", "fault", "h.json", "--saf", "0", "--edu", "--budget", "300", "-o", "f.json"]);
    assert!(out.contains("success false"), "{out}");
    assert!(p.err(&["attack", "fault", "h.json", "--saf", "0", "--no-edu"]).contains("error detection"));
    assert!(p.err(&["attack", "fault", "h.json", "--saf", "0", "--points", "99"]).contains("comparator"));
}

#[test]
fn metrics_commands() {
    let p = Project::new();
    assert_eq!(p.ok(&["metrics", "mtd", "-M", "32", "-N", "6", "-p", "16", "-q", "32", "--r1sq", "0.020"]).trim(), "19200");
    assert_eq!(p.ok(&["metrics", "fault-trials", "-m", "8", "--n-dev", "2", "-X", "5"]).trim(), "32");
    assert_eq!(p.ok(&["metrics", "r0", "-p", "8", "-q", "32"]).trim(), "0.500000");
    let kp = p.ok(&["metrics", "keyprob", "-m", "128", "-n", "128"]);
    assert_eq!(kp.trim(), "0.76e-254");
    let f = p.ok(&["metrics", "attempt", "-K", "1", "-X", "5", "-P", "0.43e-108"]);
    assert_eq!(f.trim(), "0.21e-107");
    let csv = p.ok(&["metrics", "tables", "--format", "csv"]);
    assert!(csv.lines().count() > 24);
    let text = p.ok(&["metrics", "tables"]);
    assert!(text.contains("12800"));
    assert!(p.err(&["metrics", "r0", "-p", "9", "-q", "8"]).contains("p"));
}

#[test]
fn report_diffs_against_baseline() {
    let p = Project::hardened("8", &["--edu"]);
    let out = p.ok(&["report", "h.json", "--baseline", "d.json", "--format", "json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["added"]["key_muxes"], 8);
    assert_eq!(v["added"]["comparators"], 16);
    assert_eq!(v["added"]["states"], 1);
    assert!(v["min_slack_ns"].as_f64().unwrap() >= 0.0);
    let text = p.ok(&["report", "h.json"]);
    assert!(text.contains("hardened         true"), "{text}");
}

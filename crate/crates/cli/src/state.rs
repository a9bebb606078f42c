//! Project state directory: the persisted attempt counter (the device's
//! non-volatile storage), the provisioned device key, and bookkeeping.
//!
//! Everything here fails closed. A missing or unreadable counter is never
//! treated as a fresh device.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dlockout_core::dlockout::LockoutState;
use dlockout_core::KeyBits;
use serde::{Deserialize, Serialize};

pub const STATE_DIR_ENV: &str = "DLOCKOUT_STATE_DIR";
const DEFAULT_DIR: &str = ".dlockout";
const PROJECT_FILE: &str = "project.json";
const LOCKOUT_FILE: &str = "lockout.json";
const DEVICE_FILE: &str = "device.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectState {
    /// Design files by role: `original`, `obfuscated`, `hardened`.
    #[serde(default)]
    pub designs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub keyspec: Option<PathBuf>,
    pub lockout_state: PathBuf,
    pub report_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Key memory of the provisioned device. Attacks drive a device holding
/// this key without ever reading the designer's keyspec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceKey {
    pub key_width: usize,
    pub key: String,
}

impl DeviceKey {
    pub fn new(key: &KeyBits) -> Self {
        DeviceKey {
            key_width: key.len(),
            key: key.to_hex(),
        }
    }

    pub fn bits(&self) -> Result<KeyBits> {
        Ok(KeyBits::from_hex(&self.key, self.key_width)?)
    }
}

/// An open, exclusively locked state directory. The advisory lock is held
/// until the value is dropped.
pub struct StateDir {
    root: PathBuf,
    _lock: File,
}

impl StateDir {
    /// Resolves the directory from the environment (or the default under
    /// the working directory), creating it if needed, and takes the lock.
    pub fn open() -> Result<Self> {
        let root = std::env::var_os(STATE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DIR));
        Self::open_at(&root)
    }

    pub fn open_at(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating state directory {}", root.display()))?;
        let root = fs::canonicalize(root)?;
        let lock = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(root.join(LOCK_FILE))
            .context("opening state lock")?;
        lock.lock().context("locking state directory")?;
        Ok(StateDir { root, _lock: lock })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn project(&self) -> Result<ProjectState> {
        let p = self.root.join(PROJECT_FILE);
        if !p.exists() {
            return Ok(ProjectState {
                lockout_state: self.root.join(LOCKOUT_FILE),
                report_dir: self.root.join("reports"),
                ..Default::default()
            });
        }
        let text = fs::read_to_string(&p)?;
        serde_json::from_str(&text).with_context(|| format!("corrupt project file {}", p.display()))
    }

    pub fn save_project(&self, p: &ProjectState) -> Result<()> {
        write_atomic(&self.root.join(PROJECT_FILE), &serde_json::to_string_pretty(p)?)
    }

    /// Loads the persisted lockout state. Absence or corruption is an
    /// error: the caller must not run the design.
    pub fn load_lockout(&self) -> Result<LockoutState> {
        let path = self.project()?.lockout_state;
        let text = fs::read_to_string(&path).map_err(|e| {
            anyhow!(
                "lockout state {} unavailable ({e}); refusing to run, the device is treated as fully locked",
                path.display()
            )
        })?;
        LockoutState::from_json(&text).map_err(|e| {
            anyhow!(
                "lockout state {} is corrupt ({e}); refusing to run, the device is treated as fully locked",
                path.display()
            )
        })
    }

    pub fn lockout_exists(&self) -> Result<bool> {
        Ok(self.project()?.lockout_state.exists())
    }

    pub fn store_lockout(&self, s: &LockoutState) -> Result<()> {
        write_atomic(&self.project()?.lockout_state, &s.to_json())
    }

    pub fn load_device(&self) -> Result<DeviceKey> {
        let p = self.root.join(DEVICE_FILE);
        let text = fs::read_to_string(&p)
            .with_context(|| format!("no provisioned device in {} (run `lockout` first)", self.root.display()))?;
        serde_json::from_str(&text).with_context(|| format!("corrupt device file {}", p.display()))
    }

    pub fn store_device(&self, d: &DeviceKey) -> Result<()> {
        write_atomic(&self.root.join(DEVICE_FILE), &serde_json::to_string_pretty(d)?)
    }

    /// Rejects any path inside the directory holding the keyspec.
    pub fn check_attack_path(&self, path: &Path) -> Result<()> {
        let Some(ks) = self.project()?.keyspec else {
            return Ok(());
        };
        let Some(dir) = ks.parent() else {
            return Ok(());
        };
        let target = absolute(path)?;
        if target.starts_with(dir) {
            bail!(
                "policy violation: {} lies inside the keyspec directory {}; attacks may not touch it",
                path.display(),
                dir.display()
            );
        }
        Ok(())
    }
}

/// Absolute form of `p` with `.` and `..` removed lexically and the
/// longest existing prefix resolved through symlinks.
pub fn absolute(p: &Path) -> Result<PathBuf> {
    use std::path::Component;
    let joined = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()?.join(p)
    };
    let mut lexical = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                lexical.pop();
            }
            other => lexical.push(other),
        }
    }
    let mut existing = lexical.clone();
    let mut rest = Vec::new();
    while !existing.exists() {
        match existing.file_name() {
            Some(name) => {
                rest.push(name.to_owned());
                existing.pop();
            }
            None => return Ok(lexical),
        }
    }
    let mut out = fs::canonicalize(&existing)?;
    out.extend(rest.iter().rev());
    Ok(out)
}

/// Write to a temporary file in the same directory, flush to disk, then
/// rename over the target. Readers see either the old or the new content.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_or_corrupt_counter_fails_closed() {
        let dir = tempfile::tempdir().unwrap();
        let s = StateDir::open_at(dir.path()).unwrap();
        assert!(s.load_lockout().unwrap_err().to_string().contains("refusing to run"));
        fs::write(dir.path().join(LOCKOUT_FILE), "{\"counter\": 9, \"threshold\": 5").unwrap();
        assert!(s.load_lockout().unwrap_err().to_string().contains("corrupt"));
    }

    #[test]
    fn lockout_round_trips_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let s = StateDir::open_at(dir.path()).unwrap();
        let st = LockoutState::from_parts(3, 5, dlockout_core::dlockout::LockoutPhase::Partial).unwrap();
        s.store_lockout(&st).unwrap();
        assert_eq!(s.load_lockout().unwrap(), st);
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn attack_paths_inside_keyspec_dir_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = StateDir::open_at(&dir.path().join("state")).unwrap();
        let keys = dir.path().join("keys");
        fs::create_dir_all(&keys).unwrap();
        let mut p = s.project().unwrap();
        p.keyspec = Some(absolute(&keys.join("keyspec.json")).unwrap());
        s.save_project(&p).unwrap();
        assert!(s.check_attack_path(&keys.join("x.json")).is_err());
        assert!(s.check_attack_path(&keys.join("sub/../keyspec.json")).is_err());
        assert!(s.check_attack_path(&dir.path().join("nope/../keys/a.json")).is_err());
        assert!(s.check_attack_path(&dir.path().join("design.json")).is_ok());
    }
}

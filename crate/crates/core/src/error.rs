use thiserror::Error;

use crate::design::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported ir_version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid design: {0}")]
    Semantic(ValidationReport),
    #[error("combinational cycle through nets {0:?}")]
    CombinationalCycle(Vec<String>),
    #[error("benchmark size {size} too small (minimum {min})")]
    SizeTooSmall { size: usize, min: usize },
    #[error("need {requested} obfuscation points but only {qualifying} nets qualify")]
    InsufficientPoints { requested: usize, qualifying: usize },
    #[error("no width-compatible decoy for net {0}")]
    NoDecoy(String),
    #[error("design is already masked")]
    AlreadyMasked,
    #[error("point {0} already carries a comparator")]
    AlreadyAnnotated(usize),
    #[error("error detection unit already attached")]
    EduAlreadyAttached,
    #[error("design is already lockout-hardened")]
    AlreadyHardened,
    #[error("threshold must be at least 1, got {0}")]
    InvalidThreshold(u32),
    #[error("{0}")]
    Precondition(String),
    #[error("controller lacks a distinguishable first schedule state: {0}")]
    NoFirstScheduleState(String),
    #[error("key width mismatch: design expects {expected} bits, got {got}")]
    KeyWidth { expected: usize, got: usize },
    #[error("undefined input port {0}")]
    UndefinedInput(String),
    #[error("invalid lockout state: {0}")]
    InvalidLockoutState(String),
    #[error("fault site is not a comparator output: {0}")]
    InvalidFaultSite(String),
    #[error("invalid hex key {0:?}")]
    InvalidHex(String),
    #[error("{param} out of range: {reason}")]
    Range { param: &'static str, reason: String },
}

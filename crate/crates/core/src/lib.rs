//! Design lockout hardening for key-obfuscated RTL designs.
//!
//! The crate models a post-HLS design as a datapath graph plus a controller
//! FSM, inserts key-controlled MUXes on non-critical nets, annotates them
//! with comparators, an attempt counter, a checker FSM and a blackhole
//! controller state, and evaluates the result with a cycle-accurate
//! simulator, brute-force / DPA / fault attack harnesses and the analytic
//! security metrics.

pub mod attacks;
pub mod bits;
pub mod design;
pub mod dlockout;
mod error;
pub mod metrics;
pub mod obfuscate;
pub mod overhead;
pub mod sim;

pub use bits::KeyBits;
pub use error::{Error, Result};

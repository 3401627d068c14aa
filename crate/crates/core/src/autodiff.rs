//! Dense-tensor reverse-mode autodiff and the Adam optimizer.
//!
//! [`tape::Tape`] records each executed op; [`tape::Tape::backward`] replays
//! the record in reverse and accumulates gradients. Everything is double
//! precision, and every op keeps exact shapes — no broadcasting beyond the
//! few patterns the layers need (bias rows, column gates).

pub mod adam;
pub mod check;
pub mod tape;

pub use adam::AdamState;
pub use tape::{AutodiffError, BnState, SpMat, Tape, TId};

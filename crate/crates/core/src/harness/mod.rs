//! Model generators, sweeps, the verification suite and oracle cross-checks.

pub mod models;
pub mod oracle;
pub mod random;
pub mod sweep;
pub mod verify;

//! Simulation library for training time-reversible Hamiltonian systems by
//! echo backpropagation: forward evolution, a weak error kick at the output,
//! phase-conjugate time reversal, a backward pass, and a dissipative decay
//! step that turns the returned momentum kick into a parameter update.
//!
//! The crate is organized around a few pieces:
//!
//! * [`field`] — canonical complex state vectors with region labels,
//! * [`dynamics`] — exactly reversible propagators (split-step lattice NLSE,
//!   coupled-mode photonic blocks, a Kerr cavity array, a mechanical toy),
//! * [`cost`] — sample costs and the physical error-injection kick,
//! * [`engine`] — the echo training step and SGD loop,
//! * [`oracle`] — independent checks: finite differences, echo fidelity,
//!   conservation monitors, and sweep harnesses,
//! * [`experiments`] — ready-to-run models (lattice XOR, photonic CNN on
//!   MNIST, cavity-array XOR, mechanical pinball).

pub mod cost;
pub mod data;
pub mod dst;
pub mod dynamics;
pub mod engine;
pub mod experiments;
pub mod field;
pub mod io;
pub mod oracle;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum HebError {
    #[error("unknown region '{0}'")]
    UnknownRegion(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("duration {duration} is not an integer multiple of dt {dt}")]
    DurationStep { duration: f64, dt: f64 },
    #[error("non-finite values encountered in {0}")]
    NonFinite(String),
    #[error("ancilla must be zero before {0}")]
    AncillaNotZero(String),
    #[error("time step too coarse: {0}")]
    StepSize(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HebError>;

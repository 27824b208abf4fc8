//! Ready-to-run experiments wiring dynamics, costs and the echo engine.

pub mod cavity_xor;
pub mod cnn;
pub mod mechanical;
pub mod xor;

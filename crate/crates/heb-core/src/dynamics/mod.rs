//! Time-reversible propagators.
//!
//! Every propagator here satisfies the echo contract: evolving, phase
//! conjugating, evolving again and conjugating once more returns the initial
//! state up to integrator tolerance. Monolithic propagators (time-independent
//! Hamiltonians) use the identical code path for the backward pass; layered
//! sequences re-apply the same blocks in reverse traversal order, which is
//! what a wave re-entering a stack of optical elements from the output side
//! does physically.

pub mod blocks;
pub mod cavity;
pub mod chi2;
pub mod mechanical;
pub mod nlse;

pub use blocks::{apply_block, Block, Sequence};
pub use cavity::CavityArray;
pub use mechanical::{MechanicalToy, BALL_REGION, RAIL_REGION};
pub use nlse::NlseLattice;

use crate::field::CanonicalField;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Same physical dynamics, traversed from the output side. Identical to
    /// `Forward` for every time-independent Hamiltonian.
    Backward,
}

pub trait Propagator {
    /// Evolve the field through one full pass.
    fn propagate(&self, field: &mut CanonicalField, dir: Direction) -> Result<()>;

    /// The discrete conserved energy of this propagator, when it has one.
    fn energy(&self, field: &CanonicalField) -> Option<f64> {
        let _ = field;
        None
    }
}

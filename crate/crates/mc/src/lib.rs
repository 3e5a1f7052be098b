//! Semi-classical Monte Carlo of repumper-induced heating and loss of atoms
//! in a one-dimensional optical lattice well.
//!
//! Each atom moves classically in one of the two dressed-state potentials
//! of the repumper-driven transition. Spontaneous emission events are drawn
//! as an inhomogeneous Poisson process by thinning, switch the dressed
//! state, and kick the atom by one photon recoil.

pub mod atom;
pub mod ensemble;
pub mod error;
pub mod field;
pub mod map;

pub use atom::{
    accept_event, apply_scatter, atom_rng, init_atom, run_atom, sample_event, step_motion, AtomOutcome,
    AtomTrajectoryState, Channel, MCConfig, RateBounds, RecoilModel,
};
pub use ensemble::{run_ensemble, summarize, EnsembleResult};
pub use error::{MonteCarloError, Result};
pub use field::{Branch, DressedField, TransitionRates};
pub use map::{cell_seed, run_cell, sweep_map, RateCell, RateMap};

//! Physics core for repumper light-shift modelling and Raman sideband
//! spectroscopy of atoms in a 1D optical lattice.
//!
//! All frequencies are angular (rad/s) unless a name says `_hz`.

pub mod error;
pub mod lightshift;
pub mod optim;
pub mod phys;
pub mod spectra;

pub use error::{Error, Result};

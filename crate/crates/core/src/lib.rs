//! Desk-scale numerical laboratory for the Lorenz-gauge Dirac-Maxwell
//! system on finite truncations: an indefinite-metric photon Fock space
//! coupled to a lattice Dirac particle, Dyson-series dynamics, the
//! Gupta-Bleuler physical-subspace pipeline, and the renormalized Coulomb
//! limit, with every identity checked to tolerance or exactly where
//! truncation permits exactness.

pub mod dyson;
pub mod error;
pub mod linalg;

pub mod freefield;
pub mod gupta_bleuler;
pub mod kinematics;

pub mod coulomb;
pub mod coupling;
pub mod dirac;
pub mod fock;

pub use error::{Error, Result};

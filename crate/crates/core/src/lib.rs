//! Simulation of synthetic gauge fields in parametrically driven
//! tight-binding lattices of coupled two-level sites.
//!
//! The crate is organised bottom-up: [`lattice`] describes geometry and
//! Peierls phases, [`model`] the four Hamiltonian variants, [`evolve`] the
//! time evolution, [`calibrate`] the drive calibration, [`experiments`] the
//! interference, Wannier–Stark and Hall protocols and [`semiclassical`] the
//! wave-packet picture.

// NaN must fail the positivity checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod calibrate;
pub mod error;
pub mod evolve;
pub mod exec;
pub mod experiments;
pub mod lattice;
pub mod model;
pub mod semiclassical;
pub mod table;
pub mod units;

pub use error::Error;

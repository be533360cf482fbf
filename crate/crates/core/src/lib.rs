//! Simulation and parameter estimation for a hybrid circuit-QED device: a
//! double-quantum-dot charge qubit and a transmon, both coupled to a
//! flux-tunable SQUID-array resonator, with the transmon read out through a
//! 50 Ω coplanar resonator.
//!
//! * [`operators`]: truncated tensor-product operator algebra.
//! * [`device`]: flux laws for frequencies and couplings.
//! * [`hamiltonian`]: transmon charge-basis solver and full Hamiltonian.
//! * [`spectra`]: eigen-sweeps, avoided crossings, reflection spectra.
//! * [`dynamics`]: Lindblad integration of the two-qubit exchange experiment.
//! * [`estimate`]: Lorentzian dip fits and Nelder–Mead device fits.
//! * [`config`], [`output`], [`cli`]: configuration files, CSV/JSON output and
//!   the experiment runners behind the `hybridqed` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod hamiltonian;
pub mod operators;
pub mod output;
pub mod spectra;

pub use error::{Error, Result};

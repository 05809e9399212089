#![allow(clippy::needless_range_loop)]

//! Numerical core for Bogoliubov excitation spectra of trapped dilute
//! Bose gases: zero-energy scattering and its truncation, Gross-Pitaevskii
//! ground states, one-body operator assembly on condensate-orthogonal
//! bases, quadratic-Hamiltonian diagonalization, a truncated Fock-space
//! brute-force oracle, and many-body level enumeration.

pub mod error;
pub mod fock;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod basis;
pub mod bogoliubov;
pub mod gp;
pub mod gp_box;
pub mod scattering;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};

//! Exact spectrum of the quantum Rabi model
//! `H = -(D/2) sigma_x + a^dag a + g (a^dag + a) sigma_z` (units of the cavity
//! frequency) from the real roots of a one-variable polynomial built on an
//! extended coherent-state ansatz, with a Fock-basis exact-diagonalization
//! oracle for cross-checks.

pub mod cli;
pub mod closed_forms;
pub mod coherent_poly;
pub mod dd;
pub mod ed_oracle;
pub mod error;
pub mod model;
pub mod precision;
pub mod reference;
pub mod rootfinder;
pub mod spectrum_solver;

pub use error::{Error, Result};
pub use model::{validate_params, EnergyLevel, ModelParams, ParitySector, Spectrum};
pub use spectrum_solver::{solve_sector, solve_spectrum, SolveOptions};

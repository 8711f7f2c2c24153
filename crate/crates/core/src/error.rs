use thiserror::Error;

use crate::model::{EnergyLevel, ParitySector};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("InvalidCoupling: g = {g} (need g >= {min})")]
    InvalidCoupling { g: f64, min: f64 },

    #[error("InvalidDetuning: delta = {delta} (need delta >= 0)")]
    InvalidDetuning { delta: f64 },

    #[error("NonFinite: {0}")]
    NonFinite(String),

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),

    #[error("AlphaOutOfRange: |alpha| = {alpha} exceeds {limit}")]
    AlphaOutOfRange { alpha: f64, limit: f64 },

    #[error("TruncationTooSmall: Fock truncation {n_fock} leaves a tail of {tail:e} relative to the peak amplitude")]
    TruncationTooSmall { n_fock: usize, tail: f64 },

    #[error("PrecisionLoss: rounding error bound {bound:e} relative to the result")]
    PrecisionLoss { bound: f64 },

    #[error("NoConvergence: {0}")]
    NoConvergence(String),

    /// A parity sector hit the truncation cap with some of its roots still
    /// moving. `partial` keeps what was found; from `solve_spectrum`,
    /// `requested` and `found` count merged levels.
    #[error("NoConvergence: {parity} sector reached M = {m_max}; {found} of {requested} levels converged")]
    SectorNoConvergence {
        parity: ParitySector,
        m_max: usize,
        requested: usize,
        found: usize,
        partial: Box<Vec<EnergyLevel>>,
    },

    #[error("WindowTooSmall: {parity} sector found {found} of {requested} roots in alpha window [{lo}, {hi}]")]
    WindowTooSmall {
        parity: ParitySector,
        requested: usize,
        found: usize,
        lo: f64,
        hi: f64,
    },

    #[error("TruncationCapExceeded: Fock truncation would exceed {cap}")]
    TruncationCapExceeded { cap: usize },

    #[error("OutsideValidity: first-order discriminant {discriminant} is negative")]
    OutsideValidity { discriminant: f64 },
}

impl Error {
    /// Levels that did converge before a sector gave up, if any.
    pub fn partial_levels(&self) -> Option<&[EnergyLevel]> {
        match self {
            Error::SectorNoConvergence { partial, .. } => Some(partial.as_slice()),
            _ => None,
        }
    }
}

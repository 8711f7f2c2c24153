//! Model parameters, parity sectors and spectral result types.
//!
//! Everything is expressed in units of the cavity frequency (omega = 1). The
//! Hamiltonian is the rotated form
//!
//! ```text
//! H = -(delta/2) sigma_x + a^dag a + g (a^dag + a) sigma_z
//! ```
//!
//! whose parity `Pi = sigma_x exp(i pi a^dag a)` splits the space into an even
//! (+1) and an odd (-1) sector.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coherent_poly::ScaledCoefficients;
use crate::error::{Error, Result};

/// Smallest coupling accepted. The coefficient recurrence divides by g, and
/// below this it carries no usable digits.
pub const G_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    g: f64,
    delta: f64,
}

impl ModelParams {
    pub fn new(g: f64, delta: f64) -> Result<Self> {
        validate_params(g, delta)
    }

    #[inline]
    pub fn g(&self) -> f64 {
        self.g
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Rigorous lower bound on the spectrum: `a^dag a + g(a + a^dag) sigma_z >= -g^2`
    /// and `-(delta/2) sigma_x >= -delta/2`.
    pub fn energy_lower_bound(&self) -> f64 {
        -self.g * self.g - 0.5 * self.delta
    }
}

/// Checks the parameter domain and builds a [`ModelParams`].
pub fn validate_params(g: f64, delta: f64) -> Result<ModelParams> {
    if !g.is_finite() || !delta.is_finite() {
        return Err(Error::NonFinite(format!("g = {g}, delta = {delta}")));
    }
    if g <= 0.0 || g < G_MIN {
        return Err(Error::InvalidCoupling { g, min: G_MIN });
    }
    if delta < 0.0 {
        return Err(Error::InvalidDetuning { delta });
    }
    Ok(ModelParams { g, delta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParitySector {
    Even,
    Odd,
}

impl ParitySector {
    pub const BOTH: [ParitySector; 2] = [ParitySector::Even, ParitySector::Odd];

    /// +1 for even, -1 for odd. Even parity takes the upper sign in every
    /// `±`/`∓` of the coefficient identities.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            ParitySector::Even => 1.0,
            ParitySector::Odd => -1.0,
        }
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        match self {
            ParitySector::Even => 1,
            ParitySector::Odd => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<ParitySector> {
        match sign {
            1 => Some(ParitySector::Even),
            -1 => Some(ParitySector::Odd),
            _ => None,
        }
    }

    /// Whether truncation `m` avoids the spurious lowest root: odd M for the
    /// even sector, even M for the odd sector.
    #[inline]
    pub fn admits_truncation(self, m: usize) -> bool {
        match self {
            ParitySector::Even => m % 2 == 1,
            ParitySector::Odd => m.is_multiple_of(2),
        }
    }

    /// Smallest truncation `>= m` satisfying [`Self::admits_truncation`].
    pub fn adjust_truncation(self, m: usize) -> usize {
        if self.admits_truncation(m) {
            m
        } else {
            m + 1
        }
    }
}

impl fmt::Display for ParitySector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParitySector::Even => f.write_str("even"),
            ParitySector::Odd => f.write_str("odd"),
        }
    }
}

/// One converged eigenstate of the coherent-state method.
#[derive(Debug, Clone)]
pub struct EnergyLevel {
    pub index: usize,
    pub parity: ParitySector,
    pub energy: f64,
    pub alpha: f64,
    pub coefficients: ScaledCoefficients,
    pub truncation_m: usize,
    /// `‖Hψ − Eψ‖/‖ψ‖` against the Fock-basis Hamiltonian; `None` when the
    /// check was skipped or the Fock expansion could not be truncated.
    pub residual_norm: Option<f64>,
    pub converged: bool,
}

/// Bookkeeping for one parity sector of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct SectorMetadata {
    pub parity: ParitySector,
    pub levels_requested: usize,
    pub m_start: usize,
    pub m_final: usize,
    pub alpha_window: (f64, f64),
    pub n_grid: usize,
    pub dropped_roots: Vec<DroppedRoot>,
}

/// A root of the boundary polynomial rejected as unphysical.
#[derive(Debug, Clone, Serialize)]
pub struct DroppedRoot {
    pub alpha: f64,
    pub energy: f64,
    pub m: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverMetadata {
    pub alpha_tol: f64,
    pub root_tol: f64,
    pub sectors: Vec<SectorMetadata>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub params: ModelParams,
    pub levels: Vec<EnergyLevel>,
    pub metadata: SolverMetadata,
}

impl Spectrum {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn ground(&self) -> Option<&EnergyLevel> {
        self.levels.first()
    }

    pub fn all_converged(&self) -> bool {
        self.levels.iter().all(|l| l.converged)
    }
}

/// Sorts ascending by energy, even parity first on exact ties, and rewrites
/// `index` to be contiguous from zero.
pub fn order_levels(levels: &mut [EnergyLevel]) {
    levels.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then_with(|| a.parity.cmp(&b.parity))
            .then_with(|| a.alpha.total_cmp(&b.alpha))
    });
    for (i, level) in levels.iter_mut().enumerate() {
        level.index = i;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_table_parameters() {
        let p = validate_params(0.1, 1.0).unwrap();
        assert_eq!(p.g(), 0.1);
        assert_eq!(p.delta(), 1.0);
    }

    #[test]
    fn rejects_zero_and_tiny_coupling() {
        assert!(matches!(
            validate_params(0.0, 1.0),
            Err(Error::InvalidCoupling { .. })
        ));
        assert!(matches!(
            validate_params(-0.3, 1.0),
            Err(Error::InvalidCoupling { .. })
        ));
        assert!(matches!(
            validate_params(1e-7, 1.0),
            Err(Error::InvalidCoupling { .. })
        ));
        assert!(validate_params(G_MIN, 1.0).is_ok());
    }

    #[test]
    fn rejects_negative_detuning() {
        assert!(matches!(
            validate_params(1.0, -0.5),
            Err(Error::InvalidDetuning { .. })
        ));
        assert!(validate_params(1.0, 0.0).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            validate_params(f64::NAN, 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            validate_params(0.5, f64::INFINITY),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn truncation_parity_rule() {
        assert_eq!(ParitySector::Even.adjust_truncation(19), 19);
        assert_eq!(ParitySector::Even.adjust_truncation(20), 21);
        assert_eq!(ParitySector::Odd.adjust_truncation(19), 20);
        assert_eq!(ParitySector::Odd.adjust_truncation(20), 20);
    }
}

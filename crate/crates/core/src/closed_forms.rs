//! Closed-form special cases: the truncation `M = 2` quadratic and the
//! displaced-oscillator limit.

use serde::Serialize;

use crate::coherent_poly::energy_from_alpha;
use crate::error::{Error, Result};
use crate::model::{ModelParams, ParitySector};

/// Roots of the `M = 2` boundary equation in one sector,
/// `-s D g alpha^2 - (1 + s D) alpha - g = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FodSolution {
    pub parity: ParitySector,
    /// Ascending; empty when the roots are complex.
    pub roots: Vec<f64>,
    pub energies: Vec<f64>,
    pub physical_flags: Vec<bool>,
}

/// Real roots of `a x^2 + b x + c`, ascending, without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    roots.sort_by(f64::total_cmp);
    roots
}

pub fn fod_roots(params: &ModelParams, parity: ParitySector) -> FodSolution {
    let (g, d, s) = (params.g(), params.delta(), parity.sign());
    let roots = quadratic_roots(-s * d * g, -(1.0 + s * d), -g);
    let energies = roots
        .iter()
        .map(|&a| energy_from_alpha(a, params, parity))
        .collect();
    // In the even sector the root of larger |alpha| has E -> -inf as g -> 0.
    let small = roots
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(i, _)| i);
    let physical_flags = (0..roots.len())
        .map(|i| parity == ParitySector::Odd || Some(i) == small)
        .collect();
    FodSolution {
        parity,
        roots,
        energies,
        physical_flags,
    }
}

/// Ground-state energy at `M = 2`, from the even-sector root continuous with
/// `E = -D/2` at vanishing coupling.
pub fn fod_ground_energy(params: &ModelParams) -> Result<f64> {
    let (g, d) = (params.g(), params.delta());
    if d == 0.0 {
        return Ok(-g * g);
    }
    let discriminant = 1.0 - 4.0 * d * g * g / ((1.0 + d) * (1.0 + d));
    if discriminant < 0.0 {
        return Err(Error::OutsideValidity { discriminant });
    }
    let sol = fod_roots(params, ParitySector::Even);
    let i = sol
        .physical_flags
        .iter()
        .position(|&f| f)
        .expect("even sector has a real root when the discriminant is non-negative");
    Ok(sol.energies[i])
}

/// `(m - g^2, 2)` for `m = 0..ceil(n_levels / 2)`.
pub fn strong_coupling_levels(params: &ModelParams, n_levels: usize) -> Vec<(f64, usize)> {
    let g2 = params.g() * params.g();
    (0..n_levels.div_ceil(2))
        .map(|m| (m as f64 - g2, 2))
        .collect()
}

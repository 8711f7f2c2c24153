//! Exact diagonalization in a truncated Fock basis.
//!
//! Within a parity sector the Hamiltonian couples `|n>` only to `|n +- 1>`,
//! so each sector is a symmetric tridiagonal chain
//!
//! ```text
//! d_k = k - s (-1)^k D/2,   e_k = g sqrt(k + 1)
//! ```
//!
//! whose low eigenvalues are found by Sturm-count bisection. The full
//! two-component matrix is kept for applying `H` to vectors and for
//! checking the chain reduction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParitySector};

/// First Fock truncation tried by [`ed_spectrum`].
pub const ED_START_N: usize = 64;
/// Largest Fock truncation [`ed_spectrum`] will use.
pub const ED_MAX_N: usize = 1 << 20;

const BISECTION_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    d: Vec<f64>,
    e: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<TridiagonalOperator> {
        if d.is_empty() || e.len() + 1 != d.len() {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal lengths {} and {} do not match",
                d.len(),
                e.len()
            )));
        }
        if d.iter().chain(&e).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("tridiagonal entry".into()));
        }
        Ok(TridiagonalOperator { d, e })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.e
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE * self.e.iter().fold(1.0f64, |acc, v| acc.max(v * v));
        let mut count = 0;
        let mut q = self.d[0] - x;
        for i in 0..self.d.len() {
            if i > 0 {
                q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }
}

/// Sector chain on Fock levels `0..=n`.
pub fn build_parity_chain(
    params: &ModelParams,
    parity: ParitySector,
    n: usize,
) -> TridiagonalOperator {
    let s = parity.sign();
    let half_delta = 0.5 * params.delta();
    let d = (0..=n)
        .map(|k| {
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            k as f64 - s * alt * half_delta
        })
        .collect();
    let e = (0..n)
        .map(|k| params.g() * ((k + 1) as f64).sqrt())
        .collect();
    TridiagonalOperator { d, e }
}

/// `H` on `|n> (x) {up, down}` for `n = 0..=n_max`, index `2 n + spin`.
#[derive(Debug, Clone)]
pub struct FullMatrix {
    matrix: DMatrix<f64>,
    n_max: usize,
}

impl FullMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        (&self.matrix * x).iter().copied().collect()
    }

    /// All eigenvalues, ascending (dense; intended for small truncations).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

pub fn build_full_matrix(params: &ModelParams, n_max: usize) -> FullMatrix {
    let dim = 2 * (n_max + 1);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let half_delta = 0.5 * params.delta();
    for n in 0..=n_max {
        let up = 2 * n;
        let down = up + 1;
        h[(up, up)] = n as f64;
        h[(down, down)] = n as f64;
        h[(up, down)] = -half_delta;
        h[(down, up)] = -half_delta;
        if n < n_max {
            let t = params.g() * ((n + 1) as f64).sqrt();
            h[(up + 2, up)] = t;
            h[(up, up + 2)] = t;
            h[(down + 2, down)] = -t;
            h[(down, down + 2)] = -t;
        }
    }
    FullMatrix { matrix: h, n_max }
}

/// `sigma_x exp(i pi N)` in the basis of [`build_full_matrix`].
pub fn parity_matrix(n_max: usize) -> DMatrix<f64> {
    let dim = 2 * (n_max + 1);
    let mut p = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..=n_max {
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        p[(2 * n, 2 * n + 1)] = sgn;
        p[(2 * n + 1, 2 * n)] = sgn;
    }
    p
}

/// The `k` smallest eigenvalues, ascending, by bisection on Sturm counts.
pub fn tridiagonal_eigenvalues(op: &TridiagonalOperator, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > op.dim() {
        return Err(Error::InvalidArgument(format!(
            "asked for {k} eigenvalues of a {}-dimensional chain",
            op.dim()
        )));
    }
    let (glo, ghi) = op.gershgorin();
    let span = (ghi - glo).max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(k);
    let mut lo_floor = glo - 1e-12 * span;
    for i in 0..k {
        let mut lo = lo_floor;
        let mut hi = ghi + 1e-12 * span;
        let mut iter = 0;
        loop {
            let mid = 0.5 * (lo + hi);
            let tol = 2.0 * f64::EPSILON * (lo.abs().max(hi.abs()) + span);
            if hi - lo <= tol || mid <= lo || mid >= hi {
                break;
            }
            if iter == BISECTION_CAP {
                return Err(Error::NoConvergence(format!(
                    "eigenvalue {i} bisection stuck on [{lo}, {hi}]"
                )));
            }
            iter += 1;
            if op.count_below(mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        out.push(x);
        lo_floor = lo;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EdLevel {
    pub energy: f64,
    pub parity: ParitySector,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdSpectrum {
    pub levels: Vec<EdLevel>,
    /// Fock truncation of the accepted result.
    pub n_fock: usize,
}

impl EdSpectrum {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }
}

fn merged_levels(params: &ModelParams, n: usize, n_levels: usize) -> Result<Vec<EdLevel>> {
    let mut all = Vec::with_capacity(2 * n_levels);
    for parity in ParitySector::BOTH {
        let chain = build_parity_chain(params, parity, n);
        let k = n_levels.min(chain.dim());
        for energy in tridiagonal_eigenvalues(&chain, k)? {
            all.push(EdLevel { energy, parity });
        }
    }
    all.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.parity.cmp(&b.parity)));
    all.truncate(n_levels);
    Ok(all)
}

/// Lowest `n_levels` merged eigenvalues, doubling the Fock truncation from
/// [`ED_START_N`] until every one moves by less than
/// `rel_tol * max(1, |E|)`.
pub fn ed_spectrum(params: &ModelParams, n_levels: usize, rel_tol: f64) -> Result<EdSpectrum> {
    if n_levels == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rel_tol = {rel_tol}")));
    }
    let mut n = ED_START_N.max(n_levels);
    let mut prev = merged_levels(params, n, n_levels)?;
    loop {
        let next_n = 2 * n;
        if next_n > ED_MAX_N {
            return Err(Error::TruncationCapExceeded { cap: ED_MAX_N });
        }
        let cur = merged_levels(params, next_n, n_levels)?;
        let settled = cur
            .iter()
            .zip(&prev)
            .all(|(a, b)| (a.energy - b.energy).abs() <= rel_tol * b.energy.abs().max(1.0));
        if settled {
            return Ok(EdSpectrum {
                levels: cur,
                n_fock: next_n,
            });
        }
        prev = cur;
        n = next_n;
    }
}

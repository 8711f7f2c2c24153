//! Spectrum of one or both parity sectors by escalating the truncation `M`.
//!
//! Per sector: walk a uniform grid in `alpha` upwards, bisect every sign
//! change of `f_M` until the lowest `k` roots are in hand, and accept a root
//! once `f_{M+2}` also changes sign within `alpha_tol * max(1, |alpha|)` of
//! it. `M` grows in steps of two, with its parity fixed so that the spurious
//! lowest root never appears (odd `M` for the even sector, even `M` for the
//! odd sector).
//!
//! A single recurrence pass gives `f_M` for all `M` at once, so each grid
//! point keeps its sweep until the truncation outgrows it. Points where
//! double-double cannot settle the sign are redone in wider arithmetic; the
//! upward walk keeps those, which cluster at large `alpha`, to a minimum.

use serde::Serialize;

use std::cell::{Cell, RefCell};

use crate::coherent_poly::{
    boundary_sign_from, boundary_sweep, boundary_sweep_with_bits, energy_from_alpha,
    fock_expansion, solve_coefficients, BoundarySweep, ALPHA_LIMIT, ESCALATION_START_BITS,
};
use crate::ed_oracle::{build_full_matrix, FullMatrix};
use crate::error::{Error, Result};
use crate::model::{
    order_levels, DroppedRoot, EnergyLevel, ModelParams, ParitySector, SectorMetadata,
    SolverMetadata, Spectrum,
};
use crate::precision::MAX_BITS;
use crate::rootfinder::{refine_root, uniform_grid, Bracket, RefineError, RootCandidate, Sign};

pub const DEFAULT_ALPHA_TOL: f64 = 1e-8;
pub const DEFAULT_ROOT_TOL: f64 = 1e-13;
pub const DEFAULT_M_START: usize = 19;
pub const DEFAULT_M_MAX: usize = 201;
pub const DEFAULT_N_GRID: usize = 4000;
/// Relative distance below which two roots are taken to be the same.
pub const DEDUP_TOL: f64 = 1e-8;
/// `|c_M| / max |c|` above which the lowest root of a wrong-parity
/// truncation is discarded.
pub const TAIL_RATIO_LIMIT: f64 = 1e-3;

const BISECTION_CAP: usize = 200;
const DENSIFY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Levels wanted: merged for [`solve_spectrum`], per sector for
    /// [`solve_sector`].
    pub n_levels: usize,
    pub alpha_tol: f64,
    pub root_tol: f64,
    /// Raised by one where needed to respect the sector's truncation parity.
    pub m_start: usize,
    pub m_max: usize,
    pub n_grid: usize,
    pub window: Option<(f64, f64)>,
    pub residual_check: bool,
    /// Defaults to `4 M + 50` for a level converged at truncation `M`.
    pub residual_n_fock: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            n_levels: 9,
            alpha_tol: DEFAULT_ALPHA_TOL,
            root_tol: DEFAULT_ROOT_TOL,
            m_start: DEFAULT_M_START,
            m_max: DEFAULT_M_MAX,
            n_grid: DEFAULT_N_GRID,
            window: None,
            residual_check: true,
            residual_n_fock: None,
        }
    }
}

impl SolveOptions {
    pub fn with_levels(n_levels: usize) -> Self {
        SolveOptions {
            n_levels,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if !(self.alpha_tol > 0.0 && self.alpha_tol.is_finite()) {
            return bad(format!("alpha_tol = {}", self.alpha_tol));
        }
        if !(self.root_tol > 0.0 && self.root_tol.is_finite()) {
            return bad(format!("root_tol = {}", self.root_tol));
        }
        if self.m_start < 2 {
            return bad(format!("m_start = {} (need >= 2)", self.m_start));
        }
        if self.m_max < self.m_start {
            return bad(format!(
                "m_max = {} is below m_start = {}",
                self.m_max, self.m_start
            ));
        }
        if self.n_grid < 2 {
            return bad(format!("n_grid = {}", self.n_grid));
        }
        if let Some((lo, hi)) = self.window {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("alpha window [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// Default `alpha` window for the lowest `n_levels` of a sector: energies
/// between the spectral lower bound and `n_levels + D/2`, padded.
pub fn scan_window(params: &ModelParams, n_levels: usize) -> (f64, f64) {
    let (g, d) = (params.g(), params.delta());
    let lo = (-g * g - 0.5 * d - 2.0) / g - 2.0;
    let hi = (n_levels as f64 + 0.5 * d + 2.0) / g + 2.0;
    (lo, hi)
}

#[derive(Debug, Clone)]
pub struct SectorSolution {
    pub levels: Vec<EnergyLevel>,
    pub metadata: SectorMetadata,
}

/// Result of [`filter_physical`].
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<RootCandidate>,
    pub dropped: Vec<DroppedRoot>,
}

/// Drops roots that cannot be eigenstates.
///
/// If `m` has the wrong parity for the sector, the lowest root is dropped
/// when its coefficients fail to decay (`|c_M| / max |c|` above
/// [`TAIL_RATIO_LIMIT`]). Any root whose energy lies below the bound
/// `-g^2 - D/2` is dropped as well. `candidates` may be in any order; `kept` is sorted
/// by `alpha`.
pub fn filter_physical(
    candidates: &[RootCandidate],
    params: &ModelParams,
    m: usize,
    parity: ParitySector,
) -> FilterOutcome {
    let bound = params.energy_lower_bound();
    let slack = 1e-9 * bound.abs().max(1.0);
    let mut out = FilterOutcome::default();
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    if !parity.admits_truncation(m) && !sorted.is_empty() {
        let lowest = sorted[0];
        let tail = solve_coefficients(lowest.alpha, params, parity, m)
            .map(|c| c.tail_ratio())
            .unwrap_or(f64::INFINITY);
        if tail > TAIL_RATIO_LIMIT {
            sorted.remove(0);
            out.dropped.push(DroppedRoot {
                alpha: lowest.alpha,
                energy: energy_from_alpha(lowest.alpha, params, parity),
                m,
                reason: format!("coefficient tail ratio {tail:e} at wrong-parity truncation"),
            });
        }
    }
    for c in sorted {
        let energy = energy_from_alpha(c.alpha, params, parity);
        if energy < bound - slack {
            out.dropped.push(DroppedRoot {
                alpha: c.alpha,
                energy,
                m,
                reason: format!("energy below the spectral bound {bound}"),
            });
        } else {
            out.kept.push(c);
        }
    }
    out
}

/// Sign oracle for one sector and truncation. Remembers the precision the
/// last evaluation needed, since neighbouring points need about the same.
struct SignAt<'a> {
    params: &'a ModelParams,
    parity: ParitySector,
    m: usize,
    bits: Cell<usize>,
    failure: RefCell<Option<Error>>,
}

impl<'a> SignAt<'a> {
    fn new(params: &'a ModelParams, parity: ParitySector, m: usize) -> Self {
        SignAt {
            params,
            parity,
            m,
            bits: Cell::new(0),
            failure: RefCell::new(None),
        }
    }

    fn eval(&self, alpha: f64) -> Option<Sign> {
        // One step below the last precision, so the hint can come back down.
        let last = self.bits.get();
        let start = if last <= ESCALATION_START_BITS {
            0
        } else {
            last / 2
        };
        match boundary_sign_from(alpha, self.params, self.parity, self.m, start) {
            Ok((s, bits)) => {
                self.bits.set(bits);
                s
            }
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                None
            }
        }
    }

    fn take_failure(&self) -> Result<()> {
        match self.failure.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

/// Bisection that falls back to the narrowest resolved bracket when the sign
/// cannot be settled at any precision.
fn refine(oracle: &SignAt, bracket: Bracket, tol: f64) -> Result<RootCandidate> {
    let r = match refine_root(|x| oracle.eval(x), bracket, tol, BISECTION_CAP) {
        Ok(r) => r,
        Err(RefineError::Unresolved {
            bracket,
            evaluations,
        })
        | Err(RefineError::MaxIterations {
            bracket,
            evaluations,
        }) => RootCandidate {
            alpha: bracket.midpoint(),
            bracket,
            width_at_stop: bracket.width(),
            evaluations,
        },
    };
    oracle.take_failure()?;
    Ok(r)
}

/// Checks that `f_{m}` changes sign within `alpha_tol` of `alpha` and, if so,
/// returns the root refined at `m`.
fn confirm(
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
    alpha: f64,
    alpha_tol: f64,
    root_tol: f64,
) -> Result<Option<f64>> {
    let oracle = SignAt::new(params, parity, m);
    let delta = alpha_tol * alpha.abs().max(1.0);
    let (lo, hi) = (alpha - delta, alpha + delta);
    let signs = (oracle.eval(lo), oracle.eval(hi));
    oracle.take_failure()?;
    let found = match signs {
        (Some(Sign::Zero), _) => Some(lo),
        (_, Some(Sign::Zero)) => Some(hi),
        (Some(a), Some(b)) => match Bracket::new(lo, hi, a, b) {
            Some(br) => Some(refine(&oracle, br, root_tol)?.alpha),
            None => None,
        },
        _ => None,
    };
    Ok(found)
}

/// Grid sweep cached at one point: double-double first, then as many bits
/// as it took to resolve the signs asked for so far.
struct Point {
    x: f64,
    dd: Option<BoundarySweep>,
    wide: Option<(usize, BoundarySweep)>,
}

/// Uniform grid in `alpha` whose points are evaluated only when a scan
/// reaches them.
struct Grid {
    points: Vec<Point>,
    m_limit: usize,
}

impl Grid {
    fn new(xs: Vec<f64>, m_limit: usize) -> Self {
        let points = xs
            .into_iter()
            .map(|x| Point {
                x,
                dd: None,
                wide: None,
            })
            .collect();
        Grid { points, m_limit }
    }

    fn sign(
        &mut self,
        i: usize,
        params: &ModelParams,
        parity: ParitySector,
        m: usize,
    ) -> Result<Option<Sign>> {
        let m_limit = self.m_limit;
        let pt = &mut self.points[i];
        if pt.dd.as_ref().is_none_or(|s| s.m_max() < m) {
            let cap = (m + 40).min(m_limit).max(m);
            pt.dd = Some(boundary_sweep(pt.x, params, parity, cap)?);
        }
        if let Some(s) = pt.dd.as_ref().unwrap().at(m).resolved_sign() {
            return Ok(Some(s));
        }
        let mut bits = ESCALATION_START_BITS;
        if let Some((b, sweep)) = &pt.wide {
            if sweep.m_max() >= m {
                if let Some(s) = sweep.at(m).resolved_sign() {
                    return Ok(Some(s));
                }
                bits = 2 * b;
            } else {
                bits = *b;
            }
        }
        let cap = (m + 20).min(m_limit).max(m);
        while bits <= MAX_BITS {
            let sweep = boundary_sweep_with_bits(pt.x, params, parity, cap, bits)?;
            let s = sweep.at(m).resolved_sign();
            pt.wide = Some((bits, sweep));
            if s.is_some() {
                return Ok(s);
            }
            bits *= 2;
        }
        Ok(None)
    }
}

struct Tracked {
    alpha: f64,
    m: usize,
}

enum SectorOutcome {
    Done(Vec<Tracked>),
    /// Accepted roots plus the still-moving ones at the last truncation.
    Stalled {
        accepted: Vec<Tracked>,
        moving: Vec<Tracked>,
        found: usize,
    },
}

/// Fresh physical roots of `f_m` scanning up from the bottom of the grid,
/// stopping once together with `accepted` they number `k`.
fn scan(
    grid: &mut Grid,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
    k: usize,
    accepted: &[Tracked],
    root_tol: f64,
    dropped: &mut Vec<DroppedRoot>,
) -> Result<Vec<RootCandidate>> {
    let oracle = SignAt::new(params, parity, m);
    let mut fresh: Vec<RootCandidate> = Vec::new();
    let mut prev = grid.sign(0, params, parity, m)?;
    for i in 0..grid.points.len() {
        let lo = grid.points[i].x;
        let next = if i + 1 < grid.points.len() {
            grid.sign(i + 1, params, parity, m)?
        } else {
            None
        };
        let bracket = match (prev, next) {
            (Some(Sign::Zero), _) => Some(Bracket::point(lo)),
            (Some(a), Some(b)) => Bracket::new(lo, grid.points[i + 1].x, a, b),
            _ => None,
        };
        prev = next;
        let Some(br) = bracket else { continue };
        if accepted.iter().any(|a| br.contains(a.alpha)) {
            continue;
        }
        let r = refine(&oracle, br, root_tol)?;
        if accepted.iter().any(|a| close(r.alpha, a.alpha, DEDUP_TOL)) {
            continue;
        }
        let filtered = filter_physical(&[r], params, m, parity);
        dropped.extend(filtered.dropped);
        fresh.extend(filtered.kept);
        let below = accepted.iter().filter(|a| a.alpha <= br.hi).count();
        if below + fresh.len() >= k {
            break;
        }
    }
    Ok(fresh)
}

#[allow(clippy::too_many_arguments)]
fn run_sector(
    params: &ModelParams,
    parity: ParitySector,
    opts: &SolveOptions,
    window: (f64, f64),
    n_grid: usize,
    m_start: usize,
    dropped: &mut Vec<DroppedRoot>,
    m_final: &mut usize,
) -> Result<SectorOutcome> {
    let k = opts.n_levels;
    let mut grid = Grid::new(uniform_grid(window.0, window.1, n_grid), opts.m_max);
    let mut accepted: Vec<Tracked> = Vec::new();
    let mut last_moving: Vec<Tracked> = Vec::new();
    let mut found = 0;
    let mut m = m_start;
    while m + 2 <= opts.m_max {
        *m_final = m;
        let fresh = scan(
            &mut grid,
            params,
            parity,
            m,
            k,
            &accepted,
            opts.root_tol,
            dropped,
        )?;

        // Lowest k roots among accepted and fresh candidates.
        let mut pool: Vec<(f64, bool)> = accepted.iter().map(|a| (a.alpha, true)).collect();
        pool.extend(fresh.iter().map(|c| (c.alpha, false)));
        pool.sort_by(|a, b| a.0.total_cmp(&b.0));
        pool.truncate(k);
        found = pool.len();

        last_moving.clear();
        for &(alpha, done) in &pool {
            if done {
                continue;
            }
            match confirm(params, parity, m + 2, alpha, opts.alpha_tol, opts.root_tol)? {
                Some(a) => accepted.push(Tracked { alpha: a, m: m + 2 }),
                None => last_moving.push(Tracked { alpha, m }),
            }
        }
        accepted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        if found == k && last_moving.is_empty() {
            *m_final = m + 2;
            accepted.truncate(k);
            return Ok(SectorOutcome::Done(accepted));
        }
        m += 2;
    }
    Ok(SectorOutcome::Stalled {
        accepted,
        moving: last_moving,
        found,
    })
}

fn make_level(
    params: &ModelParams,
    parity: ParitySector,
    alpha: f64,
    m: usize,
    converged: bool,
) -> Result<EnergyLevel> {
    Ok(EnergyLevel {
        index: 0,
        parity,
        energy: energy_from_alpha(alpha, params, parity),
        alpha,
        coefficients: solve_coefficients(alpha, params, parity, m)?,
        truncation_m: m,
        residual_norm: None,
        converged,
    })
}

/// `level` re-solved at truncation `m` (raised by one if needed for the
/// sector): the root of `f_m` within `alpha_tol` of the level's `alpha`,
/// with its coefficients. `None` if `f_m` has no root that close.
pub fn retruncate(
    level: &EnergyLevel,
    params: &ModelParams,
    m: usize,
    alpha_tol: f64,
) -> Result<Option<EnergyLevel>> {
    let m = level.parity.adjust_truncation(m);
    match confirm(
        params,
        level.parity,
        m,
        level.alpha,
        alpha_tol,
        DEFAULT_ROOT_TOL,
    )? {
        Some(alpha) => {
            let mut out = make_level(params, level.parity, alpha, m, level.converged)?;
            out.index = level.index;
            Ok(Some(out))
        }
        None => Ok(None),
    }
}

/// Lowest `opts.n_levels` levels of one parity sector, ascending.
pub fn solve_sector(
    params: &ModelParams,
    parity: ParitySector,
    opts: &SolveOptions,
) -> Result<SectorSolution> {
    opts.validate()?;
    let window = opts
        .window
        .unwrap_or_else(|| scan_window(params, opts.n_levels));
    let reach = window.0.abs().max(window.1.abs());
    if reach > ALPHA_LIMIT {
        return Err(Error::AlphaOutOfRange {
            alpha: reach,
            limit: ALPHA_LIMIT,
        });
    }
    let m_start = parity.adjust_truncation(opts.m_start);
    if m_start + 2 > opts.m_max {
        return Err(Error::InvalidArgument(format!(
            "m_max = {} leaves no room above m_start = {m_start} in the {parity} sector",
            opts.m_max
        )));
    }
    let mut n_grid = opts.n_grid;
    let mut dropped = Vec::new();
    let mut m_final = m_start;
    let mut outcome = run_sector(
        params,
        parity,
        opts,
        window,
        n_grid,
        m_start,
        &mut dropped,
        &mut m_final,
    )?;
    if matches!(outcome, SectorOutcome::Stalled { found, .. } if found < opts.n_levels) {
        // Too few roots: maybe two share a grid cell.
        n_grid *= DENSIFY;
        dropped.clear();
        outcome = run_sector(
            params,
            parity,
            opts,
            window,
            n_grid,
            m_start,
            &mut dropped,
            &mut m_final,
        )?;
    }
    let metadata = SectorMetadata {
        parity,
        levels_requested: opts.n_levels,
        m_start,
        m_final,
        alpha_window: window,
        n_grid,
        dropped_roots: dropped,
    };
    match outcome {
        SectorOutcome::Done(roots) => {
            let levels = roots
                .iter()
                .map(|t| make_level(params, parity, t.alpha, t.m, true))
                .collect::<Result<Vec<_>>>()?;
            Ok(SectorSolution { levels, metadata })
        }
        SectorOutcome::Stalled { found, .. } if found < opts.n_levels => {
            Err(Error::WindowTooSmall {
                parity,
                requested: opts.n_levels,
                found,
                lo: window.0,
                hi: window.1,
            })
        }
        SectorOutcome::Stalled {
            accepted, moving, ..
        } => {
            let mut partial = Vec::with_capacity(accepted.len() + moving.len());
            for t in &accepted {
                partial.push(make_level(params, parity, t.alpha, t.m, true)?);
            }
            for t in &moving {
                partial.push(make_level(params, parity, t.alpha, t.m, false)?);
            }
            partial.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
            partial.truncate(opts.n_levels);
            let converged = partial.iter().filter(|l| l.converged).count();
            Err(Error::SectorNoConvergence {
                parity,
                m_max: opts.m_max,
                requested: opts.n_levels,
                found: converged,
                partial: Box::new(partial),
            })
        }
    }
}

/// `||H psi - E psi|| / ||psi||` for the level's Fock expansion at truncation
/// `n_fock`. Fails with `PrecisionLoss` when the expansion cancels too much
/// for the result to mean anything.
pub fn residual_norm(level: &EnergyLevel, params: &ModelParams, n_fock: usize) -> Result<f64> {
    let h = build_full_matrix(params, n_fock);
    residual_with(level, &h)
}

/// Largest amplitude rounding error, scaled by the truncation as a proxy
/// for `||H||`, at which a residual still means something.
const RESIDUAL_NOISE_LIMIT: f64 = 1e-10;

fn residual_with(level: &EnergyLevel, h: &FullMatrix) -> Result<f64> {
    let psi = fock_expansion(level.alpha, &level.coefficients, level.parity, h.n_max())?;
    let noise = psi.rounding_error * h.n_max() as f64;
    if noise > RESIDUAL_NOISE_LIMIT {
        return Err(Error::PrecisionLoss { bound: noise });
    }
    let v = psi.interleaved();
    let hv = h.apply(&v);
    let r2: f64 = hv
        .iter()
        .zip(&v)
        .map(|(a, b)| {
            let d = a - level.energy * b;
            d * d
        })
        .sum();
    Ok(r2.sqrt() / psi.norm())
}

/// Largest Fock truncation tried when the default one cannot hold a state.
const RESIDUAL_N_FOCK_CAP: usize = 1024;

fn fill_residuals(
    levels: &mut [EnergyLevel],
    params: &ModelParams,
    opts: &SolveOptions,
) -> Result<()> {
    let mut cache: Option<FullMatrix> = None;
    for level in levels.iter_mut() {
        let mut n_fock = opts
            .residual_n_fock
            .unwrap_or(4 * level.truncation_m + 50)
            .max(level.truncation_m);
        level.residual_norm = loop {
            // The coherent envelope needs n_fock well past alpha^2.
            let fits = (n_fock as f64) >= level.alpha * level.alpha;
            let r = if fits {
                if cache.as_ref().map(|h| h.n_max()) != Some(n_fock) {
                    cache = Some(build_full_matrix(params, n_fock));
                }
                residual_with(level, cache.as_ref().unwrap())
            } else {
                Err(Error::TruncationTooSmall { n_fock, tail: 1.0 })
            };
            match r {
                Ok(r) => break Some(r),
                Err(Error::TruncationTooSmall { .. })
                    if opts.residual_n_fock.is_none() && n_fock < RESIDUAL_N_FOCK_CAP =>
                {
                    n_fock = (2 * n_fock).min(RESIDUAL_N_FOCK_CAP);
                }
                Err(Error::TruncationTooSmall { .. } | Error::PrecisionLoss { .. }) => break None,
                Err(e) => return Err(e),
            }
        };
    }
    Ok(())
}

fn sector_complete(levels: &[EnergyLevel], requested: usize, cutoff: f64) -> bool {
    levels.len() < requested || levels.last().is_none_or(|l| l.energy >= cutoff)
}

/// Lowest `opts.n_levels` levels of the merged spectrum.
///
/// Each sector starts with `ceil(n/2)` levels; a sector whose highest level
/// still falls below the `n`-th merged energy is re-solved with more.
pub fn solve_spectrum(params: &ModelParams, opts: &SolveOptions) -> Result<Spectrum> {
    opts.validate()?;
    let n = opts.n_levels;
    let mut want = [n.div_ceil(2), n.div_ceil(2)];
    let mut sols: [Option<std::result::Result<SectorSolution, Error>>; 2] = [None, None];
    loop {
        for (i, parity) in ParitySector::BOTH.into_iter().enumerate() {
            if sols[i].is_none() {
                let sector_opts = SolveOptions {
                    n_levels: want[i],
                    ..opts.clone()
                };
                let r = solve_sector(params, parity, &sector_opts);
                if let Err(e) = &r {
                    if e.partial_levels().is_none() {
                        return Err(r.unwrap_err());
                    }
                }
                sols[i] = Some(r);
            }
        }
        let levels_of =
            |s: &Option<std::result::Result<SectorSolution, Error>>| -> Vec<EnergyLevel> {
                match s.as_ref().unwrap() {
                    Ok(sol) => sol.levels.clone(),
                    Err(e) => e.partial_levels().unwrap_or(&[]).to_vec(),
                }
            };
        let per_sector = [levels_of(&sols[0]), levels_of(&sols[1])];
        let mut merged: Vec<EnergyLevel> = per_sector.iter().flatten().cloned().collect();
        order_levels(&mut merged);
        let failed = sols.iter().any(|s| s.as_ref().unwrap().is_err());
        if merged.len() < n || failed {
            return finish(params, opts, merged, sols, n);
        }
        let cutoff = merged[n - 1].energy;
        let mut again = false;
        for i in 0..2 {
            if !sector_complete(&per_sector[i], want[i], cutoff) {
                want[i] += 2;
                sols[i] = None;
                again = true;
            }
        }
        if !again {
            return finish(params, opts, merged, sols, n);
        }
    }
}

fn finish(
    params: &ModelParams,
    opts: &SolveOptions,
    mut merged: Vec<EnergyLevel>,
    sols: [Option<std::result::Result<SectorSolution, Error>>; 2],
    n: usize,
) -> Result<Spectrum> {
    merged.truncate(n);
    if opts.residual_check {
        fill_residuals(&mut merged, params, opts)?;
    }
    let mut sectors = Vec::new();
    let mut failure = None;
    for s in sols.into_iter().flatten() {
        match s {
            Ok(sol) => sectors.push(sol.metadata),
            Err(e) => failure = failure.or(Some(e)),
        }
    }
    if let Some(Error::SectorNoConvergence { parity, m_max, .. }) = failure {
        let found = merged.iter().filter(|l| l.converged).count();
        return Err(Error::SectorNoConvergence {
            parity,
            m_max,
            requested: n,
            found,
            partial: Box::new(merged),
        });
    }
    Ok(Spectrum {
        params: *params,
        levels: merged,
        metadata: SolverMetadata {
            alpha_tol: opts.alpha_tol,
            root_tol: opts.root_tol,
            sectors,
        },
    })
}

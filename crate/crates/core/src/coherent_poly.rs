//! Coefficient recurrence for the extended coherent-state ansatz, the
//! boundary function whose real roots give the spectrum, and the Fock-basis
//! expansion of a solution.
//!
//! For a parity sector with sign `s` (+1 even, -1 odd) the coefficients obey
//!
//! ```text
//! c_0 = 1, c_1 = 0
//! val_k   = (k + s D/2) c_k + (alpha + g) c_{k-1} - s (-1)^k (D/2) sum_{j<=k} w_j c_{k-j}
//! c_{k+1} = -val_k / ((k+1) g),       w_j = (2 alpha)^j / j!
//! ```
//!
//! and the boundary function at truncation `M` is `f_M(alpha) = val_M`.
//! Because `val_M` is also what produces `c_{M+1}`, a single forward pass to
//! `m_max` yields `f_M` for every `M <= m_max`.
//!
//! The values of `f_M` come out of cancellations that grow roughly like
//! `((3|alpha| + g) / |alpha - g|)^M`, so the pass runs in double-double
//! arithmetic (or wider, see [`boundary_sign`]) and carries a first-order
//! bound on the accumulated rounding error. A sign is only reported when it
//! exceeds twice that bound.

use serde::Serialize;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::model::{ModelParams, ParitySector};
use crate::precision::{Mp, Real, MAX_BITS};
use crate::rootfinder::Sign;

/// Largest `|alpha|` accepted by any evaluation here.
pub const ALPHA_LIMIT: f64 = 1e6;

/// Running coefficients are rescaled once their magnitude passes this.
const RESCALE_ABOVE: f64 = 1e100;

/// Below this the stored value may already have lost bits to underflow.
const UNDERFLOW_GUARD: f64 = 1e-270;

/// Tail criterion for [`fock_expansion`], relative to the peak amplitude.
pub const FOCK_TAIL_TOL: f64 = 1e-12;

/// `c_0..c_M` divided by their largest magnitude, with the divisor kept as a
/// natural log so that `c_n = values[n] * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledCoefficients {
    values: Vec<f64>,
    log_scale: f64,
    m: usize,
}

impl ScaledCoefficients {
    /// Builds from per-entry signs and natural-log magnitudes of the true
    /// coefficients (`c_0 = 1`, so `logs[0]` should be 0).
    pub(crate) fn from_log_parts(signs: &[i8], logs: &[f64]) -> ScaledCoefficients {
        let peak = logs
            .iter()
            .copied()
            .filter(|l| l.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let values = signs
            .iter()
            .zip(logs)
            .map(|(&s, &l)| {
                if s == 0 || !l.is_finite() {
                    0.0
                } else {
                    s as f64 * (l - peak).exp()
                }
            })
            .collect::<Vec<_>>();
        ScaledCoefficients {
            m: values.len() - 1,
            values,
            log_scale: peak,
        }
    }

    /// Wraps a raw coefficient list, rescaling it so that `c_0 = 1`.
    pub fn from_raw(raw: &[f64]) -> Result<ScaledCoefficients> {
        if raw.is_empty() || raw[0] == 0.0 || raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "coefficients need a finite, nonzero c_0".into(),
            ));
        }
        let c0 = raw[0];
        let signs: Vec<i8> = raw
            .iter()
            .map(|&x| (x / c0).signum() as i8 * (x != 0.0) as i8)
            .collect();
        let logs: Vec<f64> = raw.iter().map(|&x| (x / c0).abs().ln()).collect();
        Ok(Self::from_log_parts(&signs, &logs))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `c_n` in natural units; may overflow to infinity for large scales.
    pub fn true_value(&self, n: usize) -> f64 {
        self.values[n] * self.log_scale.exp()
    }

    /// `|c_n| / max |c|`.
    pub fn normalized_abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.abs()).collect()
    }

    /// `|c_M| / max |c|`.
    pub fn tail_ratio(&self) -> f64 {
        self.values[self.m].abs()
    }

    /// Largest `n` with `|c_n| / max |c| >= threshold`.
    pub fn last_significant(&self, threshold: f64) -> usize {
        self.values
            .iter()
            .rposition(|v| v.abs() >= threshold)
            .unwrap_or(0)
    }
}

/// Sign and size of `f_M(alpha)` together with a bound on its rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryResidual {
    pub sign: Sign,
    /// `ln |f_M(alpha)|`; `-inf` at an exact zero.
    pub log_magnitude: f64,
    /// `ln` of the first-order rounding-error bound on `f_M(alpha)`.
    pub log_error_bound: f64,
}

impl BoundaryResidual {
    /// The sign, if it is larger than the rounding noise.
    pub fn resolved_sign(&self) -> Option<Sign> {
        match self.sign {
            Sign::Zero if self.log_error_bound == f64::NEG_INFINITY => Some(Sign::Zero),
            Sign::Zero => None,
            s if self.log_magnitude > self.log_error_bound + std::f64::consts::LN_2 => Some(s),
            _ => None,
        }
    }

    /// Relative size of the error bound, `exp(log_error_bound - log_magnitude)`.
    pub fn relative_noise(&self) -> f64 {
        (self.log_error_bound - self.log_magnitude).exp()
    }
}

/// `f_M(alpha)` for every `M` in `2..=m_max`, from one recurrence pass.
#[derive(Debug, Clone)]
pub struct BoundarySweep {
    residuals: Vec<BoundaryResidual>,
}

impl BoundarySweep {
    pub fn m_max(&self) -> usize {
        self.residuals.len() + 1
    }

    /// Residual at truncation `m`, for `2 <= m <= m_max`.
    pub fn at(&self, m: usize) -> &BoundaryResidual {
        &self.residuals[m - 2]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BoundaryResidual)> {
        self.residuals.iter().enumerate().map(|(i, r)| (i + 2, r))
    }
}

/// `alpha g - D/2` for even parity, `alpha g + D/2` for odd.
#[inline]
pub fn energy_from_alpha(alpha: f64, params: &ModelParams, parity: ParitySector) -> f64 {
    alpha * params.g() - parity.sign() * 0.5 * params.delta()
}

/// Inverse of [`energy_from_alpha`].
#[inline]
pub fn alpha_from_energy(energy: f64, params: &ModelParams, parity: ParitySector) -> f64 {
    (energy + parity.sign() * 0.5 * params.delta()) / params.g()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite(format!("alpha = {alpha}")));
    }
    if alpha.abs() > ALPHA_LIMIT {
        return Err(Error::AlphaOutOfRange {
            alpha: alpha.abs(),
            limit: ALPHA_LIMIT,
        });
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "truncation M = {m}, need M >= 2"
        )));
    }
    Ok(())
}

/// Power of two that keeps the scaled weights `(2 alpha rho)^j / j!` below
/// `e^128`.
fn recurrence_rho(alpha: f64) -> f64 {
    let x = 2.0 * alpha.abs() / 128.0;
    if x <= 1.0 {
        1.0
    } else {
        2f64.powi(-(x.log2().ceil() as i32))
    }
}

/// State of one forward pass, in variables `c~_n = c_n rho^n exp(-log_scale)`.
struct ForwardPass<T> {
    rho: f64,
    log_scale: f64,
    c: Vec<T>,
    err: Vec<f64>,
}

/// Runs the recurrence for `k = 1..=k_max` in the arithmetic of `proto`,
/// calling `emit(k, residual)` with `f_k` for every `k >= 2`. Coefficients
/// are produced up to `c_{k_max}`.
fn forward_pass<T: Real>(
    proto: &T,
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    k_max: usize,
    scale: f64,
    mut emit: impl FnMut(usize, BoundaryResidual),
) -> Result<ForwardPass<T>> {
    check_alpha(alpha)?;
    let eps = proto.eps();
    let g = params.g();
    let half_delta = 0.5 * params.delta();
    let s = parity.sign();
    let rho = recurrence_rho(alpha);
    let ln_rho = rho.ln();
    let two_alpha_rho = 2.0 * alpha * rho;
    let alpha_g = proto.lift_sum(alpha, g).mul_f64(rho);
    let alpha_g_abs = alpha_g.abs_f64();

    let mut c: Vec<T> = Vec::with_capacity(k_max + 2);
    let mut err = Vec::with_capacity(k_max + 2);
    let mut w: Vec<T> = Vec::with_capacity(k_max + 2);
    let mut w_abs: Vec<f64> = Vec::with_capacity(k_max + 2);
    // c_0 = 1 is held as `scale` with the ledger compensating.
    c.push(proto.lift(scale));
    c.push(proto.lift(0.0));
    err.push(0.0);
    err.push(0.0);
    w.push(proto.lift(1.0));
    w_abs.push(1.0);
    let mut log_scale = -scale.ln();
    let mut c_max = scale;

    for k in 1..=k_max {
        let wk = w[k - 1].mul_f64(two_alpha_rho).div_f64(k as f64);
        w_abs.push(wk.abs_f64());
        w.push(wk);

        let diag = proto.lift_sum(k as f64, s * half_delta);
        let diag_abs = diag.abs_f64();
        let mut conv = proto.lift(0.0);
        let mut conv_abs = 0.0;
        let mut conv_err = 0.0;
        for j in 0..=k {
            let cj = &c[k - j];
            if cj.is_zero() {
                continue;
            }
            conv = conv.add(&w[j].mul(cj));
            conv_abs += w_abs[j] * cj.abs_f64();
            conv_err += w_abs[j] * err[k - j];
        }
        let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
        let val = diag
            .mul(&c[k])
            .add(&alpha_g.mul(&c[k - 1]))
            .sub(&conv.mul_f64(s * sign_k * half_delta));
        if !val.is_finite() {
            return Err(Error::NonFinite(format!(
                "recurrence overflow at k = {k}, alpha = {alpha}"
            )));
        }
        let terms =
            diag_abs * c[k].abs_f64() + alpha_g_abs * c[k - 1].abs_f64() + half_delta * conv_abs;
        let val_err = diag_abs * err[k]
            + alpha_g_abs * err[k - 1]
            + half_delta * conv_err
            + (k as f64 + 4.0) * eps * terms;

        if k >= 2 {
            let mag = val.abs_f64();
            let mut bound = val_err;
            if mag != 0.0 && mag < UNDERFLOW_GUARD {
                bound = bound.max(UNDERFLOW_GUARD);
            }
            let shift = log_scale - k as f64 * ln_rho;
            emit(
                k,
                BoundaryResidual {
                    sign: Sign::from_i8(val.signum()),
                    log_magnitude: val.ln_abs() + shift,
                    log_error_bound: bound.ln() + shift,
                },
            );
        }
        if k == k_max {
            break;
        }

        let next = val.mul_f64(rho).div_f64((k + 1) as f64).div_f64(g).neg();
        let next_abs = next.abs_f64();
        let factor = rho / ((k + 1) as f64 * g);
        c.push(next);
        err.push(factor * val_err + 3.0 * eps * next_abs);
        c_max = c_max.max(next_abs);

        if c_max > RESCALE_ABOVE {
            let p = c_max.log2().floor() as i32;
            let f = 2f64.powi(-p);
            for x in c.iter_mut() {
                *x = x.scale_pow2(f);
            }
            for e in err.iter_mut() {
                *e *= f;
            }
            c_max *= f;
            log_scale += p as f64 * std::f64::consts::LN_2;
        }
    }
    Ok(ForwardPass {
        rho,
        log_scale,
        c,
        err,
    })
}

/// `c_0..c_m` from the forward recurrence.
///
/// The forward direction amplifies any error in `alpha` by roughly `(1/g)^n`,
/// so for coefficients of a computed eigenstate use [`solve_coefficients`].
pub fn coefficient_sequence(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
) -> Result<ScaledCoefficients> {
    check_m(m)?;
    let pass = forward_pass(&Dd::ZERO, alpha, params, parity, m, 1.0, |_, _| {})?;
    let ln_rho = pass.rho.ln();
    let signs: Vec<i8> = pass.c.iter().map(|x| x.signum()).collect();
    let logs: Vec<f64> = pass
        .c
        .iter()
        .enumerate()
        .map(|(n, x)| x.ln_abs() + pass.log_scale - n as f64 * ln_rho)
        .collect();
    Ok(ScaledCoefficients::from_log_parts(&signs, &logs))
}

/// Forward coefficients with their rounding-error bounds, both divided by
/// `max |c|`.
pub fn coefficient_sequence_with_error(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
) -> Result<(ScaledCoefficients, Vec<f64>)> {
    check_m(m)?;
    let pass = forward_pass(&Dd::ZERO, alpha, params, parity, m, 1.0, |_, _| {})?;
    let ln_rho = pass.rho.ln();
    let logs: Vec<f64> = pass
        .c
        .iter()
        .enumerate()
        .map(|(n, x)| x.ln_abs() + pass.log_scale - n as f64 * ln_rho)
        .collect();
    let signs: Vec<i8> = pass.c.iter().map(|x| x.signum()).collect();
    let coeffs = ScaledCoefficients::from_log_parts(&signs, &logs);
    let errs = pass
        .err
        .iter()
        .enumerate()
        .map(|(n, e)| (e.ln() + pass.log_scale - n as f64 * ln_rho - coeffs.log_scale).exp())
        .collect();
    Ok((coeffs, errs))
}

/// `f_m(alpha)`: sign, log-magnitude and rounding-error bound.
pub fn boundary_residual(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
) -> Result<BoundaryResidual> {
    check_m(m)?;
    let mut out = None;
    forward_pass(&Dd::ZERO, alpha, params, parity, m, 1.0, |k, r| {
        if k == m {
            out = Some(r);
        }
    })?;
    Ok(out.expect("forward pass emits every k >= 2"))
}

/// `f_M(alpha)` for all `2 <= M <= m_max` at the cost of one evaluation at
/// `m_max`.
pub fn boundary_sweep(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m_max: usize,
) -> Result<BoundarySweep> {
    check_m(m_max)?;
    let mut residuals = Vec::with_capacity(m_max - 1);
    forward_pass(&Dd::ZERO, alpha, params, parity, m_max, 1.0, |_, r| {
        residuals.push(r)
    })?;
    Ok(BoundarySweep { residuals })
}

/// [`boundary_sweep`] with the stored coefficients multiplied by `scale`
/// and `log_scale` shifted to compensate. The true `f_M` does not depend on
/// `scale`; only when and how often the ledger rescales does.
pub fn boundary_sweep_rescaled(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m_max: usize,
    scale: f64,
) -> Result<BoundarySweep> {
    check_m(m_max)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale = {scale}")));
    }
    let mut residuals = Vec::with_capacity(m_max - 1);
    forward_pass(&Dd::ZERO, alpha, params, parity, m_max, scale, |_, r| {
        residuals.push(r)
    })?;
    Ok(BoundarySweep { residuals })
}

/// [`boundary_sweep`] carried out with `bits` of mantissa instead of
/// double-double.
pub fn boundary_sweep_with_bits(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m_max: usize,
    bits: usize,
) -> Result<BoundarySweep> {
    check_m(m_max)?;
    if !(64..=MAX_BITS).contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "precision {bits} bits outside 64..={MAX_BITS}"
        )));
    }
    let mut residuals = Vec::with_capacity(m_max - 1);
    forward_pass(
        &Mp::zero(bits),
        alpha,
        params,
        parity,
        m_max,
        1.0,
        |_, r| residuals.push(r),
    )?;
    Ok(BoundarySweep { residuals })
}

/// First precision tried once double-double fails to resolve a sign.
pub const ESCALATION_START_BITS: usize = 256;

/// Sign of `f_m(alpha)`, raising the working precision (doubling from
/// [`ESCALATION_START_BITS`] up to [`MAX_BITS`]) until it clears the
/// rounding-error bound. `None` if it never does.
pub fn boundary_sign(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
) -> Result<Option<Sign>> {
    Ok(boundary_sign_from(alpha, params, parity, m, 0)?.0)
}

/// [`boundary_sign`] starting at `start_bits` (0 for double-double). Also
/// returns the precision that settled the sign, 0 meaning double-double.
pub fn boundary_sign_from(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
    start_bits: usize,
) -> Result<(Option<Sign>, usize)> {
    let (r, bits) = boundary_residual_from(alpha, params, parity, m, start_bits)?;
    Ok((r.resolved_sign(), bits))
}

/// [`boundary_residual`] with the precision escalation of [`boundary_sign`]:
/// the first residual whose sign is resolved, or the one at [`MAX_BITS`],
/// together with the precision used (0 for double-double).
pub fn boundary_residual_from(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
    start_bits: usize,
) -> Result<(BoundaryResidual, usize)> {
    check_m(m)?;
    if start_bits == 0 {
        let r = boundary_residual(alpha, params, parity, m)?;
        if r.resolved_sign().is_some() {
            return Ok((r, 0));
        }
    }
    let mut bits = start_bits.clamp(ESCALATION_START_BITS, MAX_BITS);
    loop {
        let mut out = None;
        forward_pass(&Mp::zero(bits), alpha, params, parity, m, 1.0, |k, r| {
            if k == m {
                out = Some(r);
            }
        })?;
        let r = out.expect("forward pass emits every k >= 2");
        if r.resolved_sign().is_some() || bits >= MAX_BITS {
            return Ok((r, bits));
        }
        bits = (2 * bits).min(MAX_BITS);
    }
}

/// The relations `k = 1..=m` with `c_1 = 0` and `c_{m+1} = 0`, as a linear
/// system in `x_n = c_n sigma^n` for `n = 0, 2, 3, .., m` (`2|alpha| sigma <= 1`,
/// row `k` scaled by `sigma^k`).
///
/// Rows and columns are stored in reverse (row `m - k`, column `m - n`, and
/// `x_0` last), which makes the matrix upper Hessenberg. Dropping the last
/// row and column leaves the system for `c_2..c_m` given `c_0`.
struct TruncatedSystem<T> {
    n: usize,
    a: Vec<T>,
    sigma: f64,
}

impl<T: Real> TruncatedSystem<T> {
    fn build(proto: &T, alpha: f64, params: &ModelParams, parity: ParitySector, m: usize) -> Self {
        let g = params.g();
        let half_delta = 0.5 * params.delta();
        let s = parity.sign();
        let sigma = if alpha.abs() >= 0.5 {
            2f64.powi(-((2.0 * alpha.abs()).log2().ceil() as i32))
        } else {
            1.0
        };
        let two_alpha_sigma = 2.0 * alpha * sigma;
        let mut w = Vec::with_capacity(m + 1);
        w.push(proto.lift(1.0));
        for j in 1..=m {
            let next = w[j - 1].mul_f64(two_alpha_sigma).div_f64(j as f64);
            w.push(next);
        }
        let alpha_g = proto.lift_sum(alpha, g).mul_f64(sigma);
        let n = m;
        let col = |idx: usize| if idx == 0 { n - 1 } else { m - idx };
        let mut a = vec![proto.lift(0.0); n * n];
        let mut bump = |i: usize, v: &T| a[i] = a[i].add(v);
        for k in 1..=m {
            let row = (m - k) * n;
            let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
            let conv_scale = -s * sign_k * half_delta;
            if k >= 2 {
                bump(row + col(k), &proto.lift_sum(k as f64, s * half_delta));
            }
            if k - 1 != 1 {
                bump(row + col(k - 1), &alpha_g);
            }
            if k < m {
                bump(
                    row + col(k + 1),
                    &proto.lift((k + 1) as f64).mul_f64(g).div_f64(sigma),
                );
            }
            if half_delta != 0.0 {
                for j in 0..=k {
                    if k - j != 1 {
                        bump(row + col(k - j), &w[j].mul_f64(conv_scale));
                    }
                }
            }
        }
        TruncatedSystem { n, a, sigma }
    }
}

/// In-place LU with partial pivoting of the leading `n x n` block of an upper
/// Hessenberg matrix stored with row stride `stride`, applying the same row
/// operations to `rhs`.
fn hessenberg_eliminate<T: Real>(a: &mut [T], stride: usize, n: usize, rhs: &mut [T]) {
    for c in 0..n.saturating_sub(1) {
        let (r0, r1) = (c * stride, (c + 1) * stride);
        if a[r1 + c].ln_abs() > a[r0 + c].ln_abs() {
            for j in c..n {
                a.swap(r0 + j, r1 + j);
            }
            rhs.swap(c, c + 1);
        }
        if a[r0 + c].is_zero() || a[r1 + c].is_zero() {
            continue;
        }
        let f = a[r1 + c].div(&a[r0 + c]);
        a[r1 + c] = f.lift(0.0);
        for j in c + 1..n {
            a[r1 + j] = a[r1 + j].sub(&f.mul(&a[r0 + j]));
        }
        rhs[c + 1] = rhs[c + 1].sub(&f.mul(&rhs[c]));
    }
}

/// Signs and natural-log magnitudes of `c_0..c_m` from one solve of the
/// truncated system in the arithmetic of `proto`.
fn solve_system<T: Real>(
    proto: &T,
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
) -> Result<ScaledCoefficients> {
    let mut sys = TruncatedSystem::build(proto, alpha, params, parity, m);
    let stride = sys.n;
    let n = stride - 1;
    let mut b: Vec<T> = (0..n).map(|r| sys.a[r * stride + n].neg()).collect();
    hessenberg_eliminate(&mut sys.a, stride, n, &mut b);
    let a = &sys.a;
    let mut x: Vec<T> = vec![proto.lift(0.0); n];
    for i in (0..n).rev() {
        let pivot = &a[i * stride + i];
        if pivot.is_zero() {
            return Err(Error::NoConvergence(format!(
                "singular coefficient system at alpha = {alpha}, M = {m}"
            )));
        }
        let mut acc = b[i].clone();
        for j in i + 1..n {
            acc = acc.sub(&a[i * stride + j].mul(&x[j]));
        }
        x[i] = acc.div(pivot);
    }

    let ln_sigma = sys.sigma.ln();
    let mut signs = vec![1i8, 0];
    let mut logs = vec![0.0, f64::NEG_INFINITY];
    for idx in 2..=m {
        let v = &x[m - idx];
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "coefficient solve at alpha = {alpha}, M = {m}"
            )));
        }
        signs.push(v.signum());
        logs.push(v.ln_abs() - idx as f64 * ln_sigma);
    }
    Ok(ScaledCoefficients::from_log_parts(&signs, &logs))
}

/// Whether two solves agree entry by entry to `COEFF_AGREE` relative, or
/// below [`COEFF_NOISE`] of the largest coefficient.
fn coefficients_agree(a: &ScaledCoefficients, b: &ScaledCoefficients) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| (x - y).abs() <= COEFF_AGREE * y.abs() + COEFF_NOISE)
}

const COEFF_AGREE: f64 = 1e-13;

/// Coefficients of the truncated eigenstate at a root `alpha` of `f_m`.
///
/// Solves the recurrence as a boundary-value problem: `c_0 = 1`, `c_1 = 0`,
/// `c_{m+1} = 0` and the relations for `k = 2..=m`, leaving out the `k = 1`
/// relation (which holds only as far as `alpha` is an exact root). Unlike the
/// forward recurrence this does not amplify the rounding error in `alpha`.
///
/// The convolution term cancels as badly here as in [`boundary_residual`],
/// so the solve is repeated in double-double and then at 256, 512, ... bits
/// until two successive precisions agree.
pub fn solve_coefficients(
    alpha: f64,
    params: &ModelParams,
    parity: ParitySector,
    m: usize,
) -> Result<ScaledCoefficients> {
    check_m(m)?;
    check_alpha(alpha)?;
    let mut prev = solve_system(&Dd::ZERO, alpha, params, parity, m)?;
    let mut bits = ESCALATION_START_BITS;
    loop {
        let next = solve_system(&Mp::zero(bits), alpha, params, parity, m)?;
        if coefficients_agree(&prev, &next) {
            return Ok(next);
        }
        if bits >= MAX_BITS {
            return Err(Error::PrecisionLoss {
                bound: prev
                    .values()
                    .iter()
                    .zip(next.values())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max),
            });
        }
        prev = next;
        bits = (2 * bits).min(MAX_BITS);
    }
}

/// Absolute error of solved coefficients relative to the largest one.
const COEFF_NOISE: f64 = 1e-30;

/// Two-component state on Fock levels `0..=n_fock`, spin up first.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub n_fock: usize,
    /// Bound on the norm of the rounding error in the amplitudes, relative
    /// to the norm of the state. Large when the terms of the expansion
    /// cancel.
    pub rounding_error: f64,
}

impl FockVector {
    pub fn norm(&self) -> f64 {
        self.upper
            .iter()
            .chain(&self.lower)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for x in self.upper.iter_mut().chain(self.lower.iter_mut()) {
                *x /= n;
            }
        }
    }

    /// Interleaved `[up_0, down_0, up_1, down_1, ...]`, the basis order of
    /// [`crate::ed_oracle::build_full_matrix`].
    pub fn interleaved(&self) -> Vec<f64> {
        self.upper
            .iter()
            .zip(&self.lower)
            .flat_map(|(&u, &l)| [u, l])
            .collect()
    }
}

/// `ln n!` for `n = 0..=n_max`.
pub(crate) fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n_max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Expands the ansatz state in the Fock basis, using
/// `(a^dag)^n e^{alpha a^dag}|0> = sum_{m>=n} alpha^{m-n} sqrt(m!)/(m-n)! |m>`.
/// The result has unit norm.
pub fn fock_expansion(
    alpha: f64,
    coeffs: &ScaledCoefficients,
    parity: ParitySector,
    n_fock: usize,
) -> Result<FockVector> {
    check_alpha(alpha)?;
    let big_m = coeffs.m();
    if n_fock < big_m {
        return Err(Error::InvalidArgument(format!(
            "Fock truncation {n_fock} is below the polynomial degree {big_m}"
        )));
    }
    // The coherent envelope peaks near m = alpha^2; a truncation short of it
    // cannot hold the state.
    if (n_fock as f64) < alpha * alpha {
        return Err(Error::TruncationTooSmall { n_fock, tail: 1.0 });
    }
    let lf = ln_factorials(n_fock);
    let ln_a = alpha.abs().ln();
    let neg = alpha < 0.0;
    let cv = coeffs.values();
    let lw = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else if alpha == 0.0 {
            f64::NEG_INFINITY
        } else {
            j as f64 * ln_a - lf[j]
        }
    };

    let mut log_amp = vec![f64::NEG_INFINITY; n_fock + 1];
    let mut log_err = vec![f64::NEG_INFINITY; n_fock + 1];
    let mut sign_amp = vec![0.0f64; n_fock + 1];
    let mut logs = Vec::with_capacity(big_m + 1);
    for m in 0..=n_fock {
        logs.clear();
        let mut peak = f64::NEG_INFINITY;
        for (n, &c) in cv.iter().enumerate().take(m.min(big_m) + 1) {
            if c == 0.0 {
                continue;
            }
            let l = c.abs().ln() + lw(m - n);
            let sg =
                if c < 0.0 { -1.0 } else { 1.0 } * if neg && (m - n) % 2 == 1 { -1.0 } else { 1.0 };
            peak = peak.max(l);
            logs.push((l, sg));
        }
        if peak == f64::NEG_INFINITY {
            continue;
        }
        let mut acc = Dd::ZERO;
        let mut abs_sum = 0.0;
        for &(l, sg) in &logs {
            let t = (l - peak).exp();
            abs_sum += t;
            acc += Dd::from_f64(sg * t);
        }
        // Each term carries an f64 rounding from exp; the coefficients
        // themselves are only good to COEFF_NOISE of the largest one.
        let noise_sum: f64 = (0..=m.min(big_m)).map(|n| (lw(m - n) - peak).exp()).sum();
        log_err[m] =
            (abs_sum * (4.0 * f64::EPSILON) + noise_sum * COEFF_NOISE).ln() + peak + 0.5 * lf[m];
        if acc.is_zero() {
            continue;
        }
        sign_amp[m] = acc.signum() as f64;
        log_amp[m] = acc.ln_abs() + peak + 0.5 * lf[m];
    }

    let top = log_amp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut upper: Vec<f64> = log_amp
        .iter()
        .zip(&sign_amp)
        .map(|(&l, &s)| if s == 0.0 { 0.0 } else { s * (l - top).exp() })
        .collect();
    let tail = upper[n_fock.saturating_sub(1)..]
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if tail > FOCK_TAIL_TOL {
        return Err(Error::TruncationTooSmall { n_fock, tail });
    }
    let s = parity.sign();
    let norm = (2.0 * upper.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let err = (2.0
        * log_err
            .iter()
            .map(|&l| (2.0 * (l - top)).exp())
            .sum::<f64>())
    .sqrt();
    let rounding_error = err / norm + f64::EPSILON;
    for x in upper.iter_mut() {
        *x /= norm;
    }
    let lower = upper
        .iter()
        .enumerate()
        .map(|(m, &u)| if m % 2 == 0 { s * u } else { -s * u })
        .collect();
    Ok(FockVector {
        upper,
        lower,
        n_fock,
        rounding_error,
    })
}

use serde_json::{json, Value};

use super::output::{Cell, Report, Table};
use super::{Method, Outcome, RunConfig};
use crate::closed_forms::fod_ground_energy;
use crate::coherent_poly::{boundary_residual_from, boundary_sign_from, energy_from_alpha};
use crate::ed_oracle::ed_spectrum;
use crate::error::{Error, Result};
use crate::model::{validate_params, EnergyLevel, ParitySector};
use crate::reference::reference_tables;
use crate::rootfinder::{brackets_from_signs, refine_root, uniform_grid, RefineError, Sign};
use crate::spectrum_solver::{retruncate, scan_window, solve_spectrum, DEFAULT_ROOT_TOL};

/// Levels of a solve, accepting a partial result from a sector that ran
/// out of truncations. The flag is false in that case.
fn levels_or_partial(
    r: Result<crate::model::Spectrum>,
) -> Result<(Vec<EnergyLevel>, Option<Value>, bool)> {
    match r {
        Ok(s) => {
            let meta = serde_json::to_value(&s.metadata).ok();
            Ok((s.levels, meta, true))
        }
        Err(e) => match e.partial_levels() {
            Some(p) => {
                eprintln!("warning: {e}");
                Ok((p.to_vec(), None, false))
            }
            None => Err(e),
        },
    }
}

fn tolerances(cfg: &RunConfig) -> Value {
    let o = cfg.solve_options(1);
    json!({ "alpha_tol": o.alpha_tol, "root_tol": o.root_tol })
}

pub(super) fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let n = cfg.flags.levels.unwrap_or(9);
    let (levels, solver, ok) = levels_or_partial(solve_spectrum(&params, &cfg.solve_options(n)))?;
    let mut t = Table::new(
        "data",
        &[
            "index",
            "parity",
            "energy",
            "alpha",
            "truncation_m",
            "residual_norm",
            "converged",
        ],
    );
    for (i, l) in levels.iter().enumerate() {
        t.push(vec![
            i.into(),
            Cell::Int(l.parity.as_i8() as i64),
            l.energy.into(),
            l.alpha.into(),
            l.truncation_m.into(),
            l.residual_norm.into(),
            l.converged.into(),
        ]);
    }
    let complete = ok && levels.len() == n && levels.iter().all(|l| l.converged);
    let mut report = Report::new(t);
    report.meta.insert("tolerances".into(), tolerances(cfg));
    if let Some(s) = solver {
        report.meta.insert("solver".into(), s);
    }
    Ok(Outcome { report, complete })
}

pub(super) fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let f = &cfg.flags;
    let delta = f
        .delta
        .ok_or_else(|| Error::InvalidArgument("`sweep` needs --delta".into()))?;
    let (g_min, g_max) = match (f.g_min, f.g_max) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidArgument(
                "`sweep` needs --g-min and --g-max".into(),
            ))
        }
    };
    if !(g_min > 0.0) || !(g_min < g_max) || !g_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "g range [{g_min}, {g_max}] (need 0 < g-min < g-max)"
        )));
    }
    let steps = f.g_steps.unwrap_or(10);
    let gs = if steps == 1 {
        vec![g_min]
    } else {
        uniform_grid(g_min, g_max, steps - 1)
    };
    let method = f.method.unwrap_or(Method::Exact);
    let want = |m: Method| method == m || method == Method::All;
    let mut columns = vec!["g"];
    for (m, name) in [
        (Method::Exact, "exact"),
        (Method::Fod, "fod"),
        (Method::Ed, "ed"),
    ] {
        if want(m) {
            columns.push(name);
        }
    }
    let mut t = Table::new("data", &columns);
    let mut complete = true;
    let rel_tol = f.rel_tol.unwrap_or(super::DEFAULT_ED_REL_TOL);
    for g in gs {
        let params = validate_params(g, delta)?;
        let mut row = vec![Cell::Float(g)];
        if want(Method::Exact) {
            let opts = crate::SolveOptions {
                residual_check: false,
                ..cfg.solve_options(1)
            };
            let (levels, _, ok) = levels_or_partial(solve_spectrum(&params, &opts))?;
            complete &= ok;
            row.push(
                levels
                    .first()
                    .filter(|l| l.converged)
                    .map(|l| l.energy)
                    .into(),
            );
        }
        if want(Method::Fod) {
            row.push(match fod_ground_energy(&params) {
                Ok(e) => Cell::Float(e),
                Err(Error::OutsideValidity { .. }) => Cell::Null,
                Err(e) => return Err(e),
            });
        }
        if want(Method::Ed) {
            row.push(ed_spectrum(&params, 1, rel_tol)?.levels[0].energy.into());
        }
        t.push(row);
    }
    let mut report = Report::new(t);
    report.meta.insert("tolerances".into(), tolerances(cfg));
    Ok(Outcome { report, complete })
}

pub(super) fn poly(cfg: &RunConfig) -> Result<Outcome> {
    let f = &cfg.flags;
    let params = cfg.params()?;
    let parity: ParitySector = f.parity.unwrap_or(super::Parity::Even).into();
    let m = f.m.unwrap_or(super::DEFAULT_POLY_M);
    let (def_lo, def_hi) = scan_window(&params, m);
    let (lo, hi) = (f.alpha_min.unwrap_or(def_lo), f.alpha_max.unwrap_or(def_hi));
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "empty alpha window [{lo}, {hi}]"
        )));
    }
    let samples = f.samples.unwrap_or(super::DEFAULT_SAMPLES);
    let xs = uniform_grid(lo, hi, samples - 1);

    // Neighbouring samples need about the same working precision.
    let mut hint = 0usize;
    let mut signs = Vec::with_capacity(xs.len());
    let mut t = Table::new("data", &["alpha", "sign", "log10_magnitude"]);
    for &x in &xs {
        let (r, bits) = boundary_residual_from(x, &params, parity, m, hint / 2)?;
        hint = bits;
        let sign = r.resolved_sign();
        signs.push(sign);
        let mag = r.log_magnitude / std::f64::consts::LN_10;
        t.push(vec![
            x.into(),
            sign.map_or(Cell::Null, |s| Cell::Int(s.as_i8() as i64)),
            mag.is_finite().then_some(mag).into(),
        ]);
    }

    let mut roots = Table::new(
        "roots",
        &["alpha", "energy", "bracket_lo", "bracket_hi", "refined"],
    );
    // Inputs were already accepted by the sampling pass, so an error here
    // can only be an unresolved sign.
    let oracle = |a: f64| -> Option<Sign> {
        boundary_sign_from(a, &params, parity, m, 0)
            .ok()
            .and_then(|r| r.0)
    };
    for br in brackets_from_signs(&xs, &signs) {
        let (alpha, refined, b) = match refine_root(oracle, br, DEFAULT_ROOT_TOL, 200) {
            Ok(c) => (c.alpha, true, c.bracket),
            Err(RefineError::MaxIterations { bracket, .. })
            | Err(RefineError::Unresolved { bracket, .. }) => (bracket.midpoint(), false, bracket),
        };
        roots.push(vec![
            alpha.into(),
            energy_from_alpha(alpha, &params, parity).into(),
            b.lo.into(),
            b.hi.into(),
            refined.into(),
        ]);
    }
    let unresolved = signs.iter().filter(|s| s.is_none()).count();
    let mut report = Report::new(t);
    report.meta.insert(
        "poly".into(),
        json!({ "parity": parity.as_i8(), "m": m, "alpha_window": [lo, hi], "unresolved_samples": unresolved }),
    );
    report.extra.push(roots);
    Ok(Outcome {
        report,
        complete: true,
    })
}

pub(super) fn coeffs(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let n = cfg.flags.levels.unwrap_or(6);
    let opts = crate::SolveOptions {
        residual_check: false,
        ..cfg.solve_options(n)
    };
    let (mut levels, _, mut ok) = levels_or_partial(solve_spectrum(&params, &opts))?;
    if let Some(m) = cfg.flags.m {
        let mut moved = Vec::with_capacity(levels.len());
        for l in &levels {
            match retruncate(l, &params, m, opts.alpha_tol)? {
                Some(r) => moved.push(r),
                None => {
                    eprintln!(
                        "warning: level {} has no root within alpha-tol at M = {m}",
                        l.index
                    );
                    ok = false;
                }
            }
        }
        levels = moved;
    }
    let mut t = Table::new("data", &["level", "parity", "truncation_m", "n", "c_norm"]);
    for l in &levels {
        for (k, c) in l.coefficients.normalized_abs().into_iter().enumerate() {
            t.push(vec![
                l.index.into(),
                Cell::Int(l.parity.as_i8() as i64),
                l.truncation_m.into(),
                k.into(),
                c.into(),
            ]);
        }
    }
    let mut report = Report::new(t);
    report.meta.insert("tolerances".into(), tolerances(cfg));
    Ok(Outcome {
        report,
        complete: ok && levels.len() == n,
    })
}

/// Extra levels solved beyond each reference column, so that a printed
/// value can be located in the spectrum when it does not sit at its index.
const TABLE_LOOKAHEAD: usize = 3;

pub(super) fn tables(cfg: &RunConfig) -> Result<Outcome> {
    let f = &cfg.flags;
    let which = f.table.as_deref().unwrap_or("all");
    let tol = f.tol.unwrap_or(super::DEFAULT_TABLE_TOL);
    let rel_tol = f.rel_tol.unwrap_or(super::DEFAULT_ED_REL_TOL);
    let mut t = Table::new(
        "data",
        &[
            "table",
            "delta",
            "g",
            "level",
            "present",
            "ed",
            "reference",
            "reference_ed",
            "rel_diff",
            "residual_norm",
            "pass",
            "nearest_level",
            "nearest_rel_diff",
        ],
    );
    let mut all_pass = true;
    for table in &reference_tables().tables {
        if which != "all" && which != table.id.to_string() {
            continue;
        }
        for col in &table.columns {
            let params = validate_params(col.g, table.delta)?;
            let n = col.present.len();
            let wide = n + TABLE_LOOKAHEAD;
            let (levels, _, _) =
                levels_or_partial(solve_spectrum(&params, &cfg.solve_options(wide)))?;
            let ed = ed_spectrum(&params, n, rel_tol)?;
            for i in 0..n {
                let lvl = levels.get(i).filter(|l| l.converged);
                let reference = col.present[i];
                let rel_of = |e: f64| (e - reference).abs() / reference.abs();
                let rel = lvl.map(|l| rel_of(l.energy));
                let pass = rel.is_some_and(|r| r <= tol);
                all_pass &= pass;
                let nearest = levels
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.converged)
                    .min_by(|a, b| rel_of(a.1.energy).total_cmp(&rel_of(b.1.energy)));
                t.push(vec![
                    Cell::Int(table.id as i64),
                    table.delta.into(),
                    col.g.into(),
                    i.into(),
                    lvl.map(|l| l.energy).into(),
                    ed.levels.get(i).map(|l| l.energy).into(),
                    reference.into(),
                    col.ed[i].into(),
                    rel.into(),
                    lvl.and_then(|l| l.residual_norm).into(),
                    pass.into(),
                    nearest.map_or(Cell::Null, |(j, _)| j.into()),
                    nearest.map(|(_, l)| rel_of(l.energy)).into(),
                ]);
            }
        }
    }
    let mut report = Report::new(t);
    let mut tols = tolerances(cfg);
    tols["table_tol"] = tol.into();
    tols["ed_rel_tol"] = rel_tol.into();
    report.meta.insert("tolerances".into(), tols);
    report.meta.insert(
        "reference_version".into(),
        reference_tables().version.into(),
    );
    Ok(Outcome {
        report,
        complete: all_pass,
    })
}

pub(super) fn ed(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let n = cfg.flags.levels.unwrap_or(9);
    let rel_tol = cfg.flags.rel_tol.unwrap_or(super::DEFAULT_ED_REL_TOL);
    let spec = ed_spectrum(&params, n, rel_tol)?;
    let mut t = Table::new("data", &["index", "parity", "energy", "n_fock"]);
    for (i, l) in spec.levels.iter().enumerate() {
        t.push(vec![
            i.into(),
            Cell::Int(l.parity.as_i8() as i64),
            l.energy.into(),
            spec.n_fock.into(),
        ]);
    }
    let mut report = Report::new(t);
    report
        .meta
        .insert("tolerances".into(), json!({ "rel_tol": rel_tol }));
    Ok(Outcome {
        report,
        complete: true,
    })
}

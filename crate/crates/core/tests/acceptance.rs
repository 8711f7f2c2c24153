//! Acceptance criteria for the solver, the oracle and the CLI.
//!
//! Every criterion runs at its fixed tolerance and prints one PASS/FAIL line.
//! Criteria listed in [`KNOWN_RED`] do not hold as stated (the README has the
//! analysis); the suite requires them to keep failing so that a change in
//! their status is noticed, and requires every other criterion to pass.

use std::io::Write;
use std::time::{Duration, Instant};

use serde_json::Value;

use rabi_exact::closed_forms::{fod_ground_energy, fod_roots, strong_coupling_levels};
use rabi_exact::coherent_poly::{
    boundary_residual, boundary_sign, boundary_sweep, boundary_sweep_rescaled,
};
use rabi_exact::ed_oracle::{
    build_full_matrix, build_parity_chain, ed_spectrum, parity_matrix, tridiagonal_eigenvalues,
};
use rabi_exact::reference::reference_tables;
use rabi_exact::rootfinder::{refine_root, Bracket};
use rabi_exact::spectrum_solver::{retruncate, scan_window, DEFAULT_ALPHA_TOL};
use rabi_exact::{solve_spectrum, validate_params, EnergyLevel, ParitySector, SolveOptions};

const KNOWN_RED: &[u32] = &[1, 3, 5, 6];

const TABLE_TOL: f64 = 1e-6;
const TABLE_RUNTIME: Duration = Duration::from_secs(10);
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_LEVELS: usize = 12;
const ORACLE_RUNTIME: Duration = Duration::from_secs(120);
const ORACLE_G: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0];
const ORACLE_DELTA: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
const FOD_TOL: f64 = 1e-3;
const LIMIT_TOL: f64 = 1e-9;
const DECAY_THRESHOLD: f64 = 1e-6;
const DECAY_CASES: [(f64, usize); 3] = [(0.1, 40), (0.5, 20), (1.0, 10)];
const RESIDUAL_TOL: f64 = 1e-8;
const STRUCTURE_TOL: f64 = 1e-12;
const ED_REL_TOL: f64 = 1e-12;
const SOLVE_BUDGET: Duration = Duration::from_secs(1);
const ED_BUDGET: Duration = Duration::from_secs(5);

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Residuals of converged levels, gathered for criterion 6.
#[derive(Default)]
struct Residuals {
    total: usize,
    small: usize,
    missing: usize,
    worst: f64,
}

impl Residuals {
    fn add(&mut self, r: Option<f64>) {
        self.total += 1;
        match r {
            Some(r) if r <= RESIDUAL_TOL => self.small += 1,
            Some(r) => self.worst = self.worst.max(r),
            None => self.missing += 1,
        }
    }
}

fn table_reproduction(res: &mut Residuals) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tables.json");
    let start = Instant::now();
    let code = rabi_exact::cli::run([
        "rabi-exact",
        "tables",
        "--table",
        "all",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = report["data"].as_array().unwrap();
    let mut passed = 0;
    let mut eigen = 0;
    let mut failed = Vec::new();
    for row in rows {
        if row["pass"] == Value::Bool(true) {
            passed += 1;
        } else {
            failed.push(format!(
                "T{} g={} E{}",
                row["table"], row["g"], row["level"]
            ));
        }
        if row["nearest_rel_diff"]
            .as_f64()
            .is_some_and(|d| d <= TABLE_TOL)
        {
            eigen += 1;
        }
        if !row["present"].is_null() {
            res.add(row["residual_norm"].as_f64());
        }
    }
    let cells = reference_tables().cell_count();
    Verdict {
        id: 1,
        name: "table reproduction",
        pass: code == 0 && passed == cells && rows.len() == cells && elapsed < TABLE_RUNTIME,
        detail: format!(
            "{passed}/{cells} cells by level index, exit {code}, {:.1}s; \
             {eigen}/{cells} printed values lie within tolerance of some computed level; failing: {}",
            elapsed.as_secs_f64(),
            failed.join(", ")
        ),
    }
}

fn oracle_equivalence(res: &mut Residuals) -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for &g in &ORACLE_G {
        for &delta in &ORACLE_DELTA {
            let params = validate_params(g, delta).unwrap();
            let spec = solve_spectrum(&params, &SolveOptions::with_levels(ORACLE_LEVELS));
            let ed = ed_spectrum(&params, ORACLE_LEVELS, ED_REL_TOL)
                .unwrap()
                .energies();
            let levels = match spec {
                Ok(s) => s.levels,
                Err(e) => {
                    bad.push(format!("(g={g}, D={delta}): {e}"));
                    continue;
                }
            };
            for l in levels.iter().filter(|l| l.converged) {
                res.add(l.residual_norm);
            }
            if levels.len() != ORACLE_LEVELS || levels.iter().any(|l| !l.converged) {
                bad.push(format!("(g={g}, D={delta}): {} levels", levels.len()));
                continue;
            }
            for (l, e) in levels.iter().zip(&ed) {
                let d = rel(l.energy, *e);
                worst = worst.max(d);
                if d > ORACLE_TOL {
                    bad.push(format!("(g={g}, D={delta}) E{}: {d:.1e}", l.index));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        id: 2,
        name: "method vs oracle",
        pass: bad.is_empty() && elapsed < ORACLE_RUNTIME,
        detail: format!(
            "{} points x {ORACLE_LEVELS} levels, worst {worst:.1e}, {:.1}s{}",
            ORACLE_G.len() * ORACLE_DELTA.len(),
            elapsed.as_secs_f64(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join(", "))
            }
        ),
    }
}

fn fod_accuracy() -> Verdict {
    let mut worst = 0.0f64;
    let mut over = Vec::new();
    for delta in [0.5, 1.0, 1.5] {
        for g in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let params = validate_params(g, delta).unwrap();
            let fod = fod_ground_energy(&params).unwrap();
            let exact = ed_spectrum(&params, 1, ED_REL_TOL).unwrap().levels[0].energy;
            let d = (fod - exact).abs() / exact.abs();
            worst = worst.max(d);
            if d >= FOD_TOL {
                over.push(format!("g={g}, D={delta}: {d:.3e}"));
            }
        }
    }
    Verdict {
        id: 3,
        name: "first-order ground state",
        pass: over.is_empty(),
        detail: format!(
            "worst relative difference {worst:.3e}; at or above {FOD_TOL:e}: [{}]",
            over.join("; ")
        ),
    }
}

fn zero_detuning() -> Verdict {
    let mut worst = 0.0f64;
    let mut ok = true;
    for g in [0.5, 1.0, 2.0] {
        let params = validate_params(g, 0.0).unwrap();
        let got = solve_spectrum(&params, &SolveOptions::with_levels(6))
            .unwrap()
            .energies();
        let ed = ed_spectrum(&params, 6, ED_REL_TOL).unwrap().energies();
        let closed: Vec<f64> = strong_coupling_levels(&params, 6)
            .into_iter()
            .flat_map(|(e, mult)| std::iter::repeat_n(e, mult))
            .collect();
        ok &= got.len() == 6 && closed.len() == 6;
        for m in 0..got.len().min(6) {
            let exact = (m / 2) as f64 - g * g;
            for v in [got[m], ed[m], closed[m]] {
                worst = worst.max((v - exact).abs());
            }
        }
    }
    Verdict {
        id: 4,
        name: "zero-detuning limit",
        pass: ok && worst <= LIMIT_TOL,
        detail: format!("worst absolute deviation from m - g^2: {worst:.1e}"),
    }
}

/// Last `n` with `|c_n| / max |c|` at or above the threshold, for the
/// lowest six levels at `D = 1` re-solved at the truncations 59 (even) and
/// 60 (odd).
fn decay_extent(g: f64) -> Vec<Option<usize>> {
    let params = validate_params(g, 1.0).unwrap();
    let opts = SolveOptions {
        residual_check: false,
        ..SolveOptions::with_levels(6)
    };
    let spec = solve_spectrum(&params, &opts).unwrap();
    spec.levels
        .iter()
        .map(|l| {
            retruncate(l, &params, 59, DEFAULT_ALPHA_TOL)
                .ok()
                .flatten()
                .map(|r| r.coefficients.last_significant(DECAY_THRESHOLD))
        })
        .collect()
}

fn coefficient_decay() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (g, limit) in DECAY_CASES {
        let ext = decay_extent(g);
        pass &= ext.len() == 6 && ext.iter().all(|e| e.is_some_and(|n| n <= limit));
        let shown: Vec<String> = ext
            .iter()
            .map(|e| e.map_or("-".to_string(), |n| n.to_string()))
            .collect();
        parts.push(format!("g={g} (limit {limit}): [{}]", shown.join(", ")));
    }
    Verdict {
        id: 5,
        name: "coefficient decay",
        pass,
        detail: format!("last n above {DECAY_THRESHOLD:e}: {}", parts.join("; ")),
    }
}

fn residual_validation(res: &Residuals) -> Verdict {
    Verdict {
        id: 6,
        name: "residual validation",
        pass: res.total > 0 && res.small == res.total,
        detail: format!(
            "{} of {} converged levels at or below {RESIDUAL_TOL:e}, {} without a residual, worst {:.2e}",
            res.small, res.total, res.missing, res.worst
        ),
    }
}

fn parity_commutes() -> Result<(), String> {
    for (g, delta) in [(0.1, 1.0), (0.7, 0.3), (2.0, 1.5)] {
        let params = validate_params(g, delta).unwrap();
        for n_max in 0..=30 {
            let h = build_full_matrix(&params, n_max);
            let p = parity_matrix(n_max);
            let c = h.matrix() * &p - &p * h.matrix();
            if c.iter().any(|&x| x != 0.0) {
                return Err(format!("[H, P] != 0 at g={g}, D={delta}, N={n_max}"));
            }
        }
    }
    Ok(())
}

fn chains_match_full_basis() -> Result<f64, String> {
    let mut worst = 0.0f64;
    for (g, delta) in [(0.1, 1.0), (0.5, 0.5), (1.0, 1.5), (2.0, 0.0)] {
        let params = validate_params(g, delta).unwrap();
        for n in 1..=20 {
            let mut chains = Vec::new();
            for parity in ParitySector::BOTH {
                let op = build_parity_chain(&params, parity, n);
                chains.extend(tridiagonal_eigenvalues(&op, op.dim()).map_err(|e| e.to_string())?);
            }
            chains.sort_by(f64::total_cmp);
            let full = build_full_matrix(&params, n).eigenvalues();
            if full.len() != chains.len() {
                return Err(format!("dimension mismatch at N={n}"));
            }
            for (a, b) in chains.iter().zip(&full) {
                worst = worst.max(rel(*a, *b));
            }
        }
    }
    if worst <= STRUCTURE_TOL {
        Ok(worst)
    } else {
        Err(format!("chain/full eigenvalues differ by {worst:.1e}"))
    }
}

fn fod_roots_match_boundary() -> Result<usize, String> {
    let mut count = 0;
    for g in [0.1, 0.5, 1.0] {
        for delta in [0.5, 1.0, 1.5] {
            let params = validate_params(g, delta).unwrap();
            for parity in ParitySector::BOTH {
                let sign = |a: f64| boundary_sign(a, &params, parity, 2).ok().flatten();
                let roots = fod_roots(&params, parity).roots;
                if let [a, b] = roots[..] {
                    if rel(a, b) <= STRUCTURE_TOL {
                        // Double root: f_2 touches zero without changing sign.
                        let f =
                            boundary_residual(a, &params, parity, 2).map_err(|e| e.to_string())?;
                        if f.log_magnitude > STRUCTURE_TOL.ln() {
                            return Err(format!(
                                "f_2({a}) = e^{} at a double root",
                                f.log_magnitude
                            ));
                        }
                        count += 2;
                        continue;
                    }
                }
                for &r in &roots {
                    let w = 1e-6 * r.abs().max(1.0);
                    let (lo, hi) = (r - w, r + w);
                    let br = match (sign(lo), sign(hi)) {
                        (Some(a), Some(b)) => Bracket::new(lo, hi, a, b),
                        _ => None,
                    }
                    .ok_or(format!(
                        "no sign change of f_2 around {r} (g={g}, D={delta}, {parity})"
                    ))?;
                    let root = refine_root(sign, br, 1e-15, 200)
                        .map_err(|e| format!("{e:?}"))?
                        .alpha;
                    if rel(root, r) > STRUCTURE_TOL {
                        return Err(format!("f_2 root {root} vs closed form {r}"));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

fn ledger_scale_invariance() -> Result<usize, String> {
    let mut compared = 0;
    for (g, delta) in [(0.1, 1.0), (0.5, 0.5), (1.0, 1.5)] {
        let params = validate_params(g, delta).unwrap();
        let (lo, hi) = scan_window(&params, 9);
        for parity in ParitySector::BOTH {
            for i in 0..=40 {
                let alpha = lo + (hi - lo) * i as f64 / 40.0;
                let base = boundary_sweep(alpha, &params, parity, 60).map_err(|e| e.to_string())?;
                for scale in [1e-250, 2.5e-37, 7.0, 1e120, 1e280] {
                    let s = boundary_sweep_rescaled(alpha, &params, parity, 60, scale)
                        .map_err(|e| e.to_string())?;
                    for (m, r) in base.iter() {
                        let (a, b) = (r.resolved_sign(), s.at(m).resolved_sign());
                        if a.is_some() && b.is_some() {
                            if a != b {
                                return Err(format!(
                                    "sign flips at alpha={alpha}, M={m}, scale {scale:e}"
                                ));
                            }
                            compared += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(compared)
}

fn escalation_stability() -> Result<f64, String> {
    let mut worst = 0.0f64;
    for g in [0.1, 0.5, 1.0] {
        for delta in [0.5, 1.0, 1.5] {
            let params = validate_params(g, delta).unwrap();
            let opts = SolveOptions {
                residual_check: false,
                ..SolveOptions::with_levels(6)
            };
            let levels: Vec<EnergyLevel> = solve_spectrum(&params, &opts)
                .map_err(|e| e.to_string())?
                .levels;
            for l in &levels {
                let up = retruncate(l, &params, l.truncation_m + 10, DEFAULT_ALPHA_TOL)
                    .map_err(|e| e.to_string())?
                    .ok_or(format!("E{} lost at M+10 (g={g}, D={delta})", l.index))?;
                let d = rel(up.alpha, l.alpha);
                worst = worst.max(d);
                if d >= DEFAULT_ALPHA_TOL {
                    return Err(format!(
                        "E{} alpha moves {d:.1e} (g={g}, D={delta})",
                        l.index
                    ));
                }
            }
        }
    }
    Ok(worst)
}

fn structural_invariants() -> Verdict {
    let mut fails = Vec::new();
    let mut notes = Vec::new();
    match parity_commutes() {
        Ok(()) => notes.push("[H,P]=0 exactly for N<=30".to_string()),
        Err(e) => fails.push(e),
    }
    match chains_match_full_basis() {
        Ok(w) => notes.push(format!("chains vs full N<=20 {w:.1e}")),
        Err(e) => fails.push(e),
    }
    match fod_roots_match_boundary() {
        Ok(n) => notes.push(format!("{n} first-order roots on f_2")),
        Err(e) => fails.push(e),
    }
    match ledger_scale_invariance() {
        Ok(n) => notes.push(format!("{n} rescaled signs agree")),
        Err(e) => fails.push(e),
    }
    match escalation_stability() {
        Ok(w) => notes.push(format!("M+10 alpha shift {w:.1e}")),
        Err(e) => fails.push(e),
    }
    Verdict {
        id: 7,
        name: "structural invariants",
        pass: fails.is_empty(),
        detail: if fails.is_empty() {
            notes.join("; ")
        } else {
            fails.join("; ")
        },
    }
}

fn alpha_monotonicity() -> Verdict {
    let alphas: Vec<f64> = [0.1, 0.5, 1.0]
        .iter()
        .map(|&g| {
            let params = validate_params(g, 1.0).unwrap();
            let opts = SolveOptions {
                residual_check: false,
                ..SolveOptions::with_levels(1)
            };
            solve_spectrum(&params, &opts).unwrap().levels[0].alpha
        })
        .collect();
    Verdict {
        id: 8,
        name: "ground-state alpha monotonicity",
        pass: alphas.windows(2).all(|w| w[1] < w[0]),
        detail: format!("alpha at g = 0.1, 0.5, 1.0: {alphas:.6?}"),
    }
}

/// Stand-in for the CPU-time comparison: per-point budgets at the table
/// parameters.
fn timing() -> Verdict {
    let mut slowest = (Duration::ZERO, Duration::ZERO);
    for table in &reference_tables().tables {
        for col in &table.columns {
            let params = validate_params(col.g, table.delta).unwrap();
            let t = Instant::now();
            solve_spectrum(&params, &SolveOptions::with_levels(col.present.len())).unwrap();
            slowest.0 = slowest.0.max(t.elapsed());
            let t = Instant::now();
            ed_spectrum(&params, col.present.len(), ED_REL_TOL).unwrap();
            slowest.1 = slowest.1.max(t.elapsed());
        }
    }
    Verdict {
        id: 9,
        name: "per-point runtime",
        pass: slowest.0 < SOLVE_BUDGET && slowest.1 < ED_BUDGET,
        detail: format!(
            "slowest solve {:.3}s (budget {}s), slowest oracle {:.3}s (budget {}s)",
            slowest.0.as_secs_f64(),
            SOLVE_BUDGET.as_secs(),
            slowest.1.as_secs_f64(),
            ED_BUDGET.as_secs()
        ),
    }
}

#[test]
fn acceptance() {
    let mut res = Residuals::default();
    let verdicts = vec![
        table_reproduction(&mut res),
        oracle_equivalence(&mut res),
        fod_accuracy(),
        zero_detuning(),
        coefficient_decay(),
        residual_validation(&res),
        structural_invariants(),
        alpha_monotonicity(),
        timing(),
    ];
    // Written past the harness capture so a plain `cargo test` shows the table.
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    let mut unexpected = Vec::new();
    for v in &verdicts {
        let known = KNOWN_RED.contains(&v.id);
        writeln!(
            out,
            "criterion {} {:<32} {}{}  {}",
            v.id,
            v.name,
            if v.pass { "PASS" } else { "FAIL" },
            if known { " (known)" } else { "" },
            v.detail
        )
        .unwrap();
        if v.pass == known {
            unexpected.push(v.id);
        }
    }
    assert!(
        unexpected.is_empty(),
        "criteria {unexpected:?} changed status; update KNOWN_RED and the README"
    );
}

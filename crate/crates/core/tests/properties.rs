use proptest::prelude::*;

use rabi_exact::coherent_poly::{
    boundary_residual, boundary_sweep, boundary_sweep_rescaled, coefficient_sequence,
    energy_from_alpha, fock_expansion, solve_coefficients,
};
use rabi_exact::ed_oracle::{build_parity_chain, tridiagonal_eigenvalues};
use rabi_exact::rootfinder::{refine_root, scan_brackets, uniform_grid, Bracket, Sign};
use rabi_exact::spectrum_solver::{solve_sector, DEFAULT_ALPHA_TOL};
use rabi_exact::{solve_spectrum, validate_params, ParitySector, SolveOptions};

fn parity() -> impl Strategy<Value = ParitySector> {
    prop_oneof![Just(ParitySector::Even), Just(ParitySector::Odd)]
}

fn quick(n: usize) -> SolveOptions {
    SolveOptions {
        residual_check: false,
        ..SolveOptions::with_levels(n)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levels_carry_their_energy_relation_and_order(
        g in 0.2f64..1.5,
        delta in 0.0f64..2.0,
        n in 1usize..6,
    ) {
        let params = validate_params(g, delta).unwrap();
        let spec = solve_spectrum(&params, &quick(n)).unwrap();
        prop_assert_eq!(spec.levels.len(), n);
        for (i, l) in spec.levels.iter().enumerate() {
            prop_assert_eq!(l.index, i);
            prop_assert_eq!(l.energy, energy_from_alpha(l.alpha, &params, l.parity));
            prop_assert_eq!(l.energy, l.alpha * g - l.parity.sign() * delta / 2.0);
        }
        for w in spec.levels.windows(2) {
            prop_assert!(w[0].energy <= w[1].energy);
        }
    }

    #[test]
    fn sectors_are_independent(g in 0.2f64..1.5, delta in 0.1f64..2.0) {
        let params = validate_params(g, delta).unwrap();
        let alphas = |p: ParitySector| -> Vec<f64> {
            solve_sector(&params, p, &quick(3)).unwrap().levels.iter().map(|l| l.alpha).collect()
        };
        let odd_first = alphas(ParitySector::Odd);
        let even_then = alphas(ParitySector::Even);
        let (even, odd) = std::thread::scope(|s| {
            let e = s.spawn(|| alphas(ParitySector::Even));
            let o = s.spawn(|| alphas(ParitySector::Odd));
            (e.join().unwrap(), o.join().unwrap())
        });
        prop_assert_eq!(even, even_then);
        prop_assert_eq!(odd, odd_first);
    }

    #[test]
    fn ledger_scale_does_not_change_signs(
        g in 0.05f64..2.0,
        delta in 0.0f64..2.0,
        alpha in -20.0f64..40.0,
        parity in parity(),
        log_scale in -600.0f64..600.0,
    ) {
        let params = validate_params(g, delta).unwrap();
        let scale = log_scale.exp();
        let base = boundary_sweep(alpha, &params, parity, 50).unwrap();
        let moved = boundary_sweep_rescaled(alpha, &params, parity, 50, scale).unwrap();
        for (m, r) in base.iter() {
            let (a, b) = (r.resolved_sign(), moved.at(m).resolved_sign());
            if a.is_some() && b.is_some() {
                prop_assert_eq!(a, b, "M = {}", m);
            }
        }
    }

    #[test]
    fn recurrence_identity_holds_at_interior_orders(
        g in 0.3f64..2.0,
        delta in 0.0f64..2.0,
        alpha in -3.0f64..3.0,
        parity in parity(),
    ) {
        // c_{k+1} g (k+1) + (k + s D/2) c_k + (alpha + g) c_{k-1}
        //   - s (-1)^k (D/2) sum_j (2 alpha)^j / j! c_{k-j} = 0
        let params = validate_params(g, delta).unwrap();
        let m = 12;
        let c = coefficient_sequence(alpha, &params, parity, m).unwrap();
        let c: Vec<f64> = (0..=m).map(|n| c.true_value(n)).collect();
        let s = parity.sign();
        let hd = delta / 2.0;
        for k in 1..m {
            let mut w = 1.0;
            let mut conv = 0.0;
            let mut conv_abs = 0.0;
            for j in 0..=k {
                if j > 0 {
                    w *= 2.0 * alpha / j as f64;
                }
                conv += w * c[k - j];
                conv_abs += (w * c[k - j]).abs();
            }
            let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
            let terms = [
                g * (k + 1) as f64 * c[k + 1],
                (k as f64 + s * hd) * c[k],
                (alpha + g) * c[k - 1],
                -s * sign_k * hd * conv,
            ];
            let scale = terms.iter().map(|t| t.abs()).sum::<f64>() + hd * conv_abs;
            let sum: f64 = terms.iter().sum();
            prop_assert!(sum.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE), "k = {}: {} of {}", k, sum, scale);
        }
    }

    #[test]
    fn fock_components_mirror_each_other(
        g in 0.2f64..1.5,
        delta in 0.0f64..2.0,
        alpha in -2.0f64..2.0,
        parity in parity(),
    ) {
        let params = validate_params(g, delta).unwrap();
        let c = solve_coefficients(alpha, &params, parity, 9).unwrap();
        let psi = fock_expansion(alpha, &c, parity, 80).unwrap();
        let peak = psi.upper.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (m, (u, l)) in psi.upper.iter().zip(&psi.lower).enumerate() {
            let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((l - parity.sign() * sign_m * u).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn chain_eigenvalues_interlace_as_the_basis_grows(
        g in 0.05f64..3.0,
        delta in 0.0f64..3.0,
        parity in parity(),
        n in 2usize..60,
    ) {
        let params = validate_params(g, delta).unwrap();
        let small = build_parity_chain(&params, parity, n);
        let big = build_parity_chain(&params, parity, n + 1);
        let a = tridiagonal_eigenvalues(&small, small.dim()).unwrap();
        let b = tridiagonal_eigenvalues(&big, big.dim()).unwrap();
        let slack = 1e-10 * b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..a.len() {
            prop_assert!(b[i] <= a[i] + slack && a[i] <= b[i + 1] + slack, "i = {}", i);
        }
    }

    #[test]
    fn bracketed_roots_change_sign_within_tolerance(
        roots in proptest::collection::btree_set(-500i32..500, 1..8),
        n_grid in 50usize..400,
        tol_exp in -14i32..-6,
    ) {
        let roots: Vec<f64> = roots.into_iter().map(|r| r as f64 * 0.0173 + 0.001).collect();
        let f = |x: f64| -> Option<Sign> {
            Some(Sign::of(roots.iter().map(|r| (x - r).signum()).product()))
        };
        let tol = 10f64.powi(tol_exp);
        let brackets = scan_brackets(f, -10.0, 10.0, n_grid);
        // Every sign change on the grid is reported.
        let xs = uniform_grid(-10.0, 10.0, n_grid);
        let changes = xs.windows(2).filter(|w| f(w[0]) != f(w[1])).count();
        prop_assert_eq!(brackets.len(), changes);
        for br in brackets {
            let r = refine_root(f, br, tol, 200).unwrap();
            let w = tol * r.alpha.abs().max(1.0);
            prop_assert!(r.evaluations <= 202);
            prop_assert!(f(r.alpha - w) != f(r.alpha + w) || f(r.alpha) == Some(Sign::Zero));
            prop_assert!(Bracket::new(r.bracket.lo, r.bracket.hi, r.bracket.sign_lo, r.bracket.sign_hi).is_some());
        }
    }
}

#[test]
fn strong_coupling_gap_closes() {
    let gaps: Vec<f64> = [1.0, 1.5, 2.0, 2.5, 3.0]
        .iter()
        .map(|&g| {
            let params = validate_params(g, 0.5).unwrap();
            let e = solve_spectrum(&params, &quick(2)).unwrap().energies();
            e[1] - e[0]
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[4] < 1e-3);
}

#[test]
fn zero_detuning_spectrum_is_paired() {
    for g in [0.3, 1.0, 1.7] {
        let params = validate_params(g, 0.0).unwrap();
        let spec = solve_spectrum(&params, &quick(8)).unwrap();
        for pair in spec.levels.chunks(2) {
            // Each energy is good to alpha_tol * g * max(1, |alpha|).
            let band = DEFAULT_ALPHA_TOL * g * pair[0].alpha.abs().max(1.0);
            assert!(
                (pair[0].energy - pair[1].energy).abs() <= 2.0 * band,
                "g = {g}"
            );
            assert_ne!(pair[0].parity, pair[1].parity);
        }
    }
}

#[test]
fn unconverged_root_leaves_a_large_boundary_value_at_higher_order() {
    // A root of f_4 at g = 0.1 is far from a root of f_20.
    let params = validate_params(0.1, 1.0).unwrap();
    let f4 = |a: f64| {
        boundary_residual(a, &params, ParitySector::Odd, 4)
            .ok()
            .and_then(|r| r.resolved_sign())
    };
    let br = scan_brackets(f4, 0.5, 60.0, 4000)
        .into_iter()
        .last()
        .unwrap();
    let a = refine_root(f4, br, 1e-14, 200).unwrap().alpha;
    let r20 = boundary_residual(a, &params, ParitySector::Odd, 20).unwrap();
    assert!(r20.log_magnitude > r20.log_error_bound + 5.0);
}

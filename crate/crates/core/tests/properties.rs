use std::f64::consts::PI;

use grapheneqg_core::dispersion::{dispersion_surface, roots_closed_form};
use grapheneqg_core::hill::monodromy;
use grapheneqg_core::lattice::{build_vertex_conditions, check_self_adjointness, f_theta};
use grapheneqg_core::modes::{build_edge_functions, solve_mode, verify_vertex_conditions};
use grapheneqg_core::spectrum::{assemble_spectrum, verify_union_identity};
use grapheneqg_core::{
    Branch, EdgePotential, HillConfig, HillSolver, QuasiMomentum, StackSpec, ThetaGrid,
};
use proptest::prelude::*;

fn potentials() -> Vec<EdgePotential> {
    let table: Vec<f64> = (0..=40)
        .map(|k| {
            let x = k as f64 / 40.0;
            1.5 * (x * (1.0 - x)) - 0.2
        })
        .collect();
    vec![
        EdgePotential::Zero,
        EdgePotential::cosine(2.5),
        EdgePotential::sampled(table, 1e-10).unwrap(),
    ]
}

#[test]
fn wronskian_is_conserved() {
    for p in potentials() {
        let solver = HillSolver::new(p).unwrap();
        for k in 0..200 {
            let l = -10.0 + 110.0 * k as f64 / 199.0;
            let m = solver.monodromy(l).unwrap();
            assert!((m.det() - 1.0).abs() <= 1e-9, "λ={l}: det={}", m.det());
            assert!((m.m11 - m.m22).abs() <= 1e-9 * m.m11.abs().max(1.0));
        }
    }
}

#[test]
fn free_discriminant_closed_form() {
    let solver = HillSolver::new(EdgePotential::Zero).unwrap();
    for k in 0..=400 {
        let l = -20.0 + 420.0 * k as f64 / 400.0;
        let want = if l >= 0.0 {
            2.0 * l.sqrt().cos()
        } else {
            2.0 * (-l).sqrt().cosh()
        };
        let got = solver.discriminant(l).unwrap();
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "λ={l}");
    }
}

#[test]
fn eta_is_half_the_discriminant() {
    for p in potentials() {
        let solver = HillSolver::new(p).unwrap();
        for k in 0..100 {
            let l = -5.0 + 0.71 * k as f64;
            match solver.eta(l) {
                Ok(eta) => {
                    let d = solver.discriminant(l).unwrap();
                    assert!((eta - d / 2.0).abs() <= 1e-8 * d.abs().max(1.0));
                }
                Err(grapheneqg_core::Error::Pole { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn doubling_steps_barely_moves_discriminant() {
    for p in potentials() {
        for k in 0..=38 {
            let l = -380.0 + 20.0 * k as f64;
            let a = monodromy(l, &p, 4096).unwrap().trace();
            let b = monodromy(l, &p, 8192).unwrap().trace();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                "λ={l}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn discriminant_converges_at_fourth_order() {
    for p in potentials() {
        for l in [-400.0, 200.0, 400.0] {
            let d = |n| monodromy(l, &p, n).unwrap().trace();
            let (a, b, c) = (d(4096), d(8192), d(16384));
            let ratio = (a - b) / (b - c);
            assert!((ratio - 16.0).abs() < 0.5, "λ={l}: ratio {ratio}");
            assert!((a - b).abs() <= 2e-10 * a.abs().max(1.0));
        }
    }
}

#[test]
fn inversion_inverts_the_discriminant() {
    for p in potentials() {
        let solver = HillSolver::new(p).unwrap();
        for band in solver.hill_bands(-5.0, 60.0).unwrap() {
            for k in 1..32 {
                let l = band.lambda_lo + band.width() * k as f64 / 32.0;
                let d = solver.discriminant(l).unwrap();
                let back = solver.invert_discriminant(&band, d).unwrap();
                assert!(
                    (back - l).abs() <= 1e-8,
                    "band {}: {l} -> {back}",
                    band.index
                );
            }
            // strict monotonicity at interior samples
            let ds: Vec<f64> = (0..=33)
                .map(|k| {
                    solver
                        .discriminant(band.lambda_lo + band.width() * k as f64 / 33.0)
                        .unwrap()
                })
                .collect();
            assert!(ds
                .windows(2)
                .all(|w| (w[1] - w[0]) * band.direction as f64 > 0.0));
        }
    }
}

#[test]
fn vertex_conditions_are_self_adjoint_for_all_couplings() {
    for t0 in [0.1, 0.55, 1.0, 2.0] {
        for layers in [2, 3] {
            for pair in build_vertex_conditions(&StackSpec::new(layers, t0).unwrap()).unwrap() {
                let check = check_self_adjointness(&pair).unwrap();
                assert!(check.self_adjoint, "{check:?}");
                assert_eq!(check.abt_max, 0.0);
            }
        }
    }
}

#[test]
fn surfaces_stay_inside_their_band() {
    let solver = HillSolver::new(EdgePotential::cosine(3.0)).unwrap();
    let grid = ThetaGrid::new(24, 24).unwrap();
    for layers in [2, 3] {
        let spec = StackSpec::new(layers, 0.55).unwrap();
        for band in solver.hill_bands(-5.0, 25.0).unwrap() {
            for s in dispersion_surface(&spec, &solver, &grid, &band).unwrap() {
                for x in s.samples.iter().filter_map(|x| x.lambda) {
                    assert!(band.contains(x, 0.0));
                }
            }
        }
    }
}

#[test]
fn ac_spectrum_is_the_hill_spectrum() {
    let grid = ThetaGrid::new(64, 64).unwrap();
    for p in [EdgePotential::Zero, EdgePotential::cosine(3.0)] {
        let solver = HillSolver::new(p).unwrap();
        let hill = solver.hill_bands(-5.0, 40.0).unwrap();
        for layers in [2, 3] {
            for t0 in [0.1, 1.0] {
                let spec = StackSpec::new(layers, t0).unwrap();
                let report = assemble_spectrum(&spec, &solver, (-5.0, 40.0), &grid).unwrap();
                assert_eq!(report.ac_bands, hill);
                for (idx, cover) in report.dispersion_cover() {
                    let band = hill.iter().find(|b| b.index == idx).unwrap();
                    assert_eq!(cover.len(), 1, "band {idx}: {cover:?}");
                    assert!((cover[0].0 - band.lambda_lo).abs() <= 1e-8);
                    assert!((cover[0].1 - band.lambda_hi).abs() <= 1e-8);
                }
                for f in &report.flat_eigenvalues {
                    assert!(solver.monodromy(f.lambda).unwrap().m12.abs() < 1e-8);
                }
                for s in &report.sub_bands {
                    let band = hill.iter().find(|b| b.index == s.band_index).unwrap();
                    assert!(band.contains(s.lambda_lo, 0.0) && band.contains(s.lambda_hi, 0.0));
                }
            }
        }
    }
}

#[test]
fn free_spectrum_has_no_gaps() {
    let solver = HillSolver::new(EdgePotential::Zero).unwrap();
    let spec = StackSpec::trilayer(0.55).unwrap();
    let report = assemble_spectrum(
        &spec,
        &solver,
        (0.0, 100.0),
        &ThetaGrid::new(32, 32).unwrap(),
    )
    .unwrap();
    assert_eq!(report.ac_bands[0].lambda_lo, 0.0);
    for w in report.ac_bands.windows(2) {
        assert!((w[1].lambda_lo - w[0].lambda_hi).abs() < 1e-8);
    }
    assert_eq!(report.ac_bands.last().unwrap().lambda_hi, 100.0);
}

#[test]
fn union_of_fibres_converges_to_bands() {
    let solver = HillSolver::new(EdgePotential::Zero).unwrap();
    let spec = StackSpec::bilayer(1.0).unwrap();
    let range = (0.0, 4.0 * PI * PI);
    let a = verify_union_identity(&spec, &solver, range, &ThetaGrid::new(64, 64).unwrap()).unwrap();
    let b =
        verify_union_identity(&spec, &solver, range, &ThetaGrid::new(128, 128).unwrap()).unwrap();
    assert_eq!(b.bands.len(), 2);
    assert!(b.max_gap_d <= 1e-2, "{}", b.max_gap_d);
    let ratio = a.max_gap_d / b.max_gap_d;
    assert!(ratio > 3.0, "gap ratio {ratio}");
    assert!(b.max_gap_lambda < a.max_gap_lambda);
    assert!(b.flat_everywhere);
}

#[test]
fn coarse_union_gap_is_larger_but_finite() {
    let solver = HillSolver::new(EdgePotential::Zero).unwrap();
    let spec = StackSpec::bilayer(1.0).unwrap();
    let coarse =
        verify_union_identity(&spec, &solver, (0.0, 12.0), &ThetaGrid::new(8, 8).unwrap()).unwrap();
    let fine = verify_union_identity(
        &spec,
        &solver,
        (0.0, 12.0),
        &ThetaGrid::new(64, 64).unwrap(),
    )
    .unwrap();
    assert!(coarse.max_gap_d.is_finite() && coarse.max_gap_d > fine.max_gap_d);
}

#[test]
fn random_modes_satisfy_vertex_conditions() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let solver = HillSolver::new(EdgePotential::cosine(1.5)).unwrap();
    let bands = solver.hill_bands(-2.0, 30.0).unwrap();
    let mut solved = 0;
    while solved < 40 {
        let layers = if rng.gen_bool(0.5) { 2 } else { 3 };
        let spec = StackSpec::new(layers, rng.gen_range(0.1..1.5)).unwrap();
        let branches = Branch::ascending(layers);
        let branch = branches[rng.gen_range(0..branches.len())];
        let theta = QuasiMomentum::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let band = &bands[rng.gen_range(0..bands.len())];
        let mode = solve_mode(&spec, theta, branch).unwrap();
        let Ok(lambda) = solver.invert_discriminant(band, 2.0 * mode.eta_value) else {
            continue;
        };
        let Ok(funcs) = build_edge_functions(&spec, &mode, &solver, lambda) else {
            continue;
        };
        assert!(mode.residual <= 1e-8);
        let report = verify_vertex_conditions(&funcs, &spec, theta).unwrap();
        assert!(report.passes(1e-7), "{report:?}");
        solved += 1;
    }
}

#[test]
fn config_validation_rejects_tiny_step_counts() {
    let config = HillConfig {
        steps: 10,
        ..HillConfig::default()
    };
    assert!(HillSolver::with_config(EdgePotential::Zero, config).is_err());
}

proptest! {
    #[test]
    fn structure_function_conjugates_under_negation(a in -PI..PI, b in -PI..PI) {
        let t = QuasiMomentum::new(a, b);
        let f = f_theta(t);
        let g = f_theta(t.neg());
        prop_assert!((f.conj() - g).norm() < 1e-14);
    }

    #[test]
    fn roots_are_even_in_theta_and_symmetric(a in -PI..PI, b in -PI..PI, t0 in 0.01f64..2.0, tri in any::<bool>()) {
        let spec = StackSpec::new(if tri { 3 } else { 2 }, t0).unwrap();
        let t = QuasiMomentum::new(a, b);
        let r = roots_closed_form(&spec, t).unwrap();
        let s = roots_closed_form(&spec, t.neg()).unwrap();
        prop_assert_eq!(&r.roots, &s.roots);
        let n = r.roots.len();
        for k in 0..n {
            prop_assert_eq!(r.roots[k], -r.roots[n - 1 - k]);
            prop_assert!(r.roots[k].is_finite());
        }
        prop_assert!(r.roots.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quasimomentum_wraps_into_zone(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let t = QuasiMomentum::new(a, b);
        prop_assert!((-PI..=PI).contains(&t.theta1) && (-PI..=PI).contains(&t.theta2));
        let raw = QuasiMomentum { theta1: a, theta2: b };
        prop_assert!((f_theta(t) - f_theta(raw)).norm() < 1e-9);
    }
}

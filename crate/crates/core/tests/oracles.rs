//! Cross-checks against independent implementations written here: a cofactor
//! expansion determinant, a separate shooting integrator, and dense-grid
//! scans of M₁₂ and |D| − 2.

use std::f64::consts::PI;

use grapheneqg_core::dispersion::{
    build_spectral_matrix, det_polynomial, eval_poly, inner_discriminant, roots_closed_form,
    roots_numeric,
};
use grapheneqg_core::lattice::{f_abs_squared, f_theta};
use grapheneqg_core::{Branch, EdgePotential, HillSolver, QuasiMomentum, StackSpec, ThetaGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn laplace_det(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut total = Complex64::new(0.0, 0.0);
    for col in 0..n {
        if m[0][col] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let minor: Vec<Vec<Complex64>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != col)
                    .map(|(_, v)| *v)
                    .collect()
            })
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m[0][col] * laplace_det(&minor);
    }
    total
}

fn random_theta(rng: &mut ChaCha8Rng) -> QuasiMomentum {
    QuasiMomentum::new(rng.gen_range(-PI..=PI), rng.gen_range(-PI..=PI))
}

#[test]
fn determinant_polynomial_matches_cofactor_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for layers in [2, 3] {
        for _ in 0..500 {
            let spec = StackSpec::new(layers, rng.gen_range(0.05..2.0)).unwrap();
            let eta = rng.gen_range(-1.5..1.5);
            let theta = random_theta(&mut rng);
            let m = build_spectral_matrix(&spec, eta, theta);
            let oracle = laplace_det(&m.rows());
            let poly = eval_poly(&det_polynomial(&spec, theta), eta);
            let scale = det_polynomial(&spec, theta)
                .iter()
                .enumerate()
                .map(|(k, c)| c.abs() * eta.abs().powi(k as i32))
                .sum::<f64>();
            assert!(oracle.im.abs() <= 1e-9 * scale);
            assert!(
                (oracle.re - poly).abs() <= 1e-9 * scale.max(poly.abs()),
                "n={layers} η={eta}: {} vs {poly}",
                oracle.re
            );
            assert!((m.determinant() - oracle).norm() <= 1e-9 * scale);
        }
    }
}

#[test]
fn numeric_roots_agree_with_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let layers = if rng.gen_bool(0.5) { 2 } else { 3 };
        let spec = StackSpec::new(layers, rng.gen_range(1e-3..=2.0)).unwrap();
        let theta = random_theta(&mut rng);
        let a = roots_closed_form(&spec, theta).unwrap();
        let b = roots_numeric(&spec, theta).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-10, "t0={} {a:?}\n{b:?}", spec.t0());
    }
}

#[test]
fn closed_form_roots_annihilate_the_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for layers in [2, 3] {
        let spec = StackSpec::new(layers, 0.55).unwrap();
        for _ in 0..200 {
            let theta = random_theta(&mut rng);
            for r in roots_closed_form(&spec, theta).unwrap().roots {
                let det = laplace_det(&build_spectral_matrix(&spec, r, theta).rows());
                assert!(det.norm() < 1e-10, "det = {det} at η = {r}");
            }
        }
    }
}

#[test]
fn inner_discriminants_are_nonnegative_on_fine_grid() {
    let grid = ThetaGrid::new(512, 512).unwrap();
    for t0 in [0.1, 0.55, 1.0] {
        for layers in [2, 3] {
            let spec = StackSpec::new(layers, t0).unwrap();
            let worst = grid
                .points()
                .map(|t| inner_discriminant(&spec, t))
                .fold(f64::INFINITY, f64::min);
            assert!(worst >= -1e-12, "n={layers} t0={t0}: {worst}");
        }
    }
}

#[test]
fn bilayer_lemma_extrema_on_grid() {
    let grid = ThetaGrid::new(256, 256).unwrap();
    for t0 in [0.1, 0.55, 1.0] {
        let spec = StackSpec::bilayer(t0).unwrap();
        let t0b = spec.big_t0();
        let want = [
            (Branch::RPlusPlus, t0 * t0 / t0b, 1.0),
            (Branch::RPlusMinus, 0.0, 3.0 / t0b),
            (Branch::RMinusPlus, -1.0, -t0 * t0 / t0b),
            (Branch::RMinusMinus, -3.0 / t0b, 0.0),
        ];
        for (branch, lo, hi) in want {
            let vals: Vec<f64> = grid
                .points()
                .map(|t| roots_closed_form(&spec, t).unwrap().value(branch).unwrap())
                .collect();
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((min - lo).abs() <= 1e-9, "{branch} min {min} vs {lo}");
            assert!((max - hi).abs() <= 1e-9, "{branch} max {max} vs {hi}");
        }
    }
}

#[test]
fn trilayer_roots_stay_in_unit_interval() {
    let grid = ThetaGrid::new(128, 128).unwrap();
    for t0 in [0.1, 0.25, 0.55, 1.0] {
        let spec = StackSpec::trilayer(t0).unwrap();
        for t in grid.points() {
            let r = roots_closed_form(&spec, t).unwrap();
            assert!(r.roots.iter().all(|v| v.abs() <= 1.0 + 1e-9));
        }
    }
}

#[test]
fn closed_form_structure_function_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let t = random_theta(&mut rng);
        assert!((f_abs_squared(t) - f_theta(t).norm_sqr()).abs() <= 1e-12);
    }
}

#[test]
fn structure_function_range_and_zero_set() {
    let grid = ThetaGrid::new(256, 256).unwrap();
    let d = 2.0 * PI / 3.0;
    for t in grid.points() {
        let f2 = f_abs_squared(t);
        assert!((0.0..=9.0).contains(&f2));
        if f2 == 9.0 {
            assert!(t.theta1 == 0.0 && t.theta2 == 0.0);
        }
        if f_theta(t).norm() < 1e-12 {
            let at_d = (t.theta1 == d && t.theta2 == -d) || (t.theta1 == -d && t.theta2 == d);
            assert!(at_d, "spurious zero at {t:?}");
        }
    }
}

/// Independent shooting: RK4 with its own step count on q₀(x) = a·cos(2πx).
fn shoot(a: f64, lambda: f64, steps: usize) -> [f64; 4] {
    let h = 1.0 / steps as f64;
    let q = |x: f64| a * (2.0 * PI * x).cos();
    let f = |x: f64, y: [f64; 4]| {
        let w = q(x) - lambda;
        [y[1], w * y[0], y[3], w * y[2]]
    };
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for i in 0..steps {
        let x = i as f64 * h;
        let add = |y: [f64; 4], k: [f64; 4], c: f64| {
            [
                y[0] + c * k[0],
                y[1] + c * k[1],
                y[2] + c * k[2],
                y[3] + c * k[3],
            ]
        };
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = f(x + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = f(x + h, add(y, k3, h));
        for j in 0..4 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    // (m11, m21, m12, m22)
    y
}

fn scan_roots(g: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let n = ((hi - lo) / step).round() as usize;
    let mut prev = g(lo);
    for k in 1..=n {
        let x = lo + k as f64 * step;
        let v = g(x);
        if prev.signum() != v.signum() {
            let (mut a, mut b, mut fa) = (x - step, x, prev);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = g(m);
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = v;
    }
    out
}

#[test]
fn dirichlet_eigenvalues_match_dense_shooting_oracle() {
    let solver = HillSolver::new(EdgePotential::cosine(1.0)).unwrap();
    let got = solver.dirichlet_eigenvalues(0.0, 50.0).unwrap().eigenvalues;
    let want = scan_roots(|l| shoot(1.0, l, 1500)[2], 0.0, 50.0, 1e-3);
    assert_eq!(got.len(), want.len());
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn band_gaps_match_dense_shooting_oracle() {
    let solver = HillSolver::new(EdgePotential::cosine(3.0)).unwrap();
    let bands = solver.hill_bands(0.0, 100.0).unwrap();
    let excess = |l: f64| {
        let m = shoot(3.0, l, 1500);
        (m[0] + m[3]).abs() - 2.0
    };
    let edges = scan_roots(excess, 0.0, 100.0, 5e-4);
    // Gaps whose peak excess is within the touch tolerance count as touches.
    let mut open = Vec::new();
    let mut touches = Vec::new();
    for pair in edges.chunks(2) {
        let peak = (1..20)
            .map(|k| excess(pair[0] + (pair[1] - pair[0]) * k as f64 / 20.0))
            .fold(f64::NEG_INFINITY, f64::max);
        if peak <= 1e-9 {
            touches.push((pair[0], pair[1]));
        } else {
            open.extend_from_slice(pair);
        }
    }
    let mut got: Vec<f64> = Vec::new();
    let mut snapped = Vec::new();
    for w in bands.windows(2) {
        if w[0].lambda_hi == w[1].lambda_lo {
            snapped.push(w[0].lambda_hi);
        } else {
            got.extend([w[0].lambda_hi, w[1].lambda_lo]);
        }
    }
    assert_eq!(got.len(), open.len(), "{got:?} vs {open:?}");
    for (a, b) in got.iter().zip(&open) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert_eq!(snapped.len(), touches.len());
    for (x, (lo, hi)) in snapped.iter().zip(&touches) {
        assert!(lo < x && x < hi);
    }
}

//! Band touches at the D-points ±(2π/3, −2π/3).
//!
//! Along the diagonal θ₂ = −θ₁ the structure function is real,
//! F = 1 + 2cos θ₁, so every root family becomes a function of θ₁ alone. A
//! touching pair is classified by local least-squares fits around θ_D on a
//! sequence of shrinking windows:
//!
//! * linear (Dirac cone): one-sided fits of r(θ_D ± δ) − r(θ_D) against
//!   (δ, δ²) give slopes of opposite sign whose magnitude is bounded away from
//!   zero and stable under halving of the window;
//! * quadratic (parabolic touch): a symmetric degree-4 fit has a vanishing
//!   first-order coefficient and a curvature that is stable under halving.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dispersion::{branch_value, branch_value_f2, Branch};
use crate::error::{Error, Result};
use crate::hill::{HillBand, HillSolver};
use crate::lattice::{QuasiMomentum, StackSpec};

pub const MIN_SLICE_SAMPLES: usize = 64;

/// D-point location on the diagonal, θ₁ = 2π/3.
pub fn d_point_theta1() -> f64 {
    2.0 * PI / 3.0
}

/// Default diagonal window [2π/3 − π/4, 2π/3 + π/4].
pub fn default_window() -> (f64, f64) {
    (d_point_theta1() - PI / 4.0, d_point_theta1() + PI / 4.0)
}

/// F on the diagonal θ₂ = −θ₁.
pub fn diagonal_f(theta1: f64) -> f64 {
    1.0 + 2.0 * theta1.cos()
}

fn diagonal_value(spec: &StackSpec, branch: Branch, theta1: f64) -> Result<f64> {
    let f = diagonal_f(theta1);
    branch_value_f2(spec, branch, f * f)
}

/// All branch values of an n-layer stack sampled along the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSlice {
    pub spec: StackSpec,
    pub theta1: Vec<f64>,
    pub branches: Vec<Branch>,
    /// `values[b][k]` is branch `branches[b]` at `theta1[k]`.
    pub values: Vec<Vec<f64>>,
}

impl DiagonalSlice {
    pub fn branch_values(&self, branch: Branch) -> Option<&[f64]> {
        self.branches
            .iter()
            .position(|b| *b == branch)
            .map(|k| self.values[k].as_slice())
    }
}

pub fn diagonal_slice(
    spec: &StackSpec,
    window: (f64, f64),
    samples: usize,
) -> Result<DiagonalSlice> {
    let (lo, hi) = window;
    if samples < MIN_SLICE_SAMPLES {
        return Err(Error::Domain(format!(
            "diagonal slices need at least {MIN_SLICE_SAMPLES} samples, got {samples}"
        )));
    }
    let d = d_point_theta1();
    if !(lo < hi && ((lo <= d && d <= hi) || (lo <= -d && -d <= hi))) {
        return Err(Error::Domain(format!(
            "window [{lo}, {hi}] must contain a D-point (θ₁ = ±2π/3)"
        )));
    }
    let theta1: Vec<f64> = (0..samples)
        .map(|k| {
            if k == samples - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let branches = Branch::ascending(spec.layers()).to_vec();
    let values = branches
        .iter()
        .map(|b| {
            theta1
                .iter()
                .map(|t| diagonal_value(spec, *b, *t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagonalSlice {
        spec: *spec,
        theta1,
        branches,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TouchClass {
    Linear,
    Quadratic,
    None,
}

/// Fit protocol and classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeOptions {
    /// Half-width of the first (coarsest) window.
    pub half_width: f64,
    /// Number of successive window halvings tried.
    pub levels: usize,
    pub one_sided_samples: usize,
    pub symmetric_samples: usize,
    /// Two branches touch when their values at θ_D differ by at most this.
    pub touch_tol: f64,
    /// Minimum |slope| for a cone.
    pub slope_floor: f64,
    /// Maximum |first-order coefficient| for a parabolic touch.
    pub linear_ceiling: f64,
    /// Relative change of the slope between successive windows.
    pub slope_agreement: f64,
    /// Relative change of the curvature between successive windows.
    pub curvature_agreement: f64,
}

impl Default for ConeOptions {
    fn default() -> Self {
        ConeOptions {
            half_width: 0.05,
            levels: 15,
            one_sided_samples: 65,
            symmetric_samples: 129,
            touch_tol: 1e-9,
            slope_floor: 1e-3,
            linear_ceiling: 1e-6,
            slope_agreement: 2e-3,
            curvature_agreement: 1e-4,
        }
    }
}

/// Local fits of one branch on one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub half_width: f64,
    /// Slopes of the one-sided fits on the right and left of θ_D.
    pub slope_right: f64,
    pub slope_left: f64,
    /// First- and second-order coefficients of the symmetric fit.
    pub linear: f64,
    pub curvature: f64,
}

impl LocalFit {
    pub fn slope(&self) -> f64 {
        0.5 * (self.slope_right.abs() + self.slope_left.abs())
    }
}

pub fn local_fit(
    spec: &StackSpec,
    branch: Branch,
    theta_d: f64,
    half_width: f64,
    options: &ConeOptions,
) -> Result<LocalFit> {
    let base = diagonal_value(spec, branch, theta_d)?;
    let y = |delta: f64| diagonal_value(spec, branch, theta_d + delta).map(|v| v - base);

    let m = options.one_sided_samples;
    let mut slopes = [0.0; 2];
    for (slot, side) in [1.0, -1.0].into_iter().enumerate() {
        let deltas: Vec<f64> = (1..=m)
            .map(|k| side * half_width * k as f64 / m as f64)
            .collect();
        let a = DMatrix::from_fn(m, 2, |i, j| deltas[i].powi(j as i32 + 1));
        let b = deltas.iter().map(|d| y(*d)).collect::<Result<Vec<_>>>()?;
        slopes[slot] = least_squares(a, b)?[0];
    }

    // symmetric fit in the scaled variable u = δ/h keeps the design well conditioned
    let s = options.symmetric_samples;
    let us: Vec<f64> = (0..s)
        .map(|k| -1.0 + 2.0 * k as f64 / (s - 1) as f64)
        .collect();
    let a = DMatrix::from_fn(s, 4, |i, j| us[i].powi(j as i32 + 1));
    let b = us
        .iter()
        .map(|u| y(u * half_width))
        .collect::<Result<Vec<_>>>()?;
    let c = least_squares(a, b)?;
    Ok(LocalFit {
        half_width,
        slope_right: slopes[0],
        slope_left: slopes[1],
        linear: c[0] / half_width,
        curvature: c[1] / (half_width * half_width),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub layers: u32,
    pub t0: f64,
    /// θ_D on the diagonal, i.e. (θ₁, −θ₁).
    pub theta_d: QuasiMomentum,
    pub branches: [Branch; 2],
    pub classification: TouchClass,
    /// |r_a(θ_D) − r_b(θ_D)|
    pub touch_gap: f64,
    pub gamma_fit: Option<f64>,
    pub curvature_fit: Option<f64>,
    pub linear_coefficient: Option<f64>,
    pub reference: Option<f64>,
    pub relative_deviation: Option<f64>,
    /// Half-width of the window on which the classification settled.
    pub window_half_width: Option<f64>,
    pub lambda_slope: Option<f64>,
}

/// Closed-form reference constant for a touching mirror pair.
pub fn reference_constant(spec: &StackSpec, branch: Branch) -> Option<(TouchClass, f64)> {
    let t2 = spec.t0() * spec.t0();
    match branch {
        Branch::BarPlus | Branch::BarMinus => {
            Some((TouchClass::Linear, (1.0 / spec.big_t0()).sqrt()))
        }
        Branch::RPlusMinus | Branch::RMinusMinus => Some((TouchClass::Quadratic, 1.0 / t2)),
        Branch::TildePlusMinus | Branch::TildeMinusMinus => {
            Some((TouchClass::Quadratic, 1.0 / (2.0_f64.sqrt() * t2)))
        }
        _ => None,
    }
}

/// Mirror pairs (upper, lower) examined at the D-points.
pub fn candidate_pairs(layers: u32) -> Vec<[Branch; 2]> {
    if layers == 2 {
        vec![
            [Branch::RPlusMinus, Branch::RMinusMinus],
            [Branch::RPlusPlus, Branch::RMinusPlus],
        ]
    } else {
        vec![
            [Branch::BarPlus, Branch::BarMinus],
            [Branch::TildePlusMinus, Branch::TildeMinusMinus],
            [Branch::TildePlusPlus, Branch::TildeMinusPlus],
        ]
    }
}

/// Classifies the touch of `pair` at θ₁ = `theta_d` on the diagonal. The slice
/// supplies the stack; fits re-evaluate the closed forms on windows finer than
/// the slice spacing.
pub fn classify_touch(
    slice: &DiagonalSlice,
    pair: [Branch; 2],
    theta_d: f64,
    options: &ConeOptions,
) -> Result<ConeReport> {
    let spec = slice.spec;
    let ra = diagonal_value(&spec, pair[0], theta_d)?;
    let rb = diagonal_value(&spec, pair[1], theta_d)?;
    let mut report = ConeReport {
        layers: spec.layers(),
        t0: spec.t0(),
        theta_d: QuasiMomentum::new(theta_d, -theta_d),
        branches: pair,
        classification: TouchClass::None,
        touch_gap: (ra - rb).abs(),
        gamma_fit: None,
        curvature_fit: None,
        linear_coefficient: None,
        reference: None,
        relative_deviation: None,
        window_half_width: None,
        lambda_slope: None,
    };
    if report.touch_gap > options.touch_tol {
        return Ok(report);
    }

    let mut classes = Vec::with_capacity(2);
    for branch in pair {
        classes.push(settle(&spec, branch, theta_d, options)?);
    }
    let (class0, fit0) = classes[0];
    if classes.iter().any(|(c, _)| *c != class0) || class0 == TouchClass::None {
        return Ok(report);
    }
    report.classification = class0;
    report.window_half_width = Some(fit0.half_width);
    let reference = reference_constant(&spec, pair[0]).filter(|(c, _)| *c == class0);
    let fitted = match class0 {
        TouchClass::Linear => {
            report.gamma_fit = Some(fit0.slope());
            fit0.slope()
        }
        _ => {
            report.curvature_fit = Some(fit0.curvature);
            report.linear_coefficient = Some(fit0.linear.abs().max(classes[1].1.linear.abs()));
            fit0.curvature
        }
    };
    if let Some((_, r)) = reference {
        report.reference = Some(r);
        report.relative_deviation = Some((fitted - r).abs() / r.abs());
    }
    Ok(report)
}

/// Runs the window-halving sequence for one branch.
fn settle(
    spec: &StackSpec,
    branch: Branch,
    theta_d: f64,
    options: &ConeOptions,
) -> Result<(TouchClass, LocalFit)> {
    let mut prev: Option<LocalFit> = None;
    let mut last = None;
    for level in 0..options.levels {
        let h = options.half_width / 2f64.powi(level as i32);
        let fit = local_fit(spec, branch, theta_d, h, options)?;
        if let Some(p) = prev {
            let g = fit.slope();
            let opposite = fit.slope_right * fit.slope_left < 0.0;
            if g >= options.slope_floor
                && opposite
                && (g - p.slope()).abs() <= options.slope_agreement * g
            {
                return Ok((TouchClass::Linear, fit));
            }
            if fit.linear.abs() <= options.linear_ceiling
                && (fit.curvature - p.curvature).abs()
                    <= options.curvature_agreement * fit.curvature.abs()
            {
                return Ok((TouchClass::Quadratic, fit));
            }
        }
        prev = Some(fit);
        last = Some(fit);
    }
    Ok((TouchClass::None, last.expect("at least one level")))
}

/// Reports for every candidate pair at both diagonal D-points.
pub fn analyse_cones(spec: &StackSpec, options: &ConeOptions) -> Result<Vec<ConeReport>> {
    let slice = diagonal_slice(spec, default_window(), MIN_SLICE_SAMPLES)?;
    let mut out = Vec::new();
    for theta_d in [d_point_theta1(), -d_point_theta1()] {
        for pair in candidate_pairs(spec.layers()) {
            out.push(classify_touch(&slice, pair, theta_d, options)?);
        }
    }
    Ok(out)
}

/// Finite step for D′ in [`lambda_space_slope`].
pub const DERIVATIVE_STEP: f64 = 1e-6;
/// |D′| below this (or λ_D within one step of a band edge) is degenerate.
pub const DERIVATIVE_FLOOR: f64 = 1e-8;

/// D′(λ) by central differences with one Richardson extrapolation.
pub fn discriminant_derivative_fd(solver: &HillSolver, lambda: f64, h: f64) -> Result<f64> {
    let central = |h: f64| -> Result<f64> {
        Ok((solver.discriminant(lambda + h)? - solver.discriminant(lambda - h)?) / (2.0 * h))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// γ = 2γ̄/D′(λ_D), where λ_D solves D(λ) = 2r(θ_D) on `band`.
pub fn lambda_space_slope(
    report: &ConeReport,
    solver: &HillSolver,
    band: &HillBand,
) -> Result<f64> {
    let gamma_bar = match (report.classification, report.gamma_fit) {
        (TouchClass::Linear, Some(g)) => g,
        _ => {
            return Err(Error::Domain(
                "λ-space slope needs a linear touch".to_string(),
            ))
        }
    };
    let spec = StackSpec::new(report.layers, report.t0)?;
    let r = diagonal_value(&spec, report.branches[0], report.theta_d.theta1)?;
    let lambda_d = solver.invert_discriminant(band, 2.0 * r)?;
    lambda_slope_at(solver, band, lambda_d, gamma_bar)
}

fn lambda_slope_at(
    solver: &HillSolver,
    band: &HillBand,
    lambda_d: f64,
    gamma_bar: f64,
) -> Result<f64> {
    let h = DERIVATIVE_STEP;
    if lambda_d - band.lambda_lo < h || band.lambda_hi - lambda_d < h {
        return Err(Error::DerivativeDegeneracy { lambda: lambda_d });
    }
    let dprime = discriminant_derivative_fd(solver, lambda_d, h)?;
    if dprime.abs() < DERIVATIVE_FLOOR {
        return Err(Error::DerivativeDegeneracy { lambda: lambda_d });
    }
    Ok(2.0 * gamma_bar / dprime)
}

/// A local minimum of the gap between two branches over the zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchPoint {
    pub theta: QuasiMomentum,
    pub gap: f64,
    /// Spacing of the search grid.
    pub cell: f64,
}

/// Gap minima of `pair` found on an `n`×`n` periodic grid of [−π, π)² and
/// refined by compass search on the squared gap. Only minima whose refined gap
/// is at most `touch_tol` are returned, sorted by θ₁.
pub fn locate_touch_points(
    spec: &StackSpec,
    pair: [Branch; 2],
    n: usize,
    touch_tol: f64,
) -> Result<Vec<TouchPoint>> {
    if n < 4 {
        return Err(Error::Domain(format!(
            "search grid of {n} nodes is too coarse"
        )));
    }
    let cell = 2.0 * PI / n as f64;
    let node = |k: usize| -PI + cell * k as f64;
    let objective = |t1: f64, t2: f64| -> Result<f64> {
        let th = QuasiMomentum::new(t1, t2);
        let g = branch_value(spec, pair[0], th)? - branch_value(spec, pair[1], th)?;
        Ok(g * g)
    };
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = objective(node(i), node(j))?;
        }
    }
    let mut points = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = values[i * n + j];
            let mut is_min = true;
            for (di, dj) in [
                (-1i64, -1i64),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ] {
                let ii = (i as i64 + di).rem_euclid(n as i64) as usize;
                let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                let w = values[ii * n + jj];
                // ties broken by index so a flat pair of nodes yields one minimum
                if w < v || (w == v && (ii, jj) < (i, j)) {
                    is_min = false;
                    break;
                }
            }
            if !is_min {
                continue;
            }
            let (t1, t2, best) = compass(&objective, node(i), node(j), v, cell)?;
            let gap = best.sqrt();
            if gap <= touch_tol {
                points.push(TouchPoint {
                    theta: QuasiMomentum::new(t1, t2),
                    gap,
                    cell,
                });
            }
        }
    }
    points.sort_by(|a, b| {
        a.theta
            .theta1
            .total_cmp(&b.theta.theta1)
            .then(a.theta.theta2.total_cmp(&b.theta.theta2))
    });
    Ok(points)
}

fn compass(
    f: &impl Fn(f64, f64) -> Result<f64>,
    mut x: f64,
    mut y: f64,
    mut fx: f64,
    start: f64,
) -> Result<(f64, f64, f64)> {
    let dirs = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (-1.0, -1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
    ];
    let mut step = start;
    let mut iterations = 0;
    while step > 1e-13 && iterations < 10_000 {
        iterations += 1;
        let mut moved = false;
        for (dx, dy) in dirs {
            let (nx, ny) = (x + step * dx, y + step * dy);
            let v = f(nx, ny)?;
            if v < fx {
                x = nx;
                y = ny;
                fx = v;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
        if fx == 0.0 {
            break;
        }
    }
    Ok((x, y, fx))
}

/// Least-squares coefficients of `a · c ≈ b` via SVD.
fn least_squares(a: DMatrix<f64>, b: Vec<f64>) -> Result<Vec<f64>> {
    let b = DVector::from_vec(b);
    a.svd(true, true)
        .solve(&b, 0.0)
        .map(|c| c.iter().copied().collect())
        .map_err(|e| Error::NumericalConsistency(format!("least-squares fit: {e}")))
}

//! The invariant suite run by `grapheneqg check`, evaluated for the
//! configured stack and potential.

use std::f64::consts::PI;

use grapheneqg_core::cones::{candidate_pairs, locate_touch_points};
use grapheneqg_core::dispersion::{inner_discriminant, roots_closed_form, roots_numeric};
use grapheneqg_core::lattice::{build_vertex_conditions, check_self_adjointness};
use grapheneqg_core::spectrum::assemble_spectrum;
use grapheneqg_core::{Branch, EdgePotential, HillSolver, QuasiMomentum, StackSpec, TouchClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{cone_reports, sample_modes};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity; passes when it is at most `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

type Measured = Result<(f64, String)>;

fn measure(name: &str, tolerance: f64, f: impl FnOnce() -> Measured) -> CheckResult {
    match f() {
        Ok((value, detail)) => CheckResult {
            name: name.to_string(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail,
        },
        Err(e) => CheckResult {
            name: name.to_string(),
            passed: false,
            value: f64::INFINITY,
            tolerance,
            detail: format!("error: {e}"),
        },
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

pub fn run_checks(config: &RunConfig) -> Result<Vec<CheckResult>> {
    let spec = config.stack()?;
    let solver = HillSolver::with_config(config.edge_potential()?, config.hill_config())?;
    let grid = config.grid()?;
    let (lo, hi) = config.lambda_range;
    let mut out = Vec::new();

    out.push(measure("hill.wronskian", 1e-9, || {
        let mut worst: f64 = 0.0;
        for l in linspace(-10.0, 100.0, 200) {
            worst = worst.max((solver.monodromy(l)?.det() - 1.0).abs());
        }
        Ok((worst, "max |det M - 1| on 200 points of [-10, 100]".into()))
    }));
    out.push(measure("hill.free_discriminant", 1e-8, || {
        let free = HillSolver::new(EdgePotential::Zero)?;
        let mut worst: f64 = 0.0;
        for l in linspace(0.0, 400.0, 400) {
            worst = worst.max((free.discriminant(l)? - 2.0 * l.sqrt().cos()).abs());
        }
        Ok((worst, "max |D - 2cos(sqrt(lambda))| on [0, 400]".into()))
    }));
    out.push(measure("hill.eta_consistency", 1e-8, || {
        let mut worst: f64 = 0.0;
        for l in linspace(lo, hi, 101) {
            match solver.eta(l) {
                Ok(eta) => {
                    let d = solver.discriminant(l)?;
                    worst = worst.max((eta - d / 2.0).abs());
                }
                Err(grapheneqg_core::Error::Pole { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok((worst, "max |eta - D/2| where eta is defined".into()))
    }));
    out.push(measure("hill.inversion", 1e-8, || {
        let mut worst: f64 = 0.0;
        for band in solver.hill_bands(lo, hi)? {
            for k in 1..16 {
                let l = band.lambda_lo + band.width() * k as f64 / 16.0;
                let back = solver.invert_discriminant(&band, solver.discriminant(l)?)?;
                worst = worst.max((back - l).abs());
            }
        }
        Ok((
            worst,
            "max |invert(D(lambda)) - lambda| on band interiors".into(),
        ))
    }));
    out.push(measure("lattice.self_adjointness", 1e-12, || {
        let mut worst: f64 = 0.0;
        let mut classes = 0;
        for t0 in [spec.t0(), 0.1, 0.55, 1.0, 2.0] {
            for pair in build_vertex_conditions(&StackSpec::new(spec.layers(), t0)?)? {
                let c = check_self_adjointness(&pair)?;
                classes += 1;
                if c.rank != c.degree {
                    worst = f64::INFINITY;
                }
                worst = worst.max(c.symmetry_defect).max(c.abt_max);
            }
        }
        Ok((
            worst,
            format!("rank and A B^T symmetry over {classes} vertex classes"),
        ))
    }));
    out.push(measure("dispersion.root_oracle", 1e-10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let s = StackSpec::new(spec.layers(), rng.gen_range(1e-3..=2.0))?;
            let t = QuasiMomentum::new(rng.gen_range(-PI..=PI), rng.gen_range(-PI..=PI));
            worst = worst.max(roots_closed_form(&s, t)?.max_abs_diff(&roots_numeric(&s, t)?));
        }
        Ok((
            worst,
            "numeric vs closed-form roots, 500 random samples".into(),
        ))
    }));
    out.push(measure("dispersion.realness", 1e-12, || {
        let worst = grid
            .points()
            .map(|t| inner_discriminant(&spec, t))
            .fold(f64::INFINITY, f64::min);
        Ok((
            (-worst).max(0.0),
            "negative part of the inner discriminant on the grid".into(),
        ))
    }));
    out.push(measure("dispersion.root_extrema", 1e-9, || {
        let values = |b: Branch| -> Result<(f64, f64)> {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for t in grid.points() {
                let v = roots_closed_form(&spec, t)?.value(b).unwrap_or(f64::NAN);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            Ok((lo, hi))
        };
        if spec.layers() == 2 {
            let t2 = spec.t0() * spec.t0();
            let t0b = spec.big_t0();
            let table = [
                (Branch::RPlusPlus, t2 / t0b, 1.0),
                (Branch::RPlusMinus, 0.0, 3.0 / t0b),
                (Branch::RMinusPlus, -1.0, -t2 / t0b),
                (Branch::RMinusMinus, -3.0 / t0b, 0.0),
            ];
            let mut worst: f64 = 0.0;
            for (b, want_lo, want_hi) in table {
                let (got_lo, got_hi) = values(b)?;
                worst = worst
                    .max((got_lo - want_lo).abs())
                    .max((got_hi - want_hi).abs());
            }
            Ok((
                worst,
                "grid extrema of the bilayer branches vs closed forms".into(),
            ))
        } else {
            let mut worst: f64 = 0.0;
            for &b in Branch::ascending(3) {
                let (got_lo, got_hi) = values(b)?;
                worst = worst.max(got_hi - 1.0).max(-1.0 - got_lo);
            }
            let (top, _) = values(Branch::TildePlusPlus)?;
            Ok((
                worst.max(0.0),
                format!("trilayer roots stay in [-1, 1]; min rt++ = {top}"),
            ))
        }
    }));

    let reports = cone_reports(config, &solver);
    match reports {
        Ok(reports) => {
            if spec.layers() == 3 {
                out.push(measure("cones.bar_gamma", 5e-3, || {
                    let mut worst: f64 = 0.0;
                    for r in reports.iter().filter(|r| r.branches[0] == Branch::BarPlus) {
                        worst = match (r.classification, r.relative_deviation) {
                            (TouchClass::Linear, Some(d)) => worst.max(d.abs()),
                            _ => f64::INFINITY,
                        };
                    }
                    Ok((
                        worst,
                        "relative deviation of the rb cone slope from sqrt(1/T0)".into(),
                    ))
                }));
            } else {
                let touching: Vec<_> = reports
                    .iter()
                    .filter(|r| r.branches[0] == Branch::RPlusMinus)
                    .collect();
                out.push(measure("cones.quadratic_linear_term", 1e-6, || {
                    let mut worst: f64 = 0.0;
                    for r in &touching {
                        worst = match (r.classification, r.linear_coefficient) {
                            (TouchClass::Quadratic, Some(a)) => worst.max(a.abs()),
                            _ => f64::INFINITY,
                        };
                    }
                    Ok((
                        worst,
                        "linear coefficient of the touching bilayer pair".into(),
                    ))
                }));
                out.push(measure("cones.quadratic_curvature", 1e-2, || {
                    let mut worst: f64 = 0.0;
                    for r in &touching {
                        worst = match (r.classification, r.relative_deviation) {
                            (TouchClass::Quadratic, Some(d)) => worst.max(d.abs()),
                            _ => f64::INFINITY,
                        };
                    }
                    Ok((
                        worst,
                        "relative deviation of the curvature from 1/t0^2".into(),
                    ))
                }));
            }
        }
        Err(e) => out.push(measure("cones.classification", 0.0, || Err(e))),
    }
    out.push(measure("cones.d_point_location", 1.0, || {
        let n = config.theta_grid.0.max(config.theta_grid.1).max(16);
        let d = 2.0 * PI / 3.0;
        let points = locate_touch_points(
            &spec,
            candidate_pairs(spec.layers())[0],
            n,
            config.tolerances.touch_tol,
        )?;
        if points.len() != 2 {
            return Ok((
                f64::INFINITY,
                format!("found {} touch points, expected 2", points.len()),
            ));
        }
        let mut worst: f64 = 0.0;
        for p in &points {
            let s = p.theta.theta1.signum();
            let off = (p.theta.theta1 - s * d)
                .abs()
                .max((p.theta.theta2 + s * d).abs());
            worst = worst.max(off / p.cell);
        }
        Ok((
            worst,
            "distance of the touch points from the D-points, in grid cells".into(),
        ))
    }));
    out.push(measure("spectrum.identity", 1e-8, || {
        let report = assemble_spectrum(&spec, &solver, config.lambda_range, &grid)?;
        let hill = solver.hill_bands(lo, hi)?;
        if report.ac_bands != hill {
            return Ok((f64::INFINITY, "ac bands differ from the Hill bands".into()));
        }
        let mut worst: f64 = 0.0;
        for (idx, cover) in report.dispersion_cover() {
            let band = hill
                .iter()
                .find(|b| b.index == idx)
                .expect("band of the cover");
            if cover.len() != 1 {
                return Ok((
                    f64::INFINITY,
                    format!("band {idx} is covered by {} pieces", cover.len()),
                ));
            }
            worst = worst
                .max((cover[0].0 - band.lambda_lo).abs())
                .max((cover[0].1 - band.lambda_hi).abs());
        }
        Ok((
            worst,
            "endpoint mismatch between the dispersion cover and the bands".into(),
        ))
    }));
    out.push(measure("spectrum.flat_bands", 1e-8, || {
        let mut worst: f64 = 0.0;
        let eigen = solver.dirichlet_eigenvalues(lo, hi)?.eigenvalues;
        for l in &eigen {
            worst = worst.max(solver.monodromy(*l)?.m12.abs());
        }
        Ok((
            worst,
            format!("|M12| at {} Dirichlet eigenvalues", eigen.len()),
        ))
    }));
    let modes = sample_modes(config, &solver, 20);
    match modes {
        Ok(modes) => {
            out.push(measure("modes.residual", 1e-8, || {
                let worst = modes
                    .iter()
                    .map(|m| m.coefficients.residual)
                    .fold(0.0, f64::max);
                Ok((worst, "max matrix residual of 20 random modes".into()))
            }));
            out.push(measure("modes.vertex_conditions", 1e-7, || {
                let worst = modes
                    .iter()
                    .map(|m| m.vertex.max_violation())
                    .fold(0.0, f64::max);
                Ok((worst, "max continuity/Kirchhoff/Floquet violation".into()))
            }));
        }
        Err(CliError::Validation(v)) => out.push(CheckResult {
            name: "modes.vertex_conditions".into(),
            passed: true,
            value: 0.0,
            tolerance: 1e-7,
            detail: format!("skipped: {}", v.join("; ")),
        }),
        Err(e) => out.push(measure("modes.vertex_conditions", 1e-7, || Err(e))),
    }
    Ok(out)
}

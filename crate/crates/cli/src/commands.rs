//! The six commands. Each writes its files through an [`Exporter`] and ends
//! with `bundle.json`.

use std::fmt;
use std::str::FromStr;

use grapheneqg_core::cones::{
    analyse_cones, candidate_pairs, diagonal_slice, lambda_space_slope, locate_touch_points,
    TouchPoint,
};
use grapheneqg_core::dispersion::dispersion_surface;
use grapheneqg_core::modes::{build_edge_functions, solve_mode, verify_vertex_conditions};
use grapheneqg_core::spectrum::{assemble_spectrum, verify_union_identity};
use grapheneqg_core::{
    Branch, ConeOptions, ConeReport, HillBand, HillSolver, ModeCoefficients, QuasiMomentum,
    SpectrumReport, UnionReport, VertexReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::check::{run_checks, CheckResult};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::export::{
    fmt_float, ExportBundle, Exporter, GridParameters, Provenance, SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Bands,
    Dispersion,
    Cones,
    Spectrum,
    Modes,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Dispersion => "dispersion",
            Command::Cones => "cones",
            Command::Spectrum => "spectrum",
            Command::Modes => "modes",
            Command::Check => "check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Command::Bands,
            Command::Dispersion,
            Command::Cones,
            Command::Spectrum,
            Command::Modes,
            Command::Check,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

/// Runs `cmd` and writes its outputs to `config.output_dir`. Under `check`,
/// the report and bundle are written before [`CliError::CheckFailed`] is
/// returned.
pub fn run_command(cmd: Command, config: &RunConfig) -> Result<ExportBundle> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(CliError::Validation(violations));
    }
    let grid = config.grid()?;
    let provenance = Provenance {
        command: cmd.name().to_string(),
        engine_version: crate::export::ENGINE_VERSION.to_string(),
        schema_version: SCHEMA_VERSION.to_string(),
        grid: GridParameters {
            n1: config.theta_grid.0,
            n2: config.theta_grid.1,
            axis1_nodes: grid.axis1.len(),
            axis2_nodes: grid.axis2.len(),
        },
        config: config.clone(),
    };
    let mut ex = Exporter::new(&config.output_dir)?;
    let solver = HillSolver::with_config(config.edge_potential()?, config.hill_config())?;
    let mut failed = None;
    match cmd {
        Command::Bands => bands(&mut ex, config, &solver)?,
        Command::Dispersion => dispersion(&mut ex, config, &solver)?,
        Command::Cones => cones(&mut ex, config, &solver)?,
        Command::Spectrum => spectrum(&mut ex, config, &solver)?,
        Command::Modes => modes(&mut ex, config, &solver)?,
        Command::Check => failed = check(&mut ex, config)?,
    }
    let bundle = ex.finish(provenance)?;
    match failed {
        Some((failed, total)) if failed > 0 => Err(CliError::CheckFailed { failed, total }),
        _ => Ok(bundle),
    }
}

#[derive(Serialize)]
struct BandsReport<'a> {
    schema_version: &'static str,
    potential: String,
    lambda_range: (f64, f64),
    bands: &'a [HillBand],
    dirichlet_eigenvalues: Vec<f64>,
}

fn bands(ex: &mut Exporter, config: &RunConfig, solver: &HillSolver) -> Result<()> {
    let (lo, hi) = config.lambda_range;
    let bands = solver.hill_bands(lo, hi)?;
    if config.csv {
        let rows: Vec<Vec<String>> = bands
            .iter()
            .map(|b| {
                vec![
                    b.index.to_string(),
                    fmt_float(b.lambda_lo),
                    fmt_float(b.lambda_hi),
                    b.direction.to_string(),
                    fmt_float(b.d_lo),
                    fmt_float(b.d_hi),
                ]
            })
            .collect();
        ex.csv(
            "bands.csv",
            &[
                "index",
                "lambda_lo",
                "lambda_hi",
                "direction",
                "d_lo",
                "d_hi",
            ],
            &rows,
        )?;
    }
    if config.json {
        let report = BandsReport {
            schema_version: SCHEMA_VERSION,
            potential: solver.potential().to_string(),
            lambda_range: config.lambda_range,
            bands: &bands,
            dirichlet_eigenvalues: solver.dirichlet_eigenvalues(lo, hi)?.eigenvalues,
        };
        ex.json("bands.json", &report)?;
    }
    Ok(())
}

fn file_slug(label: &str) -> String {
    label.replace('+', "p").replace('-', "m")
}

#[derive(Serialize)]
struct SurfaceSummary {
    band_index: usize,
    label: String,
    flat: bool,
    file: Option<String>,
    samples: usize,
    clipped: usize,
    lambda_range: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct DispersionReport {
    schema_version: &'static str,
    layers: u32,
    t0: f64,
    bands: Vec<HillBand>,
    surfaces: Vec<SurfaceSummary>,
    slice_file: Option<String>,
}

fn dispersion(ex: &mut Exporter, config: &RunConfig, solver: &HillSolver) -> Result<()> {
    let spec = config.stack()?;
    let grid = config.grid()?;
    let (lo, hi) = config.lambda_range;
    let bands: Vec<HillBand> = solver
        .hill_bands(lo, hi)?
        .into_iter()
        .take(config.dispersion_bands)
        .collect();
    let mut summaries = Vec::new();
    for band in &bands {
        let mut flat_count = 0;
        for s in dispersion_surface(&spec, solver, &grid, band)? {
            let name = if s.flat {
                flat_count += 1;
                format!("dispersion_band{}_flat{}.csv", band.index, flat_count - 1)
            } else {
                format!("dispersion_band{}_{}.csv", band.index, file_slug(&s.label))
            };
            if config.csv {
                let rows: Vec<Vec<String>> = s
                    .samples
                    .iter()
                    .filter_map(|p| {
                        p.lambda.map(|l| {
                            vec![
                                fmt_float(p.theta1),
                                fmt_float(p.theta2),
                                s.label.clone(),
                                fmt_float(l),
                            ]
                        })
                    })
                    .collect();
                ex.csv(&name, &["theta1", "theta2", "branch", "lambda"], &rows)?;
            }
            summaries.push(SurfaceSummary {
                band_index: band.index,
                label: s.label.clone(),
                flat: s.flat,
                file: config.csv.then_some(name),
                samples: s.samples.len(),
                clipped: s.clipped,
                lambda_range: s.lambda_range(),
            });
        }
    }
    let slice_name = "slice.csv";
    if config.csv {
        let slice = diagonal_slice(&spec, config.window, config.slice_samples)?;
        let mut rows = Vec::new();
        for (k, t) in slice.theta1.iter().enumerate() {
            for (b, branch) in slice.branches.iter().enumerate() {
                rows.push(vec![
                    fmt_float(*t),
                    branch.label().to_string(),
                    fmt_float(slice.values[b][k]),
                ]);
            }
        }
        ex.csv(slice_name, &["theta1", "branch", "r"], &rows)?;
    }
    if config.json {
        let report = DispersionReport {
            schema_version: SCHEMA_VERSION,
            layers: spec.layers(),
            t0: spec.t0(),
            bands,
            surfaces: summaries,
            slice_file: config.csv.then(|| slice_name.to_string()),
        };
        ex.json("dispersion.json", &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConesReport {
    schema_version: &'static str,
    layers: u32,
    t0: f64,
    coupling_warning: bool,
    reports: Vec<ConeReport>,
    touch_points: Vec<PairTouchPoints>,
}

#[derive(Serialize)]
struct PairTouchPoints {
    branches: [Branch; 2],
    points: Vec<TouchPoint>,
}

/// Cone reports with λ-space slopes filled in on the lowest band of the range
/// where the touch energy is interior.
pub fn cone_reports(config: &RunConfig, solver: &HillSolver) -> Result<Vec<ConeReport>> {
    let spec = config.stack()?;
    let options = ConeOptions {
        touch_tol: config.tolerances.touch_tol,
        ..ConeOptions::default()
    };
    let mut reports = analyse_cones(&spec, &options)?;
    let bands = solver.hill_bands(config.lambda_range.0, config.lambda_range.1)?;
    for r in reports.iter_mut() {
        r.lambda_slope = bands
            .iter()
            .find_map(|b| lambda_space_slope(r, solver, b).ok());
    }
    Ok(reports)
}

fn cones(ex: &mut Exporter, config: &RunConfig, solver: &HillSolver) -> Result<()> {
    let spec = config.stack()?;
    let reports = cone_reports(config, solver)?;
    let n = config.theta_grid.0.max(config.theta_grid.1);
    let mut touch_points = Vec::new();
    for pair in candidate_pairs(spec.layers()) {
        let points = locate_touch_points(&spec, pair, n, config.tolerances.touch_tol)?;
        touch_points.push(PairTouchPoints {
            branches: pair,
            points,
        });
    }
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    if config.csv {
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    fmt_float(r.theta_d.theta1),
                    fmt_float(r.theta_d.theta2),
                    r.branches[0].label().to_string(),
                    r.branches[1].label().to_string(),
                    serde_json::to_value(r.classification)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                    fmt_float(r.touch_gap),
                    opt(r.gamma_fit),
                    opt(r.curvature_fit),
                    opt(r.linear_coefficient),
                    opt(r.reference),
                    opt(r.relative_deviation),
                    opt(r.lambda_slope),
                ]
            })
            .collect();
        ex.csv(
            "cones.csv",
            &[
                "theta1",
                "theta2",
                "upper",
                "lower",
                "classification",
                "touch_gap",
                "gamma_fit",
                "curvature_fit",
                "linear_coefficient",
                "reference",
                "relative_deviation",
                "lambda_slope",
            ],
            &rows,
        )?;
    }
    if config.json {
        let report = ConesReport {
            schema_version: SCHEMA_VERSION,
            layers: spec.layers(),
            t0: spec.t0(),
            coupling_warning: spec.coupling_warning(),
            reports,
            touch_points,
        };
        ex.json("cones.json", &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumFile {
    schema_version: &'static str,
    spectrum: SpectrumReport,
    dispersion_cover: Vec<BandCover>,
    union: UnionReport,
}

#[derive(Serialize)]
struct BandCover {
    band_index: usize,
    intervals: Vec<(f64, f64)>,
}

fn spectrum(ex: &mut Exporter, config: &RunConfig, solver: &HillSolver) -> Result<()> {
    let spec = config.stack()?;
    let grid = config.grid()?;
    let report = assemble_spectrum(&spec, solver, config.lambda_range, &grid)?;
    if config.csv {
        let mut rows = Vec::new();
        for b in &report.ac_bands {
            rows.push(vec![
                "ac".to_string(),
                b.index.to_string(),
                String::new(),
                fmt_float(b.lambda_lo),
                fmt_float(b.lambda_hi),
            ]);
        }
        for s in &report.sub_bands {
            rows.push(vec![
                "sub".to_string(),
                s.band_index.to_string(),
                s.branch.label().to_string(),
                fmt_float(s.lambda_lo),
                fmt_float(s.lambda_hi),
            ]);
        }
        for f in &report.flat_eigenvalues {
            rows.push(vec![
                "flat".to_string(),
                String::new(),
                String::new(),
                fmt_float(f.lambda),
                fmt_float(f.lambda),
            ]);
        }
        ex.csv(
            "spectrum.csv",
            &["kind", "band_index", "branch", "lambda_lo", "lambda_hi"],
            &rows,
        )?;
    }
    if config.json {
        let union = verify_union_identity(&spec, solver, config.lambda_range, &grid)?;
        let dispersion_cover = report
            .dispersion_cover()
            .into_iter()
            .map(|(band_index, intervals)| BandCover {
                band_index,
                intervals,
            })
            .collect();
        ex.json(
            "spectrum.json",
            &SpectrumFile {
                schema_version: SCHEMA_VERSION,
                spectrum: report,
                dispersion_cover,
                union,
            },
        )?;
    }
    Ok(())
}

/// One reconstructed Bloch mode with its vertex-condition violations.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSample {
    pub sample: usize,
    pub band_index: usize,
    pub lambda: f64,
    pub coefficients: ModeCoefficients,
    pub vertex: VertexReport,
}

/// `count` modes at seeded random (θ, branch, band). Draws whose energy falls
/// on the Dirichlet guard or outside the band are redrawn.
pub fn sample_modes(
    config: &RunConfig,
    solver: &HillSolver,
    count: usize,
) -> Result<Vec<ModeSample>> {
    use std::f64::consts::PI;
    let spec = config.stack()?;
    let bands = solver.hill_bands(config.lambda_range.0, config.lambda_range.1)?;
    if bands.is_empty() {
        return Err(CliError::Validation(vec![
            "lambda: the range contains no spectral band".into(),
        ]));
    }
    let branches = Branch::ascending(spec.layers());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(CliError::Engine(grapheneqg_core::Error::Convergence(
                format!("only {} of {count} modes could be reconstructed", out.len()),
            )));
        }
        let theta = QuasiMomentum::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let branch = branches[rng.gen_range(0..branches.len())];
        let band = &bands[rng.gen_range(0..bands.len())];
        let coefficients = solve_mode(&spec, theta, branch)?;
        let Ok(lambda) = solver.invert_discriminant(band, 2.0 * coefficients.eta_value) else {
            continue;
        };
        let functions = match build_edge_functions(&spec, &coefficients, solver, lambda) {
            Ok(f) => f,
            Err(grapheneqg_core::Error::Pole { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let vertex = verify_vertex_conditions(&functions, &spec, theta)?;
        out.push(ModeSample {
            sample: out.len(),
            band_index: band.index,
            lambda,
            coefficients,
            vertex,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct ModesReport {
    schema_version: &'static str,
    layers: u32,
    t0: f64,
    seed: u64,
    modes: Vec<ModeSample>,
}

fn modes(ex: &mut Exporter, config: &RunConfig, solver: &HillSolver) -> Result<()> {
    let spec = config.stack()?;
    let modes = sample_modes(config, solver, config.mode_count)?;
    if config.csv {
        let mut coeff_rows = Vec::new();
        let mut violation_rows = Vec::new();
        for m in &modes {
            let c = &m.coefficients;
            let label = c.branch.map(|b| b.label()).unwrap_or("");
            let parts = c
                .alpha
                .iter()
                .enumerate()
                .map(|(i, z)| (format!("alpha{}", i + 1), z))
                .chain(
                    c.beta
                        .iter()
                        .enumerate()
                        .map(|(i, z)| (format!("beta{}", i + 1), z)),
                );
            for (component, z) in parts {
                coeff_rows.push(vec![
                    m.sample.to_string(),
                    label.to_string(),
                    fmt_float(c.theta.theta1),
                    fmt_float(c.theta.theta2),
                    fmt_float(c.eta_value),
                    fmt_float(m.lambda),
                    component,
                    fmt_float(z.re),
                    fmt_float(z.im),
                ]);
            }
            violation_rows.push(vec![
                m.sample.to_string(),
                m.band_index.to_string(),
                fmt_float(c.residual),
                fmt_float(m.vertex.continuity),
                fmt_float(m.vertex.kirchhoff),
                fmt_float(m.vertex.floquet),
            ]);
        }
        ex.csv(
            "modes.csv",
            &[
                "sample",
                "branch",
                "theta1",
                "theta2",
                "eta",
                "lambda",
                "component",
                "re",
                "im",
            ],
            &coeff_rows,
        )?;
        ex.csv(
            "mode_violations.csv",
            &[
                "sample",
                "band_index",
                "residual",
                "continuity",
                "kirchhoff",
                "floquet",
            ],
            &violation_rows,
        )?;
    }
    if config.json {
        ex.json(
            "modes.json",
            &ModesReport {
                schema_version: SCHEMA_VERSION,
                layers: spec.layers(),
                t0: spec.t0(),
                seed: config.seed,
                modes,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckReport {
    schema_version: &'static str,
    passed: bool,
    checks: Vec<CheckResult>,
}

fn check(ex: &mut Exporter, config: &RunConfig) -> Result<Option<(usize, usize)>> {
    let checks = run_checks(config)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if config.csv {
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    c.passed.to_string(),
                    fmt_float(c.value),
                    fmt_float(c.tolerance),
                    c.detail.clone(),
                ]
            })
            .collect();
        ex.csv(
            "check.csv",
            &["name", "passed", "value", "tolerance", "detail"],
            &rows,
        )?;
    }
    if config.json {
        ex.json(
            "check.json",
            &CheckReport {
                schema_version: SCHEMA_VERSION,
                passed: failed == 0,
                checks: checks.clone(),
            },
        )?;
    }
    Ok(Some((failed, checks.len())))
}

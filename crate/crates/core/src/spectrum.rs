//! Assembled spectrum of H_n: absolutely continuous bands (the Hill bands),
//! flat Dirichlet eigenvalues of infinite multiplicity, and the sub-band swept
//! by each root branch inside every band. The singular continuous part is
//! always empty.

use serde::{Deserialize, Serialize};

use crate::dispersion::{branch_value_f2, dispersion_surface, Branch, ThetaGrid};
use crate::error::Result;
use crate::hill::{HillBand, HillSolver};
use crate::lattice::{f_abs_squared, StackSpec};

/// Dirichlet eigenvalues within this distance of a band endpoint are flagged
/// as sitting on the band edge.
pub const SHARED_POINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatEigenvalue {
    pub lambda: f64,
    pub multiplicity: String,
    /// Also an endpoint of an ac band.
    pub shared_with_band: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremaSource {
    /// Closed-form extrema of the bilayer roots.
    Exact,
    /// Extrema over the θ-grid.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubBand {
    pub band_index: usize,
    pub branch: Branch,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Range of D = 2r(θ) covered on this band.
    pub d_lo: f64,
    pub d_hi: f64,
    pub source: ExtremaSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub layers: u32,
    pub t0: f64,
    pub potential: String,
    pub lambda_range: (f64, f64),
    pub ac_bands: Vec<HillBand>,
    pub flat_eigenvalues: Vec<FlatEigenvalue>,
    pub sub_bands: Vec<SubBand>,
    /// Always empty; kept so the report states it explicitly.
    pub singular_continuous: Vec<(f64, f64)>,
}

impl SpectrumReport {
    pub fn is_empty(&self) -> bool {
        self.ac_bands.is_empty() && self.flat_eigenvalues.is_empty()
    }

    /// Per band, the union of its sub-bands as merged λ-intervals.
    pub fn dispersion_cover(&self) -> Vec<(usize, Vec<(f64, f64)>)> {
        self.ac_bands
            .iter()
            .map(|band| {
                let pieces: Vec<(f64, f64)> = self
                    .sub_bands
                    .iter()
                    .filter(|s| s.band_index == band.index)
                    .map(|s| (s.lambda_lo, s.lambda_hi))
                    .collect();
                (band.index, merge_intervals(pieces))
            })
            .collect()
    }
}

/// Sorted union of closed intervals.
pub fn merge_intervals(mut pieces: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in pieces {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// (min r, max r) of a branch over the zone.
pub fn branch_extrema(
    spec: &StackSpec,
    branch: Branch,
    grid: &ThetaGrid,
) -> Result<(f64, f64, ExtremaSource)> {
    if spec.layers() == 2 {
        let t0b = spec.big_t0();
        let low = spec.t0() * spec.t0() / t0b;
        let (lo, hi) = match branch {
            Branch::RPlusPlus => (low, 1.0),
            Branch::RPlusMinus => (0.0, 3.0 / t0b),
            Branch::RMinusPlus => (-1.0, -low),
            _ => (-3.0 / t0b, 0.0),
        };
        return Ok((lo, hi, ExtremaSource::Exact));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for theta in grid.points() {
        let r = branch_value_f2(spec, branch, f_abs_squared(theta))?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi, ExtremaSource::Grid))
}

/// Spectral report on `[lo, hi]`. The grid is used only for trilayer
/// sub-band extrema.
pub fn assemble_spectrum(
    spec: &StackSpec,
    solver: &HillSolver,
    lambda_range: (f64, f64),
    grid: &ThetaGrid,
) -> Result<SpectrumReport> {
    let (lo, hi) = lambda_range;
    let mut report = SpectrumReport {
        layers: spec.layers(),
        t0: spec.t0(),
        potential: solver.potential().to_string(),
        lambda_range,
        ac_bands: Vec::new(),
        flat_eigenvalues: Vec::new(),
        sub_bands: Vec::new(),
        singular_continuous: Vec::new(),
    };
    if lo >= hi {
        return Ok(report);
    }
    report.ac_bands = solver.hill_bands(lo, hi)?;
    let extrema = Branch::ascending(spec.layers())
        .iter()
        .map(|b| branch_extrema(spec, *b, grid).map(|e| (*b, e)))
        .collect::<Result<Vec<_>>>()?;

    for band in &report.ac_bands {
        let (dmin, dmax) = band.d_range();
        for (branch, (rlo, rhi, source)) in &extrema {
            let a = (2.0 * rlo).max(dmin);
            let b = (2.0 * rhi).min(dmax);
            if a > b {
                continue;
            }
            let la = solver.invert_discriminant(band, a)?;
            let lb = solver.invert_discriminant(band, b)?;
            report.sub_bands.push(SubBand {
                band_index: band.index,
                branch: *branch,
                lambda_lo: la.min(lb),
                lambda_hi: la.max(lb),
                d_lo: a,
                d_hi: b,
                source: *source,
            });
        }
    }

    let dirichlet = solver.dirichlet_eigenvalues(lo, hi)?;
    report.flat_eigenvalues = dirichlet
        .eigenvalues
        .into_iter()
        .map(|lambda| FlatEigenvalue {
            lambda,
            multiplicity: "infinite".to_string(),
            shared_with_band: report.ac_bands.iter().any(|b| {
                (b.lambda_lo - lambda).abs() <= SHARED_POINT_TOL
                    || (b.lambda_hi - lambda).abs() <= SHARED_POINT_TOL
            }),
        })
        .collect();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCoverage {
    pub band_index: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Largest hole in the sampled λ-values of the band.
    pub max_gap_lambda: f64,
    /// Largest hole in the sampled values of D = 2r(θ) over the band's D-range.
    pub max_gap_d: f64,
    /// Flat surfaces carried by the band (one per Dirichlet eigenvalue).
    pub flat_surfaces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionReport {
    pub grid: (usize, usize),
    pub bands: Vec<BandCoverage>,
    pub max_gap_lambda: f64,
    pub max_gap_d: f64,
    /// Every flat surface is defined at every grid θ.
    pub flat_everywhere: bool,
}

/// Compares the union over grid θ of the per-θ eigenvalues with the ac bands.
pub fn verify_union_identity(
    spec: &StackSpec,
    solver: &HillSolver,
    lambda_range: (f64, f64),
    grid: &ThetaGrid,
) -> Result<UnionReport> {
    let (lo, hi) = lambda_range;
    let mut report = UnionReport {
        grid: (grid.n1, grid.n2),
        bands: Vec::new(),
        max_gap_lambda: 0.0,
        max_gap_d: 0.0,
        flat_everywhere: true,
    };
    if lo >= hi {
        return Ok(report);
    }
    // surfaces need at least the minimum grid; coarser grids are sampled directly
    let use_surfaces = grid.n1.min(grid.n2) >= crate::dispersion::MIN_SURFACE_GRID;
    for band in solver.hill_bands(lo, hi)? {
        let (dmin, dmax) = band.d_range();
        let mut ds: Vec<f64> = Vec::new();
        for branch in Branch::ascending(spec.layers()) {
            for theta in grid.points() {
                let d = 2.0 * branch_value_f2(spec, *branch, f_abs_squared(theta))?;
                if d >= dmin && d <= dmax {
                    ds.push(d);
                }
            }
        }
        ds.extend([dmin, dmax]);
        ds.sort_by(f64::total_cmp);
        let max_gap_d = max_gap(&ds);

        let (max_gap_lambda, flat_surfaces) = if use_surfaces {
            let surfaces = dispersion_surface(spec, solver, grid, &band)?;
            let mut ls: Vec<f64> = surfaces
                .iter()
                .filter(|s| !s.flat)
                .flat_map(|s| s.samples.iter().filter_map(|x| x.lambda))
                .collect();
            ls.extend([band.lambda_lo, band.lambda_hi]);
            ls.sort_by(f64::total_cmp);
            let flats: Vec<_> = surfaces.iter().filter(|s| s.flat).collect();
            if flats.iter().any(|s| {
                s.samples.len() != grid.len() || s.samples.iter().any(|x| x.lambda.is_none())
            }) {
                report.flat_everywhere = false;
            }
            (max_gap(&ls), flats.len())
        } else {
            let inverse = solver.band_inverse(&band, 65)?;
            let mut ls = ds
                .iter()
                .map(|d| inverse.invert(*d))
                .collect::<Result<Vec<_>>>()?;
            ls.sort_by(f64::total_cmp);
            (max_gap(&ls), 0)
        };
        report.max_gap_lambda = report.max_gap_lambda.max(max_gap_lambda);
        report.max_gap_d = report.max_gap_d.max(max_gap_d);
        report.bands.push(BandCoverage {
            band_index: band.index,
            lambda_lo: band.lambda_lo,
            lambda_hi: band.lambda_hi,
            max_gap_lambda,
            max_gap_d,
            flat_surfaces,
        });
    }
    Ok(report)
}

fn max_gap(sorted: &[f64]) -> f64 {
    sorted.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

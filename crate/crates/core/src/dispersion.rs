//! Floquet matrices M_n(η, θ), their determinant polynomials in η, the root
//! families r(θ), and dispersion surfaces λ(θ) obtained by inverting
//! D(λ) = 2r(θ) band by band.
//!
//! Unknowns are ordered (α₁, β₁, α₂, β₂[, α₃, β₃]). Every entry depends on θ
//! only through F(θ), and every root only through |F(θ)|².

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hill::{HillBand, HillSolver};
use crate::lattice::{f_abs_squared, f_theta, QuasiMomentum, StackSpec};

/// Root families of det M_n. For the bilayer, `r{s}{p}` is r_s^p: `s` is the
/// outer sign and `p` the sign in front of the inner square root. The trilayer
/// has the analogous `rt{s}{p}` family plus `rb±` = ±√(|F|²/(3T₀)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "r++")]
    RPlusPlus,
    #[serde(rename = "r+-")]
    RPlusMinus,
    #[serde(rename = "r-+")]
    RMinusPlus,
    #[serde(rename = "r--")]
    RMinusMinus,
    #[serde(rename = "rt++")]
    TildePlusPlus,
    #[serde(rename = "rt+-")]
    TildePlusMinus,
    #[serde(rename = "rt-+")]
    TildeMinusPlus,
    #[serde(rename = "rt--")]
    TildeMinusMinus,
    #[serde(rename = "rb+")]
    BarPlus,
    #[serde(rename = "rb-")]
    BarMinus,
}

const BILAYER_ASCENDING: [Branch; 4] = [
    Branch::RMinusPlus,
    Branch::RMinusMinus,
    Branch::RPlusMinus,
    Branch::RPlusPlus,
];

// rt₋ ≤ rb ≤ rt₊ in the squared variable holds for every θ
const TRILAYER_ASCENDING: [Branch; 6] = [
    Branch::TildeMinusPlus,
    Branch::BarMinus,
    Branch::TildeMinusMinus,
    Branch::TildePlusMinus,
    Branch::BarPlus,
    Branch::TildePlusPlus,
];

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::RPlusPlus => "r++",
            Branch::RPlusMinus => "r+-",
            Branch::RMinusPlus => "r-+",
            Branch::RMinusMinus => "r--",
            Branch::TildePlusPlus => "rt++",
            Branch::TildePlusMinus => "rt+-",
            Branch::TildeMinusPlus => "rt-+",
            Branch::TildeMinusMinus => "rt--",
            Branch::BarPlus => "rb+",
            Branch::BarMinus => "rb-",
        }
    }

    pub fn from_label(label: &str) -> Option<Branch> {
        Branch::all().into_iter().find(|b| b.label() == label)
    }

    pub fn all() -> [Branch; 10] {
        [
            Branch::RPlusPlus,
            Branch::RPlusMinus,
            Branch::RMinusPlus,
            Branch::RMinusMinus,
            Branch::TildePlusPlus,
            Branch::TildePlusMinus,
            Branch::TildeMinusPlus,
            Branch::TildeMinusMinus,
            Branch::BarPlus,
            Branch::BarMinus,
        ]
    }

    /// Branches of an n-layer stack in ascending order of value.
    pub fn ascending(layers: u32) -> &'static [Branch] {
        if layers == 2 {
            &BILAYER_ASCENDING
        } else {
            &TRILAYER_ASCENDING
        }
    }

    pub fn layers(&self) -> u32 {
        match self {
            Branch::RPlusPlus | Branch::RPlusMinus | Branch::RMinusPlus | Branch::RMinusMinus => 2,
            _ => 3,
        }
    }

    /// Outer sign of the family.
    pub fn sign(&self) -> f64 {
        match self {
            Branch::RPlusPlus
            | Branch::RPlusMinus
            | Branch::TildePlusPlus
            | Branch::TildePlusMinus
            | Branch::BarPlus => 1.0,
            _ => -1.0,
        }
    }

    /// The branch with the opposite outer sign.
    pub fn mirror(&self) -> Branch {
        match self {
            Branch::RPlusPlus => Branch::RMinusPlus,
            Branch::RPlusMinus => Branch::RMinusMinus,
            Branch::RMinusPlus => Branch::RPlusPlus,
            Branch::RMinusMinus => Branch::RPlusMinus,
            Branch::TildePlusPlus => Branch::TildeMinusPlus,
            Branch::TildePlusMinus => Branch::TildeMinusMinus,
            Branch::TildeMinusPlus => Branch::TildePlusPlus,
            Branch::TildeMinusMinus => Branch::TildePlusMinus,
            Branch::BarPlus => Branch::BarMinus,
            Branch::BarMinus => Branch::BarPlus,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// M_n(η, θ) as a dense 2n×2n complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    pub layers: u32,
    pub eta: f64,
    pub theta: QuasiMomentum,
    dim: usize,
    entries: Vec<Complex64>,
}

impl SpectralMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn determinant(&self) -> Complex64 {
        self.dense().full_piv_lu().determinant()
    }

    /// max |Mᵢⱼ − conj(Mⱼᵢ)|; zero because η and t₀ are real.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// ‖M·x‖₂
    pub fn apply_norm(&self, x: &[Complex64]) -> f64 {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.get(i, j) * x[j])
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

/// Builds M_n(η, θ).
///
/// Bilayer:
/// ```text
/// [ −T₀η   F̄    0    t₀² ]
/// [  F   −3η    0     0  ]
/// [  0     0  −3η     F̄  ]
/// [ t₀²    0    F   −T₀η ]
/// ```
/// The trilayer matrix borders this with a third layer: the middle type-B row
/// carries −T̃₀η and couples to α₃ through t₀², and the (α₃, β₃) block repeats
/// the (α₁, β₁) block.
pub fn build_spectral_matrix(spec: &StackSpec, eta: f64, theta: QuasiMomentum) -> SpectralMatrix {
    let f = f_theta(theta);
    let fb = f.conj();
    let c = |v: f64| Complex64::new(v, 0.0);
    let t2 = spec.t0() * spec.t0();
    let a = -spec.big_t0() * eta;
    let b = -3.0 * eta;
    let z = c(0.0);
    let entries = if spec.layers() == 2 {
        vec![
            c(a),
            fb,
            z,
            c(t2), //
            f,
            c(b),
            z,
            z, //
            z,
            z,
            c(b),
            fb, //
            c(t2),
            z,
            f,
            c(a),
        ]
    } else {
        let m = -spec.big_t0_tilde() * eta;
        vec![
            c(a),
            fb,
            z,
            c(t2),
            z,
            z, //
            f,
            c(b),
            z,
            z,
            z,
            z, //
            z,
            z,
            c(b),
            fb,
            z,
            z, //
            c(t2),
            z,
            f,
            c(m),
            c(t2),
            z, //
            z,
            z,
            z,
            c(t2),
            c(a),
            fb, //
            z,
            z,
            z,
            z,
            f,
            c(b),
        ]
    };
    let dim = 2 * spec.layers() as usize;
    SpectralMatrix {
        layers: spec.layers(),
        eta,
        theta,
        dim,
        entries,
    }
}

/// Coefficients of det M_n(η, θ) as a polynomial in η, constant term first.
/// Odd coefficients are exactly zero.
pub fn det_polynomial(spec: &StackSpec, theta: QuasiMomentum) -> Vec<f64> {
    det_polynomial_f2(spec, f_abs_squared(theta))
}

pub(crate) fn det_polynomial_f2(spec: &StackSpec, f2: f64) -> Vec<f64> {
    let t4 = spec.t0().powi(4);
    let t0b = spec.big_t0();
    if spec.layers() == 2 {
        vec![
            f2 * f2,
            0.0,
            -(9.0 * t4 + 6.0 * t0b * f2),
            0.0,
            9.0 * t0b * t0b,
        ]
    } else {
        let tt = spec.big_t0_tilde();
        vec![
            -f2 * f2 * f2,
            0.0,
            18.0 * t4 * f2 + 3.0 * (2.0 * t0b + tt) * f2 * f2,
            0.0,
            -(54.0 * t0b * t4 + 9.0 * (t0b * t0b + 2.0 * t0b * tt) * f2),
            0.0,
            27.0 * t0b * t0b * tt,
        ]
    }
}

/// Horner evaluation, constant term first.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Inner discriminant under the square root of the closed-form roots, written
/// as the paper-style difference G² − 36T₀²|F|⁴ (bilayer) or
/// G₃² − 36T₀T̃₀|F|⁴ (trilayer). Only diagnostic; the roots themselves use
/// the factored form, which is nonnegative term by term.
pub fn inner_discriminant(spec: &StackSpec, theta: QuasiMomentum) -> f64 {
    let f2 = f_abs_squared(theta);
    let (g, prod) = quartic_factor(spec, f2);
    g * g - 4.0 * prod * f2 * f2
}

/// The even quartic factor 9P s² − G s + |F|⁴ in s = η² shared by the
/// non-bar branches: returns (G, 9P), where P = T₀² or T₀T̃₀.
fn quartic_factor(spec: &StackSpec, f2: f64) -> (f64, f64) {
    let t4 = spec.t0().powi(4);
    let t0b = spec.big_t0();
    if spec.layers() == 2 {
        (9.0 * t4 + 6.0 * t0b * f2, 9.0 * t0b * t0b)
    } else {
        let tt = spec.big_t0_tilde();
        (18.0 * t4 + 3.0 * (t0b + tt) * f2, 9.0 * t0b * tt)
    }
}

pub const CLAMP_TOL: f64 = 1e-12;

/// Squared roots (s₊, s₋, s̄) with s = η²; s̄ is only meaningful for n = 3.
fn squared_roots(spec: &StackSpec, f2: f64) -> Result<(f64, f64, f64)> {
    let (g, nine_p) = quartic_factor(spec, f2);
    let naive = g * g - 4.0 * nine_p * f2 * f2;
    if naive < -CLAMP_TOL {
        return Err(Error::NumericalConsistency(format!(
            "inner discriminant {naive} is negative at |F|^2 = {f2}"
        )));
    }
    let t4 = spec.t0().powi(4);
    let t0b = spec.big_t0();
    // factored forms of the same quantity
    let inner = if spec.layers() == 2 {
        9.0 * t4 * (9.0 * t4 + 12.0 * t0b * f2)
    } else {
        let tt = spec.big_t0_tilde();
        324.0 * t4 * t4 + 108.0 * t4 * (t0b + tt) * f2 + 9.0 * t4 * f2 * f2
    };
    let s_plus = (g + inner.sqrt()) / (2.0 * nine_p);
    // Vieta keeps the small root accurate as |F| → 0
    let s_minus = if s_plus > 0.0 {
        f2 * f2 / (nine_p * s_plus)
    } else {
        0.0
    };
    let s_bar = f2 / (3.0 * t0b);
    Ok((s_plus, s_minus, s_bar))
}

/// r(θ) for one branch, given |F(θ)|².
pub fn branch_value_f2(spec: &StackSpec, branch: Branch, f2: f64) -> Result<f64> {
    if branch.layers() != spec.layers() {
        return Err(Error::InvalidStack(format!(
            "branch {branch} does not belong to a {}-layer stack",
            spec.layers()
        )));
    }
    let (sp, sm, sb) = squared_roots(spec, f2)?;
    let s = match branch {
        Branch::RPlusPlus | Branch::RMinusPlus | Branch::TildePlusPlus | Branch::TildeMinusPlus => {
            sp
        }
        Branch::BarPlus | Branch::BarMinus => sb,
        _ => sm,
    };
    Ok(branch.sign() * s.sqrt())
}

pub fn branch_value(spec: &StackSpec, branch: Branch, theta: QuasiMomentum) -> Result<f64> {
    branch_value_f2(spec, branch, f_abs_squared(theta))
}

/// The 2n roots of det M_n at one θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub theta: QuasiMomentum,
    /// Ascending.
    pub roots: Vec<f64>,
    /// Family label of each entry of `roots`.
    pub branches: Vec<Branch>,
}

impl RootSet {
    pub fn value(&self, branch: Branch) -> Option<f64> {
        self.branches
            .iter()
            .position(|b| *b == branch)
            .map(|k| self.roots[k])
    }

    pub fn max_abs_diff(&self, other: &RootSet) -> f64 {
        self.roots
            .iter()
            .zip(&other.roots)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Closed-form roots. Presented in ascending order, which coincides with the
/// fixed family order listed by [`Branch::ascending`].
pub fn roots_closed_form(spec: &StackSpec, theta: QuasiMomentum) -> Result<RootSet> {
    let f2 = f_abs_squared(theta);
    let branches = Branch::ascending(spec.layers()).to_vec();
    let roots = branches
        .iter()
        .map(|b| branch_value_f2(spec, *b, f2))
        .collect::<Result<Vec<_>>>()?;
    Ok(RootSet {
        theta,
        roots,
        branches,
    })
}

/// Roots of det M_n found without the closed forms. Since
/// M_n(η, θ) = H(θ) − η·W with W positive diagonal, the roots are the
/// eigenvalues of the Hermitian matrix W^{-1/2} H W^{-1/2}, which stay
/// accurate when roots cluster.
pub fn roots_numeric(spec: &StackSpec, theta: QuasiMomentum) -> Result<RootSet> {
    let h = build_spectral_matrix(spec, 0.0, theta);
    let unit = build_spectral_matrix(spec, 1.0, theta);
    let dim = h.dim();
    let w: Vec<f64> = (0..dim)
        .map(|i| (h.get(i, i) - unit.get(i, i)).re)
        .collect();
    if w.iter().any(|v| *v <= 0.0) {
        return Err(Error::NumericalConsistency(
            "η-coefficient of the spectral matrix is not positive definite".into(),
        ));
    }
    let k = DMatrix::from_fn(dim, dim, |i, j| h.get(i, j) / (w[i] * w[j]).sqrt());
    let mut roots: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
    roots.sort_by(f64::total_cmp);
    let coeffs = det_polynomial(spec, theta);
    for &r in &roots {
        let scale: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * r.abs().max(1.0).powi(k as i32))
            .sum();
        let residual = eval_poly(&coeffs, r).abs();
        if residual > 1e-8 * scale {
            return Err(Error::Convergence(format!(
                "residual {residual:e} at claimed root {r} exceeds tolerance"
            )));
        }
    }
    Ok(RootSet {
        theta,
        roots,
        branches: Branch::ascending(spec.layers()).to_vec(),
    })
}

/// Tensor grid over the Brillouin zone. Each axis holds `n` uniformly spaced
/// nodes from −π to π, built so that it is exactly symmetric under negation,
/// with 0 and ±2π/3 inserted when missing (so the D-points are grid nodes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub n1: usize,
    pub n2: usize,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
}

impl ThetaGrid {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::Domain(format!(
                "theta grid needs at least 2 nodes per axis, got {n1}x{n2}"
            )));
        }
        Ok(ThetaGrid {
            n1,
            n2,
            axis1: zone_axis(n1),
            axis2: zone_axis(n2),
        })
    }

    pub fn len(&self) -> usize {
        self.axis1.len() * self.axis2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major (θ₁ outer, θ₂ inner).
    pub fn points(&self) -> impl Iterator<Item = QuasiMomentum> + '_ {
        self.axis1.iter().flat_map(move |&a| {
            self.axis2.iter().map(move |&b| QuasiMomentum {
                theta1: a,
                theta2: b,
            })
        })
    }

    /// Largest spacing along either axis.
    pub fn cell_size(&self) -> f64 {
        let gap = |ax: &[f64]| ax.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        gap(&self.axis1).max(gap(&self.axis2))
    }
}

fn zone_axis(n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let m = (n - 1) as f64;
    let mut ax: Vec<f64> = (0..n).map(|k| PI * (2.0 * k as f64 - m) / m).collect();
    let d = 2.0 * PI / 3.0;
    for forced in [-d, 0.0, d] {
        match ax.iter().position(|v| (v - forced).abs() <= 1e-12) {
            Some(k) => ax[k] = forced,
            None => ax.push(forced),
        }
    }
    ax.sort_by(f64::total_cmp);
    ax
}

/// One sample of a dispersion surface. For root branches `r` is r(θ) and
/// `lambda` is None where 2r(θ) lies outside the band's range of D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub theta1: f64,
    pub theta2: f64,
    pub r: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionSurface {
    pub band_index: usize,
    /// None for a flat (Dirichlet) surface.
    pub branch: Option<Branch>,
    pub label: String,
    pub flat: bool,
    pub samples: Vec<SurfaceSample>,
    /// Samples whose target 2r(θ) was not attained on the band.
    pub clipped: usize,
}

impl DispersionSurface {
    pub fn lambda_range(&self) -> Option<(f64, f64)> {
        let mut it = self.samples.iter().filter_map(|s| s.lambda);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), l| (lo.min(l), hi.max(l))))
    }
}

pub const MIN_SURFACE_GRID: usize = 16;
const INVERSE_TABLE_NODES: usize = 65;
/// Padding around the band when searching for Dirichlet eigenvalues on it.
const FLAT_SEARCH_PAD: f64 = 1e-6;
const FLAT_EDGE_TOL: f64 = 1e-8;

/// Surfaces λ(θ) on `band` for every root branch (in ascending family order),
/// followed by one flat surface per Dirichlet eigenvalue in the closed band.
pub fn dispersion_surface(
    spec: &StackSpec,
    solver: &HillSolver,
    grid: &ThetaGrid,
    band: &HillBand,
) -> Result<Vec<DispersionSurface>> {
    if grid.n1 < MIN_SURFACE_GRID || grid.n2 < MIN_SURFACE_GRID {
        return Err(Error::Domain(format!(
            "dispersion grids need at least {MIN_SURFACE_GRID}x{MIN_SURFACE_GRID} nodes, got {}x{}",
            grid.n1, grid.n2
        )));
    }
    let branches = Branch::ascending(spec.layers());
    let points: Vec<QuasiMomentum> = grid.points().collect();
    let f2s: Vec<f64> = points.iter().map(|t| f_abs_squared(*t)).collect();

    let mut values = Vec::with_capacity(branches.len());
    for b in branches {
        values.push(
            f2s.iter()
                .map(|f2| branch_value_f2(spec, *b, *f2))
                .collect::<Result<Vec<_>>>()?,
        );
    }

    let mut targets: Vec<f64> = values
        .iter()
        .flatten()
        .map(|r| 2.0 * r)
        .filter(|t| (-2.0..=2.0).contains(t))
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| a.to_bits() == b.to_bits());

    let inverse = solver.band_inverse(band, INVERSE_TABLE_NODES)?;
    let inverted = targets
        .par_iter()
        .map(|&t| match inverse.invert(t) {
            Ok(l) => Ok((t.to_bits(), Some(l))),
            Err(Error::OutOfBand { .. }) => Ok((t.to_bits(), None)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let table: HashMap<u64, Option<f64>> = inverted.into_iter().collect();

    let mut surfaces = Vec::new();
    for (b, vals) in branches.iter().zip(&values) {
        let mut clipped = 0;
        let samples = points
            .iter()
            .zip(vals)
            .map(|(t, &r)| {
                let lambda = table.get(&(2.0 * r).to_bits()).copied().flatten();
                if lambda.is_none() {
                    clipped += 1;
                }
                SurfaceSample {
                    theta1: t.theta1,
                    theta2: t.theta2,
                    r: Some(r),
                    lambda,
                }
            })
            .collect();
        surfaces.push(DispersionSurface {
            band_index: band.index,
            branch: Some(*b),
            label: b.label().to_string(),
            flat: false,
            samples,
            clipped,
        });
    }

    for lambda in flat_eigenvalues_on(solver, band)? {
        surfaces.push(DispersionSurface {
            band_index: band.index,
            branch: None,
            label: "flat".to_string(),
            flat: true,
            samples: points
                .iter()
                .map(|t| SurfaceSample {
                    theta1: t.theta1,
                    theta2: t.theta2,
                    r: None,
                    lambda: Some(lambda),
                })
                .collect(),
            clipped: 0,
        });
    }
    Ok(surfaces)
}

/// Dirichlet eigenvalues in the closed band.
pub(crate) fn flat_eigenvalues_on(solver: &HillSolver, band: &HillBand) -> Result<Vec<f64>> {
    let spectrum = solver.dirichlet_eigenvalues(
        band.lambda_lo - FLAT_SEARCH_PAD,
        band.lambda_hi + FLAT_SEARCH_PAD,
    )?;
    Ok(spectrum
        .eigenvalues
        .into_iter()
        .filter(|l| band.contains(*l, FLAT_EDGE_TOL))
        .collect())
}

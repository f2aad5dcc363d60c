//! Bloch-mode reconstruction: the null vector X = (α₁, β₁, …) of M_n(η, θ),
//! the per-edge functions u_e = c₀φ_{λ,0} + c₁φ_{λ,1}, and a check of the
//! weighted continuity, Kirchhoff and Floquet conditions they must satisfy.
//!
//! φ_{λ,0} and φ_{λ,1} are the solutions with (φ(0), φ(1)) = (1, 0) and (0, 1),
//! so an edge function takes the value c₀ at its tail and c₁ at its head.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{branch_value, build_spectral_matrix, det_polynomial, eval_poly, Branch};
use crate::error::{Error, Result};
use crate::hill::HillSolver;
use crate::lattice::{build_fundamental_domain, EdgeKind, QuasiMomentum, StackSpec};

/// Singular values below this fraction of the largest count as zero.
pub const NULL_SINGULAR_THRESHOLD: f64 = 1e-10;
/// Sampling resolution of reconstructed edge functions (divides the default step count).
pub const EDGE_SAMPLES: usize = 33;
const DET_TOL: f64 = 1e-8;
const ETA_CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub branch: Option<Branch>,
    pub theta: QuasiMomentum,
    pub eta_value: f64,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    /// ‖M_n(η, θ)·X‖₂
    pub residual: f64,
}

impl ModeCoefficients {
    /// X = (α₁, β₁, α₂, β₂, …).
    pub fn vector(&self) -> Vec<Complex64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .flat_map(|(a, b)| [*a, *b])
            .collect()
    }

    /// Multiplies every coefficient by `phase` (expected to have modulus one).
    pub fn rotated(&self, phase: Complex64) -> ModeCoefficients {
        ModeCoefficients {
            alpha: self.alpha.iter().map(|a| a * phase).collect(),
            beta: self.beta.iter().map(|b| b * phase).collect(),
            ..self.clone()
        }
    }
}

/// Null vector of M_n at η = r(θ) for the given branch.
pub fn solve_mode(
    spec: &StackSpec,
    theta: QuasiMomentum,
    branch: Branch,
) -> Result<ModeCoefficients> {
    let eta = branch_value(spec, branch, theta)?;
    let mut mode = solve_mode_at(spec, theta, eta)?;
    mode.branch = Some(branch);
    Ok(mode)
}

/// Null vector of M_n(η, θ) for an arbitrary η. Fails with a no-mode error
/// when the matrix has full numerical rank or |det M_n| exceeds 1e−8.
pub fn solve_mode_at(spec: &StackSpec, theta: QuasiMomentum, eta: f64) -> Result<ModeCoefficients> {
    let m = build_spectral_matrix(spec, eta, theta);
    let n = m.dim();
    let svd = m.dense().svd(false, true);
    let sigma = &svd.singular_values;
    let (largest, smallest) = (sigma.max(), sigma.min());
    let ratio = if largest > 0.0 {
        smallest / largest
    } else {
        0.0
    };
    let rank = sigma
        .iter()
        .filter(|s| **s > NULL_SINGULAR_THRESHOLD * largest)
        .count();
    let det = eval_poly(&det_polynomial(spec, theta), eta).abs();
    if rank == n || det > DET_TOL {
        return Err(Error::NoMode {
            singular_ratio: ratio,
        });
    }
    // right singular vector of the smallest singular value
    let k = sigma.imin();
    let v_t: DMatrix<Complex64> = svd.v_t.expect("v_t was requested");
    let mut x: Vec<Complex64> = v_t.row(k).iter().map(|v| v.conj()).collect();
    let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let biggest = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    // first component that is not negligible becomes real and positive
    let lead = x
        .iter()
        .find(|v| v.norm() > 1e-12 * biggest)
        .copied()
        .unwrap_or(Complex64::new(1.0, 0.0));
    let fix = lead.conj() / (lead.norm() * norm);
    for v in x.iter_mut() {
        *v *= fix;
    }
    let residual = m.apply_norm(&x);
    Ok(ModeCoefficients {
        branch: None,
        theta,
        eta_value: eta,
        alpha: x.iter().step_by(2).copied().collect(),
        beta: x.iter().skip(1).step_by(2).copied().collect(),
        residual,
    })
}

/// u_e = c₀φ_{λ,0} + c₁φ_{λ,1} on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFunction {
    pub edge: String,
    pub kind: EdgeKind,
    pub c0: Complex64,
    pub c1: Complex64,
    pub x: Vec<f64>,
    pub values: Vec<Complex64>,
    /// u(0), u(1) from the integrated solutions.
    pub value_at: [Complex64; 2],
    /// u′(0), u′(1) from the integrated solutions.
    pub derivative_at: [Complex64; 2],
}

/// Edge functions for a solved mode at energy λ, with η = D(λ)/2 required to
/// match the mode's η within 1e−8.
pub fn build_edge_functions(
    spec: &StackSpec,
    coeffs: &ModeCoefficients,
    solver: &HillSolver,
    lambda: f64,
) -> Result<Vec<EdgeFunction>> {
    let fs = solver.fundamental_solutions(lambda, EDGE_SAMPLES)?;
    let m = fs.monodromy;
    if m.m12.abs() < solver.config().dirichlet_guard {
        return Err(Error::Pole { lambda, m12: m.m12 });
    }
    let half_d = 0.5 * m.trace();
    if (half_d - coeffs.eta_value).abs() > ETA_CONSISTENCY_TOL {
        return Err(Error::NumericalConsistency(format!(
            "mode has η = {} but D({lambda})/2 = {half_d}",
            coeffs.eta_value
        )));
    }
    let ratio = m.m11 / m.m12;
    let phi0 = |k: usize| {
        (
            fs.y1[k].0 - ratio * fs.y2[k].0,
            fs.y1[k].1 - ratio * fs.y2[k].1,
        )
    };
    let phi1 = |k: usize| (fs.y2[k].0 / m.m12, fs.y2[k].1 / m.m12);
    let last = fs.x.len() - 1;

    let t0 = spec.t0();
    let (p1, p2) = (
        Complex64::from_polar(1.0, -coeffs.theta.theta1),
        Complex64::from_polar(1.0, -coeffs.theta.theta2),
    );
    let domain = build_fundamental_domain(spec)?;
    domain
        .edges
        .iter()
        .map(|e| {
            let (c0, c1) = match e.kind {
                EdgeKind::Layer { layer, j } => {
                    let (a, b) = (
                        coeffs.alpha[layer as usize - 1],
                        coeffs.beta[layer as usize - 1],
                    );
                    let phase = match j {
                        1 => Complex64::new(1.0, 0.0),
                        2 => p1,
                        _ => p2,
                    };
                    (a, phase * b)
                }
                // f₁ runs from v₁₁ to v₂₂; f₂ from v₃₁ to v₂₂
                EdgeKind::Connector { k } => {
                    let a = if k == 1 {
                        coeffs.alpha[0]
                    } else {
                        coeffs.alpha[2]
                    };
                    (t0 * a, t0 * coeffs.beta[1])
                }
            };
            let eval = |k: usize| {
                let (v0, d0) = phi0(k);
                let (v1, d1) = phi1(k);
                (c0 * v0 + c1 * v1, c0 * d0 + c1 * d1)
            };
            let values = (0..=last).map(|k| eval(k).0).collect();
            let (u0, du0) = eval(0);
            let (u1, du1) = eval(last);
            Ok(EdgeFunction {
                edge: e.name.clone(),
                kind: e.kind,
                c0,
                c1,
                x: fs.x.clone(),
                values,
                value_at: [u0, u1],
                derivative_at: [du0, du1],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexCheck {
    pub vertex: String,
    pub continuity: f64,
    pub kirchhoff: f64,
}

/// Largest violations of the vertex and Floquet conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexReport {
    pub continuity: f64,
    pub kirchhoff: f64,
    pub floquet: f64,
    pub vertices: Vec<VertexCheck>,
}

impl VertexReport {
    pub fn max_violation(&self) -> f64 {
        self.continuity.max(self.kirchhoff).max(self.floquet)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Evaluates the weighted continuity and Kirchhoff conditions at every vertex
/// of the fundamental domain, and the Floquet relations between translated
/// copies of type-B vertices.
///
/// At a type-B vertex (parameter 1) the edge a_{i2} (a_{i3}) arrives from the
/// cell translated by the first (second) period, so its end value and
/// derivative pick up e^{iθ₁} (e^{iθ₂}).
pub fn verify_vertex_conditions(
    functions: &[EdgeFunction],
    spec: &StackSpec,
    theta: QuasiMomentum,
) -> Result<VertexReport> {
    let domain = build_fundamental_domain(spec)?;
    if functions.len() != domain.edges.len() {
        return Err(Error::Shape(format!(
            "expected {} edge functions, got {}",
            domain.edges.len(),
            functions.len()
        )));
    }
    let t0 = spec.t0();
    let phase = |kind: EdgeKind| match kind {
        EdgeKind::Layer { j: 2, .. } => Complex64::from_polar(1.0, theta.theta1),
        EdgeKind::Layer { j: 3, .. } => Complex64::from_polar(1.0, theta.theta2),
        _ => Complex64::new(1.0, 0.0),
    };
    let weight = |kind: EdgeKind| match kind {
        EdgeKind::Connector { .. } => t0,
        EdgeKind::Layer { .. } => 1.0,
    };

    let mut report = VertexReport {
        continuity: 0.0,
        kirchhoff: 0.0,
        floquet: 0.0,
        vertices: Vec::new(),
    };
    for v in &domain.vertices {
        let end = v.end as usize;
        let incident: Vec<(&EdgeFunction, &crate::lattice::EdgeSlot)> = functions
            .iter()
            .zip(&domain.edges)
            .filter(|(_, e)| {
                if end == 0 {
                    e.tail == v.name
                } else {
                    e.head == v.name
                }
            })
            .collect();
        // the untranslated layer edge a_{i1} is the reference value
        let reference = incident[0].0.value_at[end];
        let mut continuity: f64 = 0.0;
        let mut floquet: f64 = 0.0;
        let mut flux = Complex64::new(0.0, 0.0);
        for (f, e) in &incident {
            let w = weight(e.kind);
            let p = if end == 1 {
                phase(e.kind)
            } else {
                Complex64::new(1.0, 0.0)
            };
            let scaled = f.value_at[end] * p / w;
            let defect = (scaled - reference).norm();
            if end == 1 && p != Complex64::new(1.0, 0.0) {
                floquet = floquet.max(defect);
            } else {
                continuity = continuity.max(defect);
            }
            flux += w * p * f.derivative_at[end];
        }
        let kirchhoff = flux.norm();
        report.continuity = report.continuity.max(continuity);
        report.floquet = report.floquet.max(floquet);
        report.kirchhoff = report.kirchhoff.max(kirchhoff);
        report.vertices.push(VertexCheck {
            vertex: v.name.clone(),
            continuity,
            kirchhoff,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::EdgePotential;
    use std::f64::consts::PI;

    fn solved(
        spec: &StackSpec,
        theta: QuasiMomentum,
        branch: Branch,
    ) -> (ModeCoefficients, Vec<EdgeFunction>) {
        let solver = HillSolver::new(EdgePotential::Zero).unwrap();
        let band = solver.hill_bands(0.0, 12.0).unwrap()[0];
        let mode = solve_mode(spec, theta, branch).unwrap();
        let lambda = solver
            .invert_discriminant(&band, 2.0 * mode.eta_value)
            .unwrap();
        let funcs = build_edge_functions(spec, &mode, &solver, lambda).unwrap();
        (mode, funcs)
    }

    #[test]
    fn centre_mode_bilayer() {
        let spec = StackSpec::bilayer(1.0).unwrap();
        let mode = solve_mode(&spec, QuasiMomentum::zero(), Branch::RPlusMinus).unwrap();
        assert!((mode.eta_value - 0.75).abs() < 1e-15);
        assert!(mode.residual <= 1e-10);
        let norm: f64 = mode.vector().iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        let lead = mode
            .vector()
            .into_iter()
            .find(|v| v.norm() > 1e-12)
            .unwrap();
        assert!(lead.im == 0.0 && lead.re > 0.0);
    }

    #[test]
    fn d_point_zero_root_has_mode() {
        let spec = StackSpec::bilayer(0.55).unwrap();
        let d = QuasiMomentum::new(2.0 * PI / 3.0, -2.0 * PI / 3.0);
        let mode = solve_mode(&spec, d, Branch::RPlusMinus).unwrap();
        assert!(mode.eta_value.abs() < 1e-7);
        assert!(mode.residual <= 1e-8);
    }

    #[test]
    fn off_root_has_no_mode() {
        let spec = StackSpec::bilayer(1.0).unwrap();
        assert!(matches!(
            solve_mode_at(&spec, QuasiMomentum::zero(), 0.5),
            Err(Error::NoMode { .. })
        ));
    }

    #[test]
    fn solving_twice_is_bitwise_identical() {
        let spec = StackSpec::trilayer(0.55).unwrap();
        let th = QuasiMomentum::new(0.7, -1.2);
        let a = solve_mode(&spec, th, Branch::BarPlus).unwrap();
        let b = solve_mode(&spec, th, Branch::BarPlus).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn edge_coefficients_follow_representation() {
        let spec = StackSpec::bilayer(0.55).unwrap();
        let th = QuasiMomentum::new(0.4, 1.3);
        let (mode, funcs) = solved(&spec, th, Branch::RPlusPlus);
        let f1 = funcs.iter().find(|f| f.edge == "f1").unwrap();
        assert_eq!(f1.c0, 0.55 * mode.alpha[0]);
        assert_eq!(f1.c1, 0.55 * mode.beta[1]);
        let a12 = funcs.iter().find(|f| f.edge == "a12").unwrap();
        assert_eq!(a12.c0, mode.alpha[0]);
        assert_eq!(a12.c1, Complex64::from_polar(1.0, -0.4) * mode.beta[0]);
        for f in &funcs {
            assert!((f.value_at[0] - f.c0).norm() < 1e-9);
            assert!((f.value_at[1] - f.c1).norm() < 1e-9);
        }
    }

    #[test]
    fn centre_edges_share_coefficients() {
        let spec = StackSpec::bilayer(1.0).unwrap();
        let (_, funcs) = solved(&spec, QuasiMomentum::zero(), Branch::RPlusMinus);
        let a: Vec<_> = funcs.iter().filter(|f| f.edge.starts_with("a1")).collect();
        assert!(a.iter().all(|f| f.c0 == a[0].c0 && f.c1 == a[0].c1));
    }

    #[test]
    fn solved_modes_satisfy_vertex_conditions() {
        for (layers, branch) in [
            (2, Branch::RPlusMinus),
            (2, Branch::RMinusPlus),
            (3, Branch::BarMinus),
            (3, Branch::TildePlusPlus),
        ] {
            let spec = StackSpec::new(layers, 0.55).unwrap();
            let th = QuasiMomentum::new(1.1, -0.3);
            let (mode, funcs) = solved(&spec, th, branch);
            let report = verify_vertex_conditions(&funcs, &spec, th).unwrap();
            assert!(report.passes(1e-7), "{branch}: {report:?}");
            // gauge covariance
            let phase = Complex64::from_polar(1.0, 0.9);
            let solver = HillSolver::new(EdgePotential::Zero).unwrap();
            let band = solver.hill_bands(0.0, 12.0).unwrap()[0];
            let lambda = solver
                .invert_discriminant(&band, 2.0 * mode.eta_value)
                .unwrap();
            let rotated =
                build_edge_functions(&spec, &mode.rotated(phase), &solver, lambda).unwrap();
            let r2 = verify_vertex_conditions(&rotated, &spec, th).unwrap();
            assert!((r2.max_violation() - report.max_violation()).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_coefficients_are_detected() {
        let spec = StackSpec::bilayer(0.55).unwrap();
        let th = QuasiMomentum::new(1.1, -0.3);
        let solver = HillSolver::new(EdgePotential::Zero).unwrap();
        let band = solver.hill_bands(0.0, 12.0).unwrap()[0];
        let mut mode = solve_mode(&spec, th, Branch::RPlusPlus).unwrap();
        let lambda = solver
            .invert_discriminant(&band, 2.0 * mode.eta_value)
            .unwrap();
        mode.alpha[0] += Complex64::new(1e-3, 0.0);
        let funcs = build_edge_functions(&spec, &mode, &solver, lambda).unwrap();
        let report = verify_vertex_conditions(&funcs, &spec, th).unwrap();
        assert!(report.kirchhoff >= 1e-4, "{report:?}");
    }

    #[test]
    fn dirichlet_energy_is_a_pole() {
        let spec = StackSpec::bilayer(1.0).unwrap();
        let mode = solve_mode(&spec, QuasiMomentum::zero(), Branch::RMinusPlus).unwrap();
        let solver = HillSolver::new(EdgePotential::Zero).unwrap();
        assert!(matches!(
            build_edge_functions(&spec, &mode, &solver, PI * PI),
            Err(Error::Pole { .. })
        ));
    }
}

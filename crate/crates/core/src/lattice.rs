//! Combinatorics of the Bernal-stacked fundamental domains, the weighted vertex
//! conditions written as (A, B) matrix pairs, and the structure function F(θ).
//!
//! Every edge is identified with [0,1]. Layer edges a_{ij} (layer i, j = 1..3)
//! run from the type-A vertex v_{i1} (parameter 0) to a translate of the type-B
//! vertex v_{i2} (parameter 1). Connector edges f_k carry interlayer coupling:
//! in the bilayer f₁ joins v₁₁ to v₂₂; in the trilayer f₁ joins v₁₁ to v₂₂ and
//! f₂ joins v₃₁ to v₂₂.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer count and interlayer coupling t₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    layers: u32,
    t0: f64,
}

impl StackSpec {
    pub fn new(layers: u32, t0: f64) -> Result<Self> {
        if !(layers == 2 || layers == 3) {
            return Err(Error::UnsupportedLayers(layers));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::InvalidStack(format!(
                "coupling t0 must be a positive number, got {t0}"
            )));
        }
        Ok(StackSpec { layers, t0 })
    }

    pub fn bilayer(t0: f64) -> Result<Self> {
        Self::new(2, t0)
    }

    pub fn trilayer(t0: f64) -> Result<Self> {
        Self::new(3, t0)
    }

    pub fn layers(&self) -> u32 {
        self.layers
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// T₀ = 3 + t₀².
    pub fn big_t0(&self) -> f64 {
        3.0 + self.t0 * self.t0
    }

    /// T̃₀ = 3 + 2t₀².
    pub fn big_t0_tilde(&self) -> f64 {
        3.0 + 2.0 * self.t0 * self.t0
    }

    /// Set when t₀ > 1: the results still hold, but the coupling is no longer
    /// weaker than the in-layer bonds.
    pub fn coupling_warning(&self) -> bool {
        self.t0 > 1.0
    }
}

/// Quasimomentum θ = (θ₁, θ₂) in the Brillouin zone [−π, π]².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiMomentum {
    pub theta1: f64,
    pub theta2: f64,
}

impl QuasiMomentum {
    /// Builds θ, wrapping each component into [−π, π].
    pub fn new(theta1: f64, theta2: f64) -> Self {
        QuasiMomentum {
            theta1: wrap_angle(theta1),
            theta2: wrap_angle(theta2),
        }
    }

    pub fn zero() -> Self {
        QuasiMomentum::new(0.0, 0.0)
    }

    /// The two D-point candidates ±(2π/3, −2π/3).
    pub fn d_points() -> [QuasiMomentum; 2] {
        let a = 2.0 * PI / 3.0;
        [QuasiMomentum::new(a, -a), QuasiMomentum::new(-a, a)]
    }

    pub fn neg(&self) -> Self {
        QuasiMomentum::new(-self.theta1, -self.theta2)
    }
}

fn wrap_angle(t: f64) -> f64 {
    if (-PI..=PI).contains(&t) {
        t
    } else {
        (t + PI).rem_euclid(2.0 * PI) - PI
    }
}

/// F(θ) = 1 + e^{iθ₁} + e^{iθ₂}.
pub fn f_theta(theta: QuasiMomentum) -> Complex64 {
    Complex64::new(1.0, 0.0)
        + Complex64::from_polar(1.0, theta.theta1)
        + Complex64::from_polar(1.0, theta.theta2)
}

/// |F(θ)|² = 1 + 8 cos((θ₁−θ₂)/2) cos(θ₁/2) cos(θ₂/2).
///
/// Exactly invariant (bitwise) under θ ↦ −θ and θ₁ ↔ θ₂.
pub fn f_abs_squared(theta: QuasiMomentum) -> f64 {
    let half_diff = (0.5 * (theta.theta1 - theta.theta2)).cos();
    let c1 = (0.5 * theta.theta1).cos();
    let c2 = (0.5 * theta.theta2).cos();
    (1.0 + 8.0 * half_diff * (c1 * c2)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

/// One vertex of the fundamental domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSlot {
    /// `v{layer}{1|2}`.
    pub name: String,
    pub layer: u32,
    pub sublattice: Sublattice,
    /// Edge parameter identified with this vertex: 0 for type A, 1 for type B.
    pub end: u8,
    /// Connector edges inside the fundamental domain ending here.
    pub domain_connectors: Vec<String>,
    /// Degree in the full periodic graph.
    pub degree: usize,
    pub class: String,
}

impl VertexSlot {
    pub fn is_connected(&self) -> bool {
        !self.domain_connectors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Layer { layer: u32, j: u32 },
    Connector { k: u32 },
}

/// An oriented edge: parameter 0 at `tail`, parameter 1 at `head`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSlot {
    pub name: String,
    pub kind: EdgeKind,
    pub tail: String,
    pub head: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexClass {
    pub class: String,
    pub degree: usize,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalDomain {
    pub layers: u32,
    pub edges: Vec<EdgeSlot>,
    pub vertices: Vec<VertexSlot>,
    pub vertex_classes: Vec<VertexClass>,
}

impl FundamentalDomain {
    pub fn layer_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e.kind, EdgeKind::Layer { .. }))
            .count()
    }

    pub fn connector_edge_count(&self) -> usize {
        self.edges.len() - self.layer_edge_count()
    }

    pub fn vertex(&self, name: &str) -> Option<&VertexSlot> {
        self.vertices.iter().find(|v| v.name == name)
    }
}

/// Connectors (tail, head) inside the fundamental domain.
fn connectors(layers: u32) -> Vec<(&'static str, &'static str)> {
    match layers {
        2 => vec![("v11", "v22")],
        _ => vec![("v11", "v22"), ("v31", "v22")],
    }
}

/// Each connector in the domain stands for the three interlayer bonds of its
/// type-A endpoint to the nearest type-B vertices of the next layer.
const BONDS_PER_CONNECTOR: usize = 3;

pub fn build_fundamental_domain(spec: &StackSpec) -> Result<FundamentalDomain> {
    let layers = spec.layers();
    if !(layers == 2 || layers == 3) {
        return Err(Error::UnsupportedLayers(layers));
    }
    let conns = connectors(layers);
    let mut edges = Vec::new();
    for i in 1..=layers {
        for j in 1..=3 {
            edges.push(EdgeSlot {
                name: format!("a{i}{j}"),
                kind: EdgeKind::Layer { layer: i, j },
                tail: format!("v{i}1"),
                head: format!("v{i}2"),
            });
        }
    }
    for (k, (tail, head)) in conns.iter().enumerate() {
        edges.push(EdgeSlot {
            name: format!("f{}", k + 1),
            kind: EdgeKind::Connector { k: k as u32 + 1 },
            tail: tail.to_string(),
            head: head.to_string(),
        });
    }

    let mut vertices = Vec::new();
    for i in 1..=layers {
        for (end, sub) in [(0u8, Sublattice::A), (1u8, Sublattice::B)] {
            let name = format!("v{i}{}", end + 1);
            let domain_connectors: Vec<String> = edges
                .iter()
                .filter(|e| matches!(e.kind, EdgeKind::Connector { .. }))
                .filter(|e| {
                    if end == 0 {
                        e.tail == name
                    } else {
                        e.head == name
                    }
                })
                .map(|e| e.name.clone())
                .collect();
            let degree = 3 + BONDS_PER_CONNECTOR * domain_connectors.len();
            let class = format!(
                "{}-layer{i}-{}",
                if sub == Sublattice::A { "A" } else { "B" },
                if domain_connectors.is_empty() {
                    "unconnected"
                } else {
                    "connected"
                }
            );
            vertices.push(VertexSlot {
                name,
                layer: i,
                sublattice: sub,
                end,
                domain_connectors,
                degree,
                class,
            });
        }
    }
    let vertex_classes = vertices
        .iter()
        .map(|v| VertexClass {
            class: v.class.clone(),
            degree: v.degree,
            multiplicity: 1,
        })
        .collect();
    Ok(FundamentalDomain {
        layers,
        edges,
        vertices,
        vertex_classes,
    })
}

/// Vertex conditions at one vertex written as A·u(v) = B·u′(v).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexConditionPair {
    pub degree: usize,
    /// Row-major d×d.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub vertex_class: String,
}

/// Matrices for a vertex with three layer edges and `connectors` interlayer
/// edges, ordered layer edges first.
///
/// Rows 1..d−1 of A encode u_{a₁} = u_{a₂} = u_{a₃} = u_{f₁}/t₀ = u_{f₂}/t₀ = …
/// (the connector ratios scaled by t₀); the last row of B holds the weighted
/// Kirchhoff sum Σu′_a + t₀Σu′_f.
pub fn vertex_condition_matrices(t0: f64, connectors: usize, class: &str) -> VertexConditionPair {
    let d = 3 + connectors;
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![vec![0.0; d]; d];
    for r in 0..2 {
        a[r][r] = 1.0;
        a[r][r + 1] = -1.0;
    }
    if connectors > 0 {
        a[2][2] = t0;
        a[2][3] = -1.0;
        for r in 3..d - 1 {
            a[r][r] = t0;
            a[r][r + 1] = -t0;
        }
    }
    for (c, entry) in b[d - 1].iter_mut().enumerate() {
        *entry = if c < 3 { 1.0 } else { t0 };
    }
    VertexConditionPair {
        degree: d,
        a,
        b,
        vertex_class: class.to_string(),
    }
}

/// One (A, B) pair per vertex of the fundamental domain.
pub fn build_vertex_conditions(spec: &StackSpec) -> Result<Vec<VertexConditionPair>> {
    let domain = build_fundamental_domain(spec)?;
    Ok(domain
        .vertices
        .iter()
        .map(|v| vertex_condition_matrices(spec.t0(), v.degree - 3, &v.class))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAdjointnessCheck {
    pub vertex_class: String,
    pub degree: usize,
    pub rank: usize,
    /// max |(ABᵀ)ᵢⱼ − (ABᵀ)ⱼᵢ|
    pub symmetry_defect: f64,
    /// max |(ABᵀ)ᵢⱼ|
    pub abt_max: f64,
    pub self_adjoint: bool,
}

pub const RANK_SINGULAR_THRESHOLD: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Checks maximal rank of [A B] and symmetry of A·Bᵀ.
pub fn check_self_adjointness(pair: &VertexConditionPair) -> Result<SelfAdjointnessCheck> {
    let d = pair.degree;
    let square = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|row| row.len() == d);
    if !square(&pair.a) || !square(&pair.b) {
        return Err(Error::Shape(format!(
            "vertex condition matrices must both be {d}x{d}"
        )));
    }
    let stacked = DMatrix::from_fn(d, 2 * d, |i, j| {
        if j < d {
            pair.a[i][j]
        } else {
            pair.b[i][j - d]
        }
    });
    let rank = stacked.rank(RANK_SINGULAR_THRESHOLD);
    let abt = |i: usize, j: usize| -> f64 { (0..d).map(|k| pair.a[i][k] * pair.b[j][k]).sum() };
    let mut symmetry_defect: f64 = 0.0;
    let mut abt_max: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            symmetry_defect = symmetry_defect.max((abt(i, j) - abt(j, i)).abs());
            abt_max = abt_max.max(abt(i, j).abs());
        }
    }
    Ok(SelfAdjointnessCheck {
        vertex_class: pair.vertex_class.clone(),
        degree: d,
        rank,
        symmetry_defect,
        abt_max,
        self_adjoint: rank == d && symmetry_defect <= SYMMETRY_TOL,
    })
}

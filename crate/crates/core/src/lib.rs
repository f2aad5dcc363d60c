//! Band-structure engine for quantum-graph models of Bernal-stacked bilayer and
//! trilayer graphene.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`] and [`hill`]: the single-edge problem (monodromy matrix,
//!   discriminant D(λ), η(λ), Dirichlet eigenvalues, Hill bands);
//! * [`lattice`]: fundamental domains, vertex-condition matrices and the
//!   structure function F(θ);
//! * [`dispersion`]: the Floquet matrices M_n(η,θ), their determinant
//!   polynomials and roots, and dispersion surfaces λ(θ);
//! * [`modes`]: Bloch-mode reconstruction and vertex-condition checks;
//! * [`cones`]: classification of band touches on the Brillouin-zone diagonal;
//! * [`spectrum`]: the assembled spectral report.

pub mod cones;
pub mod dispersion;
pub mod error;
pub mod hill;
pub mod lattice;
pub mod modes;
pub mod potential;
pub mod spectrum;

pub use cones::{ConeOptions, ConeReport, DiagonalSlice, TouchClass};
pub use dispersion::{Branch, DispersionSurface, RootSet, SpectralMatrix, ThetaGrid};
pub use error::{Error, Result};
pub use hill::{
    BandInverse, DirichletSpectrum, HillBand, HillConfig, HillSolver, MonodromyMatrix,
    DEFAULT_STEPS,
};
pub use lattice::{FundamentalDomain, QuasiMomentum, StackSpec, VertexConditionPair};
pub use modes::{EdgeFunction, ModeCoefficients, VertexReport};
pub use potential::EdgePotential;
pub use spectrum::{SpectrumReport, UnionReport};

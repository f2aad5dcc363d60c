//! Shared fixtures for the engine benchmarks.

use grapheneqg_core::{EdgePotential, HillSolver, StackSpec};

pub fn free_solver() -> HillSolver {
    HillSolver::new(EdgePotential::Zero).expect("zero potential is even")
}

pub fn cosine_solver(amplitude: f64) -> HillSolver {
    HillSolver::new(EdgePotential::cosine(amplitude)).expect("cosine potential is even")
}

pub fn paper_stack(layers: u32) -> StackSpec {
    StackSpec::new(layers, 0.55).expect("valid stack")
}

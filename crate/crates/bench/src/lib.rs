//! Fixtures shared by the kernel benchmarks.

use momentgap::effective::{assemble_effective, build_model, default_representation, hamiltonian_with_ground, Representation};
use momentgap::{Graph, HaarProjector, LinearOperator, SiteHamiltonian};

/// Deterministic, non-degenerate probe vector.
pub fn probe(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect()
}

/// Effective `k = 2` Hamiltonian on the `n`-vertex star.
pub fn star_effective(n: usize) -> SiteHamiltonian {
    let model = build_model(2, 2, Representation::EffectiveK2).expect("k = 2 model");
    assemble_effective(&Graph::star(n).expect("star"), &model).expect("fits")
}

/// Full doubled-space Hamiltonian on a path.
pub fn path_full(n: usize, k: usize) -> SiteHamiltonian {
    SiteHamiltonian::full(&Graph::path(n).expect("path"), k, 2).expect("fits")
}

/// Hamiltonian plus its ground space, ready for gap extraction.
pub fn gap_problem(g: &Graph, k: usize) -> (SiteHamiltonian, Vec<Vec<f64>>) {
    hamiltonian_with_ground(g, k, 2, default_representation(k)).expect("fits")
}

pub fn haar(k: usize) -> HaarProjector {
    HaarProjector::factored(k, 2).expect("qubit projector")
}

pub fn matvec(op: &dyn LinearOperator, x: &[f64], y: &mut [f64]) {
    op.apply(x, y);
}

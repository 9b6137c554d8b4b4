//! Shared fixtures for the kernel benchmarks.

use qclt::convolve::CutoffPolicy;
use qclt::fock::superposition_0_3;
use qclt::random::{rng, wishart_state};
use qclt::{DensityMatrix, FockCutoff};

/// The `(|0⟩ + |3⟩)/√2` input used throughout the convergence experiments.
pub fn superposition() -> DensityMatrix {
    superposition_0_3(3).expect("valid cutoff")
}

/// Seeded full-rank single-mode state.
pub fn wishart(cutoff: usize, seed: u64) -> DensityMatrix {
    let cut = FockCutoff::single(cutoff).expect("valid cutoff");
    wishart_state(&mut rng(seed), &cut).expect("valid state")
}

pub fn policy(n_max: usize) -> CutoffPolicy {
    CutoffPolicy {
        n_max,
        tail_budget: 1e-8,
    }
}

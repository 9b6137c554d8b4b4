//! Seeded random states and operators.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::fock::{DensityMatrix, FockCutoff};
use crate::linalg::{c, CMatrix, C64};

pub type LabRng = ChaCha8Rng;

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut LabRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn complex_gaussian(rng: &mut LabRng) -> C64 {
    c(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rng: &mut LabRng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// `G G†/tr(G G†)` with a square Ginibre `G`; full rank almost surely.
pub fn wishart_state(rng: &mut LabRng, cutoff: &FockCutoff) -> Result<DensityMatrix> {
    let d = cutoff.dim();
    let g = ginibre(rng, d, d);
    DensityMatrix::from_matrix(cutoff.clone(), &g * g.adjoint(), 0.0)
}

/// Wishart state of rank `rank`.
pub fn low_rank_state(rng: &mut LabRng, cutoff: &FockCutoff, rank: usize) -> Result<DensityMatrix> {
    let d = cutoff.dim();
    let g = ginibre(rng, d, rank.clamp(1, d));
    DensityMatrix::from_matrix(cutoff.clone(), &g * g.adjoint(), 0.0)
}

pub fn pure_state(rng: &mut LabRng, cutoff: &FockCutoff) -> Result<DensityMatrix> {
    let v = DVector::from_fn(cutoff.dim(), |_, _| complex_gaussian(rng));
    DensityMatrix::from_vector(cutoff, &v)
}

/// Random pure state whose amplitudes live on photon numbers `≡ 0 (mod 3)`, so
/// that `⟨v|a|v⟩ = 0`.
pub fn centered_pure_state(rng: &mut LabRng, cutoff: &FockCutoff) -> Result<DensityMatrix> {
    let v = DVector::from_fn(cutoff.dim(), |i, _| {
        let n: usize = cutoff.multi_index(i).iter().sum();
        let z = complex_gaussian(rng);
        if cutoff.modes() == 1 && n % 3 != 0 {
            c(0.0, 0.0)
        } else {
            z
        }
    });
    DensityMatrix::from_vector(cutoff, &v)
}

pub fn hermitian(rng: &mut LabRng, dim: usize) -> CMatrix {
    let g = ginibre(rng, dim, dim);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

pub fn operator(rng: &mut LabRng, dim: usize) -> CMatrix {
    ginibre(rng, dim, dim)
}

pub fn uniform(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    use rand::Rng;
    rng.random_range(lo..hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_reproduce() {
        let cut = FockCutoff::single(4).unwrap();
        let a = wishart_state(&mut rng(7), &cut).unwrap();
        let b = wishart_state(&mut rng(7), &cut).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(a.min_eigenvalue() > 0.0);
    }

    #[test]
    fn centered_pure_has_zero_mean_field() {
        let cut = FockCutoff::single(6).unwrap();
        let psi = centered_pure_state(&mut rng(3), &cut).unwrap();
        let a = crate::fock::annihilation(&cut, 0).unwrap();
        assert!(crate::fock::expectation(&psi, &a).unwrap().norm() < 1e-15);
    }
}

//! SLD Poincaré constant as the spectral gap of the gradient form on the truncated
//! operator space.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fisher::sld_norm_sq;
use crate::fock::{annihilation_matrix, lift_single_mode, phase_rotation, DensityMatrix, FockCutoff};
use crate::gaussian::thermal_product;
use crate::linalg::{c, eigh_desc, trace, CMatrix, C64};
use crate::metrics::SpectralDecomp;

/// Weight of the reference thermal state mixed into non-faithful inputs.
pub const SMOOTHING_EPS: f64 = 1e-6;
/// States whose smallest eigenvalue is at or below this are smoothed.
pub const FAITHFUL_THRESHOLD: f64 = 1e-10;
const NULL_TOL: f64 = 1e-9;

/// Gap estimate together with its consistency diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct GapEstimate {
    pub lambda_hat: f64,
    pub cutoff: Vec<usize>,
    pub smoothed: bool,
    /// `|⟨X̂, I⟩_ρ| / ‖X̂‖_ρ` for the returned eigenvector.
    pub identity_residual: f64,
    /// `|λ̂ ‖X̂‖²_ρ − ‖∂X̂‖²_ρ| / ‖X̂‖²_ρ`.
    pub rayleigh_residual: f64,
    /// Dimension of the deflated gradient-null space, identity included.
    pub null_dim: usize,
    #[serde(skip)]
    pub eigenvector: CMatrix,
}

impl GapEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fock-basis positions whose mode-`j` occupation sits at the cutoff.
fn boundary_mask(cut: &FockCutoff, j: usize) -> Vec<bool> {
    (0..cut.dim())
        .map(|i| cut.multi_index(i)[j] == cut.max_photons(j))
        .collect()
}

fn apply_mask(y: &mut CMatrix, mask: &[bool]) {
    let zero = c(0.0, 0.0);
    for (i, &m) in mask.iter().enumerate() {
        if m {
            y.row_mut(i).fill(zero);
            y.column_mut(i).fill(zero);
        }
    }
}

/// `[L, X]` with the truncated ladder `L ∈ {a_j, a_j†}` and the rows and columns
/// at mode `j`'s cutoff zeroed, so only interior-block matrix elements survive.
pub fn masked_commutator(cut: &FockCutoff, j: usize, dagger: bool, x: &CMatrix) -> CMatrix {
    let a = lift_single_mode(cut, j, &annihilation_matrix(cut.max_photons(j)));
    let l = if dagger { a.adjoint() } else { a };
    let mut y = &l * x - x * &l;
    apply_mask(&mut y, &boundary_mask(cut, j));
    y
}

/// Per mode `(‖[a_j, X]‖²_ρ, ‖[a_j†, X]‖²_ρ)`.
pub fn gradient_components(rho: &DensityMatrix, x: &CMatrix) -> Result<Vec<(f64, f64)>> {
    if x.shape() != rho.matrix().shape() {
        return Err(LabError::CutoffMismatch("operator and state dimensions differ".into()));
    }
    let cut = rho.cutoff();
    Ok((0..cut.modes())
        .map(|j| {
            (
                sld_norm_sq(rho.matrix(), &masked_commutator(cut, j, false, x)),
                sld_norm_sq(rho.matrix(), &masked_commutator(cut, j, true, x)),
            )
        })
        .collect())
}

/// `‖∂X‖²_ρ = Σ_j ‖[a_j, X]‖²_ρ + ‖[a_j†, X]‖²_ρ`.
pub fn gradient_norm(rho: &DensityMatrix, x: &CMatrix) -> Result<f64> {
    Ok(gradient_components(rho, x)?.iter().map(|(a, b)| a + b).sum())
}

/// `(1 − ε)ρ + ε τ_ref` with `τ_ref` the thermal product matching each mode's
/// second moment `μ_j`, or `ρ` itself when already faithful.
pub fn smooth(rho: &DensityMatrix, eps: f64) -> Result<(DensityMatrix, bool)> {
    if rho.min_eigenvalue() > FAITHFUL_THRESHOLD {
        return Ok((rho.clone(), false));
    }
    let cut = rho.cutoff();
    let nus: Vec<f64> = (0..cut.modes())
        .map(|j| {
            let mean_n: f64 = (0..cut.dim())
                .map(|i| rho.matrix()[(i, i)].re * cut.multi_index(i)[j] as f64)
                .sum();
            (2.0 * mean_n + 1.0).max(1.0 + 1e-9)
        })
        .collect();
    let tau = thermal_product(&nus, cut)?;
    Ok((rho.mix(&tau, eps)?, true))
}

fn orthonormalize(vectors: Vec<DVector<C64>>, tol: f64) -> Vec<DVector<C64>> {
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for mut v in vectors {
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let n = v.norm();
        if n > tol {
            basis.push(v / c(n, 0.0));
        }
    }
    basis
}

/// Smallest eigenvalue of the gradient form relative to the SLD Gram form on the
/// complement of its null space (the identity and operators supported at the
/// cutoff boundary), in the matrix-unit basis of `ρ`'s eigenvectors.
pub fn estimate_gap(rho: &DensityMatrix, cutoff: &FockCutoff) -> Result<GapEstimate> {
    let placed = rho.embed(cutoff)?;
    let (state, smoothed) = smooth(&placed, SMOOTHING_EPS)?;
    let cut = state.cutoff().clone();
    let d = cut.dim();
    let dd = d * d;
    let sd = SpectralDecomp::of_matrix(state.matrix());
    let p = &sd.eigenvalues;
    if let Some(&pmin) = p.last() {
        if pmin <= 0.0 {
            let dim = p.iter().filter(|&&x| x <= 0.0).count();
            return Err(LabError::RankDeficient { dim });
        }
    }
    let v = &sd.eigenvectors;
    let vd = v.adjoint();
    let weights: Vec<f64> = (0..dd).map(|k| 0.5 * (p[k / d] + p[k % d])).collect();

    let mut dform = CMatrix::zeros(dd, dd);
    let mut bare = CMatrix::zeros(dd, dd);
    for j in 0..cut.modes() {
        let a = lift_single_mode(&cut, j, &annihilation_matrix(cut.max_photons(j)));
        let mask = boundary_mask(&cut, j);
        for l_op in [a.clone(), a.adjoint()] {
            let lv = &l_op * v;
            let ldv = l_op.adjoint() * v;
            let mut cmat = CMatrix::zeros(dd, dd);
            for k in 0..d {
                for l in 0..d {
                    // [L, v_k v_l†] = (L v_k) v_l† − v_k (L† v_l)†
                    let mut y = lv.column(k) * v.column(l).adjoint() - v.column(k) * ldv.column(l).adjoint();
                    apply_mask(&mut y, &mask);
                    let yt = &vd * y * v;
                    let col = k * d + l;
                    for r in 0..dd {
                        cmat[(r, col)] = yt[(r / d, r % d)];
                    }
                }
            }
            let mut weighted = cmat.clone();
            for r in 0..dd {
                weighted.row_mut(r).scale_mut(weights[r]);
            }
            dform += cmat.adjoint() * weighted;
            bare += cmat.adjoint() * cmat;
        }
    }

    // gradient-null directions, found without ρ-weights
    let (bvals, bvecs) = eigh_desc(&bare);
    let bmax = bvals.first().copied().unwrap_or(0.0).max(1.0);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut null_dirs = Vec::new();
    let mut ident = DVector::<C64>::zeros(dd);
    for k in 0..d {
        ident[k * d + k] = c(sqrt_w[k * d + k], 0.0);
    }
    null_dirs.push(ident);
    for (i, &bv) in bvals.iter().enumerate() {
        if bv <= NULL_TOL * bmax {
            let x = bvecs.column(i);
            null_dirs.push(DVector::from_iterator(dd, (0..dd).map(|r| x[r] * sqrt_w[r])));
        }
    }
    let null_basis = orthonormalize(null_dirs, 1e-10);
    let null_dim = null_basis.len();
    if null_dim >= dd {
        return Err(LabError::RankDeficient { dim: null_dim });
    }

    // M = G^{-1/2} D G^{-1/2}
    let mut mmat = dform;
    for r in 0..dd {
        for s in 0..dd {
            mmat[(r, s)] /= sqrt_w[r] * sqrt_w[s];
        }
    }
    let mut proj = CMatrix::identity(dd, dd);
    for b in &null_basis {
        proj -= b * b.adjoint();
    }
    let (pvals, pvecs) = eigh_desc(&proj);
    let keep = dd - null_dim;
    if pvals[keep - 1] < 0.5 {
        return Err(LabError::RankDeficient { dim: null_dim });
    }
    let q = pvecs.columns(0, keep).into_owned();
    let reduced = q.adjoint() * &mmat * &q;
    let (rvals, rvecs) = eigh_desc(&reduced);
    let lambda_hat = rvals[keep - 1];
    let y = &q * rvecs.column(keep - 1);

    // back to an operator in the Fock basis
    let mut xt = CMatrix::zeros(d, d);
    for r in 0..dd {
        xt[(r / d, r % d)] = y[r] / sqrt_w[r];
    }
    let xhat = v * xt * &vd;
    let norm_sq = sld_norm_sq(state.matrix(), &xhat);
    let ident_overlap = trace(&(state.matrix() * &xhat)).norm();
    let grad = gradient_norm(&state, &xhat)?;
    Ok(GapEstimate {
        lambda_hat,
        cutoff: cut.per_mode().to_vec(),
        smoothed,
        identity_residual: ident_overlap / norm_sq.sqrt(),
        rayleigh_residual: (lambda_hat * norm_sq - grad).abs() / norm_sq,
        null_dim,
        eigenvector: xhat,
    })
}

/// Gap estimates before and after the phase rotation `exp(i Σ θ_j n_j)`.
pub fn passive_invariance_check(rho: &DensityMatrix, thetas: &[f64]) -> Result<(f64, f64)> {
    let u = phase_rotation(rho.cutoff(), thetas)?;
    let before = estimate_gap(rho, rho.cutoff())?.lambda_hat;
    let after = estimate_gap(&rho.conjugate_by(&u), rho.cutoff())?.lambda_hat;
    Ok((before, after))
}

//! Distances, relative entropy and the characteristic-function trace-norm bound.

use std::f64::consts::PI;

use crate::charfn::{plancherel_hs_norm, FockOperator};
use crate::error::{LabError, Result};
use crate::fock::{annihilation_matrix, embed_matrix, lift_single_mode, DensityMatrix, FockCutoff, ModeOperator};
use crate::linalg::{eigh_desc, hs_norm, trace_norm, CMatrix};
use crate::quadrature::PhaseGrid;

/// Eigenvalues at or below this are treated as zero.
pub const CLAMP_THRESHOLD: f64 = 1e-12;
/// `σ`-eigenvalues at or below this define the complement of its support.
pub const SUPPORT_EPS: f64 = 1e-10;
/// Largest `ρ`-weight tolerated outside the support of `σ`.
pub const SUPPORT_MASS_TOL: f64 = 1e-8;

/// Spectrum (descending) and eigenvectors of a state, small eigenvalues clamped.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub clamped: usize,
}

impl SpectralDecomp {
    pub fn of_matrix(m: &CMatrix) -> Self {
        let (mut vals, vecs) = eigh_desc(m);
        let mut clamped = 0;
        for v in vals.iter_mut() {
            if *v <= CLAMP_THRESHOLD {
                if *v != 0.0 {
                    clamped += 1;
                }
                *v = 0.0;
            }
        }
        Self {
            eigenvalues: vals,
            eigenvectors: vecs,
            clamped,
        }
    }

    pub fn of(rho: &DensityMatrix) -> Self {
        Self::of_matrix(rho.matrix())
    }

    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &p) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(p);
        }
        scaled * v.adjoint()
    }

    /// `V† X V`.
    pub fn to_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * x * &self.eigenvectors
    }

    /// `V X V†`.
    pub fn from_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        &self.eigenvectors * x * self.eigenvectors.adjoint()
    }
}

/// Brings two states onto their joint cutoff by zero padding.
pub fn align(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<(CMatrix, CMatrix, FockCutoff)> {
    let joint = rho.cutoff().join(sigma.cutoff())?;
    Ok((
        embed_matrix(rho.matrix(), rho.cutoff(), &joint),
        embed_matrix(sigma.matrix(), sigma.cutoff(), &joint),
        joint,
    ))
}

pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let (a, b, _) = align(rho, sigma)?;
    Ok(trace_norm(&(a - b)))
}

pub fn hs_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let (a, b, _) = align(rho, sigma)?;
    Ok(hs_norm(&(a - b)))
}

/// Relative entropy with diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct RelativeEntropy {
    /// Natural-log value, `+∞` on support violation.
    pub value: f64,
    /// `ρ`-weight outside the support of `σ`.
    pub outside_support: f64,
}

/// `D(ρ‖σ) = tr ρ(log ρ − log σ)`, natural log. `+∞` when `ρ` puts more than
/// `1e-8` weight outside the `1e-10`-support of `σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(relative_entropy_detailed(rho, sigma)?.value)
}

pub fn relative_entropy_detailed(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<RelativeEntropy> {
    let (a, b, _) = align(rho, sigma)?;
    let sr = SpectralDecomp::of_matrix(&a);
    let neg_entropy: f64 = sr
        .eigenvalues
        .iter()
        .filter(|&&p| p > CLAMP_THRESHOLD)
        .map(|&p| p * p.ln())
        .sum();

    let offdiag = (0..b.nrows())
        .flat_map(|i| (0..b.ncols()).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| b[(i, j)].norm())
        .fold(0.0, f64::max);
    let (cross, outside) = if offdiag == 0.0 {
        // diagonal σ: log σ is exact on its diagonal
        let mut cross = 0.0;
        let mut outside = 0.0;
        for i in 0..b.nrows() {
            let q = b[(i, i)].re;
            let w = a[(i, i)].re;
            if q > 0.0 {
                if w > CLAMP_THRESHOLD {
                    cross += w * q.ln();
                }
            } else {
                outside += w.max(0.0);
            }
        }
        (cross, outside)
    } else {
        let ss = SpectralDecomp::of_matrix(&b);
        // ⟨v_l|ρ|v_l⟩
        let rot = ss.to_eigenbasis(&a);
        let mut cross = 0.0;
        let mut outside = 0.0;
        for (l, &q) in ss.eigenvalues.iter().enumerate() {
            let w = rot[(l, l)].re;
            if q > SUPPORT_EPS {
                if w > CLAMP_THRESHOLD {
                    cross += w * q.ln();
                }
            } else {
                outside += w.max(0.0);
            }
        }
        (cross, outside)
    };
    if outside > SUPPORT_MASS_TOL {
        return Ok(RelativeEntropy {
            value: f64::INFINITY,
            outside_support: outside,
        });
    }
    Ok(RelativeEntropy {
        value: neg_entropy - cross,
        outside_support: outside,
    })
}

/// `(‖T‖₁², (π²/6)^m ‖A†TA‖₂²)` with `A = a_1⋯a_m`, the second factor by
/// Plancherel quadrature on `grid`. `T` is padded by one level so `A†TA` is exact.
pub fn trace_norm_charfn_bound<T: FockOperator + ?Sized>(t: &T, grid: &PhaseGrid) -> Result<(f64, f64)> {
    let (lhs, op) = bound_operand(t)?;
    let m = t.fock_cutoff().modes();
    let rhs = (PI * PI / 6.0).powi(m as i32) * plancherel_hs_norm(&op, grid)?;
    Ok((lhs, rhs))
}

/// `‖T‖₁²` and the operator `A†TA` on the padded cutoff.
pub fn bound_operand<T: FockOperator + ?Sized>(t: &T) -> Result<(f64, ModeOperator)> {
    let cut = t.fock_cutoff();
    let tm = t.fock_matrix();
    let skew = crate::linalg::max_abs(&(tm - tm.adjoint()));
    if skew > 1e-10 * crate::linalg::max_abs(tm).max(1e-300) {
        return Err(LabError::InvalidParameter("trace-norm bound expects a Hermitian operator".into()));
    }
    let lhs = trace_norm(tm).powi(2);
    let pcut = cut.padded(1);
    let mut op = embed_matrix(tm, cut, &pcut);
    for j in 0..cut.modes() {
        let a = lift_single_mode(&pcut, j, &annihilation_matrix(pcut.max_photons(j)));
        op = a.adjoint() * op * &a;
    }
    Ok((lhs, ModeOperator::custom(pcut, op, "A†TA")?))
}

//! Symplectic algebra, Williamson decomposition, thermal states and Gaussification.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::charfn::{covariance, CovarianceData};
use crate::error::{LabError, Result};
use crate::fock::{DensityMatrix, FockCutoff};
use crate::linalg::{c, eigh_desc, real_symmetric_eigen, CMatrix, RMatrix, C64};

/// `Ω_m = ⊕ [[0, 1], [-1, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymplecticForm {
    modes: usize,
}

impl SymplecticForm {
    pub fn new(modes: usize) -> Self {
        Self { modes }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> RMatrix {
        let n = 2 * self.modes;
        let mut o = RMatrix::zeros(n, n);
        for j in 0..self.modes {
            o[(2 * j, 2 * j + 1)] = 1.0;
            o[(2 * j + 1, 2 * j)] = -1.0;
        }
        o
    }
}

/// `q = e^{-β} = (ν − 1)/(ν + 1)`.
pub fn occupation_ratio(nu: f64) -> f64 {
    (nu - 1.0) / (nu + 1.0)
}

/// `β = log((ν + 1)/(ν − 1))`, `+∞` at the vacuum.
pub fn beta_from_nu(nu: f64) -> f64 {
    if nu <= 1.0 {
        f64::INFINITY
    } else {
        ((nu + 1.0) / (nu - 1.0)).ln()
    }
}

pub fn nu_from_beta(beta: f64) -> f64 {
    if beta.is_infinite() {
        1.0
    } else {
        (1.0 + (-beta).exp()) / (1.0 - (-beta).exp())
    }
}

fn symmetric_sqrt_inv(m: &RMatrix) -> Result<RMatrix> {
    let (vals, vecs) = real_symmetric_eigen(m);
    let min = vals[0];
    if !(min > 0.0) {
        return Err(LabError::NotPositiveDefinite(min));
    }
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| 1.0 / v.sqrt()));
    Ok(&vecs * RMatrix::from_diagonal(&d) * vecs.transpose())
}

/// Symplectic `S` and symplectic eigenvalues `ν` (descending) with
/// `S γ Sᵀ = diag(ν_1, ν_1, …, ν_m, ν_m)`.
pub fn williamson(gamma: &RMatrix) -> Result<(RMatrix, Vec<f64>)> {
    let n = gamma.nrows();
    if n == 0 || n % 2 != 0 || gamma.ncols() != n {
        return Err(LabError::InvalidParameter(format!(
            "covariance must be 2m x 2m, got {}x{}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let m = n / 2;
    let g = (gamma + gamma.transpose()) * 0.5;
    let ginv_half = symmetric_sqrt_inv(&g)?;
    let omega = SymplecticForm::new(m).matrix();
    let mm = &ginv_half * &omega * &ginv_half;
    // iM is Hermitian with eigenvalues ±1/ν_j.
    let h = CMatrix::from_fn(n, n, |i, j| c(0.0, mm[(i, j)]));
    let (vals, vecs) = eigh_desc(&h);
    // positive eigenvalues 1/ν, smallest first ⇒ ν descending
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut nu = Vec::with_capacity(m);
    let mut o = RMatrix::zeros(n, n);
    for (slot, &k) in order.iter().enumerate() {
        let lam = vals[k];
        if !(lam > 0.0) {
            return Err(LabError::NotPositiveDefinite(lam));
        }
        nu.push(1.0 / lam);
        let mut u: DVector<C64> = vecs.column(k).into_owned();
        // phase: first significant component on the positive imaginary axis
        let scale = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(lead) = u.iter().find(|z| z.norm() > 1e-8 * scale).copied() {
            let rot = c(0.0, 1.0) * lead.conj() / lead.norm();
            u *= rot;
        }
        let s2 = std::f64::consts::SQRT_2;
        for i in 0..n {
            o[(i, 2 * slot)] = s2 * u[i].im;
            o[(i, 2 * slot + 1)] = s2 * u[i].re;
        }
    }
    let dhalf = DVector::from_iterator(n, (0..n).map(|i| nu[i / 2].sqrt()));
    let s = RMatrix::from_diagonal(&dhalf) * o.transpose() * ginv_half;
    Ok((s, nu))
}

/// Symplectic eigenvalues as `|eig(Ω γ)|`, each reported once, descending.
pub fn symplectic_eigenvalues_direct(gamma: &RMatrix) -> Vec<f64> {
    let m = gamma.nrows() / 2;
    let k = SymplecticForm::new(m).matrix() * gamma;
    let mut v: Vec<f64> = k.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.into_iter().step_by(2).collect()
}

/// Single-mode thermal state `(1 − q) q^n` on `|0⟩..|cutoff⟩`, renormalized, with
/// the discarded geometric tail `q^{N+1}` recorded.
pub fn thermal_state(nu: f64, cutoff: usize) -> Result<DensityMatrix> {
    thermal_product(&[nu], &FockCutoff::single(cutoff)?)
}

pub fn thermal_product(nus: &[f64], cutoff: &FockCutoff) -> Result<DensityMatrix> {
    if nus.len() != cutoff.modes() {
        return Err(LabError::CutoffMismatch(format!(
            "{} thermal parameters for {} modes",
            nus.len(),
            cutoff.modes()
        )));
    }
    if let Some(nu) = nus.iter().find(|&&v| !(v >= 1.0) || !v.is_finite()) {
        return Err(LabError::InvalidParameter(format!("thermal parameter {nu} must be >= 1")));
    }
    let qs: Vec<f64> = nus.iter().map(|&v| occupation_ratio(v)).collect();
    let dim = cutoff.dim();
    let mut diag = Vec::with_capacity(dim);
    for i in 0..dim {
        let mi = cutoff.multi_index(i);
        let w: f64 = mi
            .iter()
            .zip(&qs)
            .map(|(&k, &q)| (1.0 - q) * q.powi(k as i32))
            .product();
        diag.push(w);
    }
    let kept: f64 = diag.iter().sum();
    let m = CMatrix::from_diagonal(&DVector::from_iterator(dim, diag.iter().map(|&w| c(w / kept, 0.0))));
    Ok(DensityMatrix::from_cp_output(cutoff.clone(), m, (1.0 - kept).max(0.0)))
}

/// Smallest single-mode cutoff whose thermal tail `q^{N+1}` is below `tol`.
pub fn thermal_cutoff_for(nu: f64, tol: f64, max: usize) -> usize {
    let q = occupation_ratio(nu);
    if q <= 0.0 {
        return 1;
    }
    let n = (tol.ln() / q.ln()).ceil() as usize;
    n.clamp(1, max)
}

/// Analytic Gaussian state `(d, γ)`.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    pub d: Vec<f64>,
    pub gamma: RMatrix,
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    pub symplectic: RMatrix,
    pub uncertainty_margin: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianSpecJson {
    d: Vec<f64>,
    gamma: Vec<Vec<f64>>,
    nu: Vec<f64>,
    beta: Vec<Option<f64>>,
}

impl GaussianSpec {
    pub fn new(d: Vec<f64>, gamma: RMatrix) -> Result<Self> {
        if d.len() != gamma.nrows() {
            return Err(LabError::InvalidParameter("mean and covariance sizes differ".into()));
        }
        let margin = crate::charfn::uncertainty_margin(&gamma);
        if margin < -1e-8 {
            return Err(LabError::NonPhysicalCovariance { min_eig: margin });
        }
        let (s, nu) = williamson(&gamma)?;
        let beta = nu.iter().map(|&v| beta_from_nu(v)).collect();
        Ok(Self {
            d,
            gamma,
            nu,
            beta,
            symplectic: s,
            uncertainty_margin: margin,
        })
    }

    pub fn thermal(nus: &[f64]) -> Result<Self> {
        let n = 2 * nus.len();
        let g = RMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|i| nus[i / 2])));
        Self::new(vec![0.0; n], g)
    }

    pub fn modes(&self) -> usize {
        self.d.len() / 2
    }

    /// Zero mean and `γ = ⊕ ν_j I₂` within `tol`.
    pub fn in_williamson_frame(&self, tol: f64) -> bool {
        let n = self.d.len();
        if self.d.iter().any(|x| x.abs() > tol) {
            return false;
        }
        for i in 0..n {
            for j in 0..n {
                let same_mode = i / 2 == j / 2;
                let v = self.gamma[(i, j)];
                if i != j && v.abs() > tol {
                    return false;
                }
                if same_mode && i == j && (v - self.gamma[(2 * (i / 2), 2 * (i / 2))]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Per-mode `ν_j` read off a Williamson-frame covariance.
    pub fn frame_nus(&self) -> Vec<f64> {
        (0..self.modes()).map(|j| self.gamma[(2 * j, 2 * j)]).collect()
    }

    /// Thermal product on `cutoff`, available only in the Williamson frame.
    pub fn synthesize(&self, cutoff: &FockCutoff) -> Result<DensityMatrix> {
        if !self.in_williamson_frame(1e-6) {
            return Err(LabError::UnsupportedFrame(
                "mean must vanish and each mode's covariance must be proportional to the identity".into(),
            ));
        }
        let nus: Vec<f64> = self.frame_nus().iter().map(|v| v.max(1.0)).collect();
        thermal_product(&nus, cutoff)
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.gamma.nrows();
        let js = GaussianSpecJson {
            d: self.d.clone(),
            gamma: (0..n).map(|i| (0..n).map(|j| self.gamma[(i, j)]).collect()).collect(),
            nu: self.nu.clone(),
            beta: self.beta.iter().map(|b| b.is_finite().then_some(*b)).collect(),
        };
        Ok(serde_json::to_string_pretty(&js)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let js: GaussianSpecJson = serde_json::from_str(s)?;
        let n = js.d.len();
        if js.gamma.len() != n || js.gamma.iter().any(|r| r.len() != n) {
            return Err(LabError::InvalidParameter("gamma does not match the mean vector".into()));
        }
        Self::new(js.d, DMatrix::from_fn(n, n, |i, j| js.gamma[i][j]))
    }
}

/// `exp(i rᵀd − ¼ rᵀγr)` with `r_j = (√2 Im z_j, −√2 Re z_j)`.
pub fn gaussian_char_fn(spec: &GaussianSpec, z: &[C64]) -> Result<C64> {
    if z.len() != spec.modes() {
        return Err(LabError::CutoffMismatch(format!(
            "{} coordinates for {} modes",
            z.len(),
            spec.modes()
        )));
    }
    let s2 = std::f64::consts::SQRT_2;
    let r = DVector::from_iterator(2 * z.len(), z.iter().flat_map(|w| [s2 * w.im, -s2 * w.re]));
    let d = DVector::from_column_slice(&spec.d);
    let lin = r.dot(&d);
    let quad = (r.transpose() * &spec.gamma * &r)[(0, 0)];
    Ok(c(-0.25 * quad, lin).exp())
}

/// Result of Gaussification: the analytic spec, plus its Fock synthesis on the
/// input cutoff when the state sits in the Williamson frame.
#[derive(Clone, Debug)]
pub struct Gaussification {
    pub spec: GaussianSpec,
    pub covariance: CovarianceData,
    pub state: Option<DensityMatrix>,
}

pub fn gaussify(rho: &DensityMatrix) -> Result<Gaussification> {
    let cv = covariance(rho)?;
    let spec = GaussianSpec::new(cv.d.clone(), cv.gamma_matrix())?;
    let state = if spec.in_williamson_frame(1e-6) {
        Some(spec.synthesize(rho.cutoff())?)
    } else {
        None
    };
    Ok(Gaussification {
        spec,
        covariance: cv,
        state,
    })
}

//! Characteristic functions, Wigner transforms, Plancherel norms and moments.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fock::{annihilation, displacement_matrix, lift_single_mode, DensityMatrix, FockCutoff, ModeOperator};
use crate::gaussian::williamson;
use crate::linalg::{c, eigvalsh, trace, CMatrix, C64};
use crate::quadrature::{adapt_radius, PhaseGrid, QuadratureRule};

/// Anything with a Fock-basis matrix.
pub trait FockOperator {
    fn fock_cutoff(&self) -> &FockCutoff;
    fn fock_matrix(&self) -> &CMatrix;
}

impl FockOperator for DensityMatrix {
    fn fock_cutoff(&self) -> &FockCutoff {
        self.cutoff()
    }
    fn fock_matrix(&self) -> &CMatrix {
        self.matrix()
    }
}

impl FockOperator for ModeOperator {
    fn fock_cutoff(&self) -> &FockCutoff {
        self.cutoff()
    }
    fn fock_matrix(&self) -> &CMatrix {
        self.matrix()
    }
}

/// `tr(T D_z)` from exact displacement matrix elements.
pub fn char_fn<T: FockOperator + ?Sized>(t: &T, z: &[C64]) -> Result<C64> {
    char_fn_matrix(t.fock_matrix(), t.fock_cutoff(), z)
}

pub fn char_fn_matrix(t: &CMatrix, cutoff: &FockCutoff, z: &[C64]) -> Result<C64> {
    if z.len() != cutoff.modes() {
        return Err(LabError::CutoffMismatch(format!(
            "{} phase-space coordinates for {} modes",
            z.len(),
            cutoff.modes()
        )));
    }
    let blocks: Vec<CMatrix> = z
        .iter()
        .enumerate()
        .map(|(j, &w)| displacement_matrix(w, cutoff.max_photons(j)))
        .collect();
    if cutoff.modes() == 1 {
        // tr(T D) = Σ_{ij} T_ij D_ji
        let d = &blocks[0];
        return Ok(t.iter().zip(d.transpose().iter()).map(|(a, b)| a * b).sum());
    }
    let idx = cutoff.multi_indices();
    let mut acc = C64::new(0.0, 0.0);
    for (i, mi) in idx.iter().enumerate() {
        for (j, mj) in idx.iter().enumerate() {
            let tij = t[(i, j)];
            if tij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut prod = tij;
            for (k, b) in blocks.iter().enumerate() {
                prod *= b[(mj[k], mi[k])];
            }
            acc += prod;
        }
    }
    Ok(acc)
}

/// Quadrature grid whose box boundary sees `|χ_T| < tol`. Points per axis scale
/// with the radius.
pub fn adapted_grid<T: FockOperator + ?Sized>(t: &T, rule: QuadratureRule, tol: f64) -> Result<PhaseGrid> {
    let modes = t.fock_cutoff().modes();
    let (r, _) = adapt_radius(
        modes,
        |z| char_fn(t, z).map(|v| v.norm()).unwrap_or(f64::INFINITY),
        tol,
        3.0,
        0.5,
        40.0,
    )?;
    let base = if modes == 1 { 12.0 } else { 3.0 };
    let points = ((base * r).ceil() as usize).max(16);
    PhaseGrid::new(modes, r, points, rule)
}

fn boundary_check<T: FockOperator + ?Sized>(t: &T, grid: &PhaseGrid, limit: f64) -> Result<()> {
    let per_face = if grid.modes() == 1 { 33 } else { 7 };
    let mut worst = 0.0f64;
    for z in grid.boundary_points(per_face) {
        worst = worst.max(char_fn(t, &z)?.norm());
    }
    if worst > limit {
        return Err(LabError::GridTooSmall {
            radius: grid.radius(),
            boundary: worst,
        });
    }
    Ok(())
}

/// `(1/π^{2m}) ∫ χ_T(w) e^{zᵀw̄ − z̄ᵀw} d^{2m}w` by quadrature. For Hermitian `T`
/// the imaginary part measures the quadrature error.
pub fn wigner<T: FockOperator + ?Sized>(t: &T, z: &[C64], grid: &PhaseGrid) -> Result<C64> {
    let m = t.fock_cutoff().modes();
    if z.len() != m || grid.modes() != m {
        return Err(LabError::CutoffMismatch("Wigner point or grid has the wrong mode count".into()));
    }
    boundary_check(t, grid, 1e-6)?;
    let mut err = None;
    let v = grid.integrate(|w| {
        let chi = match char_fn(t, w) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                return C64::new(0.0, 0.0);
            }
        };
        let phase: C64 = z.iter().zip(w).map(|(zj, wj)| zj * wj.conj() - zj.conj() * wj).sum();
        chi * phase.exp()
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(v / PI.powi(2 * m as i32))
}

/// `(1/π^m) ∫ |χ_T|²`, the squared Hilbert–Schmidt norm by Plancherel.
pub fn plancherel_hs_norm<T: FockOperator + ?Sized>(t: &T, grid: &PhaseGrid) -> Result<f64> {
    let m = t.fock_cutoff().modes();
    if grid.modes() != m {
        return Err(LabError::CutoffMismatch("grid has the wrong mode count".into()));
    }
    boundary_check(t, grid, 1e-6)?;
    let mut err = None;
    let v = grid.integrate(|w| match char_fn(t, w) {
        Ok(x) => c(x.norm_sqr(), 0.0),
        Err(e) => {
            err.get_or_insert(e);
            c(0.0, 0.0)
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(v.re / PI.powi(m as i32))
}

/// Samples of `χ_T` on a grid.
#[derive(Clone, Debug)]
pub struct CharSample {
    pub points: Vec<Vec<C64>>,
    pub values: Vec<C64>,
    pub source: String,
}

impl CharSample {
    pub fn on_grid<T: FockOperator + ?Sized>(t: &T, grid: &PhaseGrid, source: &str) -> Result<Self> {
        let mut points = Vec::with_capacity(grid.len());
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let (z, _) = grid.node(k);
            values.push(char_fn(t, &z)?);
            points.push(z);
        }
        Ok(Self {
            points,
            values,
            source: source.to_string(),
        })
    }

    pub fn at_points<T: FockOperator + ?Sized>(t: &T, points: Vec<Vec<C64>>, source: &str) -> Result<Self> {
        let values = points.iter().map(|z| char_fn(t, z)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            values,
            source: source.to_string(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.points.first().map_or(0, |p| p.len());
        let mut header: Vec<String> = Vec::new();
        for j in 1..=m {
            header.push(format!("re(z_{j})"));
            header.push(format!("im(z_{j})"));
        }
        header.push("re(chi)".into());
        header.push("im(chi)".into());
        w.write_record(&header)?;
        for (z, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = Vec::with_capacity(2 * m + 2);
            for zj in z {
                row.push(zj.re.to_string());
                row.push(zj.im.to_string());
            }
            row.push(v.re.to_string());
            row.push(v.im.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `M_κ(ρ) = tr(ρ (H_m + m)^{κ/2})`, diagonal in the Fock basis.
pub fn moment(rho: &DensityMatrix, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(LabError::InvalidParameter(format!("moment order {kappa} must be positive")));
    }
    let cut = rho.cutoff();
    let m = cut.modes() as f64;
    Ok((0..cut.dim())
        .map(|i| {
            let n: usize = cut.multi_index(i).iter().sum();
            rho.matrix()[(i, i)].re * (n as f64 + m).powf(kappa / 2.0)
        })
        .sum())
}

/// First and second moments of a state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceData {
    pub d: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
}

impl CovarianceData {
    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let n = self.gamma.len();
        DMatrix::from_fn(n, n, |i, j| self.gamma[i][j])
    }

    pub fn modes(&self) -> usize {
        self.mu.len()
    }
}

/// Quadrature operators `(x_1, p_1, …, x_m, p_m)` on `cutoff`.
pub fn quadratures(cutoff: &FockCutoff) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(2 * cutoff.modes());
    for j in 0..cutoff.modes() {
        let a = lift_single_mode(
            cutoff,
            j,
            &crate::fock::annihilation_matrix(cutoff.max_photons(j)),
        );
        out.push((&a + a.adjoint()) * c(s, 0.0));
        out.push((&a - a.adjoint()) * c(0.0, -s));
    }
    out
}

/// Mean vector, covariance `tr(ρ{R−d,(R−d)ᵀ})`, symplectic eigenvalues and
/// `μ_j = tr(ρ a_j†a_j) + ½`. The state is padded by one level so that second
/// moments see exact ladder action.
pub fn covariance(rho: &DensityMatrix) -> Result<CovarianceData> {
    let padded = rho.padded(1);
    let cut = padded.cutoff().clone();
    let r = quadratures(&cut);
    let p = padded.matrix();
    let d: Vec<f64> = r.iter().map(|x| trace(&(p * x)).re).collect();
    let n = r.len();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let pk = p * &r[k];
        for l in k..n {
            let v = 2.0 * trace(&(&pk * &r[l])).re - 2.0 * d[k] * d[l];
            // tr(ρ{R_k,R_l}) = 2 Re tr(ρ R_k R_l) for Hermitian R
            g[(k, l)] = v;
            g[(l, k)] = v;
        }
    }
    let mu = (0..cut.modes())
        .map(|j| {
            let a = annihilation(&cut, j).map(|o| o.into_matrix())?;
            Ok(trace(&(p * a.adjoint() * &a)).re + 0.5)
        })
        .collect::<Result<Vec<f64>>>()?;
    check_uncertainty(&g)?;
    let (_, nu) = williamson(&g)?;
    Ok(CovarianceData {
        d,
        gamma: (0..n).map(|i| (0..n).map(|j| g[(i, j)]).collect()).collect(),
        nu,
        mu,
    })
}

/// Smallest eigenvalue of `γ + iΩ`.
pub fn uncertainty_margin(gamma: &DMatrix<f64>) -> f64 {
    let n = gamma.nrows();
    let omega = crate::gaussian::SymplecticForm::new(n / 2).matrix();
    let h = CMatrix::from_fn(n, n, |i, j| c(gamma[(i, j)], omega[(i, j)]));
    eigvalsh(&h)[0]
}

fn check_uncertainty(gamma: &DMatrix<f64>) -> Result<()> {
    let min_eig = uncertainty_margin(gamma);
    if min_eig < -1e-8 {
        return Err(LabError::NonPhysicalCovariance { min_eig });
    }
    Ok(())
}

/// Mean-vector helper for external callers.
pub fn mean_vector(rho: &DensityMatrix) -> Vec<f64> {
    let padded = rho.padded(1);
    quadratures(padded.cutoff())
        .iter()
        .map(|x| trace(&(padded.matrix() * x)).re)
        .collect()
}

/// `max |χ_T(z)|` over rings `ε ≤ |z| ≤ r_max`, single mode.
pub fn sup_outside_ball<T: FockOperator + ?Sized>(t: &T, eps: f64, r_max: f64, rings: usize, spokes: usize) -> Result<f64> {
    if t.fock_cutoff().modes() != 1 {
        return Err(LabError::InvalidParameter("sup probe is single-mode".into()));
    }
    let mut worst = 0.0f64;
    for i in 0..rings {
        let r = eps + (r_max - eps) * i as f64 / (rings - 1).max(1) as f64;
        for k in 0..spokes {
            let th = 2.0 * PI * k as f64 / spokes as f64;
            worst = worst.max(char_fn(t, &[C64::from_polar(r, th)])?.norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::superposition_0_3;
    use crate::gaussian::thermal_state;

    #[test]
    fn chi_at_origin_and_thermal() {
        let ex = superposition_0_3(3).unwrap();
        assert!((char_fn(&ex, &[c(0.0, 0.0)]).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let tau = thermal_state(2.0, 60).unwrap();
        for z in [c(0.3, 0.1), c(-0.8, 0.5), c(1.2, -1.0)] {
            let v = char_fn(&tau, &[z]).unwrap();
            assert!((v.re - (-z.norm_sqr()).exp()).abs() < 1e-10);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn chi_of_example_state_at_one() {
        let ex = superposition_0_3(3).unwrap();
        let v = char_fn(&ex, &[c(1.0, 0.0)]).unwrap();
        // e^{-1/2}(1 - 3/2 + 3/4 - 1/12)
        let closed = (-0.5f64).exp() / 6.0;
        assert!((v.re - closed).abs() < 1e-14 && v.im.abs() < 1e-14, "{v}");
        assert!((v.re - 0.101089).abs() < 1e-6);
    }

    #[test]
    fn chi_is_conjugate_symmetric_for_hermitian() {
        let ex = superposition_0_3(5).unwrap();
        let z = c(0.4, -0.9);
        let a = char_fn(&ex, &[z]).unwrap();
        let b = char_fn(&ex, &[-z]).unwrap();
        assert!((a - b.conj()).norm() < 1e-14);
    }

    #[test]
    fn plancherel_examples() {
        let tau = thermal_state(4.0, 60).unwrap();
        let grid = adapted_grid(&tau, QuadratureRule::GaussLegendre, 1e-10).unwrap();
        let v = plancherel_hs_norm(&tau, &grid).unwrap();
        assert!((v - 0.25).abs() < 1e-6, "{v}");
        let vac = DensityMatrix::vacuum(&FockCutoff::single(4).unwrap());
        let grid = adapted_grid(&vac, QuadratureRule::GaussLegendre, 1e-10).unwrap();
        assert!((plancherel_hs_norm(&vac, &grid).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn grid_too_small_is_reported() {
        let ex = superposition_0_3(3).unwrap();
        let grid = PhaseGrid::new(1, 1.0, 20, QuadratureRule::GaussLegendre).unwrap();
        assert!(matches!(plancherel_hs_norm(&ex, &grid), Err(LabError::GridTooSmall { .. })));
    }

    #[test]
    fn wigner_thermal_origin() {
        let tau = thermal_state(3.0, 60).unwrap();
        let grid = adapted_grid(&tau, QuadratureRule::GaussLegendre, 1e-10).unwrap();
        let w = wigner(&tau, &[c(0.0, 0.0)], &grid).unwrap();
        assert!((w.re - 2.0 / (3.0 * PI)).abs() < 1e-8);
        assert!(w.im.abs() < 1e-10);
    }

    #[test]
    fn moments_of_example() {
        let ex = superposition_0_3(3).unwrap();
        assert!((moment(&ex, 2.0).unwrap() - 2.5).abs() < 1e-14);
        assert!((moment(&ex, 3.0).unwrap() - 4.5).abs() < 1e-14);
        let vac = DensityMatrix::vacuum(&FockCutoff::single(3).unwrap());
        for k in [0.5, 1.0, 3.7] {
            assert!((moment(&vac, k).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(moment(&vac, 0.0).is_err());
    }

    #[test]
    fn covariance_examples() {
        let vac = DensityMatrix::vacuum(&FockCutoff::single(3).unwrap());
        let cv = covariance(&vac).unwrap();
        assert!(cv.d.iter().all(|x| x.abs() < 1e-15));
        assert!((cv.gamma[0][0] - 1.0).abs() < 1e-14 && (cv.gamma[1][1] - 1.0).abs() < 1e-14);
        assert!(cv.gamma[0][1].abs() < 1e-14);

        let ex = superposition_0_3(3).unwrap();
        let cv = covariance(&ex).unwrap();
        assert!((cv.gamma[0][0] - 4.0).abs() < 1e-13);
        assert!((cv.gamma[1][1] - 4.0).abs() < 1e-13);
        assert!((cv.nu[0] - 4.0).abs() < 1e-10);
        assert!((cv.mu[0] - 2.0).abs() < 1e-13);

        let tau = thermal_state(3.0, 60).unwrap();
        let cv = covariance(&tau).unwrap();
        assert!((cv.gamma[0][0] - 3.0).abs() < 1e-9);
    }
}

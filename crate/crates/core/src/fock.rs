//! Truncated multimode Fock spaces, density matrices and canonical operators.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{c, eigvalsh, hermitize, kron, ln_factorials, trace, CMatrix, C64};

/// Largest total Hilbert-space dimension accepted unless a caller asks otherwise.
pub const DEFAULT_DIM_CEILING: usize = 4096;

/// Per-mode photon-number cutoffs. Mode `j` keeps `|0⟩..|N_j⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FockCutoff {
    per_mode: Vec<usize>,
}

impl TryFrom<Vec<usize>> for FockCutoff {
    type Error = LabError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        FockCutoff::new(v)
    }
}

impl From<FockCutoff> for Vec<usize> {
    fn from(c: FockCutoff) -> Self {
        c.per_mode
    }
}

impl FockCutoff {
    pub fn new(per_mode: Vec<usize>) -> Result<Self> {
        Self::with_ceiling(per_mode, DEFAULT_DIM_CEILING)
    }

    pub fn with_ceiling(per_mode: Vec<usize>, ceiling: usize) -> Result<Self> {
        if per_mode.is_empty() {
            return Err(LabError::InvalidParameter("cutoff needs at least one mode".into()));
        }
        if let Some(j) = per_mode.iter().position(|&n| n < 1) {
            return Err(LabError::InvalidParameter(format!(
                "cutoff of mode {j} must be at least 1"
            )));
        }
        let mut dim: usize = 1;
        for &n in &per_mode {
            dim = dim.saturating_mul(n + 1);
        }
        if dim > ceiling {
            return Err(LabError::DimensionCeiling { dim, ceiling });
        }
        Ok(Self { per_mode })
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn uniform(modes: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; modes])
    }

    pub fn modes(&self) -> usize {
        self.per_mode.len()
    }

    pub fn per_mode(&self) -> &[usize] {
        &self.per_mode
    }

    pub fn max_photons(&self, mode: usize) -> usize {
        self.per_mode[mode]
    }

    pub fn dim(&self) -> usize {
        self.per_mode.iter().map(|n| n + 1).product()
    }

    pub fn mode_dim(&self, mode: usize) -> usize {
        self.per_mode[mode] + 1
    }

    /// Flat position of a multi-index. Mode 0 varies slowest.
    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.per_mode)
            .fold(0, |acc, (&k, &n)| acc * (n + 1) + k)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.modes()];
        for j in (0..self.modes()).rev() {
            let d = self.per_mode[j] + 1;
            out[j] = flat % d;
            flat /= d;
        }
        out
    }

    /// All multi-indices in flat order.
    pub fn multi_indices(&self) -> Vec<Vec<usize>> {
        (0..self.dim()).map(|i| self.multi_index(i)).collect()
    }

    pub fn check_index(&self, multi: &[usize]) -> Result<()> {
        if multi.len() != self.modes() {
            return Err(LabError::CutoffMismatch(format!(
                "multi-index has {} entries for {} modes",
                multi.len(),
                self.modes()
            )));
        }
        for (mode, (&k, &n)) in multi.iter().zip(&self.per_mode).enumerate() {
            if k > n {
                return Err(LabError::CutoffViolation {
                    mode,
                    index: k,
                    cutoff: n,
                });
            }
        }
        Ok(())
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes() {
            return Err(LabError::ModeOutOfRange {
                mode,
                modes: self.modes(),
            });
        }
        Ok(())
    }

    /// Adds `extra` levels to every mode. Not subject to the ceiling: used for
    /// internal scratch spaces.
    pub fn padded(&self, extra: usize) -> Self {
        Self {
            per_mode: self.per_mode.iter().map(|n| n + extra).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut v = self.per_mode.clone();
        v.extend_from_slice(&other.per_mode);
        Self::new(v)
    }

    /// Per-mode maximum of two cutoffs with equal mode count.
    pub fn join(&self, other: &Self) -> Result<Self> {
        if self.modes() != other.modes() {
            return Err(LabError::CutoffMismatch(format!(
                "{} modes vs {} modes",
                self.modes(),
                other.modes()
            )));
        }
        Ok(Self {
            per_mode: self
                .per_mode
                .iter()
                .zip(&other.per_mode)
                .map(|(a, b)| *a.max(b))
                .collect(),
        })
    }

    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self {
            per_mode: keep.iter().map(|&j| self.per_mode[j]).collect(),
        }
    }
}

/// Copies a matrix between two cutoffs with the same mode count, dropping entries
/// outside the target.
pub fn embed_matrix(m: &CMatrix, from: &FockCutoff, to: &FockCutoff) -> CMatrix {
    let map: Vec<Option<usize>> = (0..from.dim())
        .map(|i| {
            let mi = from.multi_index(i);
            if mi.iter().zip(to.per_mode()).all(|(k, n)| k <= n) {
                Some(to.index_of(&mi))
            } else {
                None
            }
        })
        .collect();
    let mut out = CMatrix::zeros(to.dim(), to.dim());
    for (i, ti) in map.iter().enumerate() {
        let Some(ti) = ti else { continue };
        for (j, tj) in map.iter().enumerate() {
            if let Some(tj) = tj {
                out[(*ti, *tj)] = m[(i, j)];
            }
        }
    }
    out
}

/// Truncated density operator plus the trace discarded by truncation so far.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    cutoff: FockCutoff,
    entries: CMatrix,
    tail_mass: f64,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    cutoff: Vec<usize>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    tail_mass: f64,
}

impl DensityMatrix {
    /// Validates and normalizes a candidate state. The matrix is hermitized and
    /// rescaled to unit trace; negative eigenvalues beyond `-1e-10` are rejected.
    pub fn from_matrix(cutoff: FockCutoff, entries: CMatrix, tail_mass: f64) -> Result<Self> {
        if entries.nrows() != cutoff.dim() || entries.ncols() != cutoff.dim() {
            return Err(LabError::CutoffMismatch(format!(
                "matrix is {}x{} but the cutoff has dimension {}",
                entries.nrows(),
                entries.ncols(),
                cutoff.dim()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::DegenerateInput("non-finite matrix entry".into()));
        }
        if !(tail_mass >= 0.0) {
            return Err(LabError::InvalidParameter(format!("tail mass {tail_mass} is negative")));
        }
        let h = hermitize(&entries);
        let tr = trace(&h).re;
        if tr <= 0.0 {
            return Err(LabError::DegenerateInput(format!("trace {tr} is not positive")));
        }
        let h = h / c(tr, 0.0);
        let min = eigvalsh(&h).first().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(LabError::DegenerateInput(format!(
                "matrix is not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(Self {
            cutoff,
            entries: h,
            tail_mass,
        })
    }

    /// Hermitizes and renormalizes without the spectral check. For results of
    /// completely positive maps whose positivity is structural.
    pub(crate) fn from_cp_output(cutoff: FockCutoff, entries: CMatrix, tail_mass: f64) -> Self {
        let h = hermitize(&entries);
        let tr = trace(&h).re;
        Self {
            cutoff,
            entries: h / c(tr, 0.0),
            tail_mass,
        }
    }

    pub fn vacuum(cutoff: &FockCutoff) -> Self {
        let mut m = CMatrix::zeros(cutoff.dim(), cutoff.dim());
        m[(0, 0)] = c(1.0, 0.0);
        Self {
            cutoff: cutoff.clone(),
            entries: m,
            tail_mass: 0.0,
        }
    }

    pub fn fock_state(cutoff: &FockCutoff, multi: &[usize]) -> Result<Self> {
        cutoff.check_index(multi)?;
        let i = cutoff.index_of(multi);
        let mut m = CMatrix::zeros(cutoff.dim(), cutoff.dim());
        m[(i, i)] = c(1.0, 0.0);
        Ok(Self {
            cutoff: cutoff.clone(),
            entries: m,
            tail_mass: 0.0,
        })
    }

    pub fn from_vector(cutoff: &FockCutoff, v: &DVector<C64>) -> Result<Self> {
        if v.len() != cutoff.dim() {
            return Err(LabError::CutoffMismatch(format!(
                "vector length {} vs dimension {}",
                v.len(),
                cutoff.dim()
            )));
        }
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(LabError::DegenerateInput("zero amplitude vector".into()));
        }
        let u = v / c(norm, 0.0);
        Ok(Self {
            cutoff: cutoff.clone(),
            entries: &u * u.adjoint(),
            tail_mass: 0.0,
        })
    }

    pub fn cutoff(&self) -> &FockCutoff {
        &self.cutoff
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn modes(&self) -> usize {
        self.cutoff.modes()
    }

    pub fn dim(&self) -> usize {
        self.cutoff.dim()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.entries).re
    }

    pub fn with_extra_tail(mut self, extra: f64) -> Self {
        self.tail_mass += extra.max(0.0);
        self
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigvalsh(&self.entries).first().copied().unwrap_or(0.0)
    }

    /// Spectrum, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = eigvalsh(&self.entries);
        v.reverse();
        v
    }

    /// Zero-padding into a larger cutoff. Exact: no weight is lost.
    pub fn padded(&self, extra: usize) -> Self {
        let to = self.cutoff.padded(extra);
        Self {
            entries: embed_matrix(&self.entries, &self.cutoff, &to),
            cutoff: to,
            tail_mass: self.tail_mass,
        }
    }

    /// Moves the state to another cutoff with the same mode count. Weight that
    /// falls outside the target is added to the tail and the state is renormalized.
    pub fn embed(&self, to: &FockCutoff) -> Result<Self> {
        if to.modes() != self.modes() {
            return Err(LabError::CutoffMismatch(format!(
                "{} modes vs {} modes",
                self.modes(),
                to.modes()
            )));
        }
        if to == &self.cutoff {
            return Ok(self.clone());
        }
        let m = embed_matrix(&self.entries, &self.cutoff, to);
        let kept = trace(&m).re;
        let lost = (self.trace() - kept).max(0.0);
        if kept <= 0.0 {
            return Err(LabError::DegenerateInput("no weight inside the target cutoff".into()));
        }
        Ok(Self::from_cp_output(to.clone(), m, self.tail_mass + lost))
    }

    /// `(1 - w) self + w other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(LabError::CutoffMismatch("mixing states on different cutoffs".into()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(LabError::InvalidParameter(format!("mixing weight {w} outside [0,1]")));
        }
        let m = &self.entries * c(1.0 - w, 0.0) + &other.entries * c(w, 0.0);
        Ok(Self::from_cp_output(
            self.cutoff.clone(),
            m,
            self.tail_mass.max(other.tail_mass),
        ))
    }

    /// `U ρ U†` for a unitary acting on the same truncated space.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::from_cp_output(
            self.cutoff.clone(),
            u * &self.entries * u.adjoint(),
            self.tail_mass,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.dim();
        let row = |i: usize, f: fn(&C64) -> f64| (0..n).map(|j| f(&self.entries[(i, j)])).collect();
        let js = DensityMatrixJson {
            cutoff: self.cutoff.per_mode().to_vec(),
            re: (0..n).map(|i| row(i, |z| z.re)).collect(),
            im: (0..n).map(|i| row(i, |z| z.im)).collect(),
            tail_mass: self.tail_mass,
        };
        Ok(serde_json::to_string_pretty(&js)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let js: DensityMatrixJson = serde_json::from_str(s)?;
        let cutoff = FockCutoff::new(js.cutoff)?;
        let n = cutoff.dim();
        if js.re.len() != n || js.im.len() != n || js.re.iter().chain(&js.im).any(|r| r.len() != n) {
            return Err(LabError::CutoffMismatch(format!(
                "serialized matrix does not match dimension {n}"
            )));
        }
        let m = CMatrix::from_fn(n, n, |i, j| c(js.re[i][j], js.im[i][j]));
        Self::from_matrix(cutoff, m, js.tail_mass)
    }
}

/// Which canonical operator a [`ModeOperator`] represents.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorLabel {
    Annihilation(usize),
    Creation(usize),
    Number(usize),
    Position(usize),
    Momentum(usize),
    Displacement(Vec<C64>),
    Custom(String),
}

/// Operator on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    cutoff: FockCutoff,
    entries: CMatrix,
    label: OperatorLabel,
}

impl ModeOperator {
    pub fn custom(cutoff: FockCutoff, entries: CMatrix, name: &str) -> Result<Self> {
        if entries.nrows() != cutoff.dim() || entries.ncols() != cutoff.dim() {
            return Err(LabError::CutoffMismatch(format!(
                "operator is {}x{} but the cutoff has dimension {}",
                entries.nrows(),
                entries.ncols(),
                cutoff.dim()
            )));
        }
        Ok(Self {
            cutoff,
            entries,
            label: OperatorLabel::Custom(name.to_string()),
        })
    }

    pub fn cutoff(&self) -> &FockCutoff {
        &self.cutoff
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn label(&self) -> &OperatorLabel {
        &self.label
    }

    pub fn adjoint(&self) -> Self {
        let label = match &self.label {
            OperatorLabel::Annihilation(j) => OperatorLabel::Creation(*j),
            OperatorLabel::Creation(j) => OperatorLabel::Annihilation(*j),
            OperatorLabel::Displacement(z) => OperatorLabel::Displacement(z.iter().map(|w| -w).collect()),
            OperatorLabel::Custom(s) => OperatorLabel::Custom(format!("{s}†")),
            other => other.clone(),
        };
        Self {
            cutoff: self.cutoff.clone(),
            entries: self.entries.adjoint(),
            label,
        }
    }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on `mode`.
pub fn lift_single_mode(cutoff: &FockCutoff, mode: usize, op: &CMatrix) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for j in 0..cutoff.modes() {
        let f = if j == mode {
            op.clone()
        } else {
            CMatrix::identity(cutoff.mode_dim(j), cutoff.mode_dim(j))
        };
        out = kron(&out, &f);
    }
    out
}

/// Single-mode annihilation matrix on `|0⟩..|n⟩`.
pub fn annihilation_matrix(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n + 1, n + 1);
    for k in 1..=n {
        a[(k - 1, k)] = c((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn annihilation(cutoff: &FockCutoff, mode: usize) -> Result<ModeOperator> {
    cutoff.check_mode(mode)?;
    Ok(ModeOperator {
        cutoff: cutoff.clone(),
        entries: lift_single_mode(cutoff, mode, &annihilation_matrix(cutoff.max_photons(mode))),
        label: OperatorLabel::Annihilation(mode),
    })
}

pub fn creation(cutoff: &FockCutoff, mode: usize) -> Result<ModeOperator> {
    Ok(annihilation(cutoff, mode)?.adjoint())
}

pub fn number(cutoff: &FockCutoff, mode: usize) -> Result<ModeOperator> {
    cutoff.check_mode(mode)?;
    let n = cutoff.max_photons(mode);
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(n + 1, (0..=n).map(|k| c(k as f64, 0.0))));
    Ok(ModeOperator {
        cutoff: cutoff.clone(),
        entries: lift_single_mode(cutoff, mode, &diag),
        label: OperatorLabel::Number(mode),
    })
}

/// `x_j = (a_j + a_j†)/√2`.
pub fn position(cutoff: &FockCutoff, mode: usize) -> Result<ModeOperator> {
    let a = annihilation(cutoff, mode)?.into_matrix();
    Ok(ModeOperator {
        cutoff: cutoff.clone(),
        entries: (&a + a.adjoint()) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        label: OperatorLabel::Position(mode),
    })
}

/// `p_j = (a_j − a_j†)/(i√2)`.
pub fn momentum(cutoff: &FockCutoff, mode: usize) -> Result<ModeOperator> {
    let a = annihilation(cutoff, mode)?.into_matrix();
    Ok(ModeOperator {
        cutoff: cutoff.clone(),
        entries: (&a - a.adjoint()) * c(0.0, -std::f64::consts::FRAC_1_SQRT_2),
        label: OperatorLabel::Momentum(mode),
    })
}

/// Total photon number, diagonal in the Fock basis.
pub fn total_number_diagonal(cutoff: &FockCutoff) -> Vec<f64> {
    (0..cutoff.dim())
        .map(|i| cutoff.multi_index(i).iter().sum::<usize>() as f64)
        .collect()
}

/// Passive phase rotation `exp(i Σ θ_j n_j)`.
pub fn phase_rotation(cutoff: &FockCutoff, thetas: &[f64]) -> Result<CMatrix> {
    if thetas.len() != cutoff.modes() {
        return Err(LabError::CutoffMismatch(format!(
            "{} angles for {} modes",
            thetas.len(),
            cutoff.modes()
        )));
    }
    let d = DVector::from_iterator(
        cutoff.dim(),
        (0..cutoff.dim()).map(|i| {
            let phase: f64 = cutoff
                .multi_index(i)
                .iter()
                .zip(thetas)
                .map(|(&k, &t)| k as f64 * t)
                .sum();
            C64::from_polar(1.0, phase)
        }),
    );
    Ok(CMatrix::from_diagonal(&d))
}

/// Single-mode displacement matrix `⟨p|D_z|q⟩` for `p, q ≤ n`, from the exact
/// infinite-dimensional closed form.
pub fn displacement_matrix(z: C64, n: usize) -> CMatrix {
    let x = z.norm_sqr();
    let lnf = ln_factorials(n);
    let ln_abs = z.norm().ln();
    let arg = z.arg();
    let mut out = CMatrix::zeros(n + 1, n + 1);
    for alpha in 0..=n {
        // L_q^{(alpha)}(x) for q = 0..=n-alpha
        let a = alpha as f64;
        let mut prev = 0.0;
        let mut cur = 1.0;
        for q in 0..=(n - alpha) {
            if q == 1 {
                prev = cur;
                cur = 1.0 + a - x;
            } else if q > 1 {
                let k = (q - 1) as f64;
                let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
                prev = cur;
                cur = next;
            }
            let p = q + alpha;
            let mag = if alpha == 0 {
                (-0.5 * x).exp()
            } else if x == 0.0 {
                0.0
            } else {
                (a * ln_abs + 0.5 * (lnf[q] - lnf[p]) - 0.5 * x).exp()
            };
            let lower = C64::from_polar(mag * cur, a * arg);
            out[(p, q)] = lower;
            if alpha > 0 {
                // ⟨q|D_z|p⟩ = (-1)^alpha conj(⟨p|D_z|q⟩)
                let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                out[(q, p)] = lower.conj() * sign;
            }
        }
    }
    out
}

pub fn displacement(z: &[C64], cutoff: &FockCutoff) -> Result<ModeOperator> {
    if z.len() != cutoff.modes() {
        return Err(LabError::CutoffMismatch(format!(
            "{} displacement amplitudes for {} modes",
            z.len(),
            cutoff.modes()
        )));
    }
    if z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
        return Err(LabError::InvalidParameter("non-finite displacement".into()));
    }
    let mut out = CMatrix::identity(1, 1);
    for (j, &w) in z.iter().enumerate() {
        out = kron(&out, &displacement_matrix(w, cutoff.max_photons(j)));
    }
    Ok(ModeOperator {
        cutoff: cutoff.clone(),
        entries: out,
        label: OperatorLabel::Displacement(z.to_vec()),
    })
}

/// Normalized `|v⟩⟨v|` from sparse amplitudes.
pub fn build_pure_state(amplitudes: &BTreeMap<Vec<usize>, C64>, cutoff: &FockCutoff) -> Result<DensityMatrix> {
    let mut v = DVector::<C64>::zeros(cutoff.dim());
    for (multi, &amp) in amplitudes {
        cutoff.check_index(multi)?;
        v[cutoff.index_of(multi)] += amp;
    }
    DensityMatrix::from_vector(cutoff, &v)
}

pub fn tensor(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DensityMatrix> {
    let cutoff = rho.cutoff.concat(&sigma.cutoff)?;
    Ok(DensityMatrix {
        cutoff,
        entries: kron(&rho.entries, &sigma.entries),
        tail_mass: rho.tail_mass + sigma.tail_mass,
    })
}

/// Partial trace of an arbitrary operator over the complement of `keep`.
pub fn partial_trace_matrix(m: &CMatrix, cutoff: &FockCutoff, keep: &[usize]) -> Result<(CMatrix, FockCutoff)> {
    if keep.is_empty() {
        return Err(LabError::EmptySelection);
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &j in &keep {
        cutoff.check_mode(j)?;
    }
    let kept = cutoff.restrict(&keep);
    let traced: Vec<usize> = (0..cutoff.modes()).filter(|j| !keep.contains(j)).collect();
    let tcut = if traced.is_empty() {
        None
    } else {
        Some(cutoff.restrict(&traced))
    };
    let mut out = CMatrix::zeros(kept.dim(), kept.dim());
    let tdim = tcut.as_ref().map_or(1, |t| t.dim());
    let full = |k: &[usize], t: &[usize]| {
        let mut multi = vec![0; cutoff.modes()];
        for (pos, &j) in keep.iter().enumerate() {
            multi[j] = k[pos];
        }
        for (pos, &j) in traced.iter().enumerate() {
            multi[j] = t[pos];
        }
        cutoff.index_of(&multi)
    };
    let kidx = kept.multi_indices();
    let tidx: Vec<Vec<usize>> = match &tcut {
        Some(t) => t.multi_indices(),
        None => vec![vec![]],
    };
    for (a, ka) in kidx.iter().enumerate() {
        for (b, kb) in kidx.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for t in tidx.iter().take(tdim) {
                s += m[(full(ka, t), full(kb, t))];
            }
            out[(a, b)] = s;
        }
    }
    Ok((out, kept))
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let (m, kept) = partial_trace_matrix(&rho.entries, &rho.cutoff, keep)?;
    Ok(DensityMatrix {
        cutoff: kept,
        entries: hermitize(&m),
        tail_mass: rho.tail_mass,
    })
}

pub fn expectation(rho: &DensityMatrix, x: &ModeOperator) -> Result<C64> {
    if rho.cutoff != x.cutoff {
        return Err(LabError::CutoffMismatch(format!(
            "state cutoff {:?} vs operator cutoff {:?}",
            rho.cutoff.per_mode(),
            x.cutoff.per_mode()
        )));
    }
    Ok(trace(&(&rho.entries * &x.entries)))
}

/// `(|0⟩ + |3⟩)/√2` on a single mode, the standard slow-convergence example.
pub fn superposition_0_3(cutoff: usize) -> Result<DensityMatrix> {
    let cut = FockCutoff::single(cutoff.max(3))?;
    let mut amps = BTreeMap::new();
    amps.insert(vec![0], c(1.0, 0.0));
    amps.insert(vec![3], c(1.0, 0.0));
    build_pure_state(&amps, &cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn multi_index_round_trip_is_row_major() {
        let cut = FockCutoff::new(vec![2, 3]).unwrap();
        assert_eq!(cut.dim(), 12);
        assert_eq!(cut.index_of(&[1, 0]), 4);
        assert_eq!(cut.index_of(&[0, 1]), 1);
        for i in 0..cut.dim() {
            assert_eq!(cut.index_of(&cut.multi_index(i)), i);
        }
    }

    #[test]
    fn cutoff_rejects_zero_and_ceiling() {
        assert!(FockCutoff::new(vec![0]).is_err());
        assert!(matches!(
            FockCutoff::with_ceiling(vec![9, 9], 50),
            Err(LabError::DimensionCeiling { dim: 100, ceiling: 50 })
        ));
    }

    #[test]
    fn pure_state_examples() {
        let cut = FockCutoff::single(3).unwrap();
        let mut amps = BTreeMap::new();
        amps.insert(vec![0], c(1.0, 0.0));
        let vac = build_pure_state(&amps, &cut).unwrap();
        assert!(max_abs(&(vac.matrix() - DensityMatrix::vacuum(&cut).matrix())) < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = BTreeMap::new();
        amps.insert(vec![0], c(h, 0.0));
        amps.insert(vec![3], c(h, 0.0));
        let ex = build_pure_state(&amps, &cut).unwrap();
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!(close(ex.matrix()[(i, j)].re, 0.5, 1e-15));
        }
        assert!(close(ex.matrix()[(1, 1)].re, 0.0, 1e-15));

        let mut amps = BTreeMap::new();
        amps.insert(vec![0], c(2.0, 0.0));
        amps.insert(vec![3], c(2.0, 0.0));
        let scaled = build_pure_state(&amps, &cut).unwrap();
        assert!(max_abs(&(scaled.matrix() - ex.matrix())) < 1e-15);
    }

    #[test]
    fn pure_state_errors() {
        let cut = FockCutoff::single(3).unwrap();
        let mut amps = BTreeMap::new();
        amps.insert(vec![4], c(1.0, 0.0));
        assert!(matches!(build_pure_state(&amps, &cut), Err(LabError::CutoffViolation { .. })));
        let mut amps = BTreeMap::new();
        amps.insert(vec![1], c(0.0, 0.0));
        assert!(matches!(build_pure_state(&amps, &cut), Err(LabError::DegenerateInput(_))));
    }

    #[test]
    fn annihilation_elements_and_ccr() {
        let cut = FockCutoff::single(2).unwrap();
        let a = annihilation(&cut, 0).unwrap();
        let m = a.matrix();
        assert!(close(m[(0, 1)].re, 1.0, 0.0));
        assert!(close(m[(1, 2)].re, 2f64.sqrt(), 0.0));
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 2);
        assert_eq!(creation(&cut, 0).unwrap().label(), &OperatorLabel::Creation(0));

        for n in 1..8 {
            let cut = FockCutoff::new(vec![n, 2]).unwrap();
            let a = annihilation(&cut, 0).unwrap().into_matrix();
            let ccr = &a * a.adjoint() - a.adjoint() * &a;
            for i in 0..cut.dim() {
                let mi = cut.multi_index(i);
                if mi[0] < n {
                    for j in 0..cut.dim() {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!((ccr[(i, j)] - c(expected, 0.0)).norm() < 1e-14);
                    }
                }
            }
        }
        let vac = DVector::from_iterator(3, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!((m * vac).norm(), 0.0);
    }

    #[test]
    fn displacement_examples() {
        let cut = FockCutoff::single(6).unwrap();
        let id = displacement(&[c(0.0, 0.0)], &cut).unwrap();
        assert!(max_abs(&(id.matrix() - CMatrix::identity(7, 7))) < 1e-15);
        let z = c(0.7, -0.4);
        let d = displacement(&[z], &cut).unwrap();
        let g = (-0.5 * z.norm_sqr()).exp();
        assert!((d.matrix()[(0, 0)] - c(g, 0.0)).norm() < 1e-15);
        assert!((d.matrix()[(1, 0)] - z * g).norm() < 1e-15);
        // ⟨0|D_z|1⟩ = -z̄ e^{-|z|²/2}
        assert!((d.matrix()[(0, 1)] + z.conj() * g).norm() < 1e-15);
    }

    #[test]
    fn displacement_approaches_unitary_with_cutoff() {
        let z = c(0.9, 0.3);
        let mut prev = f64::INFINITY;
        for n in [6usize, 12, 24, 40] {
            let d = displacement_matrix(z, n);
            // Columns far from the cutoff are exact columns of a unitary.
            let dd = d.adjoint() * &d;
            let err = (0..=n / 4)
                .map(|k| (dd[(k, k)] - c(1.0, 0.0)).norm())
                .fold(0.0, f64::max);
            assert!(err <= prev + 1e-15);
            prev = err;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn tensor_and_partial_trace() {
        let cut = FockCutoff::single(2).unwrap();
        let v = DensityMatrix::vacuum(&cut);
        let vv = tensor(&v, &v).unwrap();
        assert!(max_abs(&(vv.matrix() - DensityMatrix::vacuum(&FockCutoff::uniform(2, 2).unwrap()).matrix())) < 1e-15);

        let rho = superposition_0_3(3).unwrap();
        let sigma = DensityMatrix::fock_state(&cut, &[1]).unwrap();
        let prod = tensor(&rho, &sigma).unwrap();
        assert!(close(prod.trace(), 1.0, 1e-14));
        let back = partial_trace(&prod, &[0]).unwrap();
        assert!(max_abs(&(back.matrix() - rho.matrix())) < 1e-15);
        let back = partial_trace(&prod, &[1]).unwrap();
        assert!(max_abs(&(back.matrix() - sigma.matrix())) < 1e-15);
        assert!(matches!(partial_trace(&prod, &[]), Err(LabError::EmptySelection)));
    }

    #[test]
    fn singlet_reduced_state_is_maximally_mixed() {
        let cut = FockCutoff::uniform(2, 1).unwrap();
        let mut amps = BTreeMap::new();
        amps.insert(vec![1, 0], c(1.0, 0.0));
        amps.insert(vec![0, 1], c(-1.0, 0.0));
        let psi = build_pure_state(&amps, &cut).unwrap();
        let red = partial_trace(&psi, &[0]).unwrap();
        assert!(close(red.matrix()[(0, 0)].re, 0.5, 1e-15));
        assert!(close(red.matrix()[(1, 1)].re, 0.5, 1e-15));
        assert!(red.matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let ex = superposition_0_3(3).unwrap();
        let cut = ex.cutoff().clone();
        let n = expectation(&ex, &number(&cut, 0).unwrap()).unwrap();
        assert!(close(n.re, 1.5, 1e-14));
        let a = expectation(&ex, &annihilation(&cut, 0).unwrap()).unwrap();
        assert!(a.norm() < 1e-15);
        let other = FockCutoff::single(4).unwrap();
        assert!(matches!(
            expectation(&ex, &number(&other, 0).unwrap()),
            Err(LabError::CutoffMismatch(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let ex = superposition_0_3(4).unwrap().with_extra_tail(1e-12);
        let back = DensityMatrix::from_json(&ex.to_json().unwrap()).unwrap();
        assert_eq!(back.cutoff(), ex.cutoff());
        assert!(max_abs(&(back.matrix() - ex.matrix())) < 1e-15);
        assert_eq!(back.tail_mass(), ex.tail_mass());
    }

    #[test]
    fn embed_records_dropped_weight() {
        let ex = superposition_0_3(3).unwrap();
        let small = ex.embed(&FockCutoff::single(2).unwrap()).unwrap();
        assert!(close(small.tail_mass(), 0.5, 1e-14));
        assert!(close(small.trace(), 1.0, 1e-14));
        let big = ex.padded(2);
        assert_eq!(big.cutoff().per_mode(), &[5]);
        assert_eq!(big.tail_mass(), 0.0);
    }
}

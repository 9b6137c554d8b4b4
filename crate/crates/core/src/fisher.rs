//! Bivariate functional calculus, SLD score and Fisher information, KMB Fisher
//! information, and the log-Sobolev Dirichlet form.

use std::fmt;
use std::sync::Arc;

use crate::charfn::covariance;
use crate::error::{LabError, Result};
use crate::fock::{annihilation_matrix, lift_single_mode, DensityMatrix, FockCutoff};
use crate::linalg::{hs_inner, trace, CMatrix, C64};
use crate::metrics::SpectralDecomp;

/// Kernel sums at or below this are treated as the origin.
pub const KERNEL_ORIGIN: f64 = 1e-12;

/// Kernel `g(x, y)` acting as `g(L_ρ, R_ρ)`. `x` pairs with the row (left)
/// eigenvalue and `y` with the column (right) eigenvalue.
#[derive(Clone)]
pub enum KernelFn {
    Constant(f64),
    /// `(x + y)/2`
    Psi,
    /// `2/(x + y)`, masked to 0 at the origin
    Phi,
    /// `2(x − y)²/(x + y)`, 0 at the origin
    Zeta,
    /// logarithmic mean, `logmean(x, x) = x`
    LogMean,
    /// `(e^{β/4}√y − e^{−β/4}√x)²`
    LsiG { beta: f64 },
    /// `(√(2/(x+y))(y − x) + μ⁻¹√((x+y)/2))²`
    LsiH { mu: f64 },
    Custom(String, Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for KernelFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFn::Constant(v) => write!(f, "Constant({v})"),
            KernelFn::Psi => write!(f, "Psi"),
            KernelFn::Phi => write!(f, "Phi"),
            KernelFn::Zeta => write!(f, "Zeta"),
            KernelFn::LogMean => write!(f, "LogMean"),
            KernelFn::LsiG { beta } => write!(f, "LsiG {{ beta: {beta} }}"),
            KernelFn::LsiH { mu } => write!(f, "LsiH {{ mu: {mu} }}"),
            KernelFn::Custom(name, _) => write!(f, "Custom({name})"),
        }
    }
}

pub fn log_mean(x: f64, y: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    let d = x - y;
    if d.abs() <= 1e-12 * x.max(y) {
        return 0.5 * (x + y);
    }
    d / (x.ln() - y.ln())
}

pub fn lsi_g(beta: f64, x: f64, y: f64) -> f64 {
    let e = (beta / 4.0).exp();
    let v = e * y.max(0.0).sqrt() - x.max(0.0).sqrt() / e;
    v * v
}

pub fn lsi_h(mu: f64, x: f64, y: f64) -> f64 {
    let s = x + y;
    if s <= 0.0 {
        return 0.0;
    }
    let v = (2.0 / s).sqrt() * (y - x) + (s / 2.0).sqrt() / mu;
    v * v
}

impl KernelFn {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            KernelFn::Constant(v) => *v,
            KernelFn::Psi => 0.5 * (x + y),
            KernelFn::Phi => {
                if x + y <= KERNEL_ORIGIN {
                    0.0
                } else {
                    2.0 / (x + y)
                }
            }
            KernelFn::Zeta => {
                if x + y <= KERNEL_ORIGIN {
                    0.0
                } else {
                    2.0 * (x - y).powi(2) / (x + y)
                }
            }
            KernelFn::LogMean => log_mean(x, y),
            KernelFn::LsiG { beta } => lsi_g(*beta, x, y),
            KernelFn::LsiH { mu } => lsi_h(*mu, x, y),
            KernelFn::Custom(_, f) => f(x, y),
        }
    }

    /// Whether the pair is masked by the degeneracy convention.
    pub fn is_masked(&self, x: f64, y: f64) -> bool {
        matches!(self, KernelFn::Phi) && x + y <= KERNEL_ORIGIN
    }
}

/// Output of [`pi_apply`]: the operator in the Fock basis and the number of
/// masked eigenbasis entries.
#[derive(Clone, Debug)]
pub struct PiApplied {
    pub matrix: CMatrix,
    pub masked: usize,
}

/// `Π_ρ^g(X)`, entrywise `g(p_k, p_l)` in the eigenbasis of `ρ`.
pub fn pi_apply(rho: &DensityMatrix, g: &KernelFn, x: &CMatrix) -> Result<PiApplied> {
    if x.nrows() != rho.dim() || x.ncols() != rho.dim() {
        return Err(LabError::CutoffMismatch("operator and state dimensions differ".into()));
    }
    Ok(pi_apply_decomp(&SpectralDecomp::of(rho), g, x))
}

pub fn pi_apply_decomp(sd: &SpectralDecomp, g: &KernelFn, x: &CMatrix) -> PiApplied {
    let mut xt = sd.to_eigenbasis(x);
    let masked = kernel_multiply(&sd.eigenvalues, g, &mut xt);
    PiApplied {
        matrix: sd.from_eigenbasis(&xt),
        masked,
    }
}

fn kernel_multiply(p: &[f64], g: &KernelFn, xt: &mut CMatrix) -> usize {
    let mut masked = 0;
    for k in 0..p.len() {
        for l in 0..p.len() {
            if g.is_masked(p[k], p[l]) {
                masked += 1;
            }
            xt[(k, l)] *= g.eval(p[k], p[l]);
        }
    }
    masked
}

/// `½ tr(ρ X† Y) + ½ tr(X† ρ Y)`.
pub fn sld_inner(rho: &DensityMatrix, x: &CMatrix, y: &CMatrix) -> Result<C64> {
    if x.shape() != rho.matrix().shape() || y.shape() != rho.matrix().shape() {
        return Err(LabError::CutoffMismatch("operator and state dimensions differ".into()));
    }
    Ok(sld_inner_matrix(rho.matrix(), x, y))
}

pub fn sld_inner_matrix(rho: &CMatrix, x: &CMatrix, y: &CMatrix) -> C64 {
    let xd = x.adjoint();
    (trace(&(rho * &xd * y)) + trace(&(&xd * rho * y))) * 0.5
}

pub fn sld_norm_sq(rho: &CMatrix, x: &CMatrix) -> f64 {
    sld_inner_matrix(rho, x, x).re
}

/// How ladder operators meet the top of the truncated space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LadderBoundary {
    /// The state is padded by one level so `a` and `a†` act exactly on its support.
    #[default]
    Padded,
    /// Ladder operators are cut at the state's own cutoff.
    Truncated,
}

/// Eigendecomposition of `ρ` together with each `a_j` in that eigenbasis.
#[derive(Clone, Debug)]
pub struct LadderFrame {
    pub cutoff: FockCutoff,
    pub decomp: SpectralDecomp,
    pub ladders: Vec<CMatrix>,
    pub state: CMatrix,
}

impl LadderFrame {
    pub fn new(rho: &DensityMatrix, boundary: LadderBoundary) -> Self {
        let st = match boundary {
            LadderBoundary::Padded => rho.padded(1),
            LadderBoundary::Truncated => rho.clone(),
        };
        let cut = st.cutoff().clone();
        let decomp = SpectralDecomp::of(&st);
        let ladders = (0..cut.modes())
            .map(|j| {
                let a = lift_single_mode(&cut, j, &annihilation_matrix(cut.max_photons(j)));
                decomp.to_eigenbasis(&a)
            })
            .collect();
        Self {
            cutoff: cut,
            decomp,
            ladders,
            state: st.into_matrix(),
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.decomp.eigenvalues
    }

    /// `Σ_{kl} g(p_k, p_l) |ã_kl|²` for mode `j`.
    pub fn quadratic(&self, j: usize, g: &KernelFn) -> f64 {
        let p = self.eigenvalues();
        let a = &self.ladders[j];
        let mut s = 0.0;
        for k in 0..p.len() {
            for l in 0..p.len() {
                let v = a[(k, l)].norm_sqr();
                if v != 0.0 {
                    s += g.eval(p[k], p[l]) * v;
                }
            }
        }
        s
    }

    /// `tr(ρ a_j† a_j) + ½`.
    pub fn mu(&self, j: usize) -> f64 {
        let p = self.eigenvalues();
        let a = &self.ladders[j];
        let mut s = 0.0;
        for k in 0..p.len() {
            for l in 0..p.len() {
                s += p[l] * a[(k, l)].norm_sqr();
            }
        }
        s + 0.5
    }
}

/// Rejects multimode states whose covariance couples different modes.
pub fn require_williamson_frame(rho: &DensityMatrix) -> Result<()> {
    if rho.modes() < 2 {
        return Ok(());
    }
    let cv = covariance(rho)?;
    let n = cv.gamma.len();
    for i in 0..n {
        for j in 0..n {
            if i / 2 != j / 2 && cv.gamma[i][j].abs() > 1e-6 {
                return Err(LabError::UnsupportedFrame(format!(
                    "covariance couples modes {} and {} ({:.3e})",
                    i / 2,
                    j / 2,
                    cv.gamma[i][j]
                )));
            }
        }
    }
    Ok(())
}

/// SLD score `S_{ρ,j} = Π_ρ^φ([a_j, ρ])` on the padded cutoff.
#[derive(Clone, Debug)]
pub struct ScoreOperator {
    pub cutoff: FockCutoff,
    pub mode: usize,
    pub matrix: CMatrix,
    pub masked: usize,
}

pub fn sld_score(rho: &DensityMatrix, mode: usize) -> Result<ScoreOperator> {
    rho.cutoff().check_mode(mode)?;
    require_williamson_frame(rho)?;
    let frame = LadderFrame::new(rho, LadderBoundary::Padded);
    Ok(score_from_frame(&frame, mode))
}

pub(crate) fn score_from_frame(frame: &LadderFrame, mode: usize) -> ScoreOperator {
    let p = frame.eigenvalues();
    let a = &frame.ladders[mode];
    let d = p.len();
    // [a, ρ]~_kl = ã_kl (p_l − p_k)
    let mut s = CMatrix::zeros(d, d);
    let mut masked = 0;
    for k in 0..d {
        for l in 0..d {
            if KernelFn::Phi.is_masked(p[k], p[l]) {
                masked += 1;
                continue;
            }
            s[(k, l)] = a[(k, l)] * (p[l] - p[k]) * KernelFn::Phi.eval(p[k], p[l]);
        }
    }
    ScoreOperator {
        cutoff: frame.cutoff.clone(),
        mode,
        matrix: frame.decomp.from_eigenbasis(&s),
        masked,
    }
}

#[derive(Clone, Debug)]
pub struct FisherInfo {
    pub total: f64,
    pub per_mode: Vec<f64>,
}

/// `I_j(ρ) = Σ ζ(p_k, p_l)|ã_kl|²` with the padded ladder.
pub fn sld_fisher(rho: &DensityMatrix) -> Result<FisherInfo> {
    require_williamson_frame(rho)?;
    Ok(sld_fisher_with(rho, LadderBoundary::Padded))
}

pub fn sld_fisher_with(rho: &DensityMatrix, boundary: LadderBoundary) -> FisherInfo {
    let frame = LadderFrame::new(rho, boundary);
    let per_mode: Vec<f64> = (0..rho.modes()).map(|j| frame.quadratic(j, &KernelFn::Zeta)).collect();
    FisherInfo {
        total: per_mode.iter().sum(),
        per_mode,
    }
}

#[derive(Clone, Debug)]
pub struct FisherDistance {
    pub total: f64,
    pub per_mode: Vec<f64>,
    pub fisher: Vec<f64>,
    pub mu: Vec<f64>,
    /// `‖S_j + a_j/μ_j‖²_ρ`, computed when `ρ` is faithful on its cutoff.
    pub norm_form: Option<Vec<f64>>,
}

/// `J_j = I_j − 1/μ_j`, cross-checked against `‖S_j + a_j/μ_j‖²_ρ` on faithful
/// states.
pub fn fisher_distance(rho: &DensityMatrix) -> Result<FisherDistance> {
    require_williamson_frame(rho)?;
    let frame = LadderFrame::new(rho, LadderBoundary::Padded);
    let m = rho.modes();
    let fisher: Vec<f64> = (0..m).map(|j| frame.quadratic(j, &KernelFn::Zeta)).collect();
    let mu: Vec<f64> = (0..m).map(|j| frame.mu(j)).collect();
    let per_mode: Vec<f64> = fisher.iter().zip(&mu).map(|(i, u)| i - 1.0 / u).collect();
    let faithful = rho.min_eigenvalue() > crate::metrics::CLAMP_THRESHOLD;
    let norm_form = if faithful {
        let p = frame.eigenvalues();
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let s = score_from_frame(&frame, j);
            let st = frame.decomp.to_eigenbasis(&s.matrix);
            let a = &frame.ladders[j];
            let mut v = 0.0;
            for k in 0..p.len() {
                for l in 0..p.len() {
                    let e = st[(k, l)] + a[(k, l)] / mu[j];
                    v += 0.5 * (p[k] + p[l]) * e.norm_sqr();
                }
            }
            if (v - per_mode[j]).abs() > 1e-6 * (1.0 + per_mode[j].abs()) {
                return Err(LabError::DegenerateInput(format!(
                    "Fisher distance forms disagree on mode {j}: {v} vs {}",
                    per_mode[j]
                )));
            }
            out.push(v);
        }
        Some(out)
    } else {
        None
    };
    Ok(FisherDistance {
        total: per_mode.iter().sum(),
        per_mode,
        fisher,
        mu,
        norm_form,
    })
}

/// KMB Fisher information `Σ_j Σ |[a_j,ρ]~_kl|²/logmean(p_k,p_l)` with the
/// truncated ladder; `+∞` when `ρ` has a kernel.
pub fn kmb_fisher(rho: &DensityMatrix) -> f64 {
    let frame = LadderFrame::new(rho, LadderBoundary::Truncated);
    let p = frame.eigenvalues();
    if p.iter().any(|&x| x <= crate::metrics::CLAMP_THRESHOLD) {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for a in &frame.ladders {
        for k in 0..p.len() {
            for l in 0..p.len() {
                let v = a[(k, l)].norm_sqr();
                if v == 0.0 || k == l {
                    continue;
                }
                // (p_l − p_k)²/L(p_k,p_l) = (p_l − p_k)(log p_l − log p_k)
                let d = p[l] - p[k];
                let lm = log_mean(p[k], p[l]);
                total += v * d * d / lm;
            }
        }
    }
    total
}

fn check_betas(betas: &[f64], modes: usize) -> Result<()> {
    if betas.len() != modes {
        return Err(LabError::CutoffMismatch(format!("{} inverse temperatures for {modes} modes", betas.len())));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(LabError::InvalidParameter(format!(
            "inverse temperature {b} must be finite and positive"
        )));
    }
    Ok(())
}

/// `Σ_j tr|e^{β_j/4} a_j √ρ − e^{−β_j/4} √ρ a_j|²`, per mode.
pub fn lsi_dirichlet_per_mode(rho: &DensityMatrix, betas: &[f64]) -> Result<Vec<f64>> {
    check_betas(betas, rho.modes())?;
    let frame = LadderFrame::new(rho, LadderBoundary::Padded);
    Ok(betas
        .iter()
        .enumerate()
        .map(|(j, &b)| frame.quadratic(j, &KernelFn::LsiG { beta: b }))
        .collect())
}

pub fn lsi_dirichlet(rho: &DensityMatrix, betas: &[f64]) -> Result<f64> {
    Ok(lsi_dirichlet_per_mode(rho, betas)?.iter().sum())
}

/// LSI constant `α` with `α⁻¹ = (2 + log(2m+1))/sinh(β/2) + β/(4 sinh²(β/4))` at
/// `β = min_j β_j`.
pub fn lsi_alpha(betas: &[f64], modes: usize) -> Result<f64> {
    if betas.is_empty() {
        return Err(LabError::InvalidParameter("no inverse temperatures given".into()));
    }
    let b = betas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(b > 0.0) {
        return Err(LabError::InvalidParameter(format!("minimum inverse temperature {b} must be positive")));
    }
    if b.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let inv = (2.0 + (2.0 * modes as f64 + 1.0).ln()) / (b / 2.0).sinh() + b / (4.0 * (b / 4.0).sinh().powi(2));
    Ok(1.0 / inv)
}

/// `C = 8 e^{−3β/2}/(1 + e^{−β})²`.
pub fn lsi_fisher_constant(beta: f64) -> f64 {
    8.0 * (-1.5 * beta).exp() / (1.0 + (-beta).exp()).powi(2)
}

/// `μ = (1 + e^{−β})/(2(1 − e^{−β}))`.
pub fn thermal_mu(beta: f64) -> f64 {
    (1.0 + (-beta).exp()) / (2.0 * (1.0 - (-beta).exp()))
}

#[derive(Clone, Copy, Debug)]
pub struct GhCheck {
    pub max_violation: f64,
    pub argmax: (f64, f64),
    pub points: usize,
}

/// `max (C g − h)` over a uniform `points × points` grid on `[0, x_max]²`.
pub fn scalar_gh_check(beta: f64, points: usize, x_max: f64) -> Result<GhCheck> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LabError::InvalidParameter(format!("beta {beta} must be positive")));
    }
    if points < 2 || !(x_max > 0.0) {
        return Err(LabError::InvalidParameter("grid needs two points and positive extent".into()));
    }
    let cst = lsi_fisher_constant(beta);
    let mu = thermal_mu(beta);
    let step = x_max / (points - 1) as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut arg = (0.0, 0.0);
    for i in 0..points {
        let x = step * i as f64;
        for k in 0..points {
            let y = step * k as f64;
            let v = cst * lsi_g(beta, x, y) - lsi_h(mu, x, y);
            if v > worst {
                worst = v;
                arg = (x, y);
            }
        }
    }
    Ok(GhCheck {
        max_violation: worst,
        argmax: arg,
        points: points * points,
    })
}

/// `tr₁` of an operator on `d1 · d2` with subsystem 1 the slow index.
pub fn partial_trace_first(m: &CMatrix, d1: usize, d2: usize) -> CMatrix {
    CMatrix::from_fn(d2, d2, |c2, d| (0..d1).map(|a| m[(a * d2 + c2, a * d2 + d)]).sum())
}

/// `(‖tr₁(Π^ψ_{ρ₁}(A†) B)‖_{2,ρ₂}, ‖A‖_{2,ρ₁} ‖B‖_{2,ρ₁⊗ρ₂})`.
pub fn cauchy_schwarz_check(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    a: &CMatrix,
    b: &CMatrix,
) -> Result<(f64, f64)> {
    let d1 = rho1.dim();
    let d2 = rho2.dim();
    if a.shape() != (d1, d1) || b.shape() != (d1 * d2, d1 * d2) {
        return Err(LabError::CutoffMismatch("operator shapes do not match the two subsystems".into()));
    }
    let pa = pi_apply(rho1, &KernelFn::Psi, &a.adjoint())?.matrix;
    let lifted = pa.kronecker(&CMatrix::identity(d2, d2));
    let t = partial_trace_first(&(lifted * b), d1, d2);
    let lhs = sld_norm_sq(rho2.matrix(), &t).max(0.0).sqrt();
    let joint = rho1.matrix().kronecker(rho2.matrix());
    let rhs = sld_norm_sq(rho1.matrix(), a).max(0.0).sqrt() * sld_norm_sq(&joint, b).max(0.0).sqrt();
    Ok((lhs, rhs))
}

/// `tr(X† Π^g(Y))`.
pub fn kernel_form(rho: &DensityMatrix, g: &KernelFn, x: &CMatrix, y: &CMatrix) -> Result<C64> {
    Ok(hs_inner(x, &pi_apply(rho, g, y)?.matrix))
}

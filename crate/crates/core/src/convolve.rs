//! Beam-splitter unitaries on photon-number blocks and quantum convolution.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fock::{annihilation_matrix, lift_single_mode, DensityMatrix, FockCutoff};
use crate::linalg::{c, commutator, real_symmetric_eigen, trace, trace_norm, CMatrix, RMatrix, C64};

/// Which generator the beam splitter exponentiates. Only `Standard` is physical;
/// `SymmetricFault` swaps the antisymmetric generator for `a†b + ab†` and exists
/// for mutation tests of the invariant suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorVariant {
    #[default]
    Standard,
    SymmetricFault,
}

/// Generator `a†b − ab†` on the block with `n_total` photons, basis
/// `|n, n_total − n⟩` for `n = 0..=n_total`.
pub fn block_generator(n_total: usize) -> RMatrix {
    let nt = n_total as f64;
    let mut g = RMatrix::zeros(n_total + 1, n_total + 1);
    for n in 0..n_total {
        let v = ((n + 1) as f64).sqrt() * (nt - n as f64).sqrt();
        g[(n + 1, n)] = v;
        g[(n, n + 1)] = -v;
    }
    g
}

fn block_unitary(eta: f64, n_total: usize, variant: GeneratorVariant) -> RMatrix {
    let theta = eta.sqrt().clamp(0.0, 1.0).acos();
    let dim = n_total + 1;
    if n_total == 0 || theta == 0.0 {
        return RMatrix::identity(dim, dim);
    }
    let g = block_generator(n_total);
    // T_{n,n+1} = G_{n,n+1}: D⁻¹ G D = iT with D = diag(iⁿ)
    let t = RMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { g[(i, j)] } else if i == j + 1 { g[(j, i)] } else { 0.0 });
    match variant {
        GeneratorVariant::Standard => {
            let (lam, v) = real_symmetric_eigen(&t);
            let vc = v.map(|x| c(x, 0.0));
            let mut middle = vc.clone();
            for (k, l) in lam.iter().enumerate() {
                let ph = C64::from_polar(1.0, theta * l);
                for i in 0..dim {
                    middle[(i, k)] *= ph;
                }
            }
            let inner = middle * vc.transpose();
            let ipow = |n: usize| match n % 4 {
                0 => c(1.0, 0.0),
                1 => c(0.0, 1.0),
                2 => c(-1.0, 0.0),
                _ => c(0.0, -1.0),
            };
            RMatrix::from_fn(dim, dim, |i, j| (ipow(i) * inner[(i, j)] * ipow(j).conj()).re)
        }
        GeneratorVariant::SymmetricFault => {
            let sym = RMatrix::from_fn(dim, dim, |i, j| g[(i, j)].abs());
            let (lam, v) = real_symmetric_eigen(&sym);
            let mut middle = v.clone();
            for (k, l) in lam.iter().enumerate() {
                let e = (theta * l).exp();
                for i in 0..dim {
                    middle[(i, k)] *= e;
                }
            }
            middle * v.transpose()
        }
    }
}

/// Per-block beam-splitter unitaries for `N = 0..=n_max`.
#[derive(Clone, Debug)]
pub struct BeamSplitterBlocks {
    pub eta: f64,
    pub blocks: Vec<Arc<RMatrix>>,
}

impl BeamSplitterBlocks {
    /// Full two-mode unitary on `|0..n1⟩ ⊗ |0..n2⟩` for blocks that fit entirely.
    pub fn dense(&self, n1: usize, n2: usize) -> CMatrix {
        let d2 = n2 + 1;
        let dim = (n1 + 1) * d2;
        let mut u = CMatrix::zeros(dim, dim);
        for a in 0..=n1 {
            for b in 0..=n2 {
                let nt = a + b;
                let blk = &self.blocks[nt];
                for i in 0..=nt {
                    let j = nt - i;
                    if i <= n1 && j <= n2 {
                        u[(i * d2 + j, a * d2 + b)] = c(blk[(i, a)], 0.0);
                    }
                }
            }
        }
        u
    }
}

pub fn beam_splitter(eta: f64, n_total: usize) -> Result<BeamSplitterBlocks> {
    check_eta(eta)?;
    Ok(BeamSplitterBlocks {
        eta,
        blocks: (0..=n_total)
            .map(|n| Arc::new(block_unitary(eta, n, GeneratorVariant::Standard)))
            .collect(),
    })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(LabError::InvalidParameter(format!("transmissivity {eta} outside [0,1]")));
    }
    Ok(())
}

/// Joint cutoff and tail budget for iterated convolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct CutoffPolicy {
    pub n_max: usize,
    pub tail_budget: f64,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            n_max: 64,
            tail_budget: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionStep {
    pub eta: f64,
    pub cutoff: Vec<usize>,
    pub discarded: f64,
}

#[derive(Clone, Debug)]
pub struct ConvolutionReport {
    pub output: DensityMatrix,
    pub discarded_mass: f64,
    pub steps: Vec<ConvolutionStep>,
}

impl ConvolutionReport {
    pub fn to_json(&self) -> Result<String> {
        let out: serde_json::Value = serde_json::from_str(&self.output.to_json()?)?;
        let v = serde_json::json!({
            "output": out,
            "discarded_mass": self.discarded_mass,
            "steps": self.steps,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

type BlockKey = (u64, usize, GeneratorVariant);

/// Beam-splitter block cache shared across convolutions. Concurrent reads are
/// safe; inserting the same key twice stores identical blocks.
#[derive(Debug, Default)]
pub struct Convolver {
    variant: GeneratorVariant,
    cache: RwLock<HashMap<BlockKey, Arc<RMatrix>>>,
}

impl Convolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_variant(variant: GeneratorVariant) -> Self {
        Self {
            variant,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn variant(&self) -> GeneratorVariant {
        self.variant
    }

    pub fn block(&self, eta: f64, n_total: usize) -> Arc<RMatrix> {
        let key = (eta.to_bits(), n_total, self.variant);
        if let Some(b) = self.cache.read().expect("cache lock").get(&key) {
            return Arc::clone(b);
        }
        let b = Arc::new(block_unitary(eta, n_total, self.variant));
        self.cache
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert(b)
            .clone()
    }

    pub fn blocks(&self, eta: f64, n_total: usize) -> BeamSplitterBlocks {
        BeamSplitterBlocks {
            eta,
            blocks: (0..=n_total).map(|n| self.block(eta, n)).collect(),
        }
    }

    /// `tr₂(U_η (X ⊗ Y) U_η†)` for arbitrary operators, output capped per mode at
    /// `cap` photons. Returns the matrix and its cutoff.
    pub fn convolve_operators(
        &self,
        x: &CMatrix,
        xcut: &FockCutoff,
        y: &CMatrix,
        ycut: &FockCutoff,
        eta: f64,
        cap: Option<usize>,
    ) -> Result<(CMatrix, FockCutoff)> {
        check_eta(eta)?;
        let m = xcut.modes();
        if ycut.modes() != m {
            return Err(LabError::CutoffMismatch(format!(
                "convolving {m}-mode and {}-mode operators",
                ycut.modes()
            )));
        }
        let out_modes: Vec<usize> = (0..m)
            .map(|j| {
                let full = xcut.max_photons(j) + ycut.max_photons(j);
                cap.map_or(full, |c| full.min(c))
            })
            .collect();
        let ocut = FockCutoff::new(out_modes.clone())?;
        let max_total = (0..m)
            .map(|j| xcut.max_photons(j) + ycut.max_photons(j))
            .max()
            .unwrap_or(0);
        let blocks = self.blocks(eta, max_total);
        let xidx = xcut.multi_indices();
        let yidx = ycut.multi_indices();
        let mut out = CMatrix::zeros(ocut.dim(), ocut.dim());
        let zero = c(0.0, 0.0);

        // per-mode factor lists (i, i', value)
        let mut factors: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m];
        let mut combo_i = vec![0usize; m];
        let mut combo_ip = vec![0usize; m];
        for (ia, ma) in xidx.iter().enumerate() {
            for (ib, mb) in xidx.iter().enumerate() {
                let xv = x[(ia, ib)];
                if xv == zero {
                    continue;
                }
                for (ic, mc) in yidx.iter().enumerate() {
                    for (id, md) in yidx.iter().enumerate() {
                        let yv = y[(ic, id)];
                        if yv == zero {
                            continue;
                        }
                        let w = xv * yv;
                        let mut empty = false;
                        for j in 0..m {
                            let f = &mut factors[j];
                            f.clear();
                            let (a, b, cc, d) = (ma[j], mb[j], mc[j], md[j]);
                            let nl = a + cc;
                            let nr = b + d;
                            let ul = &blocks.blocks[nl];
                            let ur = &blocks.blocks[nr];
                            let cap_j = out_modes[j];
                            for i in 0..=nl.min(cap_j) {
                                // traced mode holds nl − i photons on both sides
                                let rest = nl - i;
                                if rest > nr {
                                    continue;
                                }
                                let ip = nr - rest;
                                if ip > cap_j {
                                    continue;
                                }
                                let v = ul[(i, a)] * ur[(ip, b)];
                                if v != 0.0 {
                                    f.push((i, ip, v));
                                }
                            }
                            if f.is_empty() {
                                empty = true;
                                break;
                            }
                        }
                        if empty {
                            continue;
                        }
                        accumulate(&factors, 0, 1.0, &mut combo_i, &mut combo_ip, &ocut, w, &mut out);
                    }
                }
            }
        }
        Ok((out, ocut))
    }

    /// `ρ ⊞_η σ` with the output cut at `cap` photons per mode. Dropped weight is
    /// reported in the step and the output renormalized.
    pub fn convolve_capped(
        &self,
        rho: &DensityMatrix,
        sigma: &DensityMatrix,
        eta: f64,
        cap: Option<usize>,
    ) -> Result<(DensityMatrix, ConvolutionStep)> {
        let (m, cut) = self.convolve_operators(rho.matrix(), rho.cutoff(), sigma.matrix(), sigma.cutoff(), eta, cap)?;
        let total = rho.trace() * sigma.trace();
        let kept = trace(&m).re;
        let discarded = (total - kept).max(0.0);
        let state = DensityMatrix::from_cp_output(
            cut.clone(),
            m,
            rho.tail_mass() + sigma.tail_mass() + discarded,
        );
        Ok((
            state,
            ConvolutionStep {
                eta,
                cutoff: cut.per_mode().to_vec(),
                discarded,
            },
        ))
    }

    pub fn convolve(&self, rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64) -> Result<ConvolutionReport> {
        let (output, step) = self.convolve_capped(rho, sigma, eta, None)?;
        Ok(ConvolutionReport {
            output,
            discarded_mass: step.discarded,
            steps: vec![step],
        })
    }

    /// `σ_k = σ_{k−1} ⊞_{1−1/k} ρ` for `k = 2..=n`.
    pub fn self_convolve(&self, rho: &DensityMatrix, n: usize, policy: &CutoffPolicy) -> Result<ConvolutionReport> {
        if n == 0 {
            return Err(LabError::InvalidParameter("self-convolution needs n >= 1".into()));
        }
        let mut acc = rho.clone();
        let mut steps = Vec::with_capacity(n.saturating_sub(1));
        let mut discarded = 0.0;
        for k in 2..=n {
            let eta = 1.0 - 1.0 / k as f64;
            let (next, step) = self.convolve_capped(&acc, rho, eta, Some(policy.n_max))?;
            discarded += step.discarded;
            steps.push(step);
            if discarded > policy.tail_budget {
                return Err(LabError::TailBudgetExceeded {
                    step: k,
                    discarded,
                    budget: policy.tail_budget,
                });
            }
            acc = next;
        }
        Ok(ConvolutionReport {
            output: acc,
            discarded_mass: discarded,
            steps,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    factors: &[Vec<(usize, usize, f64)>],
    j: usize,
    val: f64,
    ci: &mut [usize],
    cip: &mut [usize],
    ocut: &FockCutoff,
    w: C64,
    out: &mut CMatrix,
) {
    if j == factors.len() {
        let r = ocut.index_of(ci);
        let col = ocut.index_of(cip);
        out[(r, col)] += w * val;
        return;
    }
    for &(i, ip, v) in &factors[j] {
        ci[j] = i;
        cip[j] = ip;
        accumulate(factors, j + 1, val * v, ci, cip, ocut, w, out);
    }
}

pub fn convolve(rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64) -> Result<ConvolutionReport> {
    Convolver::new().convolve(rho, sigma, eta)
}

pub fn self_convolve(rho: &DensityMatrix, n: usize, policy: &CutoffPolicy) -> Result<ConvolutionReport> {
    Convolver::new().self_convolve(rho, n, policy)
}

/// `max_j ‖√η [a_j, ρ ⊞_η σ] − [a_j, ρ] ⊞_η σ‖₁`. Both sides are formed on
/// cutoffs padded by one level so the ladder action is exact.
pub fn commutator_compat_check(rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64) -> Result<f64> {
    commutator_compat_with(&Convolver::new(), rho, sigma, eta)
}

pub fn commutator_compat_with(conv: &Convolver, rho: &DensityMatrix, sigma: &DensityMatrix, eta: f64) -> Result<f64> {
    let out = conv.convolve(rho, sigma, eta)?.output.padded(1);
    let rp = rho.padded(1);
    let mut worst = 0.0f64;
    for j in 0..rho.modes() {
        let a_out = lift_single_mode(out.cutoff(), j, &annihilation_matrix(out.cutoff().max_photons(j)));
        let lhs = commutator(&a_out, out.matrix()) * c(eta.sqrt(), 0.0);
        let a_in = lift_single_mode(rp.cutoff(), j, &annihilation_matrix(rp.cutoff().max_photons(j)));
        let comm = commutator(&a_in, rp.matrix());
        let (rhs, rcut) = conv.convolve_operators(&comm, rp.cutoff(), sigma.matrix(), sigma.cutoff(), eta, None)?;
        if &rcut != out.cutoff() {
            return Err(LabError::CutoffMismatch("commutator sides landed on different cutoffs".into()));
        }
        worst = worst.max(trace_norm(&(lhs - rhs)));
    }
    Ok(worst)
}

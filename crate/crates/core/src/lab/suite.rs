use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::charfn::{char_fn, covariance};
use crate::convolve::{commutator_compat_with, Convolver, CutoffPolicy, GeneratorVariant};
use crate::error::Result;
use crate::fisher::{fisher_distance, kernel_form, KernelFn};
use crate::fock::{annihilation_matrix, embed_matrix, partial_trace, phase_rotation, tensor, DensityMatrix, FockCutoff};
use crate::gaussian::{symplectic_eigenvalues_direct, thermal_cutoff_for, thermal_state, williamson, SymplecticForm};
use crate::linalg::{c, max_abs, trace, CMatrix, RMatrix, C64};
use crate::metrics::{hs_distance, relative_entropy, trace_distance};
use crate::poincare::estimate_gap;
use crate::random::{self, LabRng};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub variant: GeneratorVariant,
    pub passed: bool,
    pub results: Vec<InvariantResult>,
}

impl SuiteReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Single-mode cutoffs of the random test states.
    pub sizes: Vec<usize>,
    /// Random draws per size.
    pub samples: usize,
    pub variant: GeneratorVariant,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            sizes: vec![2, 3],
            samples: 3,
            variant: GeneratorVariant::Standard,
        }
    }
}

struct Tally {
    name: &'static str,
    tol: f64,
    worst: f64,
    samples: usize,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Self {
        Self { name, tol, worst: 0.0, samples: 0 }
    }

    fn record(&mut self, v: f64) {
        self.samples += 1;
        // NaN counts as a failure
        if !(v <= self.worst) {
            self.worst = if v.is_nan() { f64::INFINITY } else { v };
        }
    }

    fn finish(self) -> InvariantResult {
        InvariantResult {
            name: self.name.to_string(),
            passed: self.worst <= self.tol,
            max_violation: self.worst,
            tolerance: self.tol,
            samples: self.samples,
        }
    }
}

fn state_validity(rho: &DensityMatrix) -> f64 {
    (-rho.min_eigenvalue()).max((rho.trace() - 1.0).abs())
}

fn random_z(rng: &mut LabRng) -> C64 {
    c(random::uniform(rng, -1.5, 1.5), random::uniform(rng, -1.5, 1.5))
}

fn random_symplectic(rng: &mut LabRng, modes: usize) -> RMatrix {
    let n = 2 * modes;
    let g = RMatrix::from_fn(n, n, |_, _| random::uniform(rng, -0.3, 0.3));
    let h = (&g + g.transpose()) * 0.5;
    (SymplecticForm::new(modes).matrix() * h).exp()
}

fn rmax(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Default suite at the given seed and cutoff sizes.
pub fn run_invariant_suite(seed: u64, sizes: &[usize]) -> Result<SuiteReport> {
    run_invariant_suite_with(&SuiteOptions {
        seed,
        sizes: sizes.to_vec(),
        ..SuiteOptions::default()
    })
}

/// Every structural invariant on seeded random states. The report holds no
/// timings, so it is byte-identical for a fixed seed.
pub fn run_invariant_suite_with(opts: &SuiteOptions) -> Result<SuiteReport> {
    let conv = Convolver::with_variant(opts.variant);
    let mut rng = random::rng(opts.seed);

    let mut ccr = Tally::new("ccr_identity_block", 1e-13);
    let mut validity = Tally::new("state_validity", 1e-10);
    let mut ptrace = Tally::new("partial_trace_of_tensor", 1e-12);
    let mut chi_bound = Tally::new("chi_bounded_by_one", 1e-12);
    let mut chi_sym = Tally::new("chi_conjugate_symmetry", 1e-12);
    let mut flow = Tally::new("moment_flow", 1e-8);
    let mut photons = Tally::new("photon_number_conservation", 1e-10);
    let mut swap = Tally::new("balanced_convolution_symmetry", 1e-10);
    let mut passive = Tally::new("passive_unitary_commutation", 1e-10);
    let mut compat = Tally::new("commutator_compatibility", 1e-8);
    let mut pinsker = Tally::new("pinsker", 1e-10);
    let mut triangle = Tally::new("trace_distance_triangle", 1e-9);
    let mut relent_pos = Tally::new("relative_entropy_nonnegative", 1e-10);
    let mut norm_order = Tally::new("hs_below_trace_distance", 1e-12);
    let mut sandwich = Tally::new("fisher_sandwich", 1e-9);
    let mut mono = Tally::new("kernel_monotonicity", 1e-10);
    let mut adjoint = Tally::new("kernel_self_adjointness", 1e-10);
    let mut jforms = Tally::new("fisher_distance_forms_agree", 1e-6);
    let mut saturate = Tally::new("centered_pure_state_saturates", 1e-9);
    let mut gap_pos = Tally::new("gap_nonnegative", 1e-10);
    let mut rayleigh = Tally::new("gap_rayleigh_consistency", 1e-8);
    let mut symp = Tally::new("williamson_round_trip", 1e-8);
    let mut oracle = Tally::new("symplectic_eigenvalue_oracle", 1e-8);
    let mut thermal_cov = Tally::new("thermal_covariance", 1e-8);
    let mut fixed = Tally::new("gaussian_fixed_point", 10.0 * CutoffPolicy::default().tail_budget);

    for &n in &opts.sizes {
        let cut = FockCutoff::single(n)?;

        let a = annihilation_matrix(n);
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        let block = comm.view((0, 0), (n, n)).into_owned();
        ccr.record(max_abs(&(block - CMatrix::identity(n, n))));

        for _ in 0..opts.samples {
            let rho = random::wishart_state(&mut rng, &cut)?;
            let sigma = random::wishart_state(&mut rng, &cut)?;
            let third = random::wishart_state(&mut rng, &cut)?;
            let pure = random::pure_state(&mut rng, &cut)?;
            let eta = random::uniform(&mut rng, 0.1, 0.9);
            for s in [&rho, &sigma, &pure] {
                validity.record(state_validity(s));
            }

            let joint = tensor(&rho, &sigma)?;
            let back0 = partial_trace(&joint, &[0])?;
            let back1 = partial_trace(&joint, &[1])?;
            ptrace.record(max_abs(&(back0.matrix() - rho.matrix())).max(max_abs(&(back1.matrix() - sigma.matrix()))));

            for _ in 0..4 {
                let z = random_z(&mut rng);
                for s in [&rho, &pure] {
                    let v = char_fn(s, &[z])?;
                    chi_bound.record((v.norm() - 1.0).max(0.0));
                    let w = char_fn(s, &[-z])?;
                    chi_sym.record((w - v.conj()).norm());
                }
            }

            // convolution
            let out = conv.convolve(&rho, &sigma, eta)?.output;
            validity.record(state_validity(&out));
            let (cr, cs, co) = (covariance(&rho)?, covariance(&sigma)?, covariance(&out)?);
            let mut dev = rmax(&(co.gamma_matrix() - (cr.gamma_matrix() * eta + cs.gamma_matrix() * (1.0 - eta))));
            for k in 0..co.d.len() {
                dev = dev.max((co.d[k] - (eta.sqrt() * cr.d[k] + (1.0 - eta).sqrt() * cs.d[k])).abs());
            }
            flow.record(dev);

            let big = 2 * n;
            let pair_cut = FockCutoff::new(vec![big, big])?;
            let x = embed_matrix(joint.matrix(), joint.cutoff(), &pair_cut);
            let u = conv.blocks(eta, 2 * big).dense(big, big);
            let ntot = CMatrix::from_diagonal(&DVector::from_iterator(
                pair_cut.dim(),
                pair_cut.multi_indices().into_iter().map(|mi| c((mi[0] + mi[1]) as f64, 0.0)),
            ));
            let after = trace(&(&ntot * &u * &x * u.adjoint())).re;
            let before = trace(&(&ntot * &x)).re;
            photons.record((after - before).abs());

            let ab = conv.convolve(&rho, &sigma, 0.5)?.output;
            let ba = conv.convolve(&sigma, &rho, 0.5)?.output;
            swap.record(trace_distance(&ab, &ba)?);

            let theta = random::uniform(&mut rng, 0.0, std::f64::consts::TAU);
            let rot_in = phase_rotation(&cut, &[theta])?;
            let rot_out = phase_rotation(out.cutoff(), &[theta])?;
            let lhs_state = out.conjugate_by(&rot_out);
            let rhs_state = conv.convolve(&rho.conjugate_by(&rot_in), &sigma.conjugate_by(&rot_in), eta)?.output;
            for _ in 0..3 {
                let z = random_z(&mut rng);
                passive.record((char_fn(&lhs_state, &[z])? - char_fn(&rhs_state, &[z])?).norm());
            }

            compat.record(commutator_compat_with(&conv, &rho, &sigma, eta)?);

            // metrics
            let t = trace_distance(&rho, &sigma)?;
            let d = relative_entropy(&rho, &sigma)?;
            if d.is_finite() {
                pinsker.record((0.5 * t * t - d).max(0.0));
            }
            relent_pos.record((-d).max(0.0).max(relative_entropy(&rho, &rho)?.abs()));
            triangle.record((trace_distance(&rho, &third)? - t - trace_distance(&sigma, &third)?).max(0.0));
            norm_order.record((hs_distance(&rho, &sigma)? - t).max(0.0));

            // Fisher
            for s in [&rho, &pure] {
                let fd = fisher_distance(s)?;
                let (i, mu) = (fd.fisher[0], fd.mu[0]);
                sandwich.record((1.0 / mu - i).max(i - 4.0 * mu * (1.0 + 1e-8)).max(0.0));
                if let Some(nf) = &fd.norm_form {
                    jforms.record((nf[0] - fd.per_mode[0]).abs());
                }
            }
            let xop = random::operator(&mut rng, cut.dim());
            let yop = random::operator(&mut rng, cut.dim());
            let upper = KernelFn::Custom("2(x+y)".into(), Arc::new(|x, y| 2.0 * (x + y)));
            let lo = kernel_form(&rho, &KernelFn::Zeta, &xop, &xop)?.re;
            let hi = kernel_form(&rho, &upper, &xop, &xop)?.re;
            mono.record((lo - hi).max(0.0));
            for g in [KernelFn::Psi, KernelFn::Phi, KernelFn::LogMean, KernelFn::Zeta] {
                let l = kernel_form(&rho, &g, &xop, &yop)?;
                let r = kernel_form(&rho, &g, &yop, &xop)?.conj();
                adjoint.record((l - r).norm());
            }
            let centered = random::centered_pure_state(&mut rng, &cut)?;
            let fd = fisher_distance(&centered)?;
            saturate.record((fd.fisher[0] - 4.0 * fd.mu[0]).abs());

            // Poincaré
            let gap = estimate_gap(&rho, &cut)?;
            gap_pos.record((-gap.lambda_hat).max(0.0));
            rayleigh.record(gap.rayleigh_residual);
        }
    }

    for modes in [1usize, 2] {
        for _ in 0..opts.samples {
            let s0 = random_symplectic(&mut rng, modes);
            let nus: Vec<f64> = (0..modes).map(|_| random::uniform(&mut rng, 1.0, 4.0)).collect();
            let diag = RMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                2 * modes,
                nus.iter().flat_map(|&v| [v, v]),
            ));
            let gamma = &s0 * diag * s0.transpose();
            let (s, nu) = williamson(&gamma)?;
            let omega = SymplecticForm::new(modes).matrix();
            let mut dev = rmax(&(&s * &omega * s.transpose() - &omega));
            let g2 = &s * &gamma * s.transpose();
            for i in 0..2 * modes {
                for j in 0..2 * modes {
                    if i != j {
                        dev = dev.max(g2[(i, j)].abs());
                    }
                }
            }
            let mut sorted = nus.clone();
            sorted.sort_by(|x, y| y.total_cmp(x));
            for (a, b) in sorted.iter().zip(&nu) {
                dev = dev.max((a - b).abs());
            }
            symp.record(dev);
            let direct = symplectic_eigenvalues_direct(&gamma);
            oracle.record(nu.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }

    for nu in [1.5, 2.0, 4.0] {
        let t = thermal_state(nu, thermal_cutoff_for(nu, 1e-14, 200))?;
        let g = covariance(&t)?.gamma_matrix();
        thermal_cov.record(rmax(&(g - RMatrix::identity(2, 2) * nu)));
    }

    let policy = CutoffPolicy {
        n_max: 20,
        ..CutoffPolicy::default()
    };
    let tau = thermal_state(2.0, policy.n_max)?;
    let it = conv.self_convolve(&tau, 16, &policy)?;
    fixed.record(trace_distance(&it.output, &tau)?);

    let results: Vec<InvariantResult> = [
        ccr, validity, ptrace, chi_bound, chi_sym, flow, photons, swap, passive, compat, pinsker, triangle,
        relent_pos, norm_order, sandwich, mono, adjoint, jforms, saturate, gap_pos, rayleigh, symp, oracle,
        thermal_cov, fixed,
    ]
    .into_iter()
    .map(Tally::finish)
    .collect();
    Ok(SuiteReport {
        seed: opts.seed,
        sizes: opts.sizes.clone(),
        samples: opts.samples,
        variant: opts.variant,
        passed: results.iter().all(|r| r.passed),
        results,
    })
}

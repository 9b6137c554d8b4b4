use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use crate::charfn::{char_fn, covariance};
use crate::convolve::{convolve, Convolver};
use crate::fisher::{fisher_distance, kernel_form, KernelFn};
use crate::fock::{embed_matrix, DensityMatrix, FockCutoff};
use crate::gaussian::{symplectic_eigenvalues_direct, williamson, SymplecticForm};
use crate::linalg::{c, trace, CMatrix, RMatrix};
use crate::metrics::{hs_distance, relative_entropy, trace_distance};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

fn complex_matrix(rows: usize, cols: usize, raw: &[f64]) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        c(raw[k], raw[k + 1])
    })
}

/// `G G† + δ I`, normalized; `δ` keeps the state faithful.
fn mixed_state(n: usize, raw: &[f64], delta: f64) -> DensityMatrix {
    let d = n + 1;
    let g = complex_matrix(d, d, raw);
    let m = &g * g.adjoint() + CMatrix::identity(d, d) * c(delta, 0.0);
    let tr = trace(&m).re;
    DensityMatrix::from_matrix(FockCutoff::single(n).unwrap(), m / c(tr, 0.0), 0.0).unwrap()
}

fn pure(n: usize, raw: &[f64]) -> Option<DensityMatrix> {
    let v = complex_matrix(n + 1, 1, raw);
    let norm = v.norm();
    if norm < 1e-3 {
        return None;
    }
    let v = v / c(norm, 0.0);
    DensityMatrix::from_matrix(FockCutoff::single(n).unwrap(), &v * v.adjoint(), 0.0).ok()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2 * (n + 1) * (n + 1))
}

/// Cutoff followed by raw entries for `count` matrices of that size.
fn sized(count: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1usize..=3).prop_flat_map(move |n| (Just(n), prop::collection::vec(entries(n), count)))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn balanced_convolution_is_symmetric((n, raw) in sized(2)) {
        let rho = mixed_state(n, &raw[0], 0.0);
        let sigma = mixed_state(n, &raw[1], 0.0);
        let ab = convolve(&rho, &sigma, 0.5).unwrap().output;
        let ba = convolve(&sigma, &rho, 0.5).unwrap().output;
        prop_assert!(trace_distance(&ab, &ba).unwrap() < 1e-10);
    }

    #[test]
    fn convolution_moves_moments_linearly((n, raw) in sized(2), eta in 0.05..0.95f64) {
        let rho = mixed_state(n, &raw[0], 0.0);
        let sigma = mixed_state(n, &raw[1], 0.0);
        let out = convolve(&rho, &sigma, eta).unwrap().output;
        let (cr, cs, co) = (covariance(&rho).unwrap(), covariance(&sigma).unwrap(), covariance(&out).unwrap());
        let expect = cr.gamma_matrix() * eta + cs.gamma_matrix() * (1.0 - eta);
        prop_assert!((co.gamma_matrix() - expect).amax() < 1e-8);
        for k in 0..2 {
            let d = eta.sqrt() * cr.d[k] + (1.0 - eta).sqrt() * cs.d[k];
            prop_assert!((co.d[k] - d).abs() < 1e-8);
        }
        prop_assert!(out.min_eigenvalue() > -1e-10);
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn beam_splitter_conserves_photon_number((n, raw) in sized(2), eta in 0.0..1.0f64) {
        let rho = mixed_state(n, &raw[0], 0.0);
        let sigma = mixed_state(n, &raw[1], 0.0);
        let joint = crate::fock::tensor(&rho, &sigma).unwrap();
        let big = 2 * n;
        let pair = FockCutoff::new(vec![big, big]).unwrap();
        let x = embed_matrix(joint.matrix(), joint.cutoff(), &pair);
        let u = Convolver::new().blocks(eta, 2 * big).dense(big, big);
        let ntot = CMatrix::from_diagonal(&DVector::from_iterator(
            pair.dim(),
            pair.multi_indices().into_iter().map(|mi| c((mi[0] + mi[1]) as f64, 0.0)),
        ));
        let before = trace(&(&ntot * &x)).re;
        let after = trace(&(&ntot * &u * &x * u.adjoint())).re;
        prop_assert!((after - before).abs() < 1e-10);
    }

    #[test]
    fn pinsker_and_nonnegativity((n, raw) in sized(2)) {
        let rho = mixed_state(n, &raw[0], 1e-3);
        let sigma = mixed_state(n, &raw[1], 1e-3);
        let t = trace_distance(&rho, &sigma).unwrap();
        let d = relative_entropy(&rho, &sigma).unwrap();
        prop_assert!(d >= -1e-10);
        prop_assert!(0.5 * t * t <= d + 1e-10);
        prop_assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-10);
    }

    #[test]
    fn trace_distance_is_a_metric((n, raw) in sized(3)) {
        let s: Vec<DensityMatrix> = raw.iter().map(|r| mixed_state(n, r, 0.0)).collect();
        let (ab, bc, ac) = (
            trace_distance(&s[0], &s[1]).unwrap(),
            trace_distance(&s[1], &s[2]).unwrap(),
            trace_distance(&s[0], &s[2]).unwrap(),
        );
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((ab - trace_distance(&s[1], &s[0]).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= 2.0 + 1e-12);
        prop_assert!(hs_distance(&s[0], &s[1]).unwrap() <= ab + 1e-12);
    }

    #[test]
    fn kernel_forms_follow_pointwise_order((n, raw) in sized(2)) {
        let rho = mixed_state(n, &raw[0], 0.0);
        let x = complex_matrix(n + 1, n + 1, &raw[1]);
        let upper = KernelFn::Custom("2(x+y)".into(), Arc::new(|x, y| 2.0 * (x + y)));
        let zeta = kernel_form(&rho, &KernelFn::Zeta, &x, &x).unwrap().re;
        prop_assert!(zeta <= kernel_form(&rho, &upper, &x, &x).unwrap().re + 1e-10);
        let lm = kernel_form(&rho, &KernelFn::LogMean, &x, &x).unwrap().re;
        prop_assert!(lm <= kernel_form(&rho, &KernelFn::Psi, &x, &x).unwrap().re + 1e-10);
        prop_assert!(zeta >= -1e-12 && lm >= -1e-12);
    }

    #[test]
    fn kernel_forms_are_hermitian((n, raw) in sized(3)) {
        let rho = mixed_state(n, &raw[0], 0.0);
        let x = complex_matrix(n + 1, n + 1, &raw[1]);
        let y = complex_matrix(n + 1, n + 1, &raw[2]);
        for g in [KernelFn::Psi, KernelFn::Phi, KernelFn::LogMean, KernelFn::Zeta] {
            let l = kernel_form(&rho, &g, &x, &y).unwrap();
            let r = kernel_form(&rho, &g, &y, &x).unwrap().conj();
            prop_assert!((l - r).norm() < 1e-10, "{:?}", g);
        }
    }

    #[test]
    fn fisher_information_is_sandwiched((n, raw) in sized(1)) {
        let rho = mixed_state(n, &raw[0], 0.0);
        let fd = fisher_distance(&rho).unwrap();
        let (i, mu) = (fd.fisher[0], fd.mu[0]);
        prop_assert!(1.0 / mu <= i + 1e-9);
        prop_assert!(i <= 4.0 * mu * (1.0 + 1e-8));
        if let Some(nf) = &fd.norm_form {
            prop_assert!((nf[0] - fd.per_mode[0]).abs() < 1e-6 * (1.0 + fd.per_mode[0]));
        }
    }

    #[test]
    fn characteristic_function_is_bounded_and_hermitian(
        raw in prop::collection::vec(-1.0..1.0f64, 8),
        re in -2.0..2.0f64,
        im in -2.0..2.0f64,
    ) {
        prop_assume!(pure(3, &raw).is_some());
        let psi = pure(3, &raw).unwrap();
        let z = c(re, im);
        let v = char_fn(&psi, &[z]).unwrap();
        prop_assert!(v.norm() <= 1.0 + 1e-12);
        prop_assert!((char_fn(&psi, &[-z]).unwrap() - v.conj()).norm() < 1e-12);
    }

    #[test]
    fn williamson_round_trip(
        h in prop::collection::vec(-0.3..0.3f64, 16),
        nus in prop::collection::vec(1.0..4.0f64, 2),
    ) {
        let omega = SymplecticForm::new(2).matrix();
        let g = RMatrix::from_row_slice(4, 4, &h);
        let s0 = (&omega * ((&g + g.transpose()) * 0.5)).exp();
        let diag = RMatrix::from_diagonal(&DVector::from_vec(vec![nus[0], nus[0], nus[1], nus[1]]));
        let gamma = &s0 * diag * s0.transpose();
        let (s, nu) = williamson(&gamma).unwrap();
        prop_assert!((&s * &omega * s.transpose() - &omega).amax() < 1e-8);
        let g2 = &s * &gamma * s.transpose();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    prop_assert!(g2[(i, j)].abs() < 1e-8);
                }
            }
        }
        let mut want = nus.clone();
        want.sort_by(|a, b| b.total_cmp(a));
        let direct = symplectic_eigenvalues_direct(&gamma);
        for k in 0..2 {
            prop_assert!((nu[k] - want[k]).abs() < 1e-8);
            prop_assert!((direct[k] - want[k]).abs() < 1e-8);
        }
    }
}

//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line straight to
//! stdout, so the lines show up even when libtest captures output.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use qclt::charfn::adapted_grid;
use qclt::convolve::{commutator_compat_check, CutoffPolicy};
use qclt::fisher::{cauchy_schwarz_check, lsi_fisher_constant, scalar_gh_check, sld_fisher};
use qclt::fock::superposition_0_3;
use qclt::gaussian::{beta_from_nu, thermal_cutoff_for};
use qclt::lab::{
    chi_rate_probe, fit_slope, write_outputs, ConvergenceRecord, ExperimentConfig, Metric, OutputPaths, StateSpec,
    SweepOutcome,
};
use qclt::linalg::{c, hs_norm};
use qclt::metrics::{bound_operand, trace_norm_charfn_bound};
use qclt::random;
use qclt::*;

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!("{} criterion {criterion}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

const SWEEP_NS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

struct Sweep {
    outcome: SweepOutcome,
    seconds: f64,
}

/// `ρ_ex^⊞n` against `τ_4` at cutoff 48 and tail budget 1e-8, shared by
/// criteria 1, 3 and 5.
fn example_sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let mut cfg = ExperimentConfig::new(StateSpec::superposition_0_3(), SWEEP_NS.to_vec());
        cfg.policy = CutoffPolicy {
            n_max: 48,
            tail_budget: 1e-8,
        };
        cfg.outputs = OutputPaths::in_dir(&std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"));
        let start = Instant::now();
        let outcome = qclt::lab::run_sweep(&cfg).expect("sweep runs");
        let seconds = start.elapsed().as_secs_f64();
        write_outputs(&cfg, &outcome).expect("sweep outputs written");
        Sweep { outcome, seconds }
    })
}

fn rows() -> &'static [ConvergenceRecord] {
    &example_sweep().outcome.records
}

fn series(m: Metric) -> String {
    rows()
        .iter()
        .filter_map(|r| r.metric(m).map(|v| format!("{}:{v:.4e}", r.n)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_01_trace_distance_rate() {
    let sw = example_sweep();
    assert!(sw.outcome.aborted.is_none(), "tail budget exceeded: {:?}", sw.outcome.aborted);
    let fit = fit_slope(rows(), Metric::Trace).unwrap();
    let pass = (fit.slope + 0.5).abs() <= 0.1 && fit.r2 >= 0.99;
    report(
        1,
        pass,
        &format!(
            "slope {:.4} R2 {:.4} (want -0.5 +/- 0.1, R2 >= 0.99), sweep {:.1}s, series {}",
            fit.slope,
            fit.r2,
            sw.seconds,
            series(Metric::Trace)
        ),
    );
    assert!(pass, "trace slope {} R2 {}", fit.slope, fit.r2);
}

#[test]
fn criterion_02_chi_optimality() {
    let ex = superposition_0_3(3).unwrap();
    let target = (-2.0f64).exp() / 6f64.sqrt();
    let ns = [64, 128, 256, 512, 1024];
    let pts = chi_rate_probe(&ex, &ns, c(0.0, 1.0)).unwrap();
    let at256 = pts.iter().find(|p| p.n == 256).unwrap().scaled;
    let rel = (at256 - target).abs() / target;
    let floor = pts.iter().map(|p| p.scaled).fold(f64::INFINITY, f64::min);
    let pass = rel <= 0.10 && floor >= 0.02;
    report(
        2,
        pass,
        &format!("sqrt(n)|dchi(i)| at n=256 = {at256:.6} vs {target:.6} (rel {rel:.4}), min over n>=64 {floor:.6} >= 0.02"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_entropic_rate() {
    let sw = example_sweep();
    assert!(sw.outcome.aborted.is_none());
    let fit = fit_slope(rows(), Metric::Relent).unwrap();
    let pass = (fit.slope + 1.0).abs() <= 0.15 && fit.r2 >= 0.98;
    report(
        3,
        pass,
        &format!(
            "slope {:.4} R2 {:.4} (want -1.0 +/- 0.15, R2 >= 0.98), series {}",
            fit.slope,
            fit.r2,
            series(Metric::Relent)
        ),
    );
    assert!(pass, "relent slope {} R2 {}", fit.slope, fit.r2);
}

#[test]
fn criterion_04_fisher_sandwich() {
    let mut rng = random::rng(4);
    let cut = FockCutoff::single(6).unwrap();
    let mut states: Vec<DensityMatrix> = (0..100).map(|_| random::wishart_state(&mut rng, &cut).unwrap()).collect();
    states.push(DensityMatrix::vacuum(&cut));
    states.push(thermal_state(2.0, 80).unwrap());
    states.push(thermal_state(4.0, 80).unwrap());
    states.push(superposition_0_3(3).unwrap());
    let mut violations = 0;
    for s in &states {
        let fd = fisher_distance(s).unwrap();
        let (i, mu) = (fd.fisher[0], fd.mu[0]);
        if i < 1.0 / mu || i > 4.0 * mu * (1.0 + 1e-8) {
            violations += 1;
        }
    }
    let vac = DensityMatrix::vacuum(&cut);
    let exact = [
        (sld_fisher(&vac).unwrap().total, 2.0),
        (sld_fisher(&thermal_state(2.0, 80).unwrap()).unwrap().total, 1.0),
        (sld_fisher(&thermal_state(4.0, 80).unwrap()).unwrap().total, 0.5),
        (sld_fisher(&superposition_0_3(3).unwrap()).unwrap().total, 8.0),
        (fisher_distance(&superposition_0_3(3).unwrap()).unwrap().total, 7.5),
    ];
    let worst = exact.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = violations == 0 && worst <= 1e-6;
    report(
        4,
        pass,
        &format!(
            "{violations} sandwich violations on {} states; exact values off by at most {worst:.2e}",
            states.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_fisher_contraction() {
    let ex = superposition_0_3(3).unwrap();
    let gap = estimate_gap(&ex, &FockCutoff::single(14).unwrap()).unwrap();
    let i0 = sld_fisher(&ex).unwrap().total;
    let j0 = fisher_distance(&ex).unwrap().total;
    let sw = example_sweep();
    assert!(sw.outcome.aborted.is_none());
    let j_at = |n: usize| rows().iter().find(|r| r.n == n).and_then(|r| r.j).unwrap();
    let mut bound_ok = true;
    let mut worst_ratio = 0.0f64;
    for n in [2usize, 4, 8, 16] {
        let bound = j0 / (1.0 + gap.lambda_hat * (n - 1) as f64 / (4.0 * i0));
        worst_ratio = worst_ratio.max(j_at(n) / bound);
        bound_ok &= j_at(n) <= bound;
    }
    let js: Vec<f64> = rows().iter().filter_map(|r| r.j).collect();
    let monotone = js.windows(2).all(|w| w[1] <= w[0]);
    let pass = bound_ok && monotone && gap.smoothed;
    report(
        5,
        pass,
        &format!(
            "lambda_hat {:.4e} (smoothed state), max J(n)/bound {worst_ratio:.4}, J monotone {monotone}, J series {}",
            gap.lambda_hat,
            series(Metric::J)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_log_sobolev() {
    let mut rng = random::rng(6);
    let cut = FockCutoff::single(6).unwrap();
    let mut worst_lsi = f64::NEG_INFINITY;
    let mut worst_fisher = f64::NEG_INFINITY;
    for _ in 0..100 {
        let rho = random::wishart_state(&mut rng, &cut).unwrap();
        let mean_n: f64 = (0..cut.dim()).map(|k| rho.matrix()[(k, k)].re * k as f64).sum();
        let nu = 2.0 * mean_n + 1.0;
        let beta = beta_from_nu(nu);
        let tau = thermal_state(nu, thermal_cutoff_for(nu, 1e-14, 600)).unwrap();
        let d = relative_entropy(&rho, &tau).unwrap();
        let form = lsi_dirichlet(&rho, &[beta]).unwrap();
        let alpha = lsi_alpha(&[beta], 1).unwrap();
        let j = fisher_distance(&rho).unwrap().total;
        worst_lsi = worst_lsi.max(alpha * d - form);
        worst_fisher = worst_fisher.max(lsi_fisher_constant(beta) * form - j);
    }
    let pass = worst_lsi <= 1e-9 && worst_fisher <= 1e-9;
    report(
        6,
        pass,
        &format!("max(alpha D - form) {worst_lsi:.3e}, max(C form - J) {worst_fisher:.3e} over 100 states"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_poincare_references() {
    let cut = FockCutoff::single(14).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for nu in [1.5, 2.0, 4.0] {
        let tau = thermal_state(nu, 14).unwrap();
        let l = estimate_gap(&tau, &cut).unwrap().lambda_hat;
        let lower = l >= 2.0 / (nu + 1.0) - 1e-3;
        let rel = (l - 2.0 / nu).abs() / (2.0 / nu);
        ok &= lower && rel <= 0.02;
        parts.push(format!("nu={nu}: {l:.5} (2/nu {:.5}, rel {rel:.4})", 2.0 / nu));
    }

    let mut rng = random::rng(7);
    let small = FockCutoff::single(3).unwrap();
    let mut phase_dev = 0.0f64;
    for _ in 0..3 {
        let rho = random::wishart_state(&mut rng, &small).unwrap();
        let theta = random::uniform(&mut rng, 0.0, std::f64::consts::TAU);
        let (before, after) = passive_invariance_check(&rho, &[theta]).unwrap();
        phase_dev = phase_dev.max((before - after).abs());
    }
    ok &= phase_dev <= 1e-6;

    let pair_cut = FockCutoff::single(2).unwrap();
    let mut worst_drop = f64::NEG_INFINITY;
    for _ in 0..10 {
        let rho = random::wishart_state(&mut rng, &pair_cut).unwrap();
        let sigma = random::wishart_state(&mut rng, &pair_cut).unwrap();
        let out = convolve(&rho, &sigma, 0.5).unwrap().output;
        let lr = estimate_gap(&rho, rho.cutoff()).unwrap().lambda_hat;
        let ls = estimate_gap(&sigma, sigma.cutoff()).unwrap().lambda_hat;
        let lo = estimate_gap(&out, out.cutoff()).unwrap().lambda_hat;
        let floor = lr.min(ls);
        worst_drop = worst_drop.max((floor - lo) / floor);
    }
    ok &= worst_drop <= 0.02;
    report(
        7,
        ok,
        &format!(
            "{}; phase deviation {phase_dev:.2e}; worst relative drop under convolution {worst_drop:.4}",
            parts.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_plancherel_and_trace_norm_bound() {
    let mut rng = random::rng(8);
    let cut = FockCutoff::single(3).unwrap();
    let mut worst_rel = 0.0f64;
    for _ in 0..20 {
        let m = random::operator(&mut rng, cut.dim());
        let direct = hs_norm(&m).powi(2);
        let op = ModeOperator::custom(cut.clone(), m, "random").unwrap();
        let grid = adapted_grid(&op, QuadratureRule::GaussLegendre, 1e-8).unwrap();
        let v = plancherel_hs_norm(&op, &grid).unwrap();
        worst_rel = worst_rel.max((v - direct).abs() / direct);
    }

    let mut violations = 0;
    let mut tightest = 0.0f64;
    let mut check = |t: &ModeOperator| {
        let (_, a) = bound_operand(t).unwrap();
        let grid = adapted_grid(&a, QuadratureRule::GaussLegendre, 1e-8).unwrap();
        let (lhs, rhs) = trace_norm_charfn_bound(t, &grid).unwrap();
        tightest = tightest.max(lhs / rhs);
        if lhs > rhs {
            violations += 1;
        }
    };
    for _ in 0..20 {
        let h = random::hermitian(&mut rng, cut.dim());
        check(&ModeOperator::custom(cut.clone(), h, "hermitian").unwrap());
    }
    let big = FockCutoff::single(30).unwrap();
    let ex = superposition_0_3(3).unwrap().embed(&big).unwrap();
    let t4 = thermal_state(4.0, 30).unwrap();
    check(&ModeOperator::custom(big, ex.matrix() - t4.matrix(), "difference").unwrap());

    let pass = worst_rel <= 1e-3 && violations == 0;
    report(
        8,
        pass,
        &format!("Plancherel worst relative error {worst_rel:.2e}; {violations} bound violations, max lhs/rhs {tightest:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_convolution_algebra() {
    let mut rng = random::rng(9);
    let cut = FockCutoff::single(3).unwrap();
    let rho = random::wishart_state(&mut rng, &cut).unwrap();
    let sigma = random::wishart_state(&mut rng, &cut).unwrap();
    let eta = 0.3;
    let out = convolve(&rho, &sigma, eta).unwrap().output;

    let mut chi_dev = 0.0f64;
    for _ in 0..50 {
        let z = c(random::uniform(&mut rng, -2.0, 2.0), random::uniform(&mut rng, -2.0, 2.0));
        let lhs = char_fn(&out, &[z]).unwrap();
        let rhs = char_fn(&rho, &[z * eta.sqrt()]).unwrap() * char_fn(&sigma, &[z * (1.0 - eta).sqrt()]).unwrap();
        chi_dev = chi_dev.max((lhs - rhs).norm());
    }

    let (cr, cs, co) = (covariance(&rho).unwrap(), covariance(&sigma).unwrap(), covariance(&out).unwrap());
    let gamma_dev = (co.gamma_matrix() - (cr.gamma_matrix() * eta + cs.gamma_matrix() * (1.0 - eta)))
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    let d_dev = (0..2)
        .map(|k| (co.d[k] - (eta.sqrt() * cr.d[k] + (1.0 - eta).sqrt() * cs.d[k])).abs())
        .fold(0.0f64, f64::max);

    let comm = commutator_compat_check(&rho, &sigma, eta).unwrap();

    let budget = 1e-8;
    let mut fixed = 0.0f64;
    for nu in [2.0, 4.0] {
        let n_max = thermal_cutoff_for(nu, 1e-12, 200);
        let tau = thermal_state(nu, n_max).unwrap();
        let it = self_convolve(&tau, 16, &CutoffPolicy { n_max, tail_budget: budget }).unwrap();
        fixed = fixed.max(trace_distance(&it.output, &tau).unwrap());
    }

    let pass = chi_dev <= 1e-8 && gamma_dev.max(d_dev) <= 1e-8 && comm <= 1e-8 && fixed <= 10.0 * budget;
    report(
        9,
        pass,
        &format!(
            "chi factorization {chi_dev:.2e}, moment flow {:.2e}, commutator {comm:.2e}, fixed point {fixed:.2e}",
            gamma_dev.max(d_dev)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_scalar_and_cauchy_schwarz() {
    let mut gh_worst = f64::NEG_INFINITY;
    for nu in [2.0, 3.0, 4.0] {
        let chk = scalar_gh_check(beta_from_nu(nu), 1000, 1.0).unwrap();
        assert_eq!(chk.points, 1_000_000);
        gh_worst = gh_worst.max(chk.max_violation);
    }

    let mut rng = random::rng(10);
    let c1 = FockCutoff::single(2).unwrap();
    let c2 = FockCutoff::single(2).unwrap();
    let mut cs_violations = 0;
    let mut cs_ratio = 0.0f64;
    for _ in 0..50 {
        let r1 = random::wishart_state(&mut rng, &c1).unwrap();
        let r2 = random::wishart_state(&mut rng, &c2).unwrap();
        let a = random::operator(&mut rng, c1.dim());
        let b = random::operator(&mut rng, c1.dim() * c2.dim());
        let (lhs, rhs) = cauchy_schwarz_check(&r1, &r2, &a, &b).unwrap();
        cs_ratio = cs_ratio.max(lhs / rhs);
        if lhs > rhs * (1.0 + 1e-12) {
            cs_violations += 1;
        }
    }
    let pass = gh_worst <= 1e-12 && cs_violations == 0;
    report(
        10,
        pass,
        &format!(
            "scalar grid max(C g - h) {gh_worst:.2e} on 3 x 10^6 points; {cs_violations} Cauchy-Schwarz violations (max ratio {cs_ratio:.4})"
        ),
    );
    assert!(pass);
}

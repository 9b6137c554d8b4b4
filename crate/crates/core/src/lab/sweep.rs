use std::time::Instant;

use serde::Serialize;

use crate::convolve::Convolver;
use crate::error::{LabError, Result};
use crate::fisher::fisher_distance;
use crate::fock::{DensityMatrix, FockCutoff};
use crate::gaussian::{gaussify, GaussianSpec};
use crate::metrics::{hs_distance, relative_entropy, trace_distance};
use crate::poincare::estimate_gap;

use super::config::{ExperimentConfig, Metric};

/// One row of a sweep. Metrics that were not selected are `None`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub trace: Option<f64>,
    pub hs: Option<f64>,
    pub relent: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub lambda: Option<f64>,
    /// Weight dropped by the cutoff policy up to this `n`.
    pub tail: f64,
    /// Wall time for this row in milliseconds, `0` when timing is off.
    pub ms: f64,
}

impl ConvergenceRecord {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Trace => self.trace,
            Metric::Hs => self.hs,
            Metric::Relent => self.relent,
            Metric::J => self.j,
            Metric::Lambda => self.lambda,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SweepAbort {
    /// First requested `n` that could not be reached.
    pub n: usize,
    pub step: usize,
    pub discarded: f64,
    pub budget: f64,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub reference: GaussianSpec,
    /// Set when the tail budget stopped the sweep early; `records` holds the rows
    /// completed before that.
    pub aborted: Option<SweepAbort>,
}

/// Gaussian reference on the sweep's cutoff.
pub fn reference_state(rho: &DensityMatrix, n_max: usize) -> Result<(GaussianSpec, DensityMatrix)> {
    let g = gaussify(rho)?;
    let cut = rho.cutoff().join(&FockCutoff::uniform(rho.modes(), n_max)?)?;
    let tau = g.spec.synthesize(&cut)?;
    Ok((g.spec, tau))
}

pub fn measure(
    config: &ExperimentConfig,
    n: usize,
    state: &DensityMatrix,
    reference: &DensityMatrix,
    tail: f64,
) -> Result<ConvergenceRecord> {
    let pick = |m: Metric| config.wants(m);
    let trace = if pick(Metric::Trace) { Some(trace_distance(state, reference)?) } else { None };
    let hs = if pick(Metric::Hs) { Some(hs_distance(state, reference)?) } else { None };
    let relent = if pick(Metric::Relent) { Some(relative_entropy(state, reference)?) } else { None };
    let j = if pick(Metric::J) { Some(fisher_distance(state)?.total) } else { None };
    let lambda = if pick(Metric::Lambda) {
        let cut = FockCutoff::uniform(state.modes(), config.lambda_cutoff)?;
        Some(estimate_gap(state, &cut)?.lambda_hat)
    } else {
        None
    };
    Ok(ConvergenceRecord {
        n,
        trace,
        hs,
        relent,
        j,
        lambda,
        tail,
        ms: 0.0,
    })
}

/// `ρ^⊞n` for every `n` in the list, compared with the Gaussification of `ρ`.
/// The iterates are built incrementally, `σ_k = σ_{k−1} ⊞_{1−1/k} ρ`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    run_sweep_with(&Convolver::new(), config)
}

pub fn run_sweep_with(conv: &Convolver, config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let rho = config.state.build(config.seed)?;
    let (spec, tau) = reference_state(&rho, config.policy.n_max)?;
    let mut acc = rho.clone();
    let mut k = 1usize;
    let mut discarded = 0.0;
    let mut records = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let start = Instant::now();
        while k < n {
            k += 1;
            let eta = 1.0 - 1.0 / k as f64;
            let (next, step) = conv.convolve_capped(&acc, &rho, eta, Some(config.policy.n_max))?;
            discarded += step.discarded;
            if discarded > config.policy.tail_budget {
                return Ok(SweepOutcome {
                    records,
                    reference: spec,
                    aborted: Some(SweepAbort {
                        n,
                        step: k,
                        discarded,
                        budget: config.policy.tail_budget,
                    }),
                });
            }
            acc = next;
        }
        let mut rec = measure(config, n, &acc, &tau, discarded)?;
        if config.timing {
            rec.ms = start.elapsed().as_secs_f64() * 1e3;
        }
        records.push(rec);
    }
    Ok(SweepOutcome {
        records,
        reference: spec,
        aborted: None,
    })
}

impl SweepOutcome {
    pub fn into_result(self) -> Result<Vec<ConvergenceRecord>> {
        match self.aborted {
            Some(a) => Err(LabError::TailBudgetExceeded {
                step: a.step,
                discarded: a.discarded,
                budget: a.budget,
            }),
            None => Ok(self.records),
        }
    }
}

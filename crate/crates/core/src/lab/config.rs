use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convolve::CutoffPolicy;
use crate::error::{LabError, Result};
use crate::fock::{build_pure_state, DensityMatrix, FockCutoff};
use crate::gaussian::{thermal_cutoff_for, thermal_product};
use crate::linalg::c;
use crate::quadrature::QuadratureRule;
use crate::random;

/// Thermal states without an explicit cutoff are cut where the tail drops below this.
pub const THERMAL_AUTO_TAIL: f64 = 1e-12;
const THERMAL_AUTO_MAX: usize = 200;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Amplitude {
    pub index: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub state: StateSpec,
}

/// How the input state of an experiment is built.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    /// Normalized pure state from Fock amplitudes.
    Pure { cutoff: Vec<usize>, amplitudes: Vec<Amplitude> },
    /// Product of thermal states.
    Thermal {
        nu: Vec<f64>,
        #[serde(default)]
        cutoff: Option<Vec<usize>>,
    },
    /// Convex combination; weights are normalized.
    Mixture { components: Vec<MixtureComponent> },
    /// Seeded Wishart state (`rank` columns, full rank by default) or pure state.
    Random {
        cutoff: Vec<usize>,
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default)]
        pure: bool,
    },
    /// A density matrix previously written as JSON.
    File { path: PathBuf },
}

impl StateSpec {
    /// `(|0⟩ + |3⟩)/√2`.
    pub fn superposition_0_3() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateSpec::Pure {
            cutoff: vec![3],
            amplitudes: vec![
                Amplitude { index: vec![0], re: h, im: 0.0 },
                Amplitude { index: vec![3], re: h, im: 0.0 },
            ],
        }
    }

    pub fn build(&self, seed: u64) -> Result<DensityMatrix> {
        match self {
            StateSpec::Pure { cutoff, amplitudes } => {
                let cut = FockCutoff::new(cutoff.clone())?;
                let mut amps = BTreeMap::new();
                for a in amplitudes {
                    *amps.entry(a.index.clone()).or_insert(c(0.0, 0.0)) += c(a.re, a.im);
                }
                build_pure_state(&amps, &cut)
            }
            StateSpec::Thermal { nu, cutoff } => {
                let per_mode = match cutoff {
                    Some(cv) => cv.clone(),
                    None => nu
                        .iter()
                        .map(|&v| thermal_cutoff_for(v, THERMAL_AUTO_TAIL, THERMAL_AUTO_MAX))
                        .collect(),
                };
                thermal_product(nu, &FockCutoff::new(per_mode)?)
            }
            StateSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(LabError::EmptySelection);
                }
                let total: f64 = components.iter().map(|m| m.weight).sum();
                if components.iter().any(|m| !(m.weight >= 0.0)) || !(total > 0.0) {
                    return Err(LabError::InvalidParameter("mixture weights must be nonnegative with positive sum".into()));
                }
                let states = components
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m.state.build(seed.wrapping_add(k as u64)))
                    .collect::<Result<Vec<_>>>()?;
                let mut joint = states[0].cutoff().clone();
                for s in &states[1..] {
                    joint = joint.join(s.cutoff())?;
                }
                let states = states.iter().map(|s| s.embed(&joint)).collect::<Result<Vec<_>>>()?;
                let mut acc = states[0].clone();
                let mut acc_w = components[0].weight;
                for (s, m) in states.iter().zip(components).skip(1) {
                    if m.weight == 0.0 {
                        continue;
                    }
                    acc_w += m.weight;
                    acc = acc.mix(s, m.weight / acc_w)?;
                }
                Ok(acc)
            }
            StateSpec::Random { cutoff, rank, pure } => {
                let cut = FockCutoff::new(cutoff.clone())?;
                let mut rng = random::rng(seed);
                match (pure, rank) {
                    (true, _) => random::pure_state(&mut rng, &cut),
                    (false, Some(r)) => random::low_rank_state(&mut rng, &cut, *r),
                    (false, None) => random::wishart_state(&mut rng, &cut),
                }
            }
            StateSpec::File { path } => DensityMatrix::from_json(&std::fs::read_to_string(path)?),
        }
    }
}

/// Quantities a sweep can record.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    #[serde(rename = "trace")]
    Trace,
    #[serde(rename = "hs")]
    Hs,
    #[serde(rename = "relent")]
    Relent,
    #[serde(rename = "J")]
    J,
    #[serde(rename = "lambda")]
    Lambda,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Trace => "trace",
            Metric::Hs => "hs",
            Metric::Relent => "relent",
            Metric::J => "J",
            Metric::Lambda => "lambda",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| LabError::InvalidParameter(format!("unknown metric {s:?}")))
    }
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Trace, Metric::Hs, Metric::Relent, Metric::J]
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GridConfig {
    pub rule: QuadratureRule,
    /// Boundary tolerance used to pick the grid radius.
    pub tol: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub svg: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

impl OutputPaths {
    /// `sweep.csv`, `sweep.svg` and `report.json` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            csv: Some(dir.join("sweep.csv")),
            svg: Some(dir.join("sweep.svg")),
            json: Some(dir.join("report.json")),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_lambda_cutoff() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub state: StateSpec,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub policy: CutoffPolicy,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: OutputPaths,
    /// Record wall time per row. Off gives byte-identical CSV for a fixed seed.
    #[serde(default = "default_true")]
    pub timing: bool,
    /// Per-mode cutoff on which `lambda` is estimated.
    #[serde(default = "default_lambda_cutoff")]
    pub lambda_cutoff: usize,
}

impl ExperimentConfig {
    pub fn new(state: StateSpec, n_list: Vec<usize>) -> Self {
        Self {
            state,
            n_list,
            policy: CutoffPolicy::default(),
            grid: GridConfig::default(),
            metrics: default_metrics(),
            seed: 0,
            outputs: OutputPaths::default(),
            timing: true,
            lambda_cutoff: default_lambda_cutoff(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(LabError::InvalidParameter("n_list is empty".into()));
        }
        if self.n_list[0] == 0 {
            return Err(LabError::InvalidParameter("n_list entries must be at least 1".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::InvalidParameter("n_list must be strictly ascending".into()));
        }
        if !(self.policy.tail_budget > 0.0) || self.policy.n_max == 0 {
            return Err(LabError::InvalidParameter("policy needs n_max >= 1 and a positive tail budget".into()));
        }
        if !(self.grid.tol > 0.0) {
            return Err(LabError::InvalidParameter("grid tolerance must be positive".into()));
        }
        if self.metrics.is_empty() {
            return Err(LabError::EmptySelection);
        }
        if self.lambda_cutoff == 0 {
            return Err(LabError::InvalidParameter("lambda_cutoff must be at least 1".into()));
        }
        Ok(())
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

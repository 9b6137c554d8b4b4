use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qclt::charfn::adapted_grid;
use qclt::convolve::CutoffPolicy;
use qclt::fisher::{kmb_fisher, lsi_fisher_constant};
use qclt::gaussian::beta_from_nu;
use qclt::lab::{
    chi_rate_probe, csv_string, run_invariant_suite_with, run_sweep, write_outputs, ExperimentConfig, OutputPaths,
    StateSpec, SuiteOptions,
};
use qclt::linalg::c;
use qclt::metrics::{bound_operand, relative_entropy_detailed, trace_norm_charfn_bound};
use qclt::*;

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TAIL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "qclt", version, about = "Truncated Fock-space lab for the bosonic quantum CLT")]
struct Cli {
    /// JSON experiment config, or a bare state spec.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated n values, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Per-mode photon cutoff. Its meaning depends on the subcommand.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or output directory for `sweep`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct StateInput {
    /// Density matrix JSON as written by `state build`.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the configured state and write it as JSON.
    State {
        #[command(subcommand)]
        action: StateAction,
    },
    /// `ρ ⊞_η σ`, or `ρ^⊞n` with `--n`.
    Convolve {
        #[command(flatten)]
        input: StateInput,
        /// Second input; defaults to the first.
        #[arg(long)]
        other: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        /// Self-convolution order.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tail_budget: f64,
    },
    /// First and second moments, symplectic spectrum and the Gaussification.
    Gaussify {
        #[command(flatten)]
        input: StateInput,
    },
    /// Distances and relative entropy to a reference (default: the Gaussification).
    Metrics {
        #[command(flatten)]
        input: StateInput,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also evaluate the trace-norm bound through the characteristic function.
        #[arg(long)]
        bound: bool,
    },
    /// SLD and KMB Fisher information, Fisher distance and the log-Sobolev form.
    Fisher {
        #[command(flatten)]
        input: StateInput,
    },
    /// Poincaré gap estimate on `--cutoff` (default: the state's cutoff).
    Poincare {
        #[command(flatten)]
        input: StateInput,
    },
    /// Convergence sweep of `ρ^⊞n` against its Gaussification.
    Sweep {
        /// Zero the wall-time column so the CSV is reproducible byte for byte.
        #[arg(long)]
        deterministic: bool,
    },
    /// `√n |χ_{ρ^⊞n}(z) − χ_G(z)|` from the closed-form power of `χ_ρ`.
    ProbeChi {
        #[command(flatten)]
        input: StateInput,
        #[arg(long, default_value_t = 0.0)]
        z_re: f64,
        #[arg(long, default_value_t = 1.0)]
        z_im: f64,
    },
    /// Run the invariant suite; exits 1 when any invariant fails.
    Check {
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        /// Swap in the faulty beam-splitter generator.
        #[arg(long)]
        inject_fault: bool,
    },
}

#[derive(Subcommand, Debug)]
enum StateAction {
    Build,
}

enum Failure {
    Lab(LabError),
    Invariant(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lab(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lab(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant failure: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Lab(e @ LabError::TailBudgetExceeded { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_TAIL)
        }
        Err(Failure::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => to_stdout(&format!("{text}\n"))?,
    }
    Ok(())
}

/// A closed pipe on stdout (e.g. `| head`) is not an error.
fn to_stdout(text: &str) -> CliResult<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_json(out: Option<&Path>, v: &Value) -> CliResult<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}

fn read_json(path: &Path) -> CliResult<Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// State spec and seed from `--config`: either an experiment config or a bare spec.
fn spec_from_config(cli: &Cli) -> CliResult<(StateSpec, u64)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| LabError::InvalidParameter("give --state or --config".into()))?;
    let v = read_json(path)?;
    let seed_in_file = v.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let spec_value = v.get("state").cloned().unwrap_or(v);
    let spec: StateSpec = serde_json::from_value(spec_value)?;
    Ok((spec, cli.seed.unwrap_or(seed_in_file)))
}

fn load_state(cli: &Cli, input: &StateInput) -> CliResult<DensityMatrix> {
    if let Some(p) = &input.state {
        return Ok(DensityMatrix::from_json(&std::fs::read_to_string(p)?)?);
    }
    let (spec, seed) = spec_from_config(cli)?;
    Ok(spec.build(seed)?)
}

fn load_json_state(path: &Path) -> CliResult<DensityMatrix> {
    Ok(DensityMatrix::from_json(&std::fs::read_to_string(path)?)?)
}

fn state_value(rho: &DensityMatrix) -> CliResult<Value> {
    Ok(serde_json::from_str(&rho.to_json()?)?)
}

fn run(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::State {
            action: StateAction::Build,
        } => {
            let (spec, seed) = spec_from_config(cli)?;
            let mut rho = spec.build(seed)?;
            if let Some(n) = cli.cutoff {
                rho = rho.embed(&FockCutoff::uniform(rho.modes(), n)?)?;
            }
            emit(out, &rho.to_json()?)
        }
        Command::Convolve {
            input,
            other,
            eta,
            n,
            tail_budget,
        } => {
            let rho = load_state(cli, input)?;
            let report = match n {
                Some(n) => {
                    let policy = CutoffPolicy {
                        n_max: cli.cutoff.unwrap_or(CutoffPolicy::default().n_max),
                        tail_budget: *tail_budget,
                    };
                    self_convolve(&rho, *n, &policy)?
                }
                None => {
                    let sigma = match other {
                        Some(p) => load_json_state(p)?,
                        None => rho.clone(),
                    };
                    convolve(&rho, &sigma, *eta)?
                }
            };
            emit(out, &report.to_json()?)
        }
        Command::Gaussify { input } => {
            let rho = load_state(cli, input)?;
            let g = gaussify(&rho)?;
            let spec: Value = serde_json::from_str(&g.spec.to_json()?)?;
            let cut = match cli.cutoff {
                Some(n) => FockCutoff::uniform(rho.modes(), n)?,
                None => rho.cutoff().clone(),
            };
            let state = match g.spec.synthesize(&cut) {
                Ok(s) => state_value(&s)?,
                Err(LabError::UnsupportedFrame(_)) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            emit_json(
                out,
                &json!({
                    "spec": spec,
                    "mu": g.covariance.mu,
                    "state": state,
                }),
            )
        }
        Command::Metrics {
            input,
            reference,
            bound,
        } => {
            let rho = load_state(cli, input)?;
            let sigma = match reference {
                Some(p) => load_json_state(p)?,
                None => {
                    let n = cli.cutoff.unwrap_or(CutoffPolicy::default().n_max);
                    let cut = rho.cutoff().join(&FockCutoff::uniform(rho.modes(), n)?)?;
                    gaussify(&rho)?.spec.synthesize(&cut)?
                }
            };
            let re = relative_entropy_detailed(&rho, &sigma)?;
            let mut v = json!({
                "trace": trace_distance(&rho, &sigma)?,
                "hs": hs_distance(&rho, &sigma)?,
                "relent": if re.value.is_finite() { json!(re.value) } else { json!("inf") },
                "outside_support": re.outside_support,
            });
            if *bound {
                let (a, b, joint) = qclt::metrics::align(&rho, &sigma)?;
                let diff = ModeOperator::custom(joint, a - b, "difference")?;
                let (_, op) = bound_operand(&diff)?;
                let grid = adapted_grid(&op, QuadratureRule::GaussLegendre, 1e-8)?;
                let (lhs, rhs) = trace_norm_charfn_bound(&diff, &grid)?;
                v["bound"] = json!({ "trace_norm_sq": lhs, "charfn_side": rhs });
            }
            emit_json(out, &v)
        }
        Command::Fisher { input } => {
            let rho = load_state(cli, input)?;
            let fd = fisher_distance(&rho)?;
            let betas: Vec<f64> = fd.mu.iter().map(|&mu| beta_from_nu(2.0 * mu)).collect();
            let kmb = kmb_fisher(&rho);
            let finite_betas = betas.iter().all(|b| b.is_finite() && *b > 0.0);
            let lsi = if finite_betas {
                let beta_min = betas.iter().copied().fold(f64::INFINITY, f64::min);
                json!({
                    "betas": betas,
                    "dirichlet": lsi_dirichlet(&rho, &betas)?,
                    "alpha": lsi_alpha(&betas, rho.modes())?,
                    "fisher_constant": lsi_fisher_constant(beta_min),
                })
            } else {
                Value::Null
            };
            emit_json(
                out,
                &json!({
                    "fisher": fd.fisher,
                    "fisher_total": fd.fisher.iter().sum::<f64>(),
                    "mu": fd.mu,
                    "J": fd.total,
                    "J_per_mode": fd.per_mode,
                    "J_norm_form": fd.norm_form,
                    "kmb": if kmb.is_finite() { json!(kmb) } else { json!("inf") },
                    "lsi": lsi,
                }),
            )
        }
        Command::Poincare { input } => {
            let rho = load_state(cli, input)?;
            let cut = match cli.cutoff {
                Some(n) => FockCutoff::uniform(rho.modes(), n)?,
                None => rho.cutoff().clone(),
            };
            emit(out, &estimate_gap(&rho, &cut)?.to_json()?)
        }
        Command::Sweep { deterministic } => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| LabError::InvalidParameter("sweep needs --config".into()))?;
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(ns) = &cli.n_list {
                cfg.n_list = ns.clone();
            }
            if let Some(n) = cli.cutoff {
                cfg.policy.n_max = n;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(dir) = &cli.out {
                cfg.outputs = OutputPaths::in_dir(dir);
            }
            if *deterministic {
                cfg.timing = false;
            }
            cfg.validate()?;
            let outcome = run_sweep(&cfg)?;
            write_outputs(&cfg, &outcome)?;
            if cfg.outputs.csv.is_none() {
                to_stdout(&csv_string(&outcome.records)?)?;
            }
            if let Some(a) = &outcome.aborted {
                return Err(LabError::TailBudgetExceeded {
                    step: a.step,
                    discarded: a.discarded,
                    budget: a.budget,
                }
                .into());
            }
            Ok(())
        }
        Command::ProbeChi { input, z_re, z_im } => {
            let rho = load_state(cli, input)?;
            let ns = cli.n_list.clone().unwrap_or_else(|| vec![1, 4, 16, 64, 256, 1024]);
            let pts = chi_rate_probe(&rho, &ns, c(*z_re, *z_im))?;
            let mut text = String::from("n,re,im,scaled\n");
            for p in &pts {
                text.push_str(&format!("{},{},{},{}\n", p.n, p.re, p.im, p.scaled));
            }
            emit(out, text.trim_end())
        }
        Command::Check {
            sizes,
            samples,
            inject_fault,
        } => {
            let opts = SuiteOptions {
                seed: cli.seed.unwrap_or(0),
                sizes: sizes.clone(),
                samples: *samples,
                variant: if *inject_fault {
                    GeneratorVariant::SymmetricFault
                } else {
                    GeneratorVariant::Standard
                },
            };
            let report = run_invariant_suite_with(&opts)?;
            emit(out, &report.to_json()?)?;
            for r in &report.results {
                eprintln!(
                    "{} {} (max violation {:.3e}, tolerance {:.1e})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_violation,
                    r.tolerance
                );
            }
            if report.passed {
                Ok(())
            } else {
                let names: Vec<&str> = report.failures().map(|r| r.name.as_str()).collect();
                Err(Failure::Invariant(names.join(", ")))
            }
        }
    }
}

//! Experiment harness: state specs, convergence sweeps, slope fits, the χ probe,
//! the invariant suite and CSV/SVG/JSON output.

pub mod config;
pub mod fit;
pub mod output;
pub mod probe;
pub mod suite;
pub mod sweep;

pub use config::{Amplitude, ExperimentConfig, GridConfig, Metric, MixtureComponent, OutputPaths, StateSpec};
pub use fit::{fit_power_law, fit_slope, SlopeFit, MIN_FIT_N};
pub use output::{csv_string, render_svg, sweep_report, write_csv, write_outputs, CSV_HEADER};
pub use probe::{chi_of_power, chi_rate_probe, ChiProbePoint};
pub use suite::{run_invariant_suite, run_invariant_suite_with, InvariantResult, SuiteOptions, SuiteReport};
pub use sweep::{run_sweep, run_sweep_with, ConvergenceRecord, SweepAbort, SweepOutcome};

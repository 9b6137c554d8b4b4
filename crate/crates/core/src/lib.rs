//! Fock-space numerics for the bosonic quantum central limit theorem.
//!
//! States live on truncated multimode Fock spaces ([`fock`]). Quantum convolution
//! is computed exactly inside photon-number blocks ([`convolve`]), and the
//! resulting states are compared with their Gaussifications ([`gaussian`]) through
//! distances, entropies and Fisher information ([`metrics`], [`fisher`]).

pub mod charfn;
pub mod convolve;
pub mod error;
pub mod fisher;
pub mod fock;
pub mod gaussian;
pub mod lab;
pub mod linalg;
pub mod metrics;
pub mod poincare;
pub mod quadrature;
pub mod random;

#[cfg(test)]
mod proptests;

pub use charfn::{char_fn, covariance, moment, plancherel_hs_norm, wigner, CharSample, CovarianceData, FockOperator};
pub use convolve::{
    beam_splitter, commutator_compat_check, convolve, self_convolve, BeamSplitterBlocks, ConvolutionReport, Convolver,
    CutoffPolicy, GeneratorVariant,
};
pub use error::{LabError, Result};
pub use fisher::{
    fisher_distance, kmb_fisher, lsi_alpha, lsi_dirichlet, pi_apply, sld_fisher, sld_inner, sld_score, KernelFn,
    LadderBoundary, ScoreOperator,
};
pub use fock::{
    annihilation, build_pure_state, creation, displacement, expectation, number, partial_trace, tensor, DensityMatrix,
    FockCutoff, ModeOperator, OperatorLabel,
};
pub use gaussian::{gaussian_char_fn, gaussify, thermal_state, williamson, GaussianSpec, SymplecticForm};
pub use linalg::{CMatrix, RMatrix, C64};
pub use metrics::{hs_distance, relative_entropy, trace_distance, trace_norm_charfn_bound, SpectralDecomp};
pub use poincare::{estimate_gap, gradient_norm, passive_invariance_check, GapEstimate};
pub use quadrature::{PhaseGrid, QuadratureRule};

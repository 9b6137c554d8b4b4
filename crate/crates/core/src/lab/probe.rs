use serde::Serialize;

use crate::charfn::char_fn;
use crate::error::{LabError, Result};
use crate::fock::DensityMatrix;
use crate::gaussian::{gaussian_char_fn, gaussify};
use crate::linalg::{c, C64};

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ChiProbePoint {
    pub n: usize,
    pub re: f64,
    pub im: f64,
    /// `√n |χ_{ρ^⊞n}(z) − χ_{ρ_G}(z)|`.
    pub scaled: f64,
}

/// `χ_{ρ^⊞n}(z) = χ_ρ(z/√n)^n`, from the factorization of `χ` under convolution.
pub fn chi_of_power(rho: &DensityMatrix, z: C64, n: usize) -> Result<C64> {
    if n == 0 {
        return Err(LabError::InvalidParameter("n must be at least 1".into()));
    }
    let s = (n as f64).sqrt();
    let v = char_fn(rho, &[z / c(s, 0.0)])?;
    Ok(v.powu(n as u32))
}

/// Scaled distance of `χ_{ρ^⊞n}(z)` from the Gaussification for each `n`.
pub fn chi_rate_probe(rho: &DensityMatrix, n_list: &[usize], z: C64) -> Result<Vec<ChiProbePoint>> {
    if rho.modes() != 1 {
        return Err(LabError::InvalidParameter("the χ probe is single-mode".into()));
    }
    let target = gaussian_char_fn(&gaussify(rho)?.spec, &[z])?;
    n_list
        .iter()
        .map(|&n| {
            let v = chi_of_power(rho, z, n)?;
            Ok(ChiProbePoint {
                n,
                re: v.re,
                im: v.im,
                scaled: (n as f64).sqrt() * (v - target).norm(),
            })
        })
        .collect()
}

//! Tensorized phase-space quadrature on the box `[-R, R]^{2m}`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    GaussLegendre,
    Trapezoid,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Product grid over `2m` real coordinates. Node `k` of mode `j` is
/// `x_{2j} + i x_{2j+1}`.
#[derive(Clone, Debug)]
pub struct PhaseGrid {
    modes: usize,
    radius: f64,
    rule: QuadratureRule,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(modes: usize, radius: f64, points_per_axis: usize, rule: QuadratureRule) -> Result<Self> {
        if modes == 0 {
            return Err(LabError::InvalidParameter("phase grid needs at least one mode".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::InvalidParameter(format!("grid radius {radius} must be positive")));
        }
        if points_per_axis < 2 {
            return Err(LabError::InvalidParameter("need at least two points per axis".into()));
        }
        let (nodes, weights) = match rule {
            QuadratureRule::GaussLegendre => {
                let (x, w) = gauss_legendre(points_per_axis);
                (
                    x.iter().map(|t| t * radius).collect(),
                    w.iter().map(|t| t * radius).collect(),
                )
            }
            QuadratureRule::Trapezoid => {
                let h = 2.0 * radius / (points_per_axis - 1) as f64;
                let x = (0..points_per_axis).map(|k| -radius + h * k as f64).collect();
                let w = (0..points_per_axis)
                    .map(|k| if k == 0 || k + 1 == points_per_axis { 0.5 * h } else { h })
                    .collect();
                (x, w)
            }
        };
        Ok(Self {
            modes,
            radius,
            rule,
            nodes,
            weights,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn points_per_axis(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len().pow(2 * self.modes as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node and weight at flat position `k`; the last coordinate varies fastest.
    pub fn node(&self, mut k: usize) -> (Vec<C64>, f64) {
        let p = self.nodes.len();
        let mut coords = vec![0.0; 2 * self.modes];
        let mut w = 1.0;
        for slot in (0..2 * self.modes).rev() {
            let i = k % p;
            k /= p;
            coords[slot] = self.nodes[i];
            w *= self.weights[i];
        }
        let z = coords.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        (z, w)
    }

    /// Sum of `w(z) f(z)` in a fixed order.
    pub fn integrate<F: FnMut(&[C64]) -> C64>(&self, mut f: F) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.len() {
            let (z, w) = self.node(k);
            acc += f(&z) * w;
        }
        acc
    }

    /// Points on the faces of the box, `per_face` samples per free axis.
    pub fn boundary_points(&self, per_face: usize) -> Vec<Vec<C64>> {
        boundary_points(self.modes, self.radius, per_face)
    }
}

pub(crate) fn boundary_points(modes: usize, radius: f64, per_face: usize) -> Vec<Vec<C64>> {
    let dim = 2 * modes;
    let per_face = per_face.max(2);
    let ticks: Vec<f64> = (0..per_face)
        .map(|k| -radius + 2.0 * radius * k as f64 / (per_face - 1) as f64)
        .collect();
    let free = dim - 1;
    let count = per_face.pow(free as u32);
    let mut out = Vec::with_capacity(2 * dim * count);
    for fixed in 0..dim {
        for side in [-radius, radius] {
            for mut k in 0..count {
                let mut coords = vec![0.0; dim];
                for slot in (0..dim).rev() {
                    if slot == fixed {
                        coords[slot] = side;
                    } else {
                        coords[slot] = ticks[k % per_face];
                        k /= per_face;
                    }
                }
                out.push(coords.chunks(2).map(|c| C64::new(c[0], c[1])).collect());
            }
        }
    }
    out
}

/// Smallest radius in `start, start + step, …` (up to `max`) at which `|f|`
/// on the box boundary drops below `tol`.
pub fn adapt_radius<F: Fn(&[C64]) -> f64>(
    modes: usize,
    f: F,
    tol: f64,
    start: f64,
    step: f64,
    max: f64,
) -> Result<(f64, f64)> {
    let per_face = if modes == 1 { 33 } else { 7 };
    let mut r = start;
    loop {
        let b = boundary_points(modes, r, per_face)
            .iter()
            .map(|z| f(z))
            .fold(0.0, f64::max);
        if b < tol {
            return Ok((r, b));
        }
        if r + step > max {
            return Err(LabError::GridTooSmall { radius: r, boundary: b });
        }
        r += step;
    }
}

//! Penalty functions and their proximal operators.
//!
//! The Cauchy penalty `ψ(x) = −log(γ / (γ² + x²))` is the negative log of a
//! Cauchy density with scale `γ`. Its proximal map
//!
//! ```text
//! prox(x) = argmin_u (x − u)² / (2μ) + ψ(u)
//! ```
//!
//! is the real root of `u³ − x·u² + (γ² + 2μ)·u − x·γ² = 0`, obtained in
//! closed form with Cardano's formula. When `γ ≥ √μ / 2` the subproblem is
//! strictly convex and that root is unique.
//!
//! L1 (soft threshold) and isotropic TV (Chambolle dual projection) are
//! provided as reference penalties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::image::{Image, Shape};

/// Default number of inner dual iterations for the TV proximal map.
pub const DEFAULT_TV_INNER_ITERS: usize = 40;

/// Dual step of the TV projection iteration; must stay below 1/4.
const TV_DUAL_STEP: f64 = 0.249;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Cauchy,
    L1,
    Tv,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Cauchy => "cauchy",
            PenaltyKind::L1 => "l1",
            PenaltyKind::Tv => "tv",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cauchy" => Ok(PenaltyKind::Cauchy),
            "l1" => Ok(PenaltyKind::L1),
            "tv" => Ok(PenaltyKind::Tv),
            other => Err(param(format!("unknown penalty '{other}'"))),
        }
    }
}

/// Penalty selection and parameters.
///
/// `gamma` is only read for [`PenaltyKind::Cauchy`]; `weight` (λ) only for
/// L1 and TV. The Cauchy cost carries no separate multiplier: its balance
/// against the data term comes from the noise level in the fidelity term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub gamma: f64,
    pub weight: f64,
    pub tv_inner_iters: usize,
}

impl PenaltyConfig {
    pub fn cauchy(gamma: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::Cauchy,
            gamma,
            weight: 0.0,
            tv_inner_iters: DEFAULT_TV_INNER_ITERS,
        }
    }

    pub fn l1(weight: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::L1,
            gamma: 1.0,
            weight,
            tv_inner_iters: DEFAULT_TV_INNER_ITERS,
        }
    }

    pub fn tv(weight: f64) -> Self {
        PenaltyConfig {
            kind: PenaltyKind::Tv,
            gamma: 1.0,
            weight,
            tv_inner_iters: DEFAULT_TV_INNER_ITERS,
        }
    }

    pub fn with_tv_inner_iters(mut self, iters: usize) -> Self {
        self.tv_inner_iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PenaltyKind::Cauchy => check_positive("gamma", self.gamma),
            PenaltyKind::L1 | PenaltyKind::Tv => {
                if !(self.weight >= 0.0 && self.weight.is_finite()) {
                    return Err(param(format!(
                        "penalty weight must be finite and >= 0, got {}",
                        self.weight
                    )));
                }
                if self.tv_inner_iters == 0 {
                    return Err(param("tv_inner_iters must be >= 1"));
                }
                Ok(())
            }
        }
    }

    /// Proximal map of this penalty with step `mu`.
    pub fn prox(&self, img: &Image, mu: f64) -> Result<Image> {
        self.validate()?;
        match self.kind {
            PenaltyKind::Cauchy => prox_cauchy(img, self.gamma, mu),
            PenaltyKind::L1 => {
                check_positive("mu", mu)?;
                prox_l1(img, self.weight * mu)
            }
            PenaltyKind::Tv => prox_tv(img, self.weight, mu, self.tv_inner_iters),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// `−log(γ / (γ² + x²))`
pub fn cauchy_penalty(x: f64, gamma: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    Ok((gamma * gamma + x * x).ln() - gamma.ln())
}

/// Derivative of [`cauchy_penalty`] in `x`.
pub fn cauchy_gradient(x: f64, gamma: f64) -> f64 {
    2.0 * x / (gamma * gamma + x * x)
}

/// Objective minimised by the Cauchy proximal map, up to the constant `−log γ`.
fn cauchy_prox_objective(u: f64, x: f64, gamma: f64, mu: f64) -> f64 {
    (x - u) * (x - u) / (2.0 * mu) + (gamma * gamma + u * u).ln()
}

/// Closed-form Cauchy proximal map of a scalar.
///
/// With `b = γ² + 2μ` the depressed cubic has coefficients
/// `p = b − x²/3`, `q = xγ² + 2x³/27 − x·b/3`, and the root is
/// `z = x/3 + ∛(q/2 + √D) + ∛(q/2 − √D)` with `D = p³/27 + q²/4`.
///
/// `D < 0` can only happen when `γ < √μ / 2`. In that case the three real
/// roots come from the trigonometric form and the one with the lowest prox
/// objective is returned.
pub fn prox_cauchy_scalar(x: f64, gamma: f64, mu: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Input(format!("prox input must be finite, got {x}")));
    }
    check_positive("gamma", gamma)?;
    check_positive("mu", mu)?;
    Ok(cardano_root(x, gamma, mu))
}

fn cardano_root(x: f64, gamma: f64, mu: f64) -> f64 {
    let g2 = gamma * gamma;
    let b = g2 + 2.0 * mu;
    let p = b - x * x / 3.0;
    let q = x * g2 + 2.0 * x * x * x / 27.0 - x * b / 3.0;
    let disc = p * p * p / 27.0 + q * q / 4.0;

    let z = if disc >= 0.0 {
        let sd = disc.sqrt();
        let s = (q / 2.0 + sd).cbrt();
        let t = (q / 2.0 - sd).cbrt();
        x / 3.0 + s + t
    } else {
        // p < 0 here. Roots of w³ + p·w − q = 0, shifted back by x/3.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((-3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| x / 3.0 + m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .min_by(|a, b| {
                cauchy_prox_objective(*a, x, gamma, mu)
                    .total_cmp(&cauchy_prox_objective(*b, x, gamma, mu))
            })
            .unwrap_or(x)
    };
    polish(z, x, g2, b)
}

/// One Newton step on the cubic, kept only if it lowers the residual.
fn polish(z: f64, x: f64, g2: f64, b: f64) -> f64 {
    let f = |u: f64| ((u - x) * u + b) * u - x * g2;
    let df = 3.0 * z * z - 2.0 * x * z + b;
    if df == 0.0 {
        return z;
    }
    let refined = z - f(z) / df;
    if refined.is_finite() && f(refined).abs() < f(z).abs() {
        refined
    } else {
        z
    }
}

/// Elementwise Cauchy proximal map.
pub fn prox_cauchy(img: &Image, gamma: f64, mu: f64) -> Result<Image> {
    check_positive("gamma", gamma)?;
    check_positive("mu", mu)?;
    if let Some(bad) = img.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "prox input must be finite, got {bad}"
        )));
    }
    let data: Vec<f64> = img
        .as_slice()
        .par_iter()
        .map(|&x| cardano_root(x, gamma, mu))
        .collect();
    Ok(Image::from_vec(img.shape(), data))
}

/// Slow reference for [`prox_cauchy_scalar`]: golden-section search on the
/// prox objective between 0 and `x`. Only meaningful when `γ ≥ √μ / 2`,
/// where the objective is unimodal.
pub fn prox_cauchy_reference(x: f64, gamma: f64, mu: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Input(format!("prox input must be finite, got {x}")));
    }
    check_positive("gamma", gamma)?;
    check_positive("mu", mu)?;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |u: f64| cauchy_prox_objective(u, x, gamma, mu);
    let (mut lo, mut hi) = (x.min(0.0), x.max(0.0));
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 * x.abs().max(1.0) {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Soft threshold `sign(x)·max(|x| − threshold, 0)`.
pub fn prox_l1_scalar(x: f64, threshold: f64) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(param(format!("threshold must be >= 0, got {threshold}")));
    }
    Ok(soft(x, threshold))
}

fn soft(x: f64, threshold: f64) -> f64 {
    x.signum() * (x.abs() - threshold).max(0.0)
}

pub fn prox_l1(img: &Image, threshold: f64) -> Result<Image> {
    if !(threshold >= 0.0) {
        return Err(param(format!("threshold must be >= 0, got {threshold}")));
    }
    Ok(img.map(|x| soft(x, threshold)))
}

/// Forward differences with a zero difference past the last row/column.
fn gradient(u: &Image) -> (Image, Image) {
    let Shape { rows, cols } = u.shape();
    let gx = Image::from_fn(u.shape(), |r, c| {
        if c + 1 < cols {
            u[(r, c + 1)] - u[(r, c)]
        } else {
            0.0
        }
    });
    let gy = Image::from_fn(u.shape(), |r, c| {
        if r + 1 < rows {
            u[(r + 1, c)] - u[(r, c)]
        } else {
            0.0
        }
    });
    (gx, gy)
}

/// Negative adjoint of [`gradient`].
fn divergence(px: &Image, py: &Image) -> Image {
    let Shape { rows, cols } = px.shape();
    Image::from_fn(px.shape(), |r, c| {
        let dx = if cols == 1 {
            0.0
        } else if c == 0 {
            px[(r, c)]
        } else if c + 1 == cols {
            -px[(r, c - 1)]
        } else {
            px[(r, c)] - px[(r, c - 1)]
        };
        let dy = if rows == 1 {
            0.0
        } else if r == 0 {
            py[(r, c)]
        } else if r + 1 == rows {
            -py[(r - 1, c)]
        } else {
            py[(r, c)] - py[(r - 1, c)]
        };
        dx + dy
    })
}

/// Isotropic discrete total variation.
pub fn tv_seminorm(u: &Image) -> f64 {
    let (gx, gy) = gradient(u);
    gx.as_slice()
        .iter()
        .zip(gy.as_slice())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .sum()
}

/// `‖img − u‖² / (2μ) + weight·TV(u)`
pub fn tv_prox_objective(img: &Image, u: &Image, weight: f64, mu: f64) -> f64 {
    let fid: f64 = img
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    fid / (2.0 * mu) + weight * tv_seminorm(u)
}

/// Approximate TV proximal map by projected gradient on the dual.
///
/// Returns the primal iterate with the lowest prox objective seen over the
/// `inner_iters` dual steps, so more iterations never give a worse result.
pub fn prox_tv(img: &Image, weight: f64, mu: f64, inner_iters: usize) -> Result<Image> {
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(param(format!("tv weight must be >= 0, got {weight}")));
    }
    check_positive("mu", mu)?;
    if inner_iters == 0 {
        return Err(param("tv inner iterations must be >= 1"));
    }
    if weight == 0.0 {
        return Ok(img.clone());
    }
    let lambda = weight * mu;
    let shape = img.shape();
    let mut px = Image::zeros(shape);
    let mut py = Image::zeros(shape);

    let mut best = img.clone();
    let mut best_obj = tv_prox_objective(img, img, weight, mu);

    for _ in 0..inner_iters {
        let div = divergence(&px, &py);
        let g = div.zip_map(img, |d, f| d - f / lambda)?;
        let (gx, gy) = gradient(&g);
        for i in 0..shape.len() {
            let nx = px.as_slice()[i] + TV_DUAL_STEP * gx.as_slice()[i];
            let ny = py.as_slice()[i] + TV_DUAL_STEP * gy.as_slice()[i];
            let norm = (nx * nx + ny * ny).sqrt().max(1.0);
            px.as_mut_slice()[i] = nx / norm;
            py.as_mut_slice()[i] = ny / norm;
        }
        let u = img.zip_map(&divergence(&px, &py), |f, d| f - lambda * d)?;
        let obj = tv_prox_objective(img, &u, weight, mu);
        if obj < best_obj {
            best_obj = obj;
            best = u;
        }
    }
    Ok(best)
}

/// Penalty value summed over all pixels.
pub fn penalty_value(img: &Image, cfg: &PenaltyConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(match cfg.kind {
        PenaltyKind::Cauchy => {
            let g2 = cfg.gamma * cfg.gamma;
            let lg = cfg.gamma.ln();
            img.as_slice().iter().map(|x| (g2 + x * x).ln() - lg).sum()
        }
        PenaltyKind::L1 => cfg.weight * img.as_slice().iter().map(|x| x.abs()).sum::<f64>(),
        PenaltyKind::Tv => cfg.weight * tv_seminorm(img),
    })
}

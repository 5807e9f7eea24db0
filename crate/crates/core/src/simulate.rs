//! Seeded synthetic data: phantoms, degradations, speckle and wake scenes.
//!
//! Every generator is a pure function of its arguments; the same descriptor
//! and seed always reproduce the same samples bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::image::{Image, Shape};
use crate::operators::{blur_operator, downsample_operator, Kernel, LinearOperator};

/// Smallest accepted scene edge length.
pub const MIN_SCENE_SIZE: usize = 32;

/// Number of wake hypotheses and their canonical order.
pub const WAKE_ARMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    PiecewiseSmooth,
    PointScatterers,
    WakeScene,
}

/// Wake geometry; contrasts follow the canonical order turbulent,
/// narrow-V port, narrow-V starboard, Kelvin port, Kelvin starboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WakeParams {
    /// Normal angle of the turbulent wake line, degrees in [0, 180).
    pub turbulent_theta: f64,
    /// Signed distance of the ship from the image centre along the normal.
    pub turbulent_r: f64,
    pub contrasts: [f64; WAKE_ARMS],
    /// Looks of the gamma sea texture.
    pub sea_looks: f64,
    /// Rendered line width in pixels.
    pub line_width: f64,
    pub narrow_v_half_angle: f64,
    pub kelvin_half_angle: f64,
}

impl Default for WakeParams {
    fn default() -> Self {
        WakeParams {
            turbulent_theta: 60.0,
            turbulent_r: 0.0,
            contrasts: [0.0; WAKE_ARMS],
            sea_looks: 4.0,
            line_width: 2.0,
            narrow_v_half_angle: 3.0,
            kelvin_half_angle: 19.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub kind: SceneKind,
    pub size: usize,
    pub seed: u64,
    /// Bright points for `point_scatterers`.
    #[serde(default = "default_scatterers")]
    pub scatterers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wake: Option<WakeParams>,
}

fn default_scatterers() -> usize {
    20
}

impl SceneDescriptor {
    pub fn new(kind: SceneKind, size: usize, seed: u64) -> Self {
        SceneDescriptor {
            kind,
            size,
            seed,
            scatterers: default_scatterers(),
            wake: (kind == SceneKind::WakeScene).then(WakeParams::default),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < MIN_SCENE_SIZE {
            return Err(param(format!(
                "scene size must be >= {MIN_SCENE_SIZE}, got {}",
                self.size
            )));
        }
        match (&self.kind, &self.wake) {
            (SceneKind::WakeScene, None) => Err(param("wake scene needs wake parameters")),
            (SceneKind::WakeScene, Some(w)) => {
                if w.contrasts.iter().any(|c| !(*c >= 0.0)) {
                    return Err(param("wake contrasts must be >= 0"));
                }
                if w.contrasts[0] >= 1.0 {
                    return Err(param("turbulent contrast must be < 1"));
                }
                if !(0.0..180.0).contains(&w.turbulent_theta) {
                    return Err(param("turbulent angle must lie in [0, 180)"));
                }
                if !(w.sea_looks > 0.0 && w.line_width > 0.0) {
                    return Err(param("sea looks and line width must be > 0"));
                }
                Ok(())
            }
            (_, Some(_)) => Err(param("wake parameters given for a non-wake scene")),
            (SceneKind::PointScatterers, None) => {
                if self.scatterers > self.size * self.size / 4 {
                    return Err(param("too many scatterers for the scene size"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Ground-truth visibility, one flag per wake hypothesis.
    pub fn truth_flags(&self) -> Option<[bool; WAKE_ARMS]> {
        self.wake.as_ref().map(|w| w.contrasts.map(|c| c > 0.0))
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.size, self.size)
    }
}

/// Deterministic test image with values in `[0, 1]`.
pub fn gen_phantom(desc: &SceneDescriptor) -> Result<Image> {
    desc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(desc.seed);
    Ok(match desc.kind {
        SceneKind::PiecewiseSmooth => piecewise_smooth(desc.size, &mut rng),
        SceneKind::PointScatterers => point_scatterers(desc.size, desc.scatterers, &mut rng),
        SceneKind::WakeScene => gen_wake_scene(desc)?.0,
    })
}

fn piecewise_smooth(n: usize, rng: &mut ChaCha8Rng) -> Image {
    let nf = n as f64;
    // low-frequency background
    let (fx, fy): (f64, f64) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let (px, py): (f64, f64) = (
        rng.random_range(0.0..std::f64::consts::TAU),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let mut img = Image::from_fn(Shape::new(n, n), |r, c| {
        let x = c as f64 / nf;
        let y = r as f64 / nf;
        0.12 + 0.05 * (2.0 * std::f64::consts::PI * fx * x + px).sin()
            + 0.04 * (2.0 * std::f64::consts::PI * fy * y + py).cos()
    });

    let margin = nf * 0.08;
    let shapes = 6 + (n / 32);
    for i in 0..shapes {
        let cx = rng.random_range(margin + nf * 0.1..nf - margin - nf * 0.1);
        let cy = rng.random_range(margin + nf * 0.1..nf - margin - nf * 0.1);
        let a = rng.random_range(nf * 0.04..nf * 0.16);
        let b = rng.random_range(nf * 0.04..nf * 0.16);
        let level = rng.random_range(0.3..0.95);
        let slope = rng.random_range(-0.15..0.15);
        let is_rect = i % 2 == 0;
        for r in 0..n {
            for c in 0..n {
                let dx = (c as f64 - cx) / a;
                let dy = (r as f64 - cy) / b;
                let inside = if is_rect {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                } else {
                    dx * dx + dy * dy <= 1.0
                };
                if inside {
                    img[(r, c)] = level + slope * dx;
                }
            }
        }
    }
    img.map(|v| v.clamp(0.02, 1.0))
}

fn point_scatterers(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Image {
    let mut img = Image::from_fn(Shape::new(n, n), |_, _| rng.random_range(0.0..0.05));
    let margin = (n / 8).max(1);
    let mut placed = 0;
    while placed < k {
        let r = rng.random_range(margin..n - margin);
        let c = rng.random_range(margin..n - margin);
        if img[(r, c)] > 0.9 {
            continue;
        }
        img[(r, c)] = rng.random_range(0.92..=1.0);
        placed += 1;
    }
    img
}

/// Blur, decimate and add white Gaussian noise at the requested BSNR.
/// Returns the low-resolution image and the noise standard deviation used.
pub fn degrade_sr(
    x: &Image,
    psf: &Kernel,
    factor: usize,
    bsnr_db: f64,
    seed: u64,
) -> Result<(Image, f64)> {
    let blur = blur_operator(psf.clone(), x.shape())?;
    let down = downsample_operator(factor, x.shape())?;
    let clean = down.apply(&blur.apply(x)?)?;
    let sigma = if bsnr_db.is_infinite() && bsnr_db > 0.0 {
        0.0
    } else {
        (clean.variance() / 10f64.powf(bsnr_db / 10.0)).sqrt()
    };
    Ok((awgn(&clean, sigma, seed)?, sigma))
}

/// Unit-mean gamma speckle with `looks` looks (variance `1/looks`).
pub fn gen_gamma_speckle(looks: f64, shape: Shape, seed: u64) -> Result<Image> {
    if !(looks > 0.0 && looks.is_finite()) {
        return Err(param(format!("looks must be > 0, got {looks}")));
    }
    let dist = Gamma::new(looks, 1.0 / looks).map_err(|e| param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| dist.sample(&mut rng)).collect();
    Ok(Image::from_vec(shape, data))
}

/// Unit-mean log-normal speckle with variance `1/looks`.
pub fn gen_lognormal_speckle(looks: f64, shape: Shape, seed: u64) -> Result<Image> {
    if !(looks > 0.0 && looks.is_finite()) {
        return Err(param(format!("looks must be > 0, got {looks}")));
    }
    let var_log = (1.0 + 1.0 / looks).ln();
    let dist = LogNormal::new(-0.5 * var_log, var_log.sqrt()).map_err(|e| param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| dist.sample(&mut rng)).collect();
    Ok(Image::from_vec(shape, data))
}

/// Multiplicative noise model `Y = X·V`.
pub fn apply_speckle(x: &Image, v: &Image) -> Result<Image> {
    x.zip_map(v, |a, b| a * b)
}

/// Adds i.i.d. `N(0, sigma²)` noise.
pub fn awgn(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(param(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(img.map(|v| v + dist.sample(&mut rng)))
}

/// Ray from the ship along `dir` (unit, image coordinates with y up).
struct Ray {
    origin: (f64, f64),
    dir: (f64, f64),
}

impl Ray {
    /// Anti-aliased coverage of a pixel centred at `(x, y)`.
    fn coverage(&self, x: f64, y: f64, width: f64) -> f64 {
        let (dx, dy) = (x - self.origin.0, y - self.origin.1);
        let along = dx * self.dir.0 + dy * self.dir.1;
        if along < 0.0 {
            return 0.0;
        }
        let across = (dx * self.dir.1 - dy * self.dir.0).abs();
        (width / 2.0 + 0.5 - across).clamp(0.0, 1.0)
    }
}

/// Noise-free multiplicative structure map of the wake (1 away from wakes).
pub fn wake_structure_map(size: usize, w: &WakeParams) -> Image {
    let theta = w.turbulent_theta.to_radians();
    let normal = (theta.cos(), theta.sin());
    // the wake trails in the direction (-sin θ, cos θ)
    let origin = (w.turbulent_r * normal.0, w.turbulent_r * normal.1);
    let offsets = [
        0.0,
        w.narrow_v_half_angle,
        -w.narrow_v_half_angle,
        w.kelvin_half_angle,
        -w.kelvin_half_angle,
    ];
    let rays: Vec<(Ray, f64)> = offsets
        .iter()
        .zip(&w.contrasts)
        .filter(|(_, c)| **c > 0.0)
        .map(|(off, c)| {
            let a = theta + off.to_radians();
            let sign = if *off == 0.0 { -1.0 } else { 1.0 };
            (
                Ray {
                    origin,
                    dir: (-a.sin(), a.cos()),
                },
                sign * c,
            )
        })
        .collect();
    let half = (size as f64 - 1.0) / 2.0;
    Image::from_fn(Shape::new(size, size), |r, c| {
        let x = c as f64 - half;
        let y = half - r as f64;
        let mut m = 1.0;
        for (ray, signed) in &rays {
            let cov = ray.coverage(x, y, w.line_width);
            if cov > 0.0 {
                m *= 1.0 + signed * cov;
            }
        }
        m
    })
}

/// Wake scene: gamma sea texture times the wake structure map, scaled to
/// `[0, 1]`. Returns the image and the ground-truth visibility flags.
pub fn gen_wake_scene(desc: &SceneDescriptor) -> Result<(Image, [bool; WAKE_ARMS])> {
    desc.validate()?;
    let w = desc
        .wake
        .as_ref()
        .ok_or_else(|| param("wake scene needs wake parameters"))?;
    let sea = gen_gamma_speckle(w.sea_looks, desc.shape(), desc.seed)?;
    let structure = wake_structure_map(desc.size, w);
    let scene = apply_speckle(&sea, &structure)?;
    let peak = scene.max();
    let truth = desc.truth_flags().expect("validated wake descriptor");
    Ok((scene.scale(1.0 / peak), truth))
}

//! Linear operators with a uniform apply/adjoint contract.
//!
//! Every operator maps an [`Image`] of `in_shape()` to one of `out_shape()`
//! and exposes its exact adjoint. Flat data vectors are `n × 1` images.

mod blur;
mod matrix;
mod radon;
mod sampling;
mod wavelet;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_shape, Error, Result};
use crate::image::{Image, Shape};

pub use blur::{blur_operator, gaussian_psf, BlurOperator, Kernel};
pub use matrix::{matrix_operator, random_measurement_operator, DenseMatrix, MatrixOperator};
pub use radon::{
    backproject, fbp, radon, ram_lak_filter, FbpOperator, RadonFilter, RadonGeometry, RadonOperator,
};
pub use sampling::{downsample_operator, DownsampleOperator};
pub use wavelet::{
    dwt2, dwt2_with, idwt2, DetailBands, Subbands, Wavelet, WaveletOperator, DEFAULT_LEVELS,
};

pub trait LinearOperator: Send + Sync {
    fn in_shape(&self) -> Shape;
    fn out_shape(&self) -> Shape;
    fn apply(&self, x: &Image) -> Result<Image>;
    fn adjoint(&self, y: &Image) -> Result<Image>;

    fn name(&self) -> &str {
        "operator"
    }
}

/// Shared handle used wherever operators are composed or stored.
pub type OperatorRef = Arc<dyn LinearOperator>;

pub(crate) fn check_in(op: &dyn LinearOperator, x: &Image) -> Result<()> {
    check_shape("operator input", op.in_shape(), x.shape())
}

pub(crate) fn check_out(op: &dyn LinearOperator, y: &Image) -> Result<()> {
    check_shape("operator adjoint input", op.out_shape(), y.shape())
}

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    shape: Shape,
}

impl Identity {
    pub fn new(shape: Shape) -> Self {
        Identity { shape }
    }
}

impl LinearOperator for Identity {
    fn in_shape(&self) -> Shape {
        self.shape
    }

    fn out_shape(&self) -> Shape {
        self.shape
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        Ok(x.clone())
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        Ok(y.clone())
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// `x ↦ k·x`
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    shape: Shape,
    factor: f64,
}

impl Scaled {
    pub fn new(shape: Shape, factor: f64) -> Self {
        Scaled { shape, factor }
    }
}

impl LinearOperator for Scaled {
    fn in_shape(&self) -> Shape {
        self.shape
    }

    fn out_shape(&self) -> Shape {
        self.shape
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        Ok(x.scale(self.factor))
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        Ok(y.scale(self.factor))
    }

    fn name(&self) -> &str {
        "scaled"
    }
}

/// `outer ∘ inner`
#[derive(Clone)]
pub struct Composed {
    outer: OperatorRef,
    inner: OperatorRef,
}

/// Chains two operators; `inner` is applied first.
pub fn compose(outer: OperatorRef, inner: OperatorRef) -> Result<Composed> {
    check_shape("compose", outer.in_shape(), inner.out_shape())?;
    Ok(Composed { outer, inner })
}

impl LinearOperator for Composed {
    fn in_shape(&self) -> Shape {
        self.inner.in_shape()
    }

    fn out_shape(&self) -> Shape {
        self.outer.out_shape()
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        self.outer.apply(&self.inner.apply(x)?)
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        self.inner.adjoint(&self.outer.adjoint(y)?)
    }

    fn name(&self) -> &str {
        "composed"
    }
}

pub(crate) fn gaussian_image(shape: Shape, rng: &mut ChaCha8Rng) -> Image {
    let data = (0..shape.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Image::from_vec(shape, data)
}

/// Largest relative mismatch between `⟨Ax, y⟩` and `⟨x, Aᵀy⟩` over seeded
/// Gaussian probes, measured as `|a − b| / (|a| + |b|)`.
pub fn adjoint_dot_test(op: &dyn LinearOperator, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Parameter("dot test needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = gaussian_image(op.in_shape(), &mut rng);
        let y = gaussian_image(op.out_shape(), &mut rng);
        let a = op.apply(&x)?.dot(&y)?;
        let b = x.dot(&op.adjoint(&y)?)?;
        let denom = a.abs() + b.abs();
        let rel = if denom == 0.0 {
            0.0
        } else {
            (a - b).abs() / (denom + f64::MIN_POSITIVE)
        };
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// `‖A(ax + bz) − aAx − bAz‖ / (‖x‖ + ‖z‖)` for seeded Gaussian probes.
pub fn linearity_defect(op: &dyn LinearOperator, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian_image(op.in_shape(), &mut rng);
    let z = gaussian_image(op.in_shape(), &mut rng);
    let a: f64 = StandardNormal.sample(&mut rng);
    let b: f64 = StandardNormal.sample(&mut rng);
    let mut mix = x.scale(a);
    mix.axpy(b, &z)?;
    let mut lhs = op.apply(&mix)?;
    lhs.axpy(-a, &op.apply(&x)?)?;
    lhs.axpy(-b, &op.apply(&z)?)?;
    Ok(lhs.norm() / (x.norm() + z.norm()))
}

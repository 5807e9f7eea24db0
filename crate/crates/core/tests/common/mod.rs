//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cps_core::operators::LinearOperator;
use cps_core::{Image, Shape};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimiser of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
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
    (lo + hi) / 2.0
}

/// Root of `f` on `[lo, hi]` given a sign change, by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    while hi - lo > tol {
        let mid = (lo + hi) / 2.0;
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

/// Cauchy prox by direct minimisation of `(x − u)²/(2μ) + log(γ² + u²)`.
/// The minimiser lies between 0 and `x`.
pub fn golden_prox(x: f64, gamma: f64, mu: f64) -> f64 {
    let obj = |u: f64| (x - u) * (x - u) / (2.0 * mu) + (gamma * gamma + u * u).ln();
    golden_section(obj, x.min(0.0), x.max(0.0), 1e-12)
}

/// Residual of the first-order cubic `u³ − x·u² + (γ² + 2μ)·u − x·γ² = 0`.
pub fn cubic_residual(u: f64, x: f64, gamma: f64, mu: f64) -> f64 {
    let g2 = gamma * gamma;
    u * u * u - x * u * u + (g2 + 2.0 * mu) * u - x * g2
}

/// Seeded `(x, γ, μ)` with `x ∈ [−100, 100]` and `γ ≥ √μ/2`.
pub fn prox_triples(n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = rng.random_range(-100.0..=100.0);
            let mu = 10f64.powf(rng.random_range(-3.0..1.0));
            let gamma = mu.sqrt() / 2.0 * rng.random_range(1.0..20.0);
            (x, gamma, mu)
        })
        .collect()
}

/// Dense matrix of an operator, built column by column from unit inputs.
pub fn materialize(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.in_shape().len();
    let m = op.out_shape().len();
    let mut dense = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut e = Image::zeros(op.in_shape());
        e.as_mut_slice()[j] = 1.0;
        let col = op.apply(&e).expect("apply");
        for (i, v) in col.as_slice().iter().enumerate() {
            dense[(i, j)] = *v;
        }
    }
    dense
}

/// Largest eigenvalue of `AᵀA` from a dense symmetric eigensolve.
pub fn dense_opnorm_sq(op: &dyn LinearOperator) -> f64 {
    let a = materialize(op);
    let gram = a.transpose() * &a;
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn random_image(shape: Shape, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(shape, |_, _| rng.random_range(-1.0..1.0))
}

/// Every shipped operator with its adjoint dot-test tolerance.
pub fn shipped_operators() -> Vec<(Box<dyn LinearOperator>, f64)> {
    use cps_core::operators::*;
    use std::sync::Arc;
    let s = Shape::new(16, 16);
    let psf = gaussian_psf(5, 2.0).expect("psf");
    let geom = RadonGeometry::with_angle_count(Shape::new(24, 24), 45);
    let tight = 1e-6;
    vec![
        (Box::new(Identity::new(s)), tight),
        (Box::new(Scaled::new(s, -2.5)), tight),
        (
            Box::new(blur_operator(psf.clone(), s).expect("blur")),
            tight,
        ),
        (Box::new(downsample_operator(2, s).expect("down")), tight),
        (
            Box::new(
                compose(
                    Arc::new(downsample_operator(2, s).expect("down")),
                    Arc::new(blur_operator(psf, s).expect("blur")),
                )
                .expect("compose"),
            ),
            tight,
        ),
        (
            Box::new(matrix_operator(
                DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![-1.0, 0.5]])
                    .expect("matrix"),
            )),
            tight,
        ),
        (
            Box::new(random_measurement_operator(128, s, 7).expect("random")),
            tight,
        ),
        (
            Box::new(WaveletOperator::new(s, 3, Wavelet::Db4).expect("db4")),
            tight,
        ),
        (
            Box::new(WaveletOperator::new(s, 2, Wavelet::Haar).expect("haar")),
            tight,
        ),
        (Box::new(RadonOperator::new(geom.clone())), tight),
        (Box::new(FbpOperator::new(geom)), 1e-3),
    ]
}

/// Seeded identity-operator denoising: sparse spikes plus Gaussian noise.
pub fn denoising_problem(n: usize, sigma: f64, seed: u64) -> cps_core::solver::InverseProblem {
    use cps_core::operators::Identity;
    use cps_core::penalty::PenaltyConfig;
    use cps_core::solver::InverseProblem;
    let s = Shape::new(n, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = Image::from_fn(s, |_, _| {
        if rng.random_bool(0.1) {
            rng.random_range(0.5..2.0)
        } else {
            0.0
        }
    });
    let y = cps_core::simulate::awgn(&clean, sigma, seed.wrapping_add(1)).expect("awgn");
    InverseProblem::new(
        y,
        std::sync::Arc::new(Identity::new(s)),
        sigma,
        PenaltyConfig::cauchy(1.0),
    )
    .expect("problem")
}

/// Largest `cost[k+1] − cost[k]`; non-positive for a monotone trace.
pub fn worst_increase(trace: &[f64]) -> f64 {
    trace
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Elementwise stationarity defect of an identity-operator Cauchy solution,
/// relative to the size of the two gradient terms.
pub fn stationarity_defect(x: &Image, y: &Image, sigma: f64, gamma: f64) -> f64 {
    x.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(&u, &v)| {
            let data = (u - v) / (sigma * sigma);
            let prior = 2.0 * u / (gamma * gamma + u * u);
            let scale = data.abs() + prior.abs();
            if scale == 0.0 {
                0.0
            } else {
                (data + prior).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

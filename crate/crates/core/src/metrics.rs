//! Image-quality and detection metrics.
//!
//! Unbounded results (PSNR of identical images, LR+ of a detector with no
//! false positives) are returned as `f64::INFINITY`; undefined ratios as NaN.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_shape, param, Error, Result};
use crate::image::Image;

/// `√mean((ref − est)²)`
pub fn rmse(reference: &Image, est: &Image) -> Result<f64> {
    check_shape("rmse", reference.shape(), est.shape())?;
    if reference.is_empty() {
        return Err(param("rmse of empty images"));
    }
    let sq: f64 = reference
        .as_slice()
        .iter()
        .zip(est.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / reference.len() as f64).sqrt())
}

/// `20·log10(peak / rmse)`; `peak` defaults to the maximum of `reference`.
pub fn psnr(reference: &Image, est: &Image, peak: Option<f64>) -> Result<f64> {
    let peak = peak.unwrap_or_else(|| reference.max());
    if !(peak > 0.0) {
        return Err(param(format!("psnr peak must be > 0, got {peak}")));
    }
    let e = rmse(reference, est)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / e).log10()
    })
}

/// `10·log10(Σ ref² / Σ (ref − est)²)`
pub fn smse(reference: &Image, est: &Image) -> Result<f64> {
    check_shape("s/mse", reference.shape(), est.shape())?;
    let signal = reference.norm_sq();
    if signal == 0.0 {
        return Err(Error::Domain("s/mse reference has zero energy".into()));
    }
    let err = reference.sub(est)?.norm_sq();
    Ok(if err == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / err).log10()
    })
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> Vec<f64> {
    let h = (SSIM_WINDOW / 2) as isize;
    let w: Vec<f64> = (-h..=h)
        .map(|i| (-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable weighted sum over every fully contained window position.
fn filter_valid(img: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (orows, ocols) = (rows - k + 1, cols - k + 1);
    let mut tmp = vec![0.0; rows * ocols];
    for r in 0..rows {
        for c in 0..ocols {
            tmp[r * ocols + c] = (0..k).map(|j| w[j] * img[r * cols + c + j]).sum();
        }
    }
    let mut out = vec![0.0; orows * ocols];
    for r in 0..orows {
        for c in 0..ocols {
            out[r * ocols + c] = (0..k).map(|i| w[i] * tmp[(r + i) * ocols + c]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), using the maximum of
/// `reference` as the dynamic range.
pub fn ssim(reference: &Image, est: &Image) -> Result<f64> {
    let range = reference.max();
    if !(range > 0.0) {
        return Err(param("ssim reference must have a positive maximum"));
    }
    ssim_with_range(reference, est, range)
}

pub fn ssim_with_range(a: &Image, b: &Image, range: f64) -> Result<f64> {
    check_shape("ssim", a.shape(), b.shape())?;
    if a.rows() < SSIM_WINDOW || a.cols() < SSIM_WINDOW {
        return Err(param(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}",
            a.shape()
        )));
    }
    if a == b {
        return Ok(1.0);
    }
    let (rows, cols) = (a.rows(), a.cols());
    let w = ssim_window();
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let (x, y) = (a.as_slice(), b.as_slice());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect()
    };
    let mx = filter_valid(x, rows, cols, &w);
    let my = filter_valid(y, rows, cols, &w);
    let mxx = filter_valid(&prod(&|p, _| p * p), rows, cols, &w);
    let myy = filter_valid(&prod(&|_, q| q * q), rows, cols, &w);
    let mxy = filter_valid(&prod(&|p, q| p * q), rows, cols, &w);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Writes non-finite values as the strings `"inf"`, `"-inf"` or `"nan"`.
pub fn serialize_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Per-hypothesis detection tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Undefined ratios are NaN and an unbounded LR+ is +∞; both serialise as
/// strings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMetrics {
    #[serde(serialize_with = "serialize_real")]
    pub accuracy: f64,
    #[serde(serialize_with = "serialize_real")]
    pub f1: f64,
    #[serde(serialize_with = "serialize_real")]
    pub sensitivity: f64,
    #[serde(serialize_with = "serialize_real")]
    pub specificity: f64,
    #[serde(serialize_with = "serialize_real")]
    pub lr_plus: f64,
    #[serde(serialize_with = "serialize_real")]
    pub youden_j: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Single-operating-point classification statistics.
pub fn detection_metrics(c: &ConfusionCounts) -> Result<DetectionMetrics> {
    if c.total() == 0 {
        return Err(Error::Domain("no detections to score".into()));
    }
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let lr_plus = if specificity == 1.0 {
        f64::INFINITY
    } else {
        sensitivity / (1.0 - specificity)
    };
    Ok(DetectionMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        sensitivity,
        specificity,
        lr_plus,
        youden_j: sensitivity + specificity - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use proptest::prelude::*;

    #[test]
    fn identical_images() {
        let a = Image::from_fn(Shape::new(16, 16), |r, c| ((r * c) % 7) as f64 / 7.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
        assert_eq!(smse(&a, &a).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn constant_error_example() {
        let a = Image::filled(Shape::new(4, 4), 0.5);
        let b = a.map(|v| v + 0.1);
        assert!((rmse(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        assert!((psnr(&a, &b, Some(1.0)).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&a, &b, Some(0.0)).is_err());
    }

    #[test]
    fn smse_example_and_errors() {
        // Σref² = 100, Σerr² = 1
        let a = Image::from_rows(&[vec![6.0, 8.0]]);
        let b = Image::from_rows(&[vec![6.0, 9.0]]);
        assert!((smse(&a, &b).unwrap() - 20.0).abs() < 1e-12);
        assert!((smse(&a.scale(3.0), &b.scale(3.0)).unwrap() - 20.0).abs() < 1e-12);
        assert!(smse(&Image::zeros(a.shape()), &b).is_err());
        assert!(smse(&a, &Image::zeros(Shape::new(2, 1))).is_err());
    }

    #[test]
    fn ssim_drops_under_heavy_noise_and_is_symmetric() {
        use crate::simulate::{awgn, gen_phantom, SceneDescriptor, SceneKind};
        let x = gen_phantom(&SceneDescriptor::new(SceneKind::PiecewiseSmooth, 64, 1)).unwrap();
        let noisy = awgn(&x, 0.5, 3).unwrap();
        assert!(ssim(&x, &noisy).unwrap() < 0.5);
        let s1 = ssim_with_range(&x, &noisy, 1.0).unwrap();
        let s2 = ssim_with_range(&noisy, &x, 1.0).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
        assert!(ssim(
            &Image::zeros(Shape::new(8, 8)),
            &Image::zeros(Shape::new(8, 8))
        )
        .is_err());
    }

    #[test]
    fn table_counts() {
        let m = detection_metrics(&ConfusionCounts::new(38, 46, 10, 8)).unwrap();
        assert!((m.lr_plus - 4.63).abs() < 0.01);
        assert!((m.f1 - 0.81).abs() < 0.01);
        assert!((m.youden_j - 0.65).abs() < 0.01);
        assert!((m.accuracy - 84.0 / 102.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_coin_flip() {
        let m = detection_metrics(&ConfusionCounts::new(5, 7, 0, 0)).unwrap();
        assert_eq!((m.accuracy, m.f1, m.youden_j), (1.0, 1.0, 1.0));
        assert_eq!(m.lr_plus, f64::INFINITY);
        let m = detection_metrics(&ConfusionCounts::new(4, 4, 4, 4)).unwrap();
        assert_eq!(m.youden_j, 0.0);
        assert_eq!(m.lr_plus, 1.0);
        assert!(detection_metrics(&ConfusionCounts::default()).is_err());
        let m = detection_metrics(&ConfusionCounts::new(0, 3, 1, 0)).unwrap();
        assert!(m.sensitivity.is_nan());
    }

    /// Straightforward two-pass reference for the error metrics.
    fn two_pass(a: &[f64], b: &[f64]) -> (f64, f64) {
        let n = a.len() as f64;
        let mut mse = 0.0;
        for i in 0..a.len() {
            mse += (a[i] - b[i]).powi(2) / n;
        }
        let mut sig = 0.0;
        let mut err = 0.0;
        for i in 0..a.len() {
            sig += a[i] * a[i];
            err += (a[i] - b[i]).powi(2);
        }
        (mse.sqrt(), 10.0 * (sig / err).log10())
    }

    proptest! {
        #[test]
        fn error_metrics_match_reference(
            pairs in proptest::collection::vec((0.01f64..1.0, -0.5f64..0.5), 64),
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
            let (r, s) = two_pass(&a, &b);
            let ia = Image::from_vec(Shape::new(8, 8), a);
            let ib = Image::from_vec(Shape::new(8, 8), b);
            let got = rmse(&ia, &ib).unwrap();
            prop_assert!((got - r).abs() <= 1e-12 * r);
            let p = psnr(&ia, &ib, Some(1.0)).unwrap();
            prop_assert!((p - 20.0 * (1.0 / r).log10()).abs() <= 1e-12 * p.abs().max(1.0));
            prop_assert!((smse(&ia, &ib).unwrap() - s).abs() <= 1e-12 * s.abs().max(1.0));
        }

        #[test]
        fn detection_metrics_bounded(tp in 0u64..50, tn in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
            prop_assume!(tp + fn_ > 0 && tn + fp > 0);
            let m = detection_metrics(&ConfusionCounts::new(tp, tn, fp, fn_)).unwrap();
            for v in [m.accuracy, m.sensitivity, m.specificity] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if tp + fp + fn_ > 0 {
                prop_assert!((0.0..=1.0).contains(&m.f1));
            }
            prop_assert!((-1.0..=1.0).contains(&m.youden_j));
            prop_assert!(m.lr_plus >= 0.0);
        }
    }
}

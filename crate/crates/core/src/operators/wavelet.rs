//! Orthogonal separable 2D wavelet transform with periodic extension.

use super::{check_in, check_out, LinearOperator};
use crate::error::{param, Result};
use crate::image::{Image, Shape};

pub const DEFAULT_LEVELS: usize = 3;

/// Daubechies scaling filter with four vanishing moments (8 taps).
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_6,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_08,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Wavelet {
    Haar,
    #[default]
    Db4,
}

impl Wavelet {
    fn lowpass(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db4 => &DB4,
        }
    }

    fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let n = h.len();
        (0..n)
            .map(|k| {
                if k % 2 == 0 {
                    h[n - 1 - k]
                } else {
                    -h[n - 1 - k]
                }
            })
            .collect()
    }
}

/// One analysis step on a line: `src` (even length) → `[approx | detail]`.
fn analyze_line(src: &[f64], dst: &mut [f64], lo: &[f64], hi: &[f64]) {
    let n = src.len();
    let half = n / 2;
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (j, (l, h)) in lo.iter().zip(hi).enumerate() {
            let v = src[(2 * k + j) % n];
            a += l * v;
            d += h * v;
        }
        dst[k] = a;
        dst[half + k] = d;
    }
}

/// Transpose of [`analyze_line`].
fn synthesize_line(src: &[f64], dst: &mut [f64], lo: &[f64], hi: &[f64]) {
    let n = src.len();
    let half = n / 2;
    dst.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..half {
        let (a, d) = (src[k], src[half + k]);
        for (j, (l, h)) in lo.iter().zip(hi).enumerate() {
            dst[(2 * k + j) % n] += l * a + h * d;
        }
    }
}

fn check_levels(shape: Shape, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(param("wavelet levels must be >= 1"));
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| param("too many wavelet levels"))?;
    if !shape.rows.is_multiple_of(block)
        || !shape.cols.is_multiple_of(block)
        || shape.rows < block
        || shape.cols < block
    {
        return Err(param(format!(
            "image shape {shape} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Applies `step` to rows then columns of the top-left `rows × cols` block.
fn transform_block(
    img: &mut Image,
    rows: usize,
    cols: usize,
    step: impl Fn(&[f64], &mut [f64]),
    rows_first: bool,
) {
    let mut line_in = Vec::new();
    let mut line_out = Vec::new();
    let mut do_rows = |img: &mut Image| {
        line_in.resize(cols, 0.0);
        line_out.resize(cols, 0.0);
        for r in 0..rows {
            for c in 0..cols {
                line_in[c] = img[(r, c)];
            }
            step(&line_in, &mut line_out);
            for c in 0..cols {
                img[(r, c)] = line_out[c];
            }
        }
    };
    let mut col_in = vec![0.0; rows];
    let mut col_out = vec![0.0; rows];
    let mut do_cols = |img: &mut Image| {
        for c in 0..cols {
            for r in 0..rows {
                col_in[r] = img[(r, c)];
            }
            step(&col_in, &mut col_out);
            for r in 0..rows {
                img[(r, c)] = col_out[r];
            }
        }
    };
    if rows_first {
        do_rows(img);
        do_cols(img);
    } else {
        do_cols(img);
        do_rows(img);
    }
}

fn forward_packed(img: &Image, levels: usize, wavelet: Wavelet) -> Image {
    let lo = wavelet.lowpass();
    let hi = wavelet.highpass();
    let mut out = img.clone();
    let (mut rows, mut cols) = (img.rows(), img.cols());
    for _ in 0..levels {
        transform_block(
            &mut out,
            rows,
            cols,
            |s, d| analyze_line(s, d, lo, &hi),
            true,
        );
        rows /= 2;
        cols /= 2;
    }
    out
}

fn inverse_packed(packed: &Image, levels: usize, wavelet: Wavelet) -> Image {
    let lo = wavelet.lowpass();
    let hi = wavelet.highpass();
    let mut out = packed.clone();
    for level in (0..levels).rev() {
        let rows = packed.rows() >> level;
        let cols = packed.cols() >> level;
        transform_block(
            &mut out,
            rows,
            cols,
            |s, d| synthesize_line(s, d, lo, &hi),
            false,
        );
    }
    out
}

/// Detail subbands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    /// Row-lowpass, column-highpass.
    pub horizontal: Image,
    /// Row-highpass, column-lowpass.
    pub vertical: Image,
    pub diagonal: Image,
}

impl DetailBands {
    pub fn iter(&self) -> impl Iterator<Item = &Image> {
        [&self.horizontal, &self.vertical, &self.diagonal].into_iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Image> {
        [&mut self.horizontal, &mut self.vertical, &mut self.diagonal].into_iter()
    }
}

/// Multilevel decomposition; `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub approx: Image,
    pub details: Vec<DetailBands>,
    pub wavelet: Wavelet,
    shape: Shape,
}

impl Subbands {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn image_shape(&self) -> Shape {
        self.shape
    }

    fn from_packed(packed: &Image, levels: usize, wavelet: Wavelet) -> Self {
        let mut details = Vec::with_capacity(levels);
        for level in 0..levels {
            let rows = packed.rows() >> (level + 1);
            let cols = packed.cols() >> (level + 1);
            let s = Shape::new(rows, cols);
            details.push(DetailBands {
                horizontal: packed.crop(rows, 0, s),
                vertical: packed.crop(0, cols, s),
                diagonal: packed.crop(rows, cols, s),
            });
        }
        let s = Shape::new(packed.rows() >> levels, packed.cols() >> levels);
        Subbands {
            approx: packed.crop(0, 0, s),
            details,
            wavelet,
            shape: packed.shape(),
        }
    }

    fn to_packed(&self) -> Image {
        let mut out = Image::zeros(self.shape);
        let mut paste = |block: &Image, r0: usize, c0: usize| {
            for r in 0..block.rows() {
                for c in 0..block.cols() {
                    out[(r0 + r, c0 + c)] = block[(r, c)];
                }
            }
        };
        paste(&self.approx, 0, 0);
        for d in &self.details {
            let (rows, cols) = (d.diagonal.rows(), d.diagonal.cols());
            paste(&d.horizontal, rows, 0);
            paste(&d.vertical, 0, cols);
            paste(&d.diagonal, rows, cols);
        }
        out
    }
}

/// Forward transform with the default Daubechies-4 filter.
pub fn dwt2(img: &Image, levels: usize) -> Result<Subbands> {
    dwt2_with(img, levels, Wavelet::Db4)
}

pub fn dwt2_with(img: &Image, levels: usize, wavelet: Wavelet) -> Result<Subbands> {
    check_levels(img.shape(), levels)?;
    Ok(Subbands::from_packed(
        &forward_packed(img, levels, wavelet),
        levels,
        wavelet,
    ))
}

pub fn idwt2(bands: &Subbands) -> Result<Image> {
    check_levels(bands.shape, bands.levels())?;
    Ok(inverse_packed(
        &bands.to_packed(),
        bands.levels(),
        bands.wavelet,
    ))
}

/// Wavelet analysis as an operator on packed coefficient images.
#[derive(Debug, Clone, Copy)]
pub struct WaveletOperator {
    shape: Shape,
    levels: usize,
    wavelet: Wavelet,
}

impl WaveletOperator {
    pub fn new(shape: Shape, levels: usize, wavelet: Wavelet) -> Result<Self> {
        check_levels(shape, levels)?;
        Ok(WaveletOperator {
            shape,
            levels,
            wavelet,
        })
    }
}

impl LinearOperator for WaveletOperator {
    fn in_shape(&self) -> Shape {
        self.shape
    }

    fn out_shape(&self) -> Shape {
        self.shape
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        Ok(forward_packed(x, self.levels, self.wavelet))
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        Ok(inverse_packed(y, self.levels, self.wavelet))
    }

    fn name(&self) -> &str {
        "wavelet"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{adjoint_dot_test, gaussian_image};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn filters_are_orthonormal() {
        for w in [Wavelet::Haar, Wavelet::Db4] {
            let h = w.lowpass();
            let g = w.highpass();
            assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-14);
            for shift in (0..h.len()).step_by(2) {
                let hh: f64 = (0..h.len() - shift).map(|k| h[k] * h[k + shift]).sum();
                let gg: f64 = (0..h.len() - shift).map(|k| g[k] * g[k + shift]).sum();
                let expect = if shift == 0 { 1.0 } else { 0.0 };
                assert!((hh - expect).abs() < 1e-14, "{w:?} {shift} {hh}");
                assert!((gg - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let img = gaussian_image(Shape::new(64, 64), &mut rng);
        let bands = dwt2(&img, 3).unwrap();
        let back = idwt2(&bands).unwrap();
        let err = img
            .as_slice()
            .iter()
            .zip(back.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");

        let coeff_energy = bands.approx.norm_sq()
            + bands
                .details
                .iter()
                .flat_map(|d| d.iter())
                .map(Image::norm_sq)
                .sum::<f64>();
        assert!((coeff_energy - img.norm_sq()).abs() < 1e-8 * img.norm_sq());
    }

    #[test]
    fn constant_image_has_no_detail() {
        let img = Image::filled(Shape::new(32, 16), 2.5);
        let bands = dwt2(&img, 3).unwrap();
        for d in &bands.details {
            for band in d.iter() {
                assert!(band.as_slice().iter().all(|v| v.abs() < 1e-10));
            }
        }
        assert!((bands.approx.norm_sq() - img.norm_sq()).abs() < 1e-8);
        assert_eq!(bands.approx.shape(), Shape::new(4, 2));
    }

    #[test]
    fn rectangular_and_operator_adjoint() {
        let op = WaveletOperator::new(Shape::new(16, 32), 2, Wavelet::Db4).unwrap();
        assert!(adjoint_dot_test(&op, 20, 9).unwrap() < 1e-12);
        let haar = WaveletOperator::new(Shape::new(8, 8), 3, Wavelet::Haar).unwrap();
        assert!(adjoint_dot_test(&haar, 20, 9).unwrap() < 1e-12);
    }

    #[test]
    fn indivisible_rejected() {
        assert!(dwt2(&Image::zeros(Shape::new(12, 16)), 3).is_err());
        assert!(dwt2(&Image::zeros(Shape::new(16, 16)), 0).is_err());
    }
}

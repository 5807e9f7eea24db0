use rayon::prelude::*;

use super::{check_in, check_out, LinearOperator};
use crate::error::{param, Result};
use crate::image::{Image, Shape};

/// Square odd-sized convolution kernel, indexed from its centre.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(param(format!("kernel size must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(param("kernel tap count does not match size"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(param("kernel taps must be finite"));
        }
        Ok(Kernel { size, taps })
    }

    /// The 1×1 unit kernel.
    pub fn delta() -> Self {
        Kernel {
            size: 1,
            taps: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }

    /// Tap at signed offset `(di, dj)` from the centre.
    pub fn at(&self, di: isize, dj: isize) -> f64 {
        let h = self.half() as isize;
        self.taps[((di + h) as usize) * self.size + (dj + h) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Normalised Gaussian point-spread function on a `size × size` stencil.
pub fn gaussian_psf(size: usize, std: f64) -> Result<Kernel> {
    if size.is_multiple_of(2) {
        return Err(param(format!("psf size must be odd, got {size}")));
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(param(format!("psf std must be > 0, got {std}")));
    }
    let h = (size / 2) as isize;
    let mut taps = Vec::with_capacity(size * size);
    for i in -h..=h {
        for j in -h..=h {
            taps.push((-((i * i + j * j) as f64) / (2.0 * std * std)).exp());
        }
    }
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Kernel::new(size, taps)
}

/// Circular 2D convolution; the adjoint correlates with the same kernel.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    kernel: Kernel,
    shape: Shape,
}

pub fn blur_operator(kernel: Kernel, shape: Shape) -> Result<BlurOperator> {
    if kernel.size() > shape.rows || kernel.size() > shape.cols {
        return Err(param(format!(
            "{}x{} kernel does not fit a {shape} image",
            kernel.size(),
            kernel.size()
        )));
    }
    Ok(BlurOperator { kernel, shape })
}

impl BlurOperator {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `sign = -1` convolves, `sign = +1` correlates.
    fn filter(&self, x: &Image, sign: isize) -> Image {
        let Shape { rows, cols } = self.shape;
        let h = self.kernel.half() as isize;
        let (ri, ci) = (rows as isize, cols as isize);
        let mut out = vec![0.0; rows * cols];
        out.par_chunks_mut(cols).enumerate().for_each(|(r, row)| {
            for (c, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for di in -h..=h {
                    let rr = (r as isize + sign * di).rem_euclid(ri) as usize;
                    let src = x.row(rr);
                    for dj in -h..=h {
                        let cc = (c as isize + sign * dj).rem_euclid(ci) as usize;
                        acc += self.kernel.at(di, dj) * src[cc];
                    }
                }
                *o = acc;
            }
        });
        Image::from_vec(self.shape, out)
    }
}

impl LinearOperator for BlurOperator {
    fn in_shape(&self) -> Shape {
        self.shape
    }

    fn out_shape(&self) -> Shape {
        self.shape
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        Ok(self.filter(x, -1))
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        Ok(self.filter(y, 1))
    }

    fn name(&self) -> &str {
        "blur"
    }
}

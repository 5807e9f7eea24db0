//! Dense real-valued 2D grids.
//!
//! [`Image`] is the single container for pixels, sinograms, wavelet
//! coefficient planes and flat measurement vectors (stored as `n × 1`).

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Result};

/// Grid dimensions as `(rows, cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    /// A column vector of length `n`.
    pub const fn vector(n: usize) -> Self {
        Shape { rows: n, cols: 1 }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Row-major grid of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: Shape,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Image {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Wraps a row-major buffer. Panics if the length does not match the shape.
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.len(),
            data.len(),
            "buffer length does not match shape {shape}"
        );
        Image { shape, data }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for r in 0..shape.rows {
            for c in 0..shape.cols {
                data.push(f(r, c));
            }
        }
        Image { shape, data }
    }

    /// Builds an image from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flatten().copied().collect();
        Image {
            shape: Shape::new(rows.len(), cols),
            data,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Same samples under a new shape with the same element count.
    pub fn reshape(self, shape: Shape) -> Result<Image> {
        check_shape(
            "reshape",
            Shape::vector(self.len()),
            Shape::vector(shape.len()),
        )?;
        Ok(Image {
            shape,
            data: self.data,
        })
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        check_shape("elementwise operation", self.shape, other.shape)?;
        Ok(Image {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, k: f64) -> Image {
        self.map(|v| k * v)
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: f64, other: &Image) -> Result<()> {
        check_shape("axpy", self.shape, other.shape)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Image) -> Result<Image> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn dot(&self, other: &Image) -> Result<f64> {
        check_shape("inner product", self.shape, other.shape)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.shape.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape.cols;
        &self.data[r * c..(r + 1) * c]
    }

    /// Copy of the sub-block starting at `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, shape: Shape) -> Image {
        assert!(r0 + shape.rows <= self.rows() && c0 + shape.cols <= self.cols());
        Image::from_fn(shape, |r, c| self.get(r0 + r, c0 + c))
    }

    /// Pads on the bottom/right by symmetric (half-sample) reflection.
    pub fn pad_symmetric(&self, shape: Shape) -> Image {
        assert!(shape.rows >= self.rows() && shape.cols >= self.cols());
        let reflect = |i: usize, n: usize| -> usize {
            let period = 2 * n;
            let k = i % period;
            if k < n {
                k
            } else {
                period - 1 - k
            }
        };
        Image::from_fn(shape, |r, c| {
            self.get(reflect(r, self.rows()), reflect(c, self.cols()))
        })
    }
}

impl Index<(usize, usize)> for Image {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.shape.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Image {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.shape.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_is_row_major() {
        let img = Image::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert_eq!(img.as_slice(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(img[(1, 0)], 2.0);
    }

    #[test]
    fn symmetric_padding_reflects_edges() {
        let img = Image::from_rows(&[vec![1.0, 2.0, 3.0]]);
        let padded = img.pad_symmetric(Shape::new(2, 5));
        assert_eq!(padded.row(0), &[1.0, 2.0, 3.0, 3.0, 2.0]);
        assert_eq!(padded.row(1), padded.row(0));
    }

    #[test]
    fn reshape_rejects_wrong_count() {
        let img = Image::zeros(Shape::new(2, 3));
        assert!(img.clone().reshape(Shape::vector(6)).is_ok());
        assert!(img.reshape(Shape::vector(5)).is_err());
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_in, check_out, LinearOperator};
use crate::error::{check_shape, param, Error, Result};
use crate::image::{Image, Shape};

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "matrix buffer has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Input(format!(
                "non-rectangular matrix: row {i} has {} entries, expected {cols}",
                rows[i].len()
            )));
        }
        DenseMatrix::new(rows.len(), cols, rows.concat())
    }

    /// Parses header-free comma-separated rows.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::Input(format!(
                            "line {}: cannot parse '{}' as a number",
                            lineno + 1,
                            tok.trim()
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Input("empty matrix file".into()));
        }
        DenseMatrix::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// `x ↦ M·vec(x)` with row-major vectorisation of `x`.
#[derive(Debug, Clone)]
pub struct MatrixOperator {
    matrix: DenseMatrix,
    in_shape: Shape,
}

/// Wraps `m` as an operator on column vectors of length `m.cols()`.
pub fn matrix_operator(m: DenseMatrix) -> MatrixOperator {
    let in_shape = Shape::vector(m.cols);
    MatrixOperator {
        matrix: m,
        in_shape,
    }
}

impl MatrixOperator {
    /// Reinterprets the input as an image of the given shape.
    pub fn with_input_shape(mut self, shape: Shape) -> Result<Self> {
        check_shape(
            "matrix input shape",
            Shape::vector(self.matrix.cols),
            Shape::vector(shape.len()),
        )?;
        self.in_shape = shape;
        Ok(self)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl LinearOperator for MatrixOperator {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }

    fn out_shape(&self) -> Shape {
        Shape::vector(self.matrix.rows)
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        let xs = x.as_slice();
        let out = (0..self.matrix.rows)
            .into_par_iter()
            .map(|i| self.matrix.row(i).iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Image::from_vec(self.out_shape(), out))
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        let mut out = vec![0.0; self.matrix.cols];
        for (i, &yi) in y.as_slice().iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.matrix.row(i)) {
                *o += a * yi;
            }
        }
        Ok(Image::from_vec(self.in_shape, out))
    }

    fn name(&self) -> &str {
        "matrix"
    }
}

/// Gaussian sensing matrix with i.i.d. `N(0, 1/m)` entries, fixed by `seed`.
pub fn random_measurement_operator(m: usize, image: Shape, seed: u64) -> Result<MatrixOperator> {
    let n = image.len();
    if m == 0 || m > n {
        return Err(param(format!(
            "measurement count must be in 1..={n}, got {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let data = (0..m * n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    matrix_operator(DenseMatrix::new(m, n, data)?).with_input_shape(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::adjoint_dot_test;

    #[test]
    fn identity_and_hand_example() {
        let id = matrix_operator(DenseMatrix::identity(3));
        let x = Image::from_vec(Shape::vector(3), vec![1.0, -2.0, 4.0]);
        assert_eq!(id.apply(&x).unwrap(), x);

        let m = matrix_operator(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let x = Image::from_vec(Shape::vector(2), vec![1.0, 1.0]);
        assert_eq!(m.apply(&x).unwrap().as_slice(), &[3.0, 7.0]);
        let y = Image::from_vec(Shape::vector(2), vec![1.0, 0.0]);
        assert_eq!(m.adjoint(&y).unwrap().as_slice(), &[1.0, 2.0]);
        assert!(adjoint_dot_test(&m, 20, 5).unwrap() < 1e-14);
    }

    #[test]
    fn csv_parsing() {
        let m = DenseMatrix::from_csv_str("1,2\n3, 4\n\n").unwrap();
        assert_eq!(
            m,
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()
        );
        assert!(matches!(
            DenseMatrix::from_csv_str("1,2\n3\n"),
            Err(Error::Input(_))
        ));
        assert!(DenseMatrix::from_csv_str("1,x\n").is_err());
        assert!(DenseMatrix::from_csv_str("").is_err());
    }

    #[test]
    fn random_operator_is_seeded() {
        let shape = Shape::new(8, 8);
        let a = random_measurement_operator(20, shape, 11).unwrap();
        let b = random_measurement_operator(20, shape, 11).unwrap();
        let c = random_measurement_operator(20, shape, 12).unwrap();
        let probe = Image::from_fn(shape, |r, c| (r as f64 - c as f64).sin());
        assert_eq!(a.apply(&probe).unwrap(), b.apply(&probe).unwrap());
        assert_ne!(a.apply(&probe).unwrap(), c.apply(&probe).unwrap());
        assert!(adjoint_dot_test(&a, 20, 2).unwrap() < 1e-6);
        assert!(random_measurement_operator(65, shape, 1).is_err());
    }

    #[test]
    fn random_operator_preserves_energy_on_average() {
        let shape = Shape::new(8, 8);
        let probe = Image::from_fn(shape, |r, c| ((r * 8 + c) as f64 * 0.37).cos());
        let ratios: f64 = (0..200)
            .map(|seed| {
                let op = random_measurement_operator(32, shape, seed).unwrap();
                op.apply(&probe).unwrap().norm_sq() / probe.norm_sq()
            })
            .sum();
        let mean = ratios / 200.0;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }
}

use super::{check_in, check_out, LinearOperator};
use crate::error::{param, Result};
use crate::image::{Image, Shape};

/// Keeps every `factor`-th pixel in each direction, starting at index 0.
#[derive(Debug, Clone, Copy)]
pub struct DownsampleOperator {
    factor: usize,
    hi: Shape,
    lo: Shape,
}

pub fn downsample_operator(factor: usize, hi: Shape) -> Result<DownsampleOperator> {
    if factor == 0 {
        return Err(param("downsampling factor must be >= 1"));
    }
    if !hi.rows.is_multiple_of(factor) || !hi.cols.is_multiple_of(factor) {
        return Err(param(format!(
            "factor {factor} does not divide image shape {hi}"
        )));
    }
    Ok(DownsampleOperator {
        factor,
        hi,
        lo: Shape::new(hi.rows / factor, hi.cols / factor),
    })
}

impl DownsampleOperator {
    pub fn factor(&self) -> usize {
        self.factor
    }
}

impl LinearOperator for DownsampleOperator {
    fn in_shape(&self) -> Shape {
        self.hi
    }

    fn out_shape(&self) -> Shape {
        self.lo
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        let f = self.factor;
        Ok(Image::from_fn(self.lo, |r, c| x[(r * f, c * f)]))
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        let f = self.factor;
        let mut out = Image::zeros(self.hi);
        for r in 0..self.lo.rows {
            for c in 0..self.lo.cols {
                out[(r * f, c * f)] = y[(r, c)];
            }
        }
        Ok(out)
    }

    fn name(&self) -> &str {
        "downsample"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::adjoint_dot_test;

    #[test]
    fn factor_one_is_identity() {
        let op = downsample_operator(1, Shape::new(3, 5)).unwrap();
        let x = Image::from_fn(Shape::new(3, 5), |r, c| (r * 5 + c) as f64);
        assert_eq!(op.apply(&x).unwrap(), x);
        assert_eq!(op.adjoint(&x).unwrap(), x);
    }

    #[test]
    fn ramp_keeps_even_rows_and_cols() {
        let op = downsample_operator(2, Shape::new(4, 4)).unwrap();
        let x = Image::from_fn(Shape::new(4, 4), |r, c| (r * 4 + c) as f64);
        let y = op.apply(&x).unwrap();
        assert_eq!(y, Image::from_rows(&[vec![0.0, 2.0], vec![8.0, 10.0]]));
    }

    #[test]
    fn adjoint_of_kept_delta_round_trips() {
        let op = downsample_operator(2, Shape::new(6, 6)).unwrap();
        let mut d = Image::zeros(Shape::new(6, 6));
        d[(2, 4)] = 1.0;
        assert_eq!(op.adjoint(&op.apply(&d).unwrap()).unwrap(), d);
        assert!(adjoint_dot_test(&op, 20, 3).unwrap() < 1e-12);
    }

    #[test]
    fn indivisible_shape_rejected() {
        assert!(downsample_operator(2, Shape::new(5, 4)).is_err());
        assert!(downsample_operator(0, Shape::new(4, 4)).is_err());
    }
}

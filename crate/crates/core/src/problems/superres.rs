use std::sync::Arc;

use super::Reconstruction;
use crate::error::{param, Result};
use crate::image::{Image, Shape};
use crate::operators::{blur_operator, compose, downsample_operator, Kernel};
use crate::penalty::PenaltyConfig;
use crate::solver::{cps_solve, InverseProblem, SolverConfig};

/// Recovers a `factor`-times larger image from `y_lr = D·H·X + N`.
pub fn superresolve(
    y_lr: &Image,
    psf: &Kernel,
    factor: usize,
    penalty: PenaltyConfig,
    cfg: &SolverConfig,
    sigma: f64,
) -> Result<Reconstruction> {
    if factor == 0 {
        return Err(param("upsampling factor must be >= 1"));
    }
    let hi = Shape::new(y_lr.rows() * factor, y_lr.cols() * factor);
    let forward = compose(
        Arc::new(downsample_operator(factor, hi)?),
        Arc::new(blur_operator(psf.clone(), hi)?),
    )?;
    let problem = InverseProblem::new(y_lr.clone(), Arc::new(forward), sigma, penalty)?;
    let solve = cps_solve(&problem, cfg)?;
    Ok(Reconstruction {
        image: solve.solution.clone(),
        solve,
    })
}

/// Keys cubic convolution kernel with `a = −0.5`.
fn cubic_weight(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Samples with linear extrapolation past either end, which keeps affine
/// signals affine.
fn sample_extended(line: &[f64], i: isize) -> f64 {
    let n = line.len() as isize;
    if n == 1 {
        return line[0];
    }
    if i < 0 {
        line[0] + i as f64 * (line[1] - line[0])
    } else if i >= n {
        let last = line[(n - 1) as usize];
        last + (i - n + 1) as f64 * (last - line[(n - 2) as usize])
    } else {
        line[i as usize]
    }
}

/// Interpolates one line; low-resolution sample `k` sits at output index `k·factor`.
fn upsample_line(line: &[f64], factor: usize) -> Vec<f64> {
    (0..line.len() * factor)
        .map(|i| {
            let pos = i as f64 / factor as f64;
            let base = pos.floor() as isize;
            let frac = pos - base as f64;
            (-1..=2)
                .map(|k| cubic_weight(frac - k as f64) * sample_extended(line, base + k))
                .sum()
        })
        .collect()
}

/// Separable bicubic interpolation aligned with [`downsample_operator`].
pub fn bicubic_upsample(y: &Image, factor: usize) -> Result<Image> {
    if factor == 0 {
        return Err(param("upsampling factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(y.clone());
    }
    let rows: Vec<Vec<f64>> = (0..y.rows())
        .map(|r| upsample_line(y.row(r), factor))
        .collect();
    let out_cols = y.cols() * factor;
    let mut out = Image::zeros(Shape::new(y.rows() * factor, out_cols));
    for c in 0..out_cols {
        let col: Vec<f64> = rows.iter().map(|row| row[c]).collect();
        for (r, v) in upsample_line(&col, factor).into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    Ok(out)
}

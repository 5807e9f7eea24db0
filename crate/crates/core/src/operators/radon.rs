//! Parallel-beam Radon transform, its adjoint, and filtered back-projection.
//!
//! Sinograms are stored with one row per radial offset bin and one column
//! per projection angle. Each pixel centre is projected onto the detector
//! axis and its value is shared between the two nearest bins by linear
//! interpolation; back-projection reads the same two bins with the same
//! weights, so it is the exact adjoint.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{check_in, check_out, LinearOperator};
use crate::error::{param, Result};
use crate::image::{Image, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadonFilter {
    None,
    #[default]
    RamLak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadonGeometry {
    angles_deg: Vec<f64>,
    offsets: usize,
    image: Shape,
    pub filter: RadonFilter,
}

impl RadonGeometry {
    pub fn new(image: Shape, angles_deg: Vec<f64>, offsets: usize) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(param("radon geometry needs at least one angle"));
        }
        if angles_deg.iter().any(|a| !(0.0..180.0).contains(a)) {
            return Err(param("projection angles must lie in [0, 180)"));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("projection angles must be strictly increasing"));
        }
        let diag = ((image.rows * image.rows + image.cols * image.cols) as f64).sqrt();
        if (offsets as f64) < diag.floor() {
            return Err(param(format!(
                "{offsets} offset bins cannot cover the {diag:.1}-pixel diagonal of a {image} image"
            )));
        }
        Ok(RadonGeometry {
            angles_deg,
            offsets,
            image,
            filter: RadonFilter::RamLak,
        })
    }

    /// Angles 0, 1, …, 179 degrees and `ceil(diagonal)` offset bins.
    pub fn for_image(image: Shape) -> Self {
        Self::with_angle_count(image, 180)
    }

    /// `count` equally spaced angles over [0, 180).
    pub fn with_angle_count(image: Shape, count: usize) -> Self {
        let angles = (0..count.max(1))
            .map(|k| 180.0 * k as f64 / count.max(1) as f64)
            .collect();
        let diag = ((image.rows * image.rows + image.cols * image.cols) as f64).sqrt();
        Self::new(image, angles, diag.ceil() as usize).expect("default geometry is valid")
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn offsets(&self) -> usize {
        self.offsets
    }

    pub fn image_shape(&self) -> Shape {
        self.image
    }

    pub fn sinogram_shape(&self) -> Shape {
        Shape::new(self.offsets, self.angles_deg.len())
    }

    /// Signed radial distance, in pixels, of offset bin `k` from the centre.
    pub fn offset_of_bin(&self, k: usize) -> f64 {
        k as f64 - (self.offsets as f64 - 1.0) / 2.0
    }

    /// Fractional bin position of signed radial distance `t`.
    pub fn bin_of_offset(&self, t: f64) -> f64 {
        t + (self.offsets as f64 - 1.0) / 2.0
    }

    fn trig(&self) -> Vec<(f64, f64)> {
        self.angles_deg
            .iter()
            .map(|a| {
                let r = a.to_radians();
                (r.cos(), r.sin())
            })
            .collect()
    }

    /// Signed radial distance of pixel `(r, 0)` along direction `(cos, sin)`;
    /// each further column adds `cos`. `x` grows with the column index and
    /// `y` grows upwards.
    fn row_start(&self, r: usize, (cs, sn): (f64, f64)) -> f64 {
        let x = -(self.image.cols as f64 - 1.0) / 2.0;
        let y = (self.image.rows as f64 - 1.0) / 2.0 - r as f64;
        x * cs + y * sn
    }

    fn splat(&self, t: f64) -> Option<(usize, f64)> {
        let s = self.bin_of_offset(t);
        let k0 = s.floor();
        if k0 < -1.0 || k0 >= self.offsets as f64 {
            return None;
        }
        Some(((k0 + 1.0) as usize, s - k0))
    }
}

/// Line integrals of `img` for every (offset, angle) pair.
pub fn radon(img: &Image, geom: &RadonGeometry) -> Result<Image> {
    crate::error::check_shape("radon input", geom.image, img.shape())?;
    let trig = geom.trig();
    let n = geom.offsets;
    let columns: Vec<Vec<f64>> = trig
        .par_iter()
        .map(|&cs| {
            // index shifted by one so bin -1 is representable
            let mut col = vec![0.0; n + 2];
            for r in 0..img.rows() {
                let t0 = geom.row_start(r, cs);
                for (c, &v) in img.row(r).iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    if let Some((k, w)) = geom.splat(t0 + c as f64 * cs.0) {
                        col[k] += (1.0 - w) * v;
                        col[k + 1] += w * v;
                    }
                }
            }
            col
        })
        .collect();
    let na = trig.len();
    Ok(Image::from_fn(Shape::new(n, na), |k, a| columns[a][k + 1]))
}

/// Exact adjoint of [`radon`].
pub fn backproject(sino: &Image, geom: &RadonGeometry) -> Result<Image> {
    crate::error::check_shape("back-projection input", geom.sinogram_shape(), sino.shape())?;
    let trig = geom.trig();
    let n = geom.offsets;
    let cols = geom.image.cols;
    // padded per-angle columns, bins -1 and n read as zero
    let padded: Vec<Vec<f64>> = (0..trig.len())
        .map(|a| {
            let mut col = vec![0.0; n + 2];
            for k in 0..n {
                col[k + 1] = sino[(k, a)];
            }
            col
        })
        .collect();
    let mut out = vec![0.0; geom.image.len()];
    out.par_chunks_mut(cols).enumerate().for_each(|(r, row)| {
        for (a, &cs) in trig.iter().enumerate() {
            let t0 = geom.row_start(r, cs);
            let col = &padded[a];
            for (c, o) in row.iter_mut().enumerate() {
                if let Some((k, w)) = geom.splat(t0 + c as f64 * cs.0) {
                    *o += (1.0 - w) * col[k] + w * col[k + 1];
                }
            }
        }
    });
    Ok(Image::from_vec(geom.image, out))
}

/// Spatial Ram-Lak kernel for unit bin spacing.
fn ram_lak_tap(k: isize) -> f64 {
    if k == 0 {
        0.25
    } else if k % 2 == 0 {
        0.0
    } else {
        -1.0 / (PI * PI * (k * k) as f64)
    }
}

/// Ram-Lak filtering of every projection (linear convolution, same length).
/// The filter matrix is symmetric, so this map is self-adjoint.
pub fn ram_lak_filter(sino: &Image) -> Image {
    let (n, na) = (sino.rows(), sino.cols());
    let taps: Vec<f64> = (0..n as isize).map(ram_lak_tap).collect();
    let filtered: Vec<Vec<f64>> = (0..na)
        .into_par_iter()
        .map(|a| {
            let col: Vec<f64> = (0..n).map(|k| sino[(k, a)]).collect();
            (0..n)
                .map(|k| {
                    col.iter()
                        .enumerate()
                        .map(|(j, v)| taps[k.abs_diff(j)] * v)
                        .sum()
                })
                .collect()
        })
        .collect();
    Image::from_fn(sino.shape(), |k, a| filtered[a][k])
}

fn fbp_scale(geom: &RadonGeometry) -> f64 {
    PI / geom.angles_deg.len() as f64
}

fn apply_filter(sino: &Image, geom: &RadonGeometry) -> Image {
    match geom.filter {
        RadonFilter::None => sino.clone(),
        RadonFilter::RamLak => ram_lak_filter(sino),
    }
}

/// Filtered back-projection: approximate inverse of [`radon`].
pub fn fbp(sino: &Image, geom: &RadonGeometry) -> Result<Image> {
    crate::error::check_shape("fbp input", geom.sinogram_shape(), sino.shape())?;
    Ok(backproject(&apply_filter(sino, geom), geom)?.scale(fbp_scale(geom)))
}

/// Image → sinogram.
#[derive(Debug, Clone)]
pub struct RadonOperator {
    geom: RadonGeometry,
}

impl RadonOperator {
    pub fn new(geom: RadonGeometry) -> Self {
        RadonOperator { geom }
    }
}

impl LinearOperator for RadonOperator {
    fn in_shape(&self) -> Shape {
        self.geom.image
    }

    fn out_shape(&self) -> Shape {
        self.geom.sinogram_shape()
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        radon(x, &self.geom)
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        backproject(y, &self.geom)
    }

    fn name(&self) -> &str {
        "radon"
    }
}

/// Sinogram → image through filtered back-projection. Its adjoint is the
/// Radon transform followed by the same (symmetric) filter.
#[derive(Debug, Clone)]
pub struct FbpOperator {
    geom: RadonGeometry,
}

impl FbpOperator {
    pub fn new(geom: RadonGeometry) -> Self {
        FbpOperator { geom }
    }

    pub fn geometry(&self) -> &RadonGeometry {
        &self.geom
    }
}

impl LinearOperator for FbpOperator {
    fn in_shape(&self) -> Shape {
        self.geom.sinogram_shape()
    }

    fn out_shape(&self) -> Shape {
        self.geom.image
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        check_in(self, x)?;
        fbp(x, &self.geom)
    }

    fn adjoint(&self, y: &Image) -> Result<Image> {
        check_out(self, y)?;
        let sino = radon(y, &self.geom)?;
        Ok(apply_filter(&sino, &self.geom).scale(fbp_scale(&self.geom)))
    }

    fn name(&self) -> &str {
        "fbp"
    }
}

//! Ship-wake detection in the Radon domain.
//!
//! The image is modelled as `Y = C·Ω + N` with `C` the filtered
//! back-projection, so straight wake lines become isolated peaks of the
//! sinogram-shaped unknown `Ω`. After solving for `Ω̂`, every entry is
//! scored against the median and MAD of its own angle column. The turbulent
//! wake is the most negative score; the four bright arms are searched in
//! angular windows on either side of it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_shape, param, Result};
use crate::image::Image;
use crate::metrics::ConfusionCounts;
use crate::operators::{FbpOperator, RadonGeometry};
use crate::penalty::PenaltyConfig;
use crate::simulate::WAKE_ARMS;
use crate::solver::{cps_solve, InverseProblem, SolveResult, SolverConfig};

const MAD_TO_SIGMA: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WakeKind {
    Turbulent,
    NarrowVPort,
    NarrowVStarboard,
    KelvinPort,
    KelvinStarboard,
}

impl WakeKind {
    /// Canonical hypothesis order.
    pub const ALL: [WakeKind; WAKE_ARMS] = [
        WakeKind::Turbulent,
        WakeKind::NarrowVPort,
        WakeKind::NarrowVStarboard,
        WakeKind::KelvinPort,
        WakeKind::KelvinStarboard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WakeKind::Turbulent => "turbulent",
            WakeKind::NarrowVPort => "narrow_v_port",
            WakeKind::NarrowVStarboard => "narrow_v_starboard",
            WakeKind::KelvinPort => "kelvin_port",
            WakeKind::KelvinStarboard => "kelvin_starboard",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            WakeKind::Turbulent => Polarity::Dark,
            _ => Polarity::Bright,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Dark,
    Bright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WakeHypothesis {
    pub kind: WakeKind,
    /// Radial offset from the image centre, pixels.
    pub r: f64,
    /// Normal angle, degrees in [0, 180).
    pub theta: f64,
    pub polarity: Polarity,
    pub decided_visible: bool,
    /// Robust z-score of the selected Radon-domain entry.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct WakeReport {
    /// One record per [`WakeKind::ALL`] entry, in that order.
    pub hypotheses: Vec<WakeHypothesis>,
    pub omega_hat: Image,
    pub solve: Option<SolveResult>,
}

impl WakeReport {
    pub fn visibility(&self) -> [bool; WAKE_ARMS] {
        let mut out = [false; WAKE_ARMS];
        for (o, h) in out.iter_mut().zip(&self.hypotheses) {
            *o = h.decided_visible;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// Narrow-V arms lie within this many degrees of the turbulent angle.
    pub narrow_v_window: f64,
    /// Kelvin arms lie this many degrees away from the turbulent angle.
    pub kelvin_window: (f64, f64),
    /// Visibility threshold in robust z-units.
    pub threshold: f64,
    /// Arms are searched within this radial distance (pixels) of the
    /// turbulent offset.
    pub offset_band: f64,
    /// Noise level of the normalised image; estimated when absent.
    pub sigma: Option<f64>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            narrow_v_window: 5.0,
            kelvin_window: (14.0, 20.0),
            threshold: 10.0,
            offset_band: 3.0,
            sigma: None,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mad(values: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&mut dev)
}

/// Robust z-scores against the median/MAD of each angle column.
fn column_scores(omega: &Image) -> Option<Image> {
    let (rows, cols) = (omega.rows(), omega.cols());
    let global = {
        let mut all = omega.as_slice().to_vec();
        let m = median(&mut all);
        mad(omega.as_slice(), m)
    };
    if global == 0.0 {
        return None;
    }
    let mut scores = Image::zeros(omega.shape());
    for a in 0..cols {
        let col: Vec<f64> = (0..rows).map(|k| omega[(k, a)]).collect();
        let mut sorted = col.clone();
        let m = median(&mut sorted);
        let spread = mad(&col, m);
        let spread = if spread > 0.0 { spread } else { global } / MAD_TO_SIGMA;
        for (k, v) in col.iter().enumerate() {
            scores[(k, a)] = (v - m) / spread;
        }
    }
    Some(scores)
}

/// Signed angular difference folded into (−90, 90], with a flag telling
/// whether the fold flipped the line orientation.
fn fold_angle(d: f64) -> (f64, bool) {
    if d > 90.0 {
        (d - 180.0, true)
    } else if d <= -90.0 {
        (d + 180.0, true)
    } else {
        (d, false)
    }
}

struct Peak {
    score: f64,
    r: f64,
    theta: f64,
}

fn arm_peak(
    scores: &Image,
    geom: &RadonGeometry,
    turb_theta: f64,
    turb_r: f64,
    window: (f64, f64),
    band: f64,
) -> Option<Peak> {
    let mut best: Option<Peak> = None;
    for (a, &theta) in geom.angles_deg().iter().enumerate() {
        let (d, flipped) = fold_angle(theta - turb_theta);
        if d < window.0 || d > window.1 {
            continue;
        }
        let expected = if flipped { -turb_r } else { turb_r };
        let lo = geom.bin_of_offset(expected - band).ceil().max(0.0) as usize;
        let hi = geom.bin_of_offset(expected + band).floor();
        if hi < 0.0 {
            continue;
        }
        for k in lo..=(hi as usize).min(scores.rows() - 1) {
            let s = scores[(k, a)];
            if best.as_ref().is_none_or(|b| s > b.score) {
                best = Some(Peak {
                    score: s,
                    r: geom.offset_of_bin(k),
                    theta,
                });
            }
        }
    }
    best
}

fn normalised_noise_sigma(z: &Image) -> f64 {
    let mut all = z.as_slice().to_vec();
    let m = median(&mut all);
    mad(z.as_slice(), m) / MAD_TO_SIGMA
}

/// Noise level that [`detect_wakes`] estimates when none is configured:
/// MAD/0.6745 of the normalised scene `Y/mean − 1`.
pub fn estimate_wake_sigma(y: &Image) -> Result<f64> {
    let mean = y.mean();
    if !(mean > 0.0) {
        return Err(param("wake detection needs an image with positive mean"));
    }
    Ok(normalised_noise_sigma(&y.map(|v| v / mean - 1.0)))
}

/// Solves for the Radon-domain image and tests the five wake hypotheses.
pub fn detect_wakes(
    y: &Image,
    geom: &RadonGeometry,
    penalty: PenaltyConfig,
    cfg: &SolverConfig,
    detect: &DetectConfig,
) -> Result<WakeReport> {
    if y.rows() != y.cols() {
        return Err(param(format!(
            "wake detection needs a square image, got {}",
            y.shape()
        )));
    }
    check_shape("wake image vs geometry", geom.image_shape(), y.shape())?;
    let mean = y.mean();
    if !(mean > 0.0) {
        return Err(param("wake detection needs an image with positive mean"));
    }
    let z = y.map(|v| v / mean - 1.0);
    let sigma = match detect.sigma {
        Some(s) => s,
        None => normalised_noise_sigma(&z),
    };
    let forward = Arc::new(FbpOperator::new(geom.clone()));

    let (omega, solve) = if sigma > 0.0 {
        let problem = InverseProblem::new(z, forward, sigma, penalty)?;
        let res = cps_solve(&problem, cfg)?;
        (res.solution.clone(), Some(res))
    } else {
        (Image::zeros(geom.sinogram_shape()), None)
    };

    let hypotheses = decide_hypotheses(&omega, geom, detect)?;
    Ok(WakeReport {
        hypotheses,
        omega_hat: omega,
        solve,
    })
}

fn flat_report(geom: &RadonGeometry) -> Vec<WakeHypothesis> {
    let theta = geom.angles_deg()[0];
    WakeKind::ALL
        .iter()
        .map(|&kind| WakeHypothesis {
            kind,
            r: 0.0,
            theta,
            polarity: kind.polarity(),
            decided_visible: false,
            score: 0.0,
        })
        .collect()
}

/// Five hypotheses anchored at the turbulent candidate `(a, k)`.
fn anchored_hypotheses(
    scores: &Image,
    geom: &RadonGeometry,
    detect: &DetectConfig,
    a: usize,
    k: usize,
) -> Vec<WakeHypothesis> {
    let turb_theta = geom.angles_deg()[a];
    let turb_r = geom.offset_of_bin(k);
    let turb_score = scores[(k, a)];

    let mut out = vec![WakeHypothesis {
        kind: WakeKind::Turbulent,
        r: turb_r,
        theta: turb_theta,
        polarity: Polarity::Dark,
        decided_visible: turb_score <= -detect.threshold,
        score: turb_score,
    }];

    let nv = detect.narrow_v_window;
    let (klo, khi) = detect.kelvin_window;
    let windows = [
        (WakeKind::NarrowVPort, (f64::MIN_POSITIVE, nv)),
        (WakeKind::NarrowVStarboard, (-nv, -f64::MIN_POSITIVE)),
        (WakeKind::KelvinPort, (klo, khi)),
        (WakeKind::KelvinStarboard, (-khi, -klo)),
    ];
    for (kind, window) in windows {
        let peak = arm_peak(scores, geom, turb_theta, turb_r, window, detect.offset_band);
        out.push(match peak {
            Some(p) => WakeHypothesis {
                kind,
                r: p.r,
                theta: p.theta,
                polarity: Polarity::Bright,
                decided_visible: p.score >= detect.threshold,
                score: p.score,
            },
            None => WakeHypothesis {
                kind,
                r: turb_r,
                theta: (turb_theta + 0.5 * (window.0 + window.1)).rem_euclid(180.0),
                polarity: Polarity::Bright,
                decided_visible: false,
                score: 0.0,
            },
        });
    }
    out
}

/// Tests the five hypotheses on an estimated Radon-domain image. The
/// turbulent wake is taken at the global minimum of the score map and the
/// arms are searched relative to it.
pub fn decide_hypotheses(
    omega: &Image,
    geom: &RadonGeometry,
    detect: &DetectConfig,
) -> Result<Vec<WakeHypothesis>> {
    check_shape(
        "radon-domain estimate",
        geom.sinogram_shape(),
        omega.shape(),
    )?;
    let Some(scores) = column_scores(omega) else {
        return Ok(flat_report(geom));
    };
    let (mut kt, mut at) = (0, 0);
    for k in 0..scores.rows() {
        for a in 0..scores.cols() {
            if scores[(k, a)] < scores[(kt, at)] {
                kt = k;
                at = a;
            }
        }
    }
    Ok(anchored_hypotheses(&scores, geom, detect, at, kt))
}

/// Tallies decisions against ground-truth visibility flags.
pub fn classify_detections(report: &WakeReport, truth: &[bool; WAKE_ARMS]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (h, &visible) in report.hypotheses.iter().zip(truth) {
        match (visible, h.decided_visible) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_with(flags: [bool; WAKE_ARMS]) -> WakeReport {
        WakeReport {
            hypotheses: WakeKind::ALL
                .iter()
                .zip(flags)
                .map(|(&kind, v)| WakeHypothesis {
                    kind,
                    r: 0.0,
                    theta: 0.0,
                    polarity: kind.polarity(),
                    decided_visible: v,
                    score: 0.0,
                })
                .collect(),
            omega_hat: Image::zeros(crate::image::Shape::new(1, 1)),
            solve: None,
        }
    }

    #[test]
    fn confusion_accounting() {
        let all = [true; WAKE_ARMS];
        assert_eq!(
            classify_detections(&report_with(all), &all),
            ConfusionCounts::new(5, 0, 0, 0)
        );
        let c = classify_detections(
            &report_with([true, true, false, false, false]),
            &[true, false, false, false, false],
        );
        assert_eq!(c, ConfusionCounts::new(1, 3, 1, 0));

        let mut total = ConfusionCounts::default();
        for i in 0..11u32 {
            let flags = [i % 2 == 0, i % 3 == 0, true, false, i % 5 == 0];
            total += classify_detections(&report_with(flags), &[true, false, true, false, true]);
        }
        assert_eq!(total.total(), 55);
    }

    #[test]
    fn angle_folding() {
        assert_eq!(fold_angle(10.0), (10.0, false));
        assert_eq!(fold_angle(170.0), (-10.0, true));
        assert_eq!(fold_angle(-175.0), (5.0, true));
    }

    #[test]
    fn flat_omega_reports_nothing() {
        let geom = RadonGeometry::with_angle_count(crate::image::Shape::new(32, 32), 36);
        let y = Image::filled(crate::image::Shape::new(32, 32), 0.5);
        let rep = detect_wakes(
            &y,
            &geom,
            PenaltyConfig::cauchy(1.0),
            &SolverConfig::default(),
            &DetectConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.hypotheses.len(), WAKE_ARMS);
        assert!(rep.hypotheses.iter().all(|h| !h.decided_visible));
        assert_eq!(rep.hypotheses[0].kind, WakeKind::Turbulent);
        assert_eq!(rep.hypotheses[0].polarity, Polarity::Dark);
    }
}

//! End-to-end pipelines: super-resolution, image formation, despeckling
//! and wake detection, with their classical baselines.

mod despeckle;
mod formation;
mod superres;
mod wake;

use crate::image::Image;
use crate::solver::SolveResult;

pub use despeckle::{despeckle, estimate_noise_sigma, DespeckleOutput};
pub use formation::{form_image, matched_filter_recon, relative_error};
pub use superres::{bicubic_upsample, superresolve};
pub use wake::{
    classify_detections, decide_hypotheses, detect_wakes, estimate_wake_sigma, DetectConfig,
    Polarity, WakeHypothesis, WakeKind, WakeReport,
};

/// Reconstructed image with the solver run that produced it.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: Image,
    pub solve: SolveResult,
}

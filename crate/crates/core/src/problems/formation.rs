use super::Reconstruction;
use crate::error::{check_shape, Error, Result};
use crate::image::Image;
use crate::operators::OperatorRef;
use crate::penalty::PenaltyConfig;
use crate::solver::{cps_solve, InverseProblem, SolverConfig};

/// Reconstructs the scene `f` from measurements `y = Φ·f + n`.
pub fn form_image(
    y: &Image,
    phi: OperatorRef,
    penalty: PenaltyConfig,
    cfg: &SolverConfig,
    sigma: f64,
) -> Result<Reconstruction> {
    let problem = InverseProblem::new(y.clone(), phi, sigma, penalty)?;
    let solve = cps_solve(&problem, cfg)?;
    Ok(Reconstruction {
        image: solve.solution.clone(),
        solve,
    })
}

/// Back-projection baseline `Φᵀ·y`.
pub fn matched_filter_recon(y: &Image, phi: &OperatorRef) -> Result<Image> {
    phi.adjoint(y)
}

/// `|10·log10(‖X̂‖² / ‖X_MF‖²)|`
pub fn relative_error(estimate: &Image, matched: &Image) -> Result<f64> {
    check_shape("relative error", matched.shape(), estimate.shape())?;
    let reference = matched.norm_sq();
    if reference == 0.0 {
        return Err(Error::Domain(
            "matched-filter reference has zero norm".into(),
        ));
    }
    Ok((10.0 * (estimate.norm_sq() / reference).log10()).abs())
}

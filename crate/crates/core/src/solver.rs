//! Cauchy proximal splitting: forward-backward iterations on
//! `‖Y − A·X‖² / (2σ²) + ψ(X)`.
//!
//! The step size and Cauchy scale are tied together so that every backward
//! step is a strictly convex subproblem: `μ ∈ (0, 2/L)` with
//! `L = ‖A‖² / σ²`, and `γ ≥ √μ / 2`.
//!
//! Convexity of each subproblem does not make the cost monotone. At the
//! boundary `γ = √μ / 2` the backward map has unbounded slope near the
//! origin, so for `μ > 1/L` a fixed point can be unstable and the iterates
//! may settle into a 2-cycle. The cost is non-increasing for `μ ≤ 1/L`;
//! use [`StepSize::Relative`] with a factor of at most 1 when that matters.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, param, Error, Result};
use crate::image::Image;
use crate::operators::{gaussian_image, LinearOperator, OperatorRef};
use crate::penalty::{penalty_value, PenaltyConfig, PenaltyKind};

/// Fraction of the stability bound `2/L` used when the step is automatic.
pub const AUTO_STEP_FACTOR: f64 = 1.8;

/// Linear inverse problem `Y = A·X + N` with Gaussian noise level `sigma`.
#[derive(Clone)]
pub struct InverseProblem {
    pub observation: Image,
    pub forward: OperatorRef,
    pub sigma: f64,
    pub penalty: PenaltyConfig,
}

impl InverseProblem {
    pub fn new(
        observation: Image,
        forward: OperatorRef,
        sigma: f64,
        penalty: PenaltyConfig,
    ) -> Result<Self> {
        check_shape(
            "observation vs operator output",
            forward.out_shape(),
            observation.shape(),
        )?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(param(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(InverseProblem {
            observation,
            forward,
            sigma,
            penalty,
        })
    }

    /// `‖Y − A·X‖² / (2σ²) + ψ(X)`
    pub fn cost(&self, x: &Image) -> Result<f64> {
        self.cost_from_residual(x, &self.residual(x)?)
    }

    /// `Aᵀ(A·X − Y) / σ²`
    pub fn fidelity_gradient(&self, x: &Image) -> Result<Image> {
        self.gradient_from_residual(&self.residual(x)?)
    }

    /// `A·X − Y`
    pub fn residual(&self, x: &Image) -> Result<Image> {
        self.forward.apply(x)?.sub(&self.observation)
    }

    fn cost_from_residual(&self, x: &Image, residual: &Image) -> Result<f64> {
        Ok(residual.norm_sq() / (2.0 * self.sigma * self.sigma) + penalty_value(x, &self.penalty)?)
    }

    fn gradient_from_residual(&self, residual: &Image) -> Result<Image> {
        Ok(self
            .forward
            .adjoint(residual)?
            .scale(1.0 / (self.sigma * self.sigma)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    /// `μ = 1.8 / L`
    Auto,
    /// `μ = factor / L`
    Relative(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaPolicy {
    /// `γ = √μ / 2`
    AutoFromMu,
    /// Use the penalty's own `gamma`; warn when it violates `γ ≥ √μ / 2`.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitPolicy {
    Zeros,
    /// `Aᵀ Y / ‖A‖²`
    AdjointOfData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mu: StepSize,
    pub gamma_policy: GammaPolicy,
    pub eps: f64,
    pub max_iter: usize,
    pub x0: InitPolicy,
    /// Known `‖A‖²`; skips the power iteration when set.
    pub opnorm_sq: Option<f64>,
    /// Power-iteration settings for the operator norm estimate.
    pub power_iters: usize,
    pub power_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: StepSize::Auto,
            gamma_policy: GammaPolicy::AutoFromMu,
            eps: 1e-3,
            max_iter: 500,
            x0: InitPolicy::AdjointOfData,
            opnorm_sq: None,
            power_iters: 100,
            power_tol: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mu {
            StepSize::Fixed(mu) if !(mu > 0.0 && mu.is_finite()) => {
                return Err(param(format!("mu must be > 0, got {mu}")));
            }
            StepSize::Relative(f) if !(f > 0.0 && f.is_finite()) => {
                return Err(param(format!("relative step must be > 0, got {f}")));
            }
            _ => {}
        }
        if !(self.eps > 0.0) {
            return Err(param(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.max_iter == 0 {
            return Err(param("max_iter must be >= 1"));
        }
        if let Some(v) = self.opnorm_sq {
            if !(v > 0.0 && v.is_finite()) {
                return Err(param(format!("operator norm must be > 0, got {v}")));
            }
        }
        if self.power_iters == 0 {
            return Err(param("power_iters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub solution: Image,
    /// Cost of `X⁽⁰⁾, X⁽¹⁾, …`; one entry more than `iterations`.
    pub cost_trace: Vec<f64>,
    pub relchange_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Resolved step size.
    pub mu: f64,
    /// Resolved penalty (with the Cauchy scale actually used).
    pub penalty: PenaltyConfig,
    /// Largest eigenvalue of `AᵀA`.
    pub opnorm_sq: f64,
    pub lipschitz: f64,
}

/// Largest eigenvalue of `AᵀA` by power iteration from a seeded random start.
pub fn estimate_operator_norm(
    op: &dyn LinearOperator,
    iters: usize,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    if iters == 0 {
        return Err(param("power iteration needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = gaussian_image(op.in_shape(), &mut rng);
    let n = v.norm();
    if n == 0.0 {
        return Ok(0.0);
    }
    v = v.scale(1.0 / n);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = op.adjoint(&op.apply(&v)?)?;
        check_shape("power iteration", op.in_shape(), w.shape())?;
        let next = v.dot(&w)?;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w.scale(1.0 / norm);
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// `L = ‖A‖² / σ²`
pub fn lipschitz_constant(opnorm_sq: f64, sigma: f64) -> Result<f64> {
    if !(opnorm_sq > 0.0 && sigma > 0.0) {
        return Err(param(format!(
            "operator norm and sigma must be > 0, got {opnorm_sq} and {sigma}"
        )));
    }
    Ok(opnorm_sq / (sigma * sigma))
}

/// `γ ≥ √μ / 2`
pub fn check_convexity_condition(gamma: f64, mu: f64) -> bool {
    gamma >= mu.sqrt() / 2.0
}

fn relative_change(prev: &Image, next: &Image) -> f64 {
    let diff: f64 = prev
        .as_slice()
        .iter()
        .zip(next.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if diff == 0.0 {
        return 0.0;
    }
    let denom = if prev.norm() > 0.0 {
        prev.norm()
    } else {
        next.norm()
    };
    diff / denom
}

/// Resolved `(μ, penalty, ‖A‖², L)` for a problem and configuration.
pub fn resolve_parameters(
    problem: &InverseProblem,
    cfg: &SolverConfig,
) -> Result<(f64, PenaltyConfig, f64, f64)> {
    cfg.validate()?;
    let opnorm_sq = match cfg.opnorm_sq {
        Some(v) => v,
        None => estimate_operator_norm(
            problem.forward.as_ref(),
            cfg.power_iters,
            cfg.power_tol,
            cfg.seed,
        )?,
    };
    let lipschitz = lipschitz_constant(opnorm_sq, problem.sigma)?;
    let mu = match cfg.mu {
        StepSize::Auto => AUTO_STEP_FACTOR / lipschitz,
        StepSize::Relative(f) => f / lipschitz,
        StepSize::Fixed(mu) => mu,
    };
    if mu >= 2.0 / lipschitz {
        warn!(
            "step size {mu} is outside (0, 2/L) = (0, {}); iterations may diverge",
            2.0 / lipschitz
        );
    }
    let mut penalty = problem.penalty;
    if penalty.kind == PenaltyKind::Cauchy {
        match cfg.gamma_policy {
            GammaPolicy::AutoFromMu => penalty.gamma = mu.sqrt() / 2.0,
            GammaPolicy::Explicit => {
                if !check_convexity_condition(penalty.gamma, mu) {
                    warn!(
                        "gamma {} is below sqrt(mu)/2 = {}; the backward step is not convex",
                        penalty.gamma,
                        mu.sqrt() / 2.0
                    );
                }
            }
        }
    }
    penalty.validate()?;
    Ok((mu, penalty, opnorm_sq, lipschitz))
}

/// Runs forward-backward splitting until the relative change of the iterate
/// drops to `eps` or `max_iter` iterations have been taken.
pub fn cps_solve(problem: &InverseProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    let (mu, penalty, opnorm_sq, lipschitz) = resolve_parameters(problem, cfg)?;
    let resolved = InverseProblem {
        penalty,
        ..problem.clone()
    };
    let x0 = match cfg.x0 {
        InitPolicy::Zeros => Image::zeros(problem.forward.in_shape()),
        InitPolicy::AdjointOfData => problem
            .forward
            .adjoint(&problem.observation)?
            .scale(1.0 / opnorm_sq),
    };
    finish(&resolved, x0, mu, opnorm_sq, lipschitz, cfg)
}

/// Like [`cps_solve`] but starts from the given iterate instead of `cfg.x0`.
pub fn cps_solve_with_init(
    problem: &InverseProblem,
    cfg: &SolverConfig,
    x0: Image,
) -> Result<SolveResult> {
    check_shape("initial iterate", problem.forward.in_shape(), x0.shape())?;
    let (mu, penalty, opnorm_sq, lipschitz) = resolve_parameters(problem, cfg)?;
    let resolved = InverseProblem {
        penalty,
        ..problem.clone()
    };
    finish(&resolved, x0, mu, opnorm_sq, lipschitz, cfg)
}

fn finish(
    problem: &InverseProblem,
    x0: Image,
    mu: f64,
    opnorm_sq: f64,
    lipschitz: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let penalty = problem.penalty;
    let (solution, trace) = solve_from(problem, x0, mu, cfg)?;
    Ok(SolveResult {
        solution,
        cost_trace: trace.cost,
        relchange_trace: trace.relchange,
        iterations: trace.iterations,
        converged: trace.converged,
        mu,
        penalty,
        opnorm_sq,
        lipschitz,
    })
}

struct Trace {
    cost: Vec<f64>,
    relchange: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn solve_from(
    problem: &InverseProblem,
    mut x: Image,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<(Image, Trace)> {
    if !x.all_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut residual = problem.residual(&x)?;
    let mut trace = Trace {
        cost: vec![problem.cost_from_residual(&x, &residual)?],
        relchange: Vec::new(),
        iterations: 0,
        converged: false,
    };
    for i in 1..=cfg.max_iter {
        let mut u = x.clone();
        u.axpy(-mu, &problem.gradient_from_residual(&residual)?)?;
        if !u.all_finite() {
            return Err(Error::Divergence { iteration: i });
        }
        let next = problem.penalty.prox(&u, mu)?;
        if !next.all_finite() {
            return Err(Error::Divergence { iteration: i });
        }
        let change = relative_change(&x, &next);
        x = next;
        residual = problem.residual(&x)?;
        let cost = problem.cost_from_residual(&x, &residual)?;
        if !cost.is_finite() {
            return Err(Error::Divergence { iteration: i });
        }
        trace.cost.push(cost);
        trace.relchange.push(change);
        trace.iterations = i;
        if change <= cfg.eps {
            trace.converged = true;
            break;
        }
    }
    Ok((x, trace))
}

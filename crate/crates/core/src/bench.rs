//! Seeded comparison suites for the four pipelines.
//!
//! Each suite generates its own data, runs the Cauchy penalty next to the
//! reference penalties and baselines, and returns plain rows that the CLI
//! serialises. Reference-penalty weights are picked by grid search on a
//! held-out scene that is never scored.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::image::{Image, Shape};
pub use crate::metrics::serialize_real;
use crate::metrics::{
    detection_metrics, psnr, rmse, smse, ssim, ConfusionCounts, DetectionMetrics,
};
use crate::operators::{
    gaussian_psf, random_measurement_operator, FbpOperator, OperatorRef, RadonGeometry,
};
use crate::penalty::{prox_cauchy_reference, prox_cauchy_scalar, PenaltyConfig, PenaltyKind};
use crate::problems::{
    bicubic_upsample, classify_detections, despeckle, detect_wakes, form_image,
    matched_filter_recon, relative_error, superresolve, DetectConfig,
};
use crate::simulate::{
    apply_speckle, awgn, degrade_sr, gen_gamma_speckle, gen_lognormal_speckle, gen_phantom,
    gen_wake_scene, SceneDescriptor, SceneKind, WakeParams, WAKE_ARMS,
};
use crate::solver::{
    check_convexity_condition, estimate_operator_norm, SolveResult, SolverConfig, StepSize,
};

/// `{10⁻³, …, 10¹}`, nine log-spaced points.
pub fn lambda_grid() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-3.0 + 0.5 * k as f64)).collect()
}

fn serialize_metrics<S: Serializer>(
    m: &BTreeMap<String, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    struct Real(f64);
    impl Serialize for Real {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            serialize_real(&self.0, s)
        }
    }
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &Real(*v))?;
    }
    map.end()
}

/// Solver details echoed into a row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub mu: f64,
    pub gamma: Option<f64>,
    pub lipschitz: f64,
}

impl SolveSummary {
    pub fn of(res: &SolveResult) -> Self {
        SolveSummary {
            iterations: res.iterations,
            converged: res.converged,
            mu: res.mu,
            gamma: (res.penalty.kind == PenaltyKind::Cauchy).then_some(res.penalty.gamma),
            lipschitz: res.lipschitz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    /// Scene or noise case the row belongs to.
    pub case: String,
    /// Penalty name or baseline (`bicubic`, `matched_filter`, `noisy`).
    pub method: String,
    pub lambda: Option<f64>,
    #[serde(serialize_with = "serialize_metrics")]
    pub metrics: BTreeMap<String, f64>,
    pub solve: Option<SolveSummary>,
}

impl BenchRow {
    fn new(case: &str, method: &str) -> Self {
        BenchRow {
            case: case.to_string(),
            method: method.to_string(),
            lambda: None,
            metrics: BTreeMap::new(),
            solve: None,
        }
    }

    fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub problem: String,
    pub rows: Vec<BenchRow>,
    /// Weight chosen for each reference penalty on the held-out scene.
    pub selected_lambda: BTreeMap<String, f64>,
    /// Number of Cauchy solves whose resolved `(μ, γ)` was checked against
    /// `μ < 2/L` and `γ ≥ √μ/2`.
    pub policy_checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSummary>,
}

impl BenchReport {
    fn new(problem: &str) -> Self {
        BenchReport {
            problem: problem.to_string(),
            rows: Vec::new(),
            selected_lambda: BTreeMap::new(),
            policy_checks: 0,
            detection: None,
        }
    }

    /// Rows of one method, in case order.
    pub fn method_rows<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn row(&self, case: &str, method: &str) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.method == method)
    }

    fn check_policy(&mut self, res: &SolveResult) -> Result<()> {
        if res.penalty.kind != PenaltyKind::Cauchy {
            return Ok(());
        }
        let step_ok = res.mu > 0.0 && res.mu < 2.0 / res.lipschitz;
        if !step_ok || !check_convexity_condition(res.penalty.gamma, res.mu) {
            return Err(Error::Domain(format!(
                "resolved parameters mu = {}, gamma = {} violate the step/convexity policy (L = {})",
                res.mu, res.penalty.gamma, res.lipschitz
            )));
        }
        self.policy_checks += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub counts: ConfusionCounts,
    pub metrics: DetectionMetrics,
    /// Mean over scenes of the per-scene fraction of correct decisions.
    pub mean_accuracy: f64,
}

fn select_lambda(lambdas: &[f64], mut score: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, lambdas[0]);
    for &lam in lambdas {
        let s = score(lam)?;
        if s > best.0 {
            best = (s, lam);
        }
    }
    Ok(best.1)
}

fn reference_penalty(kind: PenaltyKind, weight: f64) -> PenaltyConfig {
    match kind {
        PenaltyKind::L1 => PenaltyConfig::l1(weight),
        _ => PenaltyConfig::tv(weight),
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Parameter(
            "lambda grid must be non-empty and >= 0".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuperresBench {
    pub size: usize,
    pub seeds: Vec<u64>,
    pub holdout_seed: u64,
    pub psf_size: usize,
    pub psf_std: f64,
    pub factor: usize,
    pub bsnr_db: f64,
    pub lambdas: Vec<f64>,
    pub solver: SolverConfig,
}

impl Default for SuperresBench {
    fn default() -> Self {
        SuperresBench {
            size: 128,
            seeds: vec![1, 2, 3],
            holdout_seed: 1000,
            psf_size: 5,
            psf_std: 2.0,
            factor: 2,
            bsnr_db: 30.0,
            lambdas: lambda_grid(),
            solver: SolverConfig::default(),
        }
    }
}

pub fn run_superres(b: &SuperresBench) -> Result<BenchReport> {
    check_lambdas(&b.lambdas)?;
    let psf = gaussian_psf(b.psf_size, b.psf_std)?;
    let scene = |seed: u64| -> Result<(Image, Image, f64)> {
        let x = gen_phantom(&SceneDescriptor::new(
            SceneKind::PiecewiseSmooth,
            b.size,
            seed,
        ))?;
        let (y, sigma) = degrade_sr(&x, &psf, b.factor, b.bsnr_db, seed.wrapping_add(1))?;
        Ok((x, y, sigma))
    };
    let mut report = BenchReport::new("superres");

    let (hx, hy, hsigma) = scene(b.holdout_seed)?;
    for kind in [PenaltyKind::L1, PenaltyKind::Tv] {
        let lam = select_lambda(&b.lambdas, |lam| {
            let r = superresolve(
                &hy,
                &psf,
                b.factor,
                reference_penalty(kind, lam),
                &b.solver,
                hsigma,
            )?;
            psnr(&hx, &r.image, None)
        })?;
        report.selected_lambda.insert(kind.name().to_string(), lam);
    }

    for &seed in &b.seeds {
        let case = format!("phantom-{seed}");
        let (x, y, sigma) = scene(seed)?;
        let score = |row: BenchRow, est: &Image| -> Result<BenchRow> {
            Ok(row
                .metric("psnr", psnr(&x, est, None)?)
                .metric("ssim", ssim(&x, est)?)
                .metric("rmse", rmse(&x, est)?))
        };
        let bic = bicubic_upsample(&y, b.factor)?;
        report
            .rows
            .push(score(BenchRow::new(&case, "bicubic"), &bic)?);

        let r = superresolve(
            &y,
            &psf,
            b.factor,
            PenaltyConfig::cauchy(1.0),
            &b.solver,
            sigma,
        )?;
        report.check_policy(&r.solve)?;
        let mut row = score(BenchRow::new(&case, "cauchy"), &r.image)?;
        row.solve = Some(SolveSummary::of(&r.solve));
        report.rows.push(row);

        for kind in [PenaltyKind::L1, PenaltyKind::Tv] {
            let lam = report.selected_lambda[kind.name()];
            let r = superresolve(
                &y,
                &psf,
                b.factor,
                reference_penalty(kind, lam),
                &b.solver,
                sigma,
            )?;
            let mut row = score(BenchRow::new(&case, kind.name()), &r.image)?;
            row.lambda = Some(lam);
            row.solve = Some(SolveSummary::of(&r.solve));
            report.rows.push(row);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormationBench {
    pub size: usize,
    pub scatterers: usize,
    /// Measurements as a fraction of the pixel count.
    pub ratio: f64,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub holdout_seed: u64,
    pub lambdas: Vec<f64>,
    pub solver: SolverConfig,
}

impl Default for FormationBench {
    fn default() -> Self {
        FormationBench {
            size: 32,
            scatterers: 20,
            ratio: 0.5,
            sigma: 0.05,
            seeds: vec![1, 2, 3, 4, 5],
            holdout_seed: 1000,
            lambdas: lambda_grid(),
            solver: SolverConfig::default(),
        }
    }
}

pub fn run_formation(b: &FormationBench) -> Result<BenchReport> {
    check_lambdas(&b.lambdas)?;
    if !(b.ratio > 0.0 && b.ratio <= 1.0) {
        return Err(Error::Parameter(format!(
            "measurement ratio must be in (0, 1], got {}",
            b.ratio
        )));
    }
    let n = b.size * b.size;
    let m = ((b.ratio * n as f64).round() as usize).max(1);
    let scene = |seed: u64| -> Result<(Image, Image, OperatorRef)> {
        let mut d = SceneDescriptor::new(SceneKind::PointScatterers, b.size, seed);
        d.scatterers = b.scatterers;
        let x = gen_phantom(&d)?;
        let phi: OperatorRef = Arc::new(random_measurement_operator(
            m,
            x.shape(),
            seed.wrapping_add(1),
        )?);
        let y = awgn(&phi.apply(&x)?, b.sigma, seed.wrapping_add(2))?;
        Ok((x, y, phi))
    };
    let mut report = BenchReport::new("form");

    let (hx, hy, hphi) = scene(b.holdout_seed)?;
    let lam = select_lambda(&b.lambdas, |lam| {
        let r = form_image(
            &hy,
            hphi.clone(),
            PenaltyConfig::l1(lam),
            &b.solver,
            b.sigma,
        )?;
        psnr(&hx, &r.image, None)
    })?;
    report.selected_lambda.insert("l1".into(), lam);

    for &seed in &b.seeds {
        let case = format!("scene-{seed}");
        let (x, y, phi) = scene(seed)?;
        let mf = matched_filter_recon(&y, &phi)?;
        report.rows.push(
            BenchRow::new(&case, "matched_filter")
                .metric("rmse", rmse(&x, &mf)?)
                .metric("psnr", psnr(&x, &mf, None)?)
                .metric("re", 0.0),
        );
        for (method, penalty) in [
            ("cauchy", PenaltyConfig::cauchy(1.0)),
            ("l1", PenaltyConfig::l1(lam)),
        ] {
            let r = form_image(&y, phi.clone(), penalty, &b.solver, b.sigma)?;
            report.check_policy(&r.solve)?;
            let mut row = BenchRow::new(&case, method)
                .metric("rmse", rmse(&x, &r.image)?)
                .metric("psnr", psnr(&x, &r.image, None)?)
                .metric("re", relative_error(&r.image, &mf)?);
            row.lambda = (method == "l1").then_some(lam);
            row.solve = Some(SolveSummary::of(&r.solve));
            report.rows.push(row);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeckleLaw {
    Gamma,
    Lognormal,
}

impl SpeckleLaw {
    pub fn name(self) -> &'static str {
        match self {
            SpeckleLaw::Gamma => "gamma",
            SpeckleLaw::Lognormal => "lognormal",
        }
    }

    pub fn sample(self, looks: f64, shape: Shape, seed: u64) -> Result<Image> {
        match self {
            SpeckleLaw::Gamma => gen_gamma_speckle(looks, shape, seed),
            SpeckleLaw::Lognormal => gen_lognormal_speckle(looks, shape, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DespeckleBench {
    pub size: usize,
    pub seeds: Vec<u64>,
    pub holdout_seed: u64,
    pub looks: Vec<f64>,
    pub laws: Vec<SpeckleLaw>,
    pub levels: usize,
    pub lambdas: Vec<f64>,
    pub solver: SolverConfig,
}

impl Default for DespeckleBench {
    fn default() -> Self {
        DespeckleBench {
            size: 128,
            seeds: vec![1, 2],
            holdout_seed: 1000,
            looks: vec![5.0, 15.0],
            laws: vec![SpeckleLaw::Gamma, SpeckleLaw::Lognormal],
            levels: 3,
            lambdas: lambda_grid(),
            // identity problems cycle at larger steps, see the solver docs
            solver: SolverConfig {
                mu: StepSize::Relative(1.0),
                ..SolverConfig::default()
            },
        }
    }
}

pub fn run_despeckle(b: &DespeckleBench) -> Result<BenchReport> {
    check_lambdas(&b.lambdas)?;
    let noisy = |x: &Image, law: SpeckleLaw, looks: f64, seed: u64| -> Result<Image> {
        apply_speckle(x, &law.sample(looks, x.shape(), seed)?)
    };
    let phantom = |seed: u64| {
        gen_phantom(&SceneDescriptor::new(
            SceneKind::PiecewiseSmooth,
            b.size,
            seed,
        ))
    };
    let mut report = BenchReport::new("despeckle");

    // one weight per reference penalty, tuned on gamma speckle at the first look count
    let hx = phantom(b.holdout_seed)?;
    let first_law = *b
        .laws
        .first()
        .ok_or_else(|| Error::Parameter("no speckle laws".into()))?;
    let first_looks = *b
        .looks
        .first()
        .ok_or_else(|| Error::Parameter("no look counts".into()))?;
    let hy = noisy(&hx, first_law, first_looks, b.holdout_seed.wrapping_add(1))?;
    for kind in [PenaltyKind::L1, PenaltyKind::Tv] {
        let lam = select_lambda(&b.lambdas, |lam| {
            let out = despeckle(&hy, reference_penalty(kind, lam), &b.solver, b.levels)?;
            psnr(&hx, &out.image, None)
        })?;
        report.selected_lambda.insert(kind.name().to_string(), lam);
    }

    for &seed in &b.seeds {
        let x = phantom(seed)?;
        for &law in &b.laws {
            for &looks in &b.looks {
                let case = format!("phantom-{seed}/{}/L{looks}", law.name());
                let y = noisy(&x, law, looks, seed.wrapping_add(1))?;
                let score = |row: BenchRow, est: &Image| -> Result<BenchRow> {
                    Ok(row
                        .metric("psnr", psnr(&x, est, None)?)
                        .metric("smse", smse(&x, est)?))
                };
                report.rows.push(score(BenchRow::new(&case, "noisy"), &y)?);
                let methods = [
                    ("cauchy", PenaltyConfig::cauchy(1.0), None),
                    (
                        "l1",
                        PenaltyConfig::l1(report.selected_lambda["l1"]),
                        Some(report.selected_lambda["l1"]),
                    ),
                    (
                        "tv",
                        PenaltyConfig::tv(report.selected_lambda["tv"]),
                        Some(report.selected_lambda["tv"]),
                    ),
                ];
                for (method, penalty, lambda) in methods {
                    let out = despeckle(&y, penalty, &b.solver, b.levels)?;
                    for s in &out.solves {
                        report.check_policy(s)?;
                    }
                    let mut row =
                        score(BenchRow::new(&case, method), &out.image)?.metric("sigma", out.sigma);
                    row.lambda = lambda;
                    row.solve = out.solves.first().map(SolveSummary::of);
                    report.rows.push(row);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WakeBench {
    pub size: usize,
    pub angles: usize,
    pub scenes: usize,
    pub seed: u64,
    /// Probability that each bright arm is present.
    pub arm_probability: f64,
    pub detect: DetectConfig,
    pub solver: SolverConfig,
}

impl Default for WakeBench {
    fn default() -> Self {
        WakeBench {
            size: 128,
            angles: 90,
            scenes: 20,
            seed: 0,
            arm_probability: 0.5,
            detect: DetectConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Random wake geometry: the turbulent wake is always present and each
/// bright arm appears independently with probability `arm_probability`.
pub fn random_wake_scene(size: usize, arm_probability: f64, seed: u64) -> SceneDescriptor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = size as f64 / 8.0;
    let mut w = WakeParams {
        turbulent_theta: rng.random_range(0.0..180.0),
        turbulent_r: rng.random_range(-reach..reach),
        ..WakeParams::default()
    };
    w.contrasts[0] = rng.random_range(0.5..0.8);
    for c in w.contrasts.iter_mut().skip(1) {
        *c = if rng.random_bool(arm_probability) {
            rng.random_range(0.8..1.5)
        } else {
            0.0
        };
    }
    let mut d = SceneDescriptor::new(SceneKind::WakeScene, size, rng.random());
    d.wake = Some(w);
    d
}

pub fn run_wake(b: &WakeBench) -> Result<BenchReport> {
    if b.scenes == 0 {
        return Err(Error::Parameter(
            "wake bench needs at least one scene".into(),
        ));
    }
    if !(0.0..=1.0).contains(&b.arm_probability) {
        return Err(Error::Parameter(
            "arm probability must lie in [0, 1]".into(),
        ));
    }
    let geom = RadonGeometry::with_angle_count(Shape::new(b.size, b.size), b.angles);
    let mut solver = b.solver;
    if solver.opnorm_sq.is_none() {
        solver.opnorm_sq = Some(estimate_operator_norm(
            &FbpOperator::new(geom.clone()),
            solver.power_iters,
            solver.power_tol,
            solver.seed,
        )?);
    }
    let mut report = BenchReport::new("wake");
    let mut total = ConfusionCounts::default();
    let mut acc_sum = 0.0;
    for i in 0..b.scenes {
        let seed = b.seed.wrapping_add(i as u64);
        let desc = random_wake_scene(b.size, b.arm_probability, seed);
        let (y, truth) = gen_wake_scene(&desc)?;
        let rep = detect_wakes(&y, &geom, PenaltyConfig::cauchy(1.0), &solver, &b.detect)?;
        let counts = classify_detections(&rep, &truth);
        total += counts;
        let acc = (counts.tp + counts.tn) as f64 / WAKE_ARMS as f64;
        acc_sum += acc;
        let mut row = BenchRow::new(&format!("scene-{seed}"), "cauchy").metric("accuracy", acc);
        for (h, t) in rep.hypotheses.iter().zip(truth) {
            let name = h.kind.name();
            row = row
                .metric(&format!("{name}.score"), h.score)
                .metric(
                    &format!("{name}.visible"),
                    f64::from(u8::from(h.decided_visible)),
                )
                .metric(&format!("{name}.truth"), f64::from(u8::from(t)));
        }
        if let Some(s) = &rep.solve {
            report.check_policy(s)?;
            row.solve = Some(SolveSummary::of(s));
        }
        report.rows.push(row);
    }
    report.detection = Some(DetectionSummary {
        counts: total,
        metrics: detection_metrics(&total)?,
        mean_accuracy: acc_sum / b.scenes as f64,
    });
    Ok(report)
}

impl SuperresBench {
    /// Small configuration for smoke runs.
    pub fn quick() -> Self {
        SuperresBench {
            size: 64,
            seeds: vec![1],
            lambdas: vec![1e-2, 1e-1, 1.0],
            ..SuperresBench::default()
        }
    }
}

impl FormationBench {
    /// Small configuration for smoke runs.
    pub fn quick() -> Self {
        FormationBench {
            seeds: vec![1, 2],
            lambdas: vec![1e-2, 1e-1, 1.0],
            ..FormationBench::default()
        }
    }
}

impl DespeckleBench {
    /// Small configuration for smoke runs.
    pub fn quick() -> Self {
        DespeckleBench {
            size: 64,
            seeds: vec![1],
            lambdas: vec![1e-2, 1e-1, 1.0],
            ..DespeckleBench::default()
        }
    }
}

impl WakeBench {
    /// Small configuration for smoke runs.
    pub fn quick() -> Self {
        WakeBench {
            size: 64,
            scenes: 3,
            ..WakeBench::default()
        }
    }
}

/// Worst-case agreement between the closed-form Cauchy prox and the
/// golden-section reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProxCheck {
    pub samples: usize,
    pub seed: u64,
    /// Largest `|closed form − reference|`.
    pub max_deviation: f64,
    /// Largest absolute residual of the prox cubic at the closed-form root.
    pub max_residual: f64,
}

/// Compares the closed-form prox with the reference on seeded triples with
/// `x ∈ [−100, 100]`, `μ ∈ [10⁻³, 10]` and `γ ∈ [√μ/2, 10·√μ]`.
pub fn prox_check(samples: usize, seed: u64) -> Result<ProxCheck> {
    if samples == 0 {
        return Err(Error::Parameter(
            "prox check needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ProxCheck {
        samples,
        seed,
        max_deviation: 0.0,
        max_residual: 0.0,
    };
    for _ in 0..samples {
        let x = rng.random_range(-100.0..=100.0);
        let mu = 10f64.powf(rng.random_range(-3.0..=1.0));
        let gamma = mu.sqrt() / 2.0 * rng.random_range(1.0..=20.0);
        let z = prox_cauchy_scalar(x, gamma, mu)?;
        let g2 = gamma * gamma;
        let residual = ((z - x) * z + g2 + 2.0 * mu) * z - x * g2;
        out.max_residual = out.max_residual.max(residual.abs());
        out.max_deviation = out
            .max_deviation
            .max((z - prox_cauchy_reference(x, gamma, mu)?).abs());
    }
    Ok(out)
}

//! Subcommand implementations. Each returns its JSON report; `wall_ms` is
//! added by the caller.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use cps_core::bench::{
    prox_check, run_despeckle, run_formation, run_superres, run_wake, DespeckleBench,
    FormationBench, SpeckleLaw, SuperresBench, WakeBench,
};
use cps_core::metrics::{detection_metrics, psnr, rmse, smse, ssim};
use cps_core::operators::{
    dwt2, gaussian_psf, matrix_operator, random_measurement_operator, DenseMatrix, LinearOperator,
    OperatorRef, RadonGeometry,
};
use cps_core::penalty::{PenaltyConfig, PenaltyKind};
use cps_core::problems::{
    bicubic_upsample, classify_detections, despeckle, detect_wakes, estimate_noise_sigma,
    estimate_wake_sigma, form_image, matched_filter_recon, relative_error, superresolve,
    DetectConfig,
};
use cps_core::simulate::{
    apply_speckle, awgn, degrade_sr, gen_phantom, gen_wake_scene, SceneDescriptor, SceneKind,
};
use cps_core::solver::{GammaPolicy, SolveResult, SolverConfig, StepSize};
use cps_core::{Image, Shape};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::io::{read_image, write_image, PgmScale};
use crate::report::{self, SolveFields};

/// Largest prox deviation `prox-check` accepts.
pub const PROX_TOLERANCE: f64 = 1e-5;

/// Smallest image SSIM is defined on.
const SSIM_MIN_SIZE: usize = 11;

fn parse_real(flag: &str, v: &str) -> CliResult<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("--{flag}: expected 'auto' or a number, got '{v}'")))
}

/// `None` for `auto`.
fn parse_auto(flag: &str, v: &str) -> CliResult<Option<f64>> {
    if v.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_real(flag, v).map(Some)
    }
}

fn parse_step(v: &str) -> CliResult<StepSize> {
    let v = v.trim();
    if v.eq_ignore_ascii_case("auto") {
        return Ok(StepSize::Auto);
    }
    if let Some(f) = v.strip_suffix("/L") {
        return parse_real("mu", f).map(StepSize::Relative);
    }
    parse_real("mu", v).map(StepSize::Fixed)
}

fn setup(c: &CommonArgs, default_mu: StepSize) -> CliResult<(PenaltyConfig, SolverConfig)> {
    let gamma = parse_auto("gamma", &c.gamma)?;
    let penalty = match c.penalty {
        PenaltyKind::Cauchy => PenaltyConfig::cauchy(gamma.unwrap_or(1.0)),
        PenaltyKind::L1 => PenaltyConfig::l1(c.weight),
        PenaltyKind::Tv => PenaltyConfig::tv(c.weight),
    }
    .with_tv_inner_iters(c.tv_iters);
    penalty.validate()?;
    let solver = SolverConfig {
        mu: c
            .mu
            .as_deref()
            .map(parse_step)
            .transpose()?
            .unwrap_or(default_mu),
        gamma_policy: if gamma.is_some() {
            GammaPolicy::Explicit
        } else {
            GammaPolicy::AutoFromMu
        },
        eps: c.eps,
        max_iter: c.max_iter,
        seed: c.seed,
        ..SolverConfig::default()
    };
    solver.validate()?;
    Ok((penalty, solver))
}

fn load_scene(path: &Path) -> CliResult<SceneDescriptor> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let desc: SceneDescriptor = toml::from_str(&text)
        .map_err(|e| CliError::format(path, e.to_string().trim_end().to_string()))?;
    desc.validate()?;
    Ok(desc)
}

fn image_scene(path: &Path) -> CliResult<SceneDescriptor> {
    let desc = load_scene(path)?;
    if desc.kind == SceneKind::WakeScene {
        return Err(CliError::Usage(format!(
            "{}: wake scenes are only accepted by `wake`",
            path.display()
        )));
    }
    Ok(desc)
}

fn source_missing(cmd: &str) -> CliError {
    CliError::Usage(format!("`{cmd}` needs --input or --scene"))
}

/// Noise level of an additive-noise image from its finest diagonal wavelet band.
fn estimate_sigma(y: &Image) -> CliResult<f64> {
    let padded = y.pad_symmetric(Shape::new(
        y.rows().next_multiple_of(2),
        y.cols().next_multiple_of(2),
    ));
    Ok(estimate_noise_sigma(&dwt2(&padded, 1)?.details[0].diagonal))
}

fn write_optional(path: Option<&Path>, img: &Image) -> CliResult<Option<PgmScale>> {
    path.map_or(Ok(None), |p| write_image(p, img))
}

/// PSNR, RMSE and (when large enough) SSIM against the truth.
fn quality(truth: &Image, est: &Image, m: &mut BTreeMap<String, f64>) -> CliResult<()> {
    m.insert("psnr".into(), psnr(truth, est, None)?);
    m.insert("rmse".into(), rmse(truth, est)?);
    if truth.rows() >= SSIM_MIN_SIZE && truth.cols() >= SSIM_MIN_SIZE {
        m.insert("ssim".into(), ssim(truth, est)?);
    }
    Ok(())
}

fn finish(
    mut r: Map<String, Value>,
    m: &BTreeMap<String, f64>,
    scale: Option<PgmScale>,
    sigma: f64,
) -> Map<String, Value> {
    r.insert("metrics".into(), report::metrics(m));
    r.insert("scale".into(), report::scale(scale));
    r.insert("sigma".into(), report::real(sigma));
    r
}

pub fn superres(a: &SuperresArgs) -> CliResult<Value> {
    let c = &a.common;
    let (penalty, solver) = setup(c, StepSize::Auto)?;
    let psf = gaussian_psf(a.psf_size, a.psf_std)?;
    let (y, mut truth, generated_sigma) = match (&c.input, &c.scene) {
        (Some(p), _) => (read_image(p)?, None, None),
        (None, Some(p)) => {
            let x = gen_phantom(&image_scene(p)?)?;
            let (y, s) = degrade_sr(&x, &psf, a.factor, a.bsnr, c.seed)?;
            (y, Some(x), Some(s))
        }
        (None, None) => return Err(source_missing("superres")),
    };
    if let Some(p) = &c.truth {
        truth = Some(read_image(p)?);
    }
    let sigma = match parse_auto("sigma", &c.sigma)? {
        Some(s) => s,
        None => generated_sigma.map_or_else(|| estimate_sigma(&y), Ok)?,
    };
    let rec = superresolve(&y, &psf, a.factor, penalty, &solver, sigma)?;
    let mut m = BTreeMap::new();
    if let Some(t) = &truth {
        quality(t, &rec.image, &mut m)?;
        m.insert(
            "bicubic_psnr".into(),
            psnr(t, &bicubic_upsample(&y, a.factor)?, None)?,
        );
    }
    let scale = write_optional(c.output.as_deref(), &rec.image)?;
    let mut r = solve_map("superres", penalty, &rec.solve, c);
    r.insert(
        "params".into(),
        json!({ "factor": a.factor, "psf_size": a.psf_size, "psf_std": a.psf_std, "bsnr": report::real(a.bsnr) }),
    );
    Ok(Value::Object(finish(r, &m, scale, sigma)))
}

fn solve_map(
    problem: &str,
    penalty: PenaltyConfig,
    res: &SolveResult,
    c: &CommonArgs,
) -> Map<String, Value> {
    report::solve_report(
        problem,
        penalty,
        &SolveFields::of(res),
        c.eps,
        c.max_iter,
        c.seed,
    )
}

const SUBBAND_NAMES: [&str; 3] = ["horizontal", "vertical", "diagonal"];

/// Sum of the independent subband costs, each held at its final value once
/// that solve has stopped.
fn total_cost_trace(solves: &[SolveResult]) -> Vec<f64> {
    let len = solves.iter().map(|s| s.cost_trace.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            solves
                .iter()
                .map(|s| s.cost_trace[k.min(s.cost_trace.len() - 1)])
                .sum()
        })
        .collect()
}

pub fn despeckle_cmd(a: &DespeckleArgs) -> CliResult<Value> {
    let c = &a.common;
    if parse_auto("sigma", &c.sigma)?.is_some() {
        return Err(CliError::Usage(
            "despeckle estimates its noise level from the data; --sigma must be auto".into(),
        ));
    }
    let (penalty, solver) = setup(c, StepSize::Relative(1.0))?;
    let (y, mut truth) = match (&c.input, &c.scene) {
        (Some(p), _) => (read_image(p)?, None),
        (None, Some(p)) => {
            let x = gen_phantom(&image_scene(p)?)?;
            let v = SpeckleLaw::from(a.speckle).sample(a.looks, x.shape(), c.seed)?;
            (apply_speckle(&x, &v)?, Some(x))
        }
        (None, None) => return Err(source_missing("despeckle")),
    };
    if let Some(p) = &c.truth {
        truth = Some(read_image(p)?);
    }
    let out = despeckle(&y, penalty, &solver, a.levels)?;
    let mut m = BTreeMap::new();
    if let Some(t) = &truth {
        quality(t, &out.image, &mut m)?;
        m.insert("smse".into(), smse(t, &out.image)?);
        m.insert("noisy_psnr".into(), psnr(t, &y, None)?);
        m.insert("noisy_smse".into(), smse(t, &y)?);
    }
    let scale = write_optional(c.output.as_deref(), &out.image)?;
    let ratio_scale = match &a.ratio {
        Some(p) => write_image(p, &y.zip_map(&out.image, |o, e| o / e)?)?,
        None => None,
    };

    let fields = SolveFields {
        iterations: out.solves.iter().map(|s| s.iterations).sum(),
        converged: out.solves.iter().all(|s| s.converged),
        cost_trace: total_cost_trace(&out.solves),
        ..out.solves.first().map(SolveFields::of).unwrap_or_default()
    };
    let mut r = report::solve_report("despeckle", penalty, &fields, c.eps, c.max_iter, c.seed);
    let subbands: Vec<Value> = out
        .solves
        .iter()
        .enumerate()
        .map(|(i, s)| {
            json!({
                "level": i / 3 + 1,
                "band": SUBBAND_NAMES[i % 3],
                "iterations": s.iterations,
                "converged": s.converged,
            })
        })
        .collect();
    r.insert("subbands".into(), Value::Array(subbands));
    r.insert("ratio_scale".into(), report::scale(ratio_scale));
    r.insert(
        "params".into(),
        json!({ "levels": a.levels, "looks": report::real(a.looks), "speckle": SpeckleLaw::from(a.speckle).name() }),
    );
    Ok(Value::Object(finish(r, &m, scale, out.sigma)))
}

/// Square shape when `n` is a perfect square, otherwise a column.
fn default_shape(n: usize) -> Shape {
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        Shape::new(side, side)
    } else {
        Shape::vector(n)
    }
}

pub fn form(a: &FormArgs) -> CliResult<Value> {
    let c = &a.common;
    let (penalty, solver) = setup(c, StepSize::Auto)?;
    let (y, phi, mut truth, generated_sigma): (Image, OperatorRef, Option<Image>, Option<f64>) =
        match (&a.matrix, &a.data, &c.scene) {
            (Some(mp), Some(dp), _) => {
                let m = read_image(mp)?;
                let d = read_image(dp)?;
                let shape = a
                    .shape
                    .map_or_else(|| default_shape(m.cols()), |(r, cc)| Shape::new(r, cc));
                let mat = DenseMatrix::new(m.rows(), m.cols(), m.into_vec())?;
                let phi = matrix_operator(mat).with_input_shape(shape)?;
                let n = d.len();
                let y = d.reshape(Shape::vector(n))?;
                (y, Arc::new(phi), None, None)
            }
            (_, _, Some(p)) => {
                let x = gen_phantom(&image_scene(p)?)?;
                let m = (a.measurement_ratio * x.len() as f64).round() as usize;
                let phi = random_measurement_operator(m, x.shape(), c.seed)?;
                let y = awgn(&phi.apply(&x)?, a.noise, c.seed.wrapping_add(1))?;
                (y, Arc::new(phi), Some(x), Some(a.noise))
            }
            _ => {
                return Err(CliError::Usage(
                    "`form` needs --matrix with --data, or --scene".into(),
                ))
            }
        };
    if let Some(p) = &c.truth {
        truth = Some(read_image(p)?);
    }
    let sigma = match (parse_auto("sigma", &c.sigma)?, generated_sigma) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => {
            return Err(CliError::Usage(
                "`form` with --matrix input needs an explicit --sigma".into(),
            ))
        }
    };
    let rec = form_image(&y, phi.clone(), penalty, &solver, sigma)?;
    let matched = matched_filter_recon(&y, &phi)?;
    let mut m = BTreeMap::new();
    m.insert(
        "relative_error".into(),
        relative_error(&rec.image, &matched)?,
    );
    if let Some(t) = &truth {
        m.insert("rmse".into(), rmse(t, &rec.image)?);
        m.insert("matched_rmse".into(), rmse(t, &matched)?);
        m.insert("psnr".into(), psnr(t, &rec.image, None)?);
    }
    let scale = write_optional(c.output.as_deref(), &rec.image)?;
    let matched_scale = write_optional(a.matched.as_deref(), &matched)?;
    let mut r = solve_map("form", penalty, &rec.solve, c);
    r.insert("matched_scale".into(), report::scale(matched_scale));
    r.insert(
        "params".into(),
        json!({
            "measurements": phi.out_shape().len(),
            "shape": [phi.in_shape().rows, phi.in_shape().cols],
        }),
    );
    Ok(Value::Object(finish(r, &m, scale, sigma)))
}

pub fn wake(a: &WakeArgs) -> CliResult<Value> {
    let c = &a.common;
    let (penalty, solver) = setup(c, StepSize::Auto)?;
    let desc = c.scene.as_deref().map(load_scene).transpose()?;
    if let Some(d) = &desc {
        if d.kind != SceneKind::WakeScene {
            return Err(CliError::Usage(
                "`wake` needs a wake_scene descriptor".into(),
            ));
        }
    }
    let (y, truth) = match (&c.input, &desc) {
        (Some(p), d) => (
            read_image(p)?,
            d.as_ref().and_then(SceneDescriptor::truth_flags),
        ),
        (None, Some(d)) => {
            let (y, t) = gen_wake_scene(d)?;
            (y, Some(t))
        }
        (None, None) => return Err(source_missing("wake")),
    };
    if c.truth.is_some() {
        return Err(CliError::Usage(
            "`wake` reads ground truth from --scene, not --truth".into(),
        ));
    }
    let geom = RadonGeometry::with_angle_count(y.shape(), a.angles.max(1));
    let sigma = match parse_auto("sigma", &c.sigma)? {
        Some(s) => s,
        None => estimate_wake_sigma(&y)?,
    };
    let detect = DetectConfig {
        narrow_v_window: a.narrow_v_window,
        kelvin_window: (a.kelvin_min, a.kelvin_max),
        threshold: a.threshold,
        offset_band: a.offset_band,
        sigma: Some(sigma),
    };
    let rep = detect_wakes(&y, &geom, penalty, &solver, &detect)?;

    let mut m = BTreeMap::new();
    let mut counts = Value::Null;
    if let Some(t) = &truth {
        let cc = classify_detections(&rep, t);
        let dm = detection_metrics(&cc)?;
        for (k, v) in [
            ("accuracy", dm.accuracy),
            ("f1", dm.f1),
            ("sensitivity", dm.sensitivity),
            ("specificity", dm.specificity),
            ("lr_plus", dm.lr_plus),
            ("youden_j", dm.youden_j),
        ] {
            m.insert(k.into(), v);
        }
        counts = json!({ "tp": cc.tp, "tn": cc.tn, "fp": cc.fp, "fn": cc.fn_ });
    }
    let scale = write_optional(c.output.as_deref(), &rep.omega_hat)?;
    let fields = rep.solve.as_ref().map(SolveFields::of).unwrap_or_default();
    let mut r = report::solve_report("wake", penalty, &fields, c.eps, c.max_iter, c.seed);
    let hyps: Vec<Value> = rep
        .hypotheses
        .iter()
        .zip(truth.map_or([None; 5], |t| t.map(Some)))
        .map(|(h, t)| {
            json!({
                "kind": h.kind.name(),
                "visible": h.decided_visible,
                "truth": t,
                "score": report::real(h.score),
                "r": report::real(h.r),
                "theta": report::real(h.theta),
            })
        })
        .collect();
    r.insert("hypotheses".into(), Value::Array(hyps));
    r.insert("counts".into(), counts);
    r.insert(
        "params".into(),
        json!({
            "angles": geom.angles_deg().len(),
            "threshold": report::real(a.threshold),
            "narrow_v_window": report::real(a.narrow_v_window),
            "kelvin_window": [report::real(a.kelvin_min), report::real(a.kelvin_max)],
            "offset_band": report::real(a.offset_band),
        }),
    );
    Ok(Value::Object(finish(r, &m, scale, sigma)))
}

/// Optional overrides for `bench`; a present table replaces the preset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    superres: Option<SuperresBench>,
    form: Option<FormationBench>,
    despeckle: Option<DespeckleBench>,
    wake: Option<WakeBench>,
}

#[derive(Debug, Serialize)]
struct BenchConfigs {
    #[serde(skip_serializing_if = "Option::is_none")]
    superres: Option<SuperresBench>,
    #[serde(skip_serializing_if = "Option::is_none")]
    form: Option<FormationBench>,
    #[serde(skip_serializing_if = "Option::is_none")]
    despeckle: Option<DespeckleBench>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wake: Option<WakeBench>,
}

fn shift(seeds: &mut [u64], by: u64) {
    for s in seeds {
        *s = s.wrapping_add(by);
    }
}

fn bench_configs(a: &BenchArgs) -> CliResult<BenchConfigs> {
    let file = match &a.bench_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            toml::from_str::<BenchFile>(&text).map_err(|e| {
                CliError::Usage(format!("{}: {}", p.display(), e.to_string().trim_end()))
            })?
        }
        None => BenchFile::default(),
    };
    let want = |p: BenchProblem| a.problem == p || a.problem == BenchProblem::All;
    let mut cfg = BenchConfigs {
        superres: want(BenchProblem::Superres).then(|| {
            file.superres.unwrap_or_else(|| {
                if a.quick {
                    SuperresBench::quick()
                } else {
                    SuperresBench::default()
                }
            })
        }),
        form: want(BenchProblem::Form).then(|| {
            file.form.unwrap_or_else(|| {
                if a.quick {
                    FormationBench::quick()
                } else {
                    FormationBench::default()
                }
            })
        }),
        despeckle: want(BenchProblem::Despeckle).then(|| {
            file.despeckle.unwrap_or_else(|| {
                if a.quick {
                    DespeckleBench::quick()
                } else {
                    DespeckleBench::default()
                }
            })
        }),
        wake: want(BenchProblem::Wake).then(|| {
            file.wake.unwrap_or_else(|| {
                if a.quick {
                    WakeBench::quick()
                } else {
                    WakeBench::default()
                }
            })
        }),
    };
    if let Some(b) = &mut cfg.superres {
        shift(&mut b.seeds, a.seed);
        b.holdout_seed = b.holdout_seed.wrapping_add(a.seed);
    }
    if let Some(b) = &mut cfg.form {
        shift(&mut b.seeds, a.seed);
        b.holdout_seed = b.holdout_seed.wrapping_add(a.seed);
    }
    if let Some(b) = &mut cfg.despeckle {
        shift(&mut b.seeds, a.seed);
        b.holdout_seed = b.holdout_seed.wrapping_add(a.seed);
    }
    if let Some(b) = &mut cfg.wake {
        b.seed = b.seed.wrapping_add(a.seed);
    }
    Ok(cfg)
}

pub fn bench(a: &BenchArgs) -> CliResult<Value> {
    let cfg = bench_configs(a)?;
    let mut reports = Vec::new();
    if let Some(b) = &cfg.superres {
        log::info!("running super-resolution bench");
        reports.push(run_superres(b)?);
    }
    if let Some(b) = &cfg.form {
        log::info!("running image-formation bench");
        reports.push(run_formation(b)?);
    }
    if let Some(b) = &cfg.despeckle {
        log::info!("running despeckling bench");
        reports.push(run_despeckle(b)?);
    }
    if let Some(b) = &cfg.wake {
        log::info!("running wake-detection bench");
        reports.push(run_wake(b)?);
    }
    Ok(json!({
        "problem": "bench",
        "seed": a.seed,
        "quick": a.quick,
        "config": serde_json::to_value(&cfg).map_err(|e| CliError::Internal(e.to_string()))?,
        "reports": serde_json::to_value(&reports).map_err(|e| CliError::Internal(e.to_string()))?,
    }))
}

pub fn prox_check_cmd(a: &ProxCheckArgs) -> CliResult<(Value, Option<CliError>)> {
    let pc = prox_check(a.samples, a.seed)?;
    println!(
        "max deviation {:.3e}, max cubic residual {:.3e} over {} samples (tolerance {:.0e})",
        pc.max_deviation, pc.max_residual, pc.samples, PROX_TOLERANCE
    );
    let pass = pc.max_deviation < PROX_TOLERANCE;
    let report = json!({
        "problem": "prox-check",
        "samples": pc.samples,
        "seed": pc.seed,
        "max_deviation": report::real(pc.max_deviation),
        "max_residual": report::real(pc.max_residual),
        "tolerance": PROX_TOLERANCE,
        "pass": pass,
    });
    let failure = (!pass).then_some(CliError::ProxCheck(pc.max_deviation, PROX_TOLERANCE));
    Ok((report, failure))
}

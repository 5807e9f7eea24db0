//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are expected to fail; the binary exits
//! non-zero only when the set of failing criteria differs from that list.

mod common;

use std::time::Instant;

use common::*;
use cps_core::bench::*;
use cps_core::metrics::{detection_metrics, ConfusionCounts};
use cps_core::operators::{
    adjoint_dot_test, blur_operator, dwt2, gaussian_psf, idwt2, Identity, Scaled,
};
use cps_core::penalty::{prox_cauchy_scalar, PenaltyConfig};
use cps_core::simulate::{gen_gamma_speckle, gen_lognormal_speckle};
use cps_core::solver::*;
use cps_core::{Image, Shape};

const KNOWN_FAILURES: [u8; 3] = [4, 5, 7];

struct Outcome {
    id: u8,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new(id: u8, title: &'static str) -> Self {
        Outcome {
            id,
            title,
            pass: true,
            details: Vec::new(),
        }
    }

    /// Records one sub-check; any failing sub-check fails the criterion.
    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.check(false, format!("{what}: {e}"));
    }
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new(1, "Cauchy prox correctness");
    let t = Instant::now();
    let (mut residual, mut deviation) = (0.0f64, 0.0f64);
    for (x, gamma, mu) in prox_triples(10_000, 1) {
        let z = prox_cauchy_scalar(x, gamma, mu).expect("valid triple");
        residual = residual.max(cubic_residual(z, x, gamma, mu).abs());
        deviation = deviation.max((z - golden_prox(x, gamma, mu)).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    o.check(
        residual < 1e-8,
        format!("max cubic residual {residual:.2e} (< 1e-8)"),
    );
    o.check(
        deviation < 1e-5,
        format!("max deviation from golden-section oracle {deviation:.2e} (< 1e-5)"),
    );
    o.check(
        secs < 5.0,
        format!("10^4 triples with oracle in {secs:.2} s (< 5 s)"),
    );
    o
}

fn criterion_2(reports: &[(&str, Option<&BenchReport>)]) -> Outcome {
    let mut o = Outcome::new(2, "Convexity gate and automatic policies");
    o.check(
        check_convexity_condition(0.5, 1.0),
        "condition(γ=0.5, μ=1) is true".into(),
    );
    o.check(
        !check_convexity_condition(0.9, 4.0),
        "condition(γ=0.9, μ=4) is false".into(),
    );

    let mut violations = 0;
    let mut trials = 0;
    for i in 0..200u32 {
        let scale = 0.05 + 0.37 * f64::from(i % 17);
        let sigma = 0.01 + 0.13 * f64::from(i % 23);
        let s = Shape::new(3, 3);
        let p = InverseProblem::new(
            Image::filled(s, 1.0),
            std::sync::Arc::new(Scaled::new(s, scale)),
            sigma,
            PenaltyConfig::cauchy(1.0),
        )
        .expect("problem");
        let (mu, pen, _, l) = resolve_parameters(&p, &SolverConfig::default()).expect("resolve");
        trials += 1;
        if !(mu > 0.0 && mu < 2.0 / l && check_convexity_condition(pen.gamma, mu)) {
            violations += 1;
        }
    }
    o.check(
        violations == 0,
        format!("automatic (μ, γ) valid on {trials} operator/noise pairs"),
    );
    for (name, report) in reports {
        match report {
            Some(r) => o.check(
                r.policy_checks > 0,
                format!(
                    "{name} bench asserted the policy on {} Cauchy solves",
                    r.policy_checks
                ),
            ),
            None => o.check(false, format!("{name} bench did not complete")),
        }
    }
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new(3, "Operator contracts");
    for (op, tol) in shipped_operators() {
        match adjoint_dot_test(op.as_ref(), 20, 2024) {
            Ok(worst) => o.check(
                worst < tol,
                format!("dot test {:<10} {worst:.2e} (< {tol:.0e})", op.name()),
            ),
            Err(e) => o.error(op.name(), e),
        }
    }
    let x = random_image(Shape::new(64, 64), 77);
    let back = idwt2(&dwt2(&x, 3).expect("dwt2")).expect("idwt2");
    let err = x
        .as_slice()
        .iter()
        .zip(back.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    o.check(
        err < 1e-10,
        format!("dwt2/idwt2 round trip on 64x64: {err:.2e} (< 1e-10)"),
    );

    let blur = blur_operator(gaussian_psf(5, 2.0).expect("psf"), Shape::new(8, 8)).expect("blur");
    let oracle = dense_opnorm_sq(&blur);
    let cfg = SolverConfig::default();
    match estimate_operator_norm(&blur, cfg.power_iters, cfg.power_tol, cfg.seed) {
        Ok(est) => o.check(
            (est - oracle).abs() < 1e-4,
            format!("8x8 blur norm² {est:.8} vs dense eigen-oracle {oracle:.8} (within 1e-4)"),
        ),
        Err(e) => o.error("blur norm", e),
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new(4, "Solver soundness");
    let seeds = 1..=5u64;

    let mut worst = f64::NEG_INFINITY;
    let mut converged = 0;
    let mut satisfied = true;
    let mut defect = 0.0f64;
    for seed in seeds.clone() {
        let p = denoising_problem(32, 0.1, seed);
        let res = cps_solve(&p, &SolverConfig::default()).expect("solve");
        satisfied &= check_convexity_condition(res.penalty.gamma, res.mu);
        worst = worst.max(worst_increase(&res.cost_trace));
        if res.converged {
            converged += 1;
            defect = defect.max(stationarity_defect(
                &res.solution,
                &p.observation,
                p.sigma,
                res.penalty.gamma,
            ));
        }
    }
    o.check(
        satisfied,
        "automatic step μ = 1.8/L with γ = √μ/2 satisfies the condition".into(),
    );
    o.check(
        worst <= 1e-12,
        format!("automatic step: largest cost increase {worst:.2e} (≤ 1e-12)"),
    );
    o.check(
        converged == 5,
        format!("automatic step: {converged}/5 denoising runs converged"),
    );
    if converged > 0 {
        o.check(
            defect < 1e-4,
            format!("automatic step: stationarity defect {defect:.2e} (< 1e-4)"),
        );
    }

    let unit = SolverConfig {
        mu: StepSize::Relative(1.0),
        eps: 1e-10,
        ..SolverConfig::default()
    };
    let mut worst = f64::NEG_INFINITY;
    let mut defect = 0.0f64;
    let mut all_converged = true;
    for seed in seeds {
        let p = denoising_problem(32, 0.1, seed);
        let res = cps_solve(&p, &unit).expect("solve");
        worst = worst.max(worst_increase(&res.cost_trace));
        all_converged &= res.converged;
        defect = defect.max(stationarity_defect(
            &res.solution,
            &p.observation,
            p.sigma,
            res.penalty.gamma,
        ));
    }
    o.details.push(format!(
        "info step μ = 1/L: largest cost increase {worst:.2e}, all converged {all_converged}, stationarity defect {defect:.2e}"
    ));

    let s = Shape::new(1, 1);
    let p = InverseProblem::new(
        Image::filled(s, 1.0),
        std::sync::Arc::new(Identity::new(s)),
        1.0,
        PenaltyConfig::cauchy(0.5),
    )
    .expect("problem");
    let cfg = SolverConfig {
        mu: StepSize::Fixed(0.9),
        gamma_policy: GammaPolicy::Explicit,
        eps: 1e-14,
        max_iter: 10_000,
        ..SolverConfig::default()
    };
    let x = cps_solve(&p, &cfg).expect("solve").solution[(0, 0)];
    let root = bisect(|u| (u - 1.0) + 2.0 * u / (0.25 + u * u), 0.0, 1.0, 1e-15);
    o.check(
        (x - root).abs() < 1e-6,
        format!("scalar fixed point {x:.9} vs root oracle {root:.9} (within 1e-6)"),
    );
    o
}

fn criterion_5(r: &Result<BenchReport, String>) -> Outcome {
    let mut o = Outcome::new(5, "Super-resolution analogue");
    let r = match r {
        Ok(r) => r,
        Err(e) => {
            o.error("bench", e);
            return o;
        }
    };
    for cauchy in r.method_rows("cauchy") {
        let get = |m: &str| {
            r.row(&cauchy.case, m)
                .and_then(|row| row.get("psnr"))
                .unwrap_or(f64::NAN)
        };
        let (c, bic) = (get("cauchy"), get("bicubic"));
        let best_ref = get("l1").max(get("tv"));
        o.check(
            c >= bic + 0.5,
            format!(
                "{}: cauchy {c:.2} dB vs bicubic {bic:.2} dB + 0.5",
                cauchy.case
            ),
        );
        o.check(
            c >= best_ref - 0.1,
            format!(
                "{}: cauchy {c:.2} dB vs best of L1/TV {best_ref:.2} dB − 0.1",
                cauchy.case
            ),
        );
    }
    o.details
        .push(format!("info selected λ {:?}", r.selected_lambda));
    o
}

fn criterion_6(r: &Result<BenchReport, String>) -> Outcome {
    let mut o = Outcome::new(6, "Despeckling analogue");
    let n = Shape::new(1000, 1000);
    for looks in [5.0, 15.0] {
        for (name, v) in [
            ("gamma", gen_gamma_speckle(looks, n, 31)),
            ("lognormal", gen_lognormal_speckle(looks, n, 32)),
        ] {
            let v = v.expect("speckle");
            let (mean, var) = (v.mean(), v.variance());
            o.check(
                (mean - 1.0).abs() < 0.05 && (var * looks - 1.0).abs() < 0.05,
                format!(
                    "{name} L={looks}: mean {mean:.4}, variance {var:.5} vs {:.5} (within 5%)",
                    1.0 / looks
                ),
            );
        }
    }
    let r = match r {
        Ok(r) => r,
        Err(e) => {
            o.error("bench", e);
            return o;
        }
    };
    for cauchy in r.method_rows("cauchy") {
        let noisy = r.row(&cauchy.case, "noisy");
        let gain = |m: &str| {
            cauchy.get(m).unwrap_or(f64::NAN) - noisy.and_then(|n| n.get(m)).unwrap_or(f64::NAN)
        };
        let (dp, ds) = (gain("psnr"), gain("smse"));
        o.check(
            dp >= 1.0 && ds >= 2.0,
            format!(
                "{}: PSNR +{dp:.2} dB (≥ 1), S/MSE +{ds:.2} dB (≥ 2)",
                cauchy.case
            ),
        );
    }
    o
}

fn criterion_7(r: &Result<BenchReport, String>, eps: f64) -> Outcome {
    let mut o = Outcome::new(7, "Image-formation analogue");
    let r = match r {
        Ok(r) => r,
        Err(e) => {
            o.error("bench", e);
            return o;
        }
    };
    let mut wins = 0;
    let mut total = 0;
    for cauchy in r.method_rows("cauchy") {
        total += 1;
        let get = |m: &str, k: &str| {
            r.row(&cauchy.case, m)
                .and_then(|row| row.get(k))
                .unwrap_or(f64::NAN)
        };
        let (c_rmse, mf_rmse) = (get("cauchy", "rmse"), get("matched_filter", "rmse"));
        let (c_re, l1_re) = (get("cauchy", "re"), get("l1", "re"));
        let win = c_rmse < mf_rmse && c_re < l1_re;
        wins += usize::from(win);
        o.details.push(format!(
            "info {}: RMSE cauchy {c_rmse:.4} vs matched filter {mf_rmse:.4}; RE cauchy {c_re:.3} vs L1 {l1_re:.3}",
            cauchy.case
        ));
        let s = cauchy.solve.as_ref();
        let iters = s.map_or(usize::MAX, |s| s.iterations);
        let conv = s.is_some_and(|s| s.converged);
        o.check(
            conv && iters <= 50,
            format!(
                "{}: converged {conv} at ε = {eps:.0e} in {iters} iterations (≤ 50)",
                cauchy.case
            ),
        );
    }
    o.check(
        wins >= 4,
        format!("RMSE and RE comparisons won on {wins}/{total} seeds (≥ 4)"),
    );
    o
}

fn criterion_8(r: &Result<BenchReport, String>) -> Outcome {
    let mut o = Outcome::new(8, "Wake detection analogue");
    let d = match r.as_ref().map(|r| r.detection.as_ref()) {
        Ok(Some(d)) => d,
        Ok(None) => {
            o.check(false, "bench produced no detection summary".into());
            return o;
        }
        Err(e) => {
            o.error("bench", e);
            return o;
        }
    };
    let scenes = r.as_ref().map_or(0, |r| r.rows.len());
    o.check(scenes == 20, format!("{scenes} seeded scenes"));
    o.check(
        d.mean_accuracy >= 0.8,
        format!("mean accuracy {:.3} (≥ 0.80)", d.mean_accuracy),
    );
    o.check(
        d.metrics.youden_j >= 0.5,
        format!("Youden's J {:.3} (≥ 0.5)", d.metrics.youden_j),
    );
    let c = d.counts;
    o.details.push(format!(
        "info counts tp {} tn {} fp {} fn {}",
        c.tp, c.tn, c.fp, c.fn_
    ));
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new(9, "Detection metrics from published counts");
    match detection_metrics(&ConfusionCounts::new(38, 46, 10, 8)) {
        Ok(m) => {
            o.check(
                (m.lr_plus - 4.63).abs() <= 0.01,
                format!("LR+ {:.4} (4.63 ± 0.01)", m.lr_plus),
            );
            o.check(
                (m.f1 - 0.81).abs() <= 0.01,
                format!("F1 {:.4} (0.81 ± 0.01)", m.f1),
            );
            o.check(
                (m.youden_j - 0.65).abs() <= 0.01,
                format!("Youden's J {:.4} (0.65 ± 0.01)", m.youden_j),
            );
            o.details.push(format!(
                "info accuracy {:.4} (published 0.8182)",
                m.accuracy
            ));
        }
        Err(e) => o.error("metrics", e),
    }
    o
}

type BenchJob = Box<dyn Fn() -> cps_core::Result<BenchReport>>;

fn small_benches() -> Vec<(&'static str, BenchJob)> {
    vec![
        (
            "superres",
            Box::new(|| run_superres(&SuperresBench::quick())),
        ),
        ("form", Box::new(|| run_formation(&FormationBench::quick()))),
        (
            "despeckle",
            Box::new(|| run_despeckle(&DespeckleBench::quick())),
        ),
        ("wake", Box::new(|| run_wake(&WakeBench::quick()))),
    ]
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new(10, "Determinism");
    for (name, run) in small_benches() {
        match (run(), run()) {
            (Ok(a), Ok(b)) => o.check(
                format!("{a:?}") == format!("{b:?}"),
                format!(
                    "{name} bench: two runs give identical reports ({} rows)",
                    a.rows.len()
                ),
            ),
            (Err(e), _) | (_, Err(e)) => o.error(name, e),
        }
    }
    o
}

fn timed<T>(name: &str, f: impl FnOnce() -> cps_core::Result<T>) -> Result<T, String> {
    let t = Instant::now();
    let r = f().map_err(|e| e.to_string());
    println!("  ran {name} bench in {:.1} s", t.elapsed().as_secs_f64());
    r
}

fn main() {
    println!("running acceptance criteria");
    let mut outcomes = vec![criterion_1(), criterion_3(), criterion_4(), criterion_9()];

    let sr_cfg = SuperresBench::default();
    let t = Instant::now();
    let sr = timed("superres", || run_superres(&sr_cfg));
    let sr_secs = t.elapsed().as_secs_f64();
    let ds = timed("despeckle", || run_despeckle(&DespeckleBench::default()));
    let form_cfg = FormationBench::default();
    let form = timed("formation", || run_formation(&form_cfg));
    let wake = timed("wake", || run_wake(&WakeBench::default()));

    let mut c5 = criterion_5(&sr);
    c5.check(
        sr_secs < 300.0,
        format!("bench runtime {sr_secs:.1} s (< 300 s)"),
    );
    outcomes.push(c5);
    outcomes.push(criterion_6(&ds));
    outcomes.push(criterion_7(&form, form_cfg.solver.eps));
    outcomes.push(criterion_8(&wake));
    outcomes.push(criterion_2(&[
        ("superres", sr.as_ref().ok()),
        ("despeckle", ds.as_ref().ok()),
        ("formation", form.as_ref().ok()),
        ("wake", wake.as_ref().ok()),
    ]));
    outcomes.push(criterion_10());
    outcomes.sort_by_key(|o| o.id);

    println!();
    for o in &outcomes {
        for d in &o.details {
            println!("    [{:>2}] {d}", o.id);
        }
    }
    println!();
    for o in &outcomes {
        let known = if !o.pass && KNOWN_FAILURES.contains(&o.id) {
            " (known failure)"
        } else {
            ""
        };
        println!(
            "{} criterion {:>2}: {}{known}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title
        );
    }

    let failing: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    let passed = outcomes.len() - failing.len();
    println!(
        "\n{passed}/{} criteria pass; failing {failing:?}; known failures {KNOWN_FAILURES:?}",
        outcomes.len()
    );
    if failing != KNOWN_FAILURES {
        println!("failing set differs from the known failures");
        std::process::exit(1);
    }
}

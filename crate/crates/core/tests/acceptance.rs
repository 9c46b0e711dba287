//! Acceptance suite. Each criterion runs on its own thread and reports one
//! PASS/FAIL line; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use porous_blowup::criteria::{
    bubble_field, h0_coefficients, lemma4_sweep, robin_polynomial_field, thm1_upper_bound, thm3_dual_check,
    thm3_lower_bound, LemmaChecker, LemmaParams, Thm3Constants,
};
use porous_blowup::dynamics::{run, InitialData, ProblemSpec, SimConfig, SimStatus, SourceKind};
use porous_blowup::functionals::{psi_monotonicity_violations, Trace};
use porous_blowup::harness::{
    emit_outputs, parse_config, run_experiment, Command, ExperimentOutput, ExperimentReport, RunConfig,
};
use porous_blowup::spectral::{dirichlet_lambda1, robin_xi1, EIGEN_TOLERANCE};
use porous_blowup::{Boundary, Domain, DomainKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn scenario(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn experiment(config: &RunConfig, command: Command) -> Result<ExperimentOutput, String> {
    run_experiment(config, command).map_err(|e| e.to_string())
}

// 1D Barenblatt for m = 2 and unit mass:
// U = t^(-1/3) (C - x^2 / (12 t^(2/3)))_+ with (4/3) C sqrt(12 C) = 1.
fn barenblatt_m2(x: f64, t: f64) -> f64 {
    let c = (3.0 / (4.0 * 12f64.sqrt())).powf(2.0 / 3.0);
    t.powf(-1.0 / 3.0) * (c - x * x / (12.0 * t.powf(2.0 / 3.0))).max(0.0)
}

fn barenblatt_convergence() -> Outcome {
    let (t0, t1) = (0.1, 0.5);
    let spec = ProblemSpec {
        m: 2.0,
        p: 1.0,
        q: 1.0,
        k1: 0.0,
        k2: 0.0,
        boundary: Boundary::Dirichlet,
        source: SourceKind::None,
        initial: InitialData::Barenblatt { mass: 1.0, time: t0 },
    };
    let sim = SimConfig {
        t_end: t1 - t0,
        ..SimConfig::default()
    };
    let mut rows = Vec::new();
    for n in [100, 200, 400] {
        let domain = Domain::new(DomainKind::Interval, &[8.0], 1, Some(&[4.0]), n).map_err(|e| e.to_string())?;
        let out = run(&spec, &domain, &sim).map_err(|e| e.to_string())?;
        ensure(matches!(out.status, SimStatus::RanToEnd { .. }), format!("{n} nodes: {:?}", out.status))?;
        let exact = domain.sample(|x| barenblatt_m2(x[0] - 4.0, t1));
        let peak = exact.iter().copied().fold(0.0, f64::max);
        let err = out
            .final_field
            .values
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / peak;
        rows.push((domain.min_spacing(), err));
    }
    let orders: Vec<f64> = rows.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
    let overall = (rows[0].1 / rows[2].1).ln() / (rows[0].0 / rows[2].0).ln();
    let finest = rows[2].1;
    let detail = format!("errors {:.2e} {:.2e} {:.2e}, orders {orders:.2?}, overall {overall:.2}", rows[0].1, rows[1].1, finest);
    ensure(finest < 0.02, format!("L-inf error at 400 nodes: {detail}"))?;
    ensure(overall >= 1.0, format!("order below 1: {detail}"))?;

    let report = experiment(&scenario("barenblatt.ini"), Command::Convergence)?.report;
    ensure(report.exit_code == 0, format!("convergence scenario exit {}", report.exit_code))?;
    Ok(detail)
}

// Robin eigenvalue on (0, 1) with w' = h w at 0 and w' = -h w at 1: shoot
// w'' = -k^2 w with RK4 and bisect the end condition in k.
fn shooting_xi1(h: f64) -> f64 {
    let mismatch = |k: f64| {
        let steps = 4000;
        let dx = 1.0 / steps as f64;
        let f = |w: f64, dw: f64| (dw, -k * k * w);
        let (mut w, mut dw) = (1.0, h);
        for _ in 0..steps {
            let (a1, b1) = f(w, dw);
            let (a2, b2) = f(w + 0.5 * dx * a1, dw + 0.5 * dx * b1);
            let (a3, b3) = f(w + 0.5 * dx * a2, dw + 0.5 * dx * b2);
            let (a4, b4) = f(w + dx * a3, dw + dx * b3);
            w += dx / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            dw += dx / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        dw + h * w
    };
    let (mut lo, mut hi) = (1e-6, PI - 1e-6);
    let flo = mismatch(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (mismatch(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    k * k
}

fn eigenvalue_accuracy() -> Outcome {
    let tol = 10.0 * EIGEN_TOLERANCE;
    let coarse = Domain::new(DomainKind::Interval, &[1.0], 1, None, 200).map_err(|e| e.to_string())?;
    let lambda = dirichlet_lambda1(&coarse).map_err(|e| e.to_string())?;
    let rel_lambda = (lambda.eigenvalue - PI * PI).abs() / (PI * PI);
    ensure(rel_lambda < 0.01, format!("lambda1 = {} off by {rel_lambda:e}", lambda.eigenvalue))?;
    ensure(lambda.residual <= tol, format!("lambda1 residual {:e}", lambda.residual))?;

    let oracle = shooting_xi1(1.0);
    let fine = Domain::new(DomainKind::Interval, &[1.0], 1, None, 401).map_err(|e| e.to_string())?;
    let xi = robin_xi1(&fine, 1.0).map_err(|e| e.to_string())?;
    let rel_xi = (xi.eigenvalue - oracle).abs() / oracle;
    ensure(rel_xi <= 1e-4, format!("xi1(1) = {} against {oracle}: {rel_xi:e}", xi.eigenvalue))?;
    ensure(xi.residual <= tol, format!("xi1 residual {:e}", xi.residual))?;
    let xi_coarse = robin_xi1(&coarse, 1.0).map_err(|e| e.to_string())?;
    ensure(xi_coarse.residual <= tol, format!("xi1 residual {:e}", xi_coarse.residual))?;
    Ok(format!(
        "lambda1 rel err {rel_lambda:.2e}, xi1(1) = {:.8} vs oracle {oracle:.8} (rel {rel_xi:.1e}), max residual {:.1e}",
        xi.eigenvalue,
        lambda.residual.max(xi.residual).max(xi_coarse.residual)
    ))
}

fn lemma_suite() -> Outcome {
    let fields = 20;
    let square = Domain::new(DomainKind::Box, &[1.0, 1.0], 2, None, 65).map_err(|e| e.to_string())?;
    let mut params = LemmaParams::new(2.0);
    params.robin_h = Some(1.0);
    let robin = LemmaChecker::new(&square, params).map_err(|e| e.to_string())?;
    let mut worst = [f64::INFINITY; 3];
    let mut counts = [0usize; 3];
    let mut tally = |report: &porous_blowup::criteria::LemmaReport| -> Result<(), String> {
        for r in &report.residuals {
            let k = match r.lemma.as_str() {
                "lemma1" => 0,
                "lemma2" => 1,
                "lemma3" => 2,
                other => return Err(format!("unexpected {other}")),
            };
            worst[k] = worst[k].min(r.residual);
            counts[k] += 1;
            ensure(r.residual >= -1e-8, format!("{}: {} residual {:e}", r.lemma, r.inequality, r.residual))?;
        }
        Ok(())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..fields {
        let v = robin_polynomial_field(&square, 1.0, &mut rng).map_err(|e| e.to_string())?;
        tally(&robin.check(&v).map_err(|e| e.to_string())?)?;
    }

    let coeffs = h0_coefficients(2.5, 3.0, 2.0, None).map_err(|e| e.to_string())?;
    let cube = Domain::new(DomainKind::Box, &[1.0, 1.0, 1.0], 3, None, 33).map_err(|e| e.to_string())?;
    let mut params = LemmaParams::new(2.5);
    params.coeffs = Some(coeffs);
    let interp = LemmaChecker::new(&cube, params).map_err(|e| e.to_string())?;
    for _ in 0..fields {
        let v = bubble_field(&cube, &mut rng).map_err(|e| e.to_string())?;
        let report = interp.check(&v).map_err(|e| e.to_string())?;
        ensure(report.skipped.iter().all(|s| !s.starts_with("lemma3")), format!("{:?}", report.skipped))?;
        tally(&report)?;
    }
    ensure(counts.iter().all(|c| *c >= fields), format!("inequality counts {counts:?}"))?;

    let lambda = dirichlet_lambda1(&cube).map_err(|e| e.to_string())?.eigenvalue;
    let consts = Thm3Constants::compute(&coeffs, 1.0, 1.0, lambda).map_err(|e| e.to_string())?;
    let l4 = lemma4_sweep(&consts, &coeffs, 50);
    ensure(l4.passed && l4.points == 50, format!("{l4:?}"))?;
    Ok(format!(
        "min residuals lemma1 {:.2e}, lemma2 {:.2e}, lemma3 {:.2e} over {counts:?} inequalities; Phi(xi_m) {:.4e} <= {:.4e}",
        worst[0], worst[1], worst[2], l4.phi_at_xi_m, l4.sweep_min
    ))
}

fn theorem1_config(dim: usize, resolution: usize, amplitude: f64) -> String {
    let extents = vec!["1"; dim].join(", ");
    format!(
        "domain.kind = {}\ndomain.extents = {extents}\ndomain.resolution = {resolution}\n\
         problem.m = 2\nproblem.p = 3\nproblem.q = 2\nproblem.k1 = 1\nproblem.k2 = 1\n\
         problem.boundary = robin\nproblem.h = 1\nproblem.source = power_absorption\n\
         problem.u0 = eigenfunction\nproblem.amplitude = {amplitude}\n\
         run.mode = theorem1\nrun.t_end = 10\n",
        if dim == 1 { "interval" } else { "box" }
    )
}

fn theorem1_sandwich() -> Outcome {
    let mut details = Vec::new();
    for (dim, resolution) in [(1, 101), (2, 41)] {
        // smallest amplitude on a doubling ladder with psi(0) > 0
        let mut amplitude = 1.0;
        let (config, t_bound) = loop {
            let config = parse_config(&theorem1_config(dim, resolution, amplitude)).map_err(|e| e.to_string())?;
            let domain = config.domain.build(resolution).map_err(|e| e.to_string())?;
            let u0 = config.problem.initial_field(&domain).map_err(|e| e.to_string())?;
            let report = thm1_upper_bound(&u0, &config.problem, &domain).map_err(|e| e.to_string())?;
            if let Some(t) = report.bound {
                break (config, t);
            }
            amplitude *= 2.0;
            ensure(amplitude < 1e4, "no amplitude with psi(0) > 0")?;
        };
        let out = experiment(&config, Command::Simulate)?;
        let status = out.report.status.clone().ok_or("no status")?;
        let t_est = status.blowup_time().ok_or(format!("{dim}D: no blow-up detected: {status:?}"))?;
        ensure(
            t_est <= t_bound * 1.05,
            format!("{dim}D: t_estimate {t_est:e} above 1.05 T = {:e}", 1.05 * t_bound),
        )?;
        let violations = psi_monotonicity_violations(&out.trace, 1e-3);
        ensure(violations.is_empty(), format!("{dim}D: psi decreases: {:?}", &violations[..violations.len().min(3)]))?;
        ensure(out.report.exit_code == 0, format!("{dim}D: exit {}", out.report.exit_code))?;
        details.push(format!("{dim}D A={amplitude}: t_est {t_est:.4e} <= T {t_bound:.4e}"));
    }
    Ok(details.join("; "))
}

fn max_phi(trace: &Trace) -> f64 {
    trace.rows().iter().map(|r| r.phi).fold(0.0, f64::max)
}

fn theorem2_cap() -> Outcome {
    let config = scenario("theorem2.ini");
    ensure(config.sim.t_end == 10.0, "scenario must run to T_end = 10")?;
    let out = experiment(&config, Command::Simulate)?;
    let report = out
        .report
        .criteria
        .iter()
        .find(|r| r.theorem == "theorem2")
        .ok_or("no theorem2 report")?;
    ensure(matches!(out.report.status, Some(SimStatus::RanToEnd { .. })), format!("{:?}", out.report.status))?;
    let (cap, label) = match report.bound {
        Some(c) => (c, "C"),
        None => {
            let k = |name: &str| report.constants.get(name).copied().ok_or(format!("missing {name}"));
            let m = config.problem.m;
            let cap = k("phi0")?.max((k("conditional_C1")? / k("conditional_C0")?).powf((m + 1.0) / (2.0 * m)));
            (cap, "conditional cap")
        }
    };
    let peak = max_phi(&out.trace);
    ensure(peak <= cap * 1.05, format!("max phi {peak:e} above 1.05 x {label} {cap:e}"))?;
    Ok(format!("max phi {peak:.4e} <= {label} {cap:.4e} (bounded to T_end = 10)"))
}

fn theorem3_pipeline() -> Outcome {
    let c = h0_coefficients(2.5, 3.0, 2.0, None).map_err(|e| e.to_string())?;
    let hi = 2.0 / 3.0 * 3.25 * 4.25 / 6.25;
    ensure((c.s, c.mu, c.d) == (2.0, 0.5, 0.75), format!("{c:?}"))?;
    ensure((c.delta_interval.1 - hi).abs() < 1e-14 && (c.delta - 0.5 * (1.0 + hi)).abs() < 1e-14, "delta midpoint")?;
    ensure(c.delta > 1.0 && c.delta < hi && c.mu < 1.0 && c.d < 1.0, "delta interval")?;
    ensure(c.alpha > 1.0 && c.beta > 1.0 && c.gamma > 1.0 && c.sigma_coeff > 0.0, "derived bounds")?;
    ensure(2.0 * (c.m + c.d) - 3.0 * c.delta > 0.0 && 2.0 * c.m + 3.0 * c.d - 3.0 * c.alpha > 0.0, "implicit positivity")?;

    let config = scenario("theorem3.ini");
    ensure(config.domain.resolution >= 32 && config.domain.dimension == 3, "32^3 cube")?;
    let domain = config.domain.build(config.domain.resolution).map_err(|e| e.to_string())?;
    let lambda = dirichlet_lambda1(&domain).map_err(|e| e.to_string())?.eigenvalue;
    let consts = Thm3Constants::compute(&c, config.problem.k1, config.problem.k2, lambda).map_err(|e| e.to_string())?;
    for (name, v) in consts.entries() {
        ensure(v.is_finite() && v > 0.0, format!("{name} = {v}"))?;
    }
    let dual = thm3_dual_check(&consts, &c).map_err(|e| e.to_string())?;
    ensure(dual.satisfied, format!("k2 = {} below threshold {}", consts.k2, dual.threshold))?;
    ensure(dual.relative_disagreement <= 1e-10, format!("forms disagree by {:e}", dual.relative_disagreement))?;

    let sweep: Vec<f64> = (0..10)
        .map(|j| {
            let w0 = 10f64.powf(-3.0 + j as f64);
            thm3_lower_bound(w0, &consts, &c).map(|r| r.bound.unwrap_or(f64::NAN))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(sweep.iter().all(|t| t.is_finite() && *t > 0.0), format!("{sweep:?}"))?;
    ensure(sweep.windows(2).all(|w| w[1] < w[0]), format!("T_low not decreasing in W0: {sweep:?}"))?;

    let out = experiment(&config, Command::Simulate)?;
    let report = out
        .report
        .criteria
        .iter()
        .find(|r| r.theorem == "theorem3")
        .ok_or("no theorem3 report")?;
    let t_low = report.bound.ok_or("T_low missing")?;
    ensure(t_low.is_finite() && t_low > 0.0, format!("T_low = {t_low}"))?;
    let status = out.report.status.clone().ok_or("no status")?;
    let Some(t_est) = status.blowup_time() else {
        return Err(format!("no blow-up at 32^3 for admissible k2: {status:?}"));
    };
    ensure(t_est >= 0.95 * t_low, format!("t_estimate {t_est:e} below 0.95 T_low = {:e}", 0.95 * t_low))?;
    Ok(format!(
        "Sigma {:.4e}, xi_m {:.4e}, M {:.3e}, N {:.3e}, dual gap {:.1e}; t_est {t_est:.4e} >= T_low {t_low:.3e}",
        consts.sigma_big, consts.xi_m, consts.m_const, consts.n_const, dual.relative_disagreement
    ))
}

fn emit(out: &ExperimentOutput, config: &RunConfig, dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let mut paths = config.output.clone();
    paths.dir = dir.to_path_buf();
    let files = emit_outputs(&out.report, &out.trace, &paths).map_err(|e| e.to_string())?;
    let read = |p: &PathBuf| std::fs::read(p).map_err(|e| e.to_string());
    Ok((read(&files.trace)?, read(&files.report)?))
}

fn exit_code(config_text: &str, command: &str, dir: &Path) -> Result<i32, String> {
    let path = dir.join(format!("{command}.ini"));
    std::fs::write(&path, config_text).map_err(|e| e.to_string())?;
    let status = Process::new(env!("CARGO_BIN_EXE_porous-blowup"))
        .args(["--quiet", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .arg(command)
        .status()
        .map_err(|e| e.to_string())?;
    status.code().ok_or("terminated by signal".into())
}

fn determinism_and_plumbing() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (name, command) in [("theorem1.ini", Command::Simulate), ("robin_lemmas.ini", Command::CheckLemmas)] {
        let config = scenario(name);
        let a = experiment(&config, command)?;
        let b = experiment(&config, command)?;
        let fa = emit(&a, &config, &tmp.path().join(format!("{name}-a")))?;
        let fb = emit(&b, &config, &tmp.path().join(format!("{name}-b")))?;
        ensure(fa == fb, format!("{name}: outputs differ between runs"))?;
        let parsed: ExperimentReport =
            serde_json::from_slice(&fa.1).map_err(|e| format!("{name}: report does not parse: {e}"))?;
        ensure(parsed == a.report, format!("{name}: report JSON does not round-trip"))?;
        let echo = parse_config(&config.to_text()).map_err(|e| e.to_string())?;
        ensure(echo == config, format!("{name}: config echo does not round-trip"))?;
        ensure(parsed.config == config.to_text(), format!("{name}: report echo differs"))?;
    }
    let empty = emit(
        &ExperimentOutput {
            report: experiment(&scenario("theorem1.ini"), Command::Bounds)?.report,
            trace: Trace::new(),
        },
        &scenario("theorem1.ini"),
        &tmp.path().join("empty"),
    )?;
    let csv = String::from_utf8(empty.0).map_err(|e| e.to_string())?;
    ensure(csv.lines().count() == 1 && csv.starts_with("t,"), format!("empty trace CSV: {csv:?}"))?;

    let good = theorem1_config(1, 41, 10.0);
    let cases = [
        (good.clone(), "simulate", 0),
        (good.replace("problem.q = 2", "problem.q = 4"), "simulate", 2),
        (good.replace("problem.m = 2", "problem.m = 2\nproblem.bogus = 1"), "bounds", 2),
        (format!("{good}run.fixed_dt = 1\n"), "simulate", 3),
        (
            "domain.kind = interval\ndomain.extents = 8\ndomain.center = 4\ndomain.resolution = 20\n\
             problem.m = 2\nproblem.boundary = dirichlet\nproblem.source = none\nproblem.u0 = barenblatt\n\
             run.mode = convergence\nrun.t_end = 0.4\nrun.ladder = 5, 7, 9\n"
                .to_string(),
            "convergence",
            1,
        ),
    ];
    let mut seen = Vec::new();
    for (i, (text, command, expected)) in cases.iter().enumerate() {
        let dir = tmp.path().join(format!("case{i}"));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let code = exit_code(text, command, &dir)?;
        ensure(code == *expected, format!("case {i} ({command}): exit {code}, expected {expected}"))?;
        seen.push(code);
    }
    Ok(format!("byte-identical double runs, JSON and config round-trips, exit codes {seen:?}"))
}

fn main() {
    let criteria: [(&str, Criterion); 7] = [
        ("1 barenblatt convergence", barenblatt_convergence),
        ("2 eigenvalue accuracy", eigenvalue_accuracy),
        ("3 lemma inequality suite", lemma_suite),
        ("4 theorem 1 sandwich", theorem1_sandwich),
        ("5 theorem 2 cap", theorem2_cap),
        ("6 theorem 3 pipeline", theorem3_pipeline),
        ("7 determinism and plumbing", determinism_and_plumbing),
    ];
    let handles: Vec<_> = criteria
        .iter()
        .map(|(name, f)| {
            let f = *f;
            let name = *name;
            std::thread::spawn(move || {
                let start = Instant::now();
                let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
                    Err(p
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "panic".into()))
                });
                (name, outcome, start.elapsed().as_secs_f64())
            })
        })
        .collect();
    let mut failed = 0;
    for h in handles {
        let (name, outcome, secs) = h.join().expect("criterion thread");
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

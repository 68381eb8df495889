//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gencvx::campaign::{check_implication_lattice, classify, refine_counterexample, PredicateKind, Probe, SamplingPlan};
use gencvx::characterize::{
    band, check_gradient_kernel, check_subdiff_kernel_pair, check_symmetric_equality, compute_b, compute_p,
    estimate_q_limit, DEFAULT_Q_SCHEDULE,
};
use gencvx::corpus::{corpus, corpus_entry, Property};
use gencvx::function::FunctionHandle;
use gencvx::nonsmooth::{clarke_directional, subdifferential, ClarkeScheme};
use gencvx::point::{dot, norm, Point};
use gencvx::region::{sample_region, Region};
use gencvx::report::Report;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Result = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pairs(region: &Region, n: usize, seed: u64) -> Vec<(Point, Point)> {
    let xs = sample_region(region, n, seed).unwrap();
    let ys = sample_region(region, n, seed ^ 0x9e37_79b9).unwrap();
    xs.into_iter().zip(ys).collect()
}

fn smooth_sub(f: &FunctionHandle, region: &Region, x: &Point) -> gencvx::nonsmooth::SubdifferentialEstimate {
    subdifferential(f, region, x, 1e-5, 8, 7).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gencvx"))
}

/// `b` against `y₁ / (x₁ + λ(y₁ − x₁))` and `0 < λb ≤ 1` on the fractional example.
fn criterion_1() -> Result {
    let t = Instant::now();
    let e = corpus_entry("fractional").unwrap();
    // 33 points of the open interval, where b is defined
    let grid: Vec<f64> = (1..=33).map(|k| k as f64 / 34.0).collect();
    let mut worst = 0.0f64;
    let mut n = 0;
    for (x, y) in pairs(&e.region, 100, 1) {
        for &l in &grid {
            let r = compute_b(&e.function, &x, &y, l).map_err(|e| e.to_string())?;
            if r.degenerate {
                continue;
            }
            let closed = y[0] / (x[0] + l * (y[0] - x[0]));
            worst = worst.max((r.b - closed).abs() / closed.abs());
            ensure(r.weak && r.lambda_b > 0.0 && r.lambda_b <= 1.0 + 1e-12, || {
                format!("0 < λb <= 1 fails: λ={l} λb={} at x={x} y={y}", r.lambda_b)
            })?;
            n += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("max relative error {worst:e}"))?;
    let dt = t.elapsed();
    ensure(dt < Duration::from_secs(5), || format!("took {dt:?}"))?;
    Ok(format!("{n} samples, max rel err {worst:.2e}, {dt:.2?}"))
}

fn criterion_2() -> Result {
    let t = Instant::now();
    let out = bin().args(["corpus", "--seed", "42"]).env_remove("GENCVX_SEED").output().unwrap();
    let dt = t.elapsed();
    ensure(out.status.code() == Some(0), || {
        format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
    })?;
    ensure(dt < Duration::from_secs(60), || format!("took {dt:?}"))?;
    Ok(format!("corpus exit 0 in {dt:.2?}"))
}

fn symmetric_sum(f: &FunctionHandle, x: &Point, y: &Point, gx: &[f64], gy: &[f64]) -> f64 {
    let px = compute_p(f, x, y, gx).unwrap();
    let py = compute_p(f, y, x, gy).unwrap();
    px.p * px.inner + py.p * py.inner
}

fn criterion_3() -> Result {
    let mut worst = 0.0f64;
    for name in ["affine", "fractional", "arctan"] {
        let e = corpus_entry(name).unwrap();
        for (x, y) in pairs(&e.region, 1000, 3) {
            let sx = smooth_sub(&e.function, &e.region, &x);
            let sy = smooth_sub(&e.function, &e.region, &y);
            for gx in &sx.generators {
                for gy in &sy.generators {
                    worst = worst.max(symmetric_sum(&e.function, &x, &y, gx, gy).abs());
                }
            }
            let c = check_symmetric_equality(&e.function, &x, &y, &sx, &sy).unwrap();
            ensure(!c.outcome.is_fail(), || format!("{name}: refuted at x={x} y={y}: {:?}", c.outcome))?;
        }
    }
    ensure(worst <= 1e-8, || format!("max |S| = {worst:e}"))?;

    let e = corpus_entry("paraboloid").unwrap();
    let witness = pairs(&e.region, 200, 4).into_iter().find_map(|(x, y)| {
        let sx = smooth_sub(&e.function, &e.region, &x);
        let sy = smooth_sub(&e.function, &e.region, &y);
        let c = check_symmetric_equality(&e.function, &x, &y, &sx, &sy).unwrap();
        c.outcome.violation().cloned().map(|v| (x, y, sx, sy, v, c.fx, c.fy))
    });
    let (x, y, sx, sy, v, fx, fy) = witness.ok_or("paraboloid never refuted")?;
    ensure(v.residual > 10.0 * band(fx, fy), || format!("residual {} inside the band", v.residual))?;
    let again = check_symmetric_equality(&e.function, &x, &y, &sx, &sy).unwrap();
    ensure(again.outcome.violation().map(|w| w.residual) == Some(v.residual), || "witness does not replay".into())?;
    Ok(format!("max |S| = {worst:.2e}; paraboloid refuted at x={x} y={y} (residual {:.3e})", v.residual))
}

fn criterion_4() -> Result {
    let mut worst = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut n = 0;
    type Grad = fn(&Point) -> Vec<f64>;
    let entries: [(&str, Grad); 2] = [
        ("fractional", |x| vec![-x[1] / (x[0] * x[0]), 1.0 / x[0]]),
        ("arctan", |x| vec![1.0 / (1.0 + x[0] * x[0])]),
    ];
    for (name, grad) in entries {
        let e = corpus_entry(name).unwrap();
        for (x, y) in pairs(&e.region, 50, 5) {
            let fx = e.function.eval(&x).unwrap();
            let fy = e.function.eval(&y).unwrap();
            if (fy - fx).abs() <= band(fx, fy) {
                continue;
            }
            let closed = dot(&grad(&x), &y.sub(&x)) / (fy - fx);
            let q = estimate_q_limit(&e.function, &x, &y, &DEFAULT_Q_SCHEDULE).map_err(|e| e.to_string())?;
            worst = worst.max((q.estimate - closed).abs());
            if name == "fractional" {
                worst_ratio = worst_ratio.max((q.estimate - y[0] / x[0]).abs());
            }
            n += 1;
        }
    }
    ensure(worst <= 1e-4, || format!("max |q - closed form| = {worst:e}"))?;
    ensure(worst_ratio <= 1e-4, || format!("max |q - y1/x1| = {worst_ratio:e}"))?;
    Ok(format!("{n} pairs, max err {worst:.2e}, fractional vs y1/x1 {worst_ratio:.2e}"))
}

fn criterion_5() -> Result {
    let e = corpus_entry("cubic").unwrap();
    let plan = SamplingPlan::default();
    let start = Probe {
        kind: PredicateKind::GradientKernel,
        negated: false,
        x: Point::from_slice(&[0.1]),
        y: Point::from_slice(&[-0.9]),
        lambda: None,
    };
    let r = refine_counterexample(&e.function, &e.region, &plan, &start, plan.refinement_rounds)
        .map_err(|e| e.to_string())?;
    let w = r.witness.ok_or_else(|| format!("refinement found no violation: {:?}", r.outcome))?;
    ensure(w.x[0].abs() <= 1e-3, || format!("witness x = {}", w.x))?;
    let grad = e.function.gradient(&w.x).unwrap().unwrap().grad;
    let c = check_gradient_kernel(&e.function, &w.x, &w.y, &grad).unwrap();
    ensure(c.outcome.is_fail(), || format!("witness does not fail directly: {:?}", c.outcome))?;

    let p = corpus_entry("piecewise").unwrap();
    let mut pts = pairs(&p.region, 200, 6);
    for (i, pair) in pts.iter_mut().enumerate().take(20) {
        pair.0 = Point::from_slice(&[0.0]);
        pair.1 = Point::from_slice(&[if i % 2 == 0 { 0.5 } else { -0.5 }]);
    }
    for (x, y) in &pts {
        let sx = subdifferential(&p.function, &p.region, x, 1e-5, 8, 11).unwrap();
        let k = check_subdiff_kernel_pair(&p.function, x, y, &sx).map_err(|e| e.to_string())?;
        ensure(!k.combined.is_fail(), || format!("piecewise kernel refuted at x={x} y={y}: {:?}", k.combined))?;
    }
    Ok(format!("x^3 kernel witness x={:.2e} y={:.3} residual {:.2e}; piecewise 200 pairs pass", w.x[0], w.y[0], w.residual))
}

fn criterion_6() -> Result {
    let abs = FunctionHandle::parse("abs", "abs(x1)", 1).unwrap();
    let region = Region::parse("box(-1..1)").unwrap();
    let scheme = ClarkeScheme::default();
    let zero = Point::from_slice(&[0.0]);
    for v in [1.0, -1.0] {
        let d = clarke_directional(&abs, &region, &zero, &[v], &scheme).map_err(|e| e.to_string())?;
        ensure((d - 1.0).abs() <= 5e-2, || format!("f0(0;{v}) = {d}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let smooth: Vec<_> = corpus().into_iter().filter(|e| ["affine", "fractional", "arctan", "cubic", "paraboloid"].contains(&e.name)).collect();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let e = &smooth[i % smooth.len()];
        let x = sample_region(&e.region, 1, rng.random()).unwrap().remove(0);
        let mut v: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|c| *c /= nv);
        let g = e.function.gradient(&x).unwrap().unwrap().grad;
        let scheme = ClarkeScheme { seed: i as u64, ..ClarkeScheme::default() };
        let d = clarke_directional(&e.function, &e.region, &x, &v, &scheme).map_err(|e| e.to_string())?;
        let err = (d - dot(&g, &v)).abs() / (1.0 + norm(&g) * norm(&v));
        worst = worst.max(err);
        ensure(err <= 1e-3, || format!("{} at {x} along {v:?}: f0 = {d}, <g,v> = {}", e.name, dot(&g, &v)))?;
    }
    Ok(format!("|x| at 0 within 5e-2; smooth max scaled err {worst:.2e}"))
}

/// Richardson-extrapolated central difference, fourth order in `h`.
fn fd_gradient(f: &FunctionHandle, x: &Point, h: f64) -> Vec<f64> {
    let central = |i: usize, h: f64| {
        let mut p = x.coords().to_vec();
        let mut m = x.coords().to_vec();
        p[i] += h;
        m[i] -= h;
        (f.eval_slice(&p).unwrap() - f.eval_slice(&m).unwrap()) / (2.0 * h)
    };
    (0..x.dim()).map(|i| (4.0 * central(i, h / 2.0) - central(i, h)) / 3.0).collect()
}

fn criterion_7() -> Result {
    let mut worst = 0.0f64;
    for e in corpus().into_iter().filter(|e| !e.source.contains("abs") && !e.source.contains("max")) {
        for x in sample_region(&e.region, 100, 9).unwrap() {
            let ad = e.function.gradient(&x).unwrap().unwrap().grad;
            let fd = fd_gradient(&e.function, &x, 1e-4);
            let diff: Vec<f64> = ad.iter().zip(&fd).map(|(a, b)| a - b).collect();
            let err = norm(&diff) / norm(&ad).max(f64::MIN_POSITIVE);
            worst = worst.max(err);
            ensure(err <= 1e-6, || format!("{} at {x}: AD {ad:?} vs FD {fd:?}", e.name))?;
        }
    }
    Ok(format!("max relative error {worst:.2e}"))
}

fn criterion_8() -> Result {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let run = |threads: &str| {
        let _ = std::fs::remove_file(&path);
        let out = bin()
            .args(["analyze", "--corpus", "cubic", "--seed", "42", "--out"])
            .arg(&path)
            .env("RAYON_NUM_THREADS", threads)
            .env_remove("GENCVX_SEED")
            .output()
            .unwrap();
        (out.status.code(), std::fs::read(&path).unwrap_or_default())
    };
    let (c1, a) = run("4");
    let (c2, b) = run("4");
    let (c3, c) = run("1");
    ensure(c1 == Some(2) && c2 == Some(2) && c3 == Some(2), || format!("exit codes {c1:?} {c2:?} {c3:?}"))?;
    ensure(!a.is_empty() && a == b, || "two runs differ".into())?;
    ensure(a == c, || "one-thread run differs".into())?;
    let report = Report::from_json(std::str::from_utf8(&a).unwrap()).map_err(|e| e.to_string())?;
    let replays = report.replay_witnesses().map_err(|e| e.to_string())?;
    ensure(!replays.is_empty(), || "no witnesses to replay".into())?;
    for (recorded, again) in &replays {
        let again = again.ok_or("witness no longer fails")?;
        ensure((recorded - again).abs() <= 1e-12, || format!("residual {recorded} replays as {again}"))?;
    }
    Ok(format!("{} bytes identical across runs and thread counts; {} witnesses replayed", a.len(), replays.len()))
}

fn criterion_9() -> Result {
    let entries = corpus();
    for seed in [42, 1, 2, 3, 4] {
        let plan = SamplingPlan::with_seed(seed);
        let results: Vec<_> = entries
            .iter()
            .map(|e| (e.name.to_string(), classify(&e.function, &e.region, &Property::ALL, &plan).unwrap()))
            .collect();
        let v = check_implication_lattice(&results);
        ensure(v.is_empty(), || format!("seed {seed}: {v:?}"))?;
    }
    Ok("no lattice violations for seeds 42, 1, 2, 3, 4".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result); 9] = [
        ("1 b closed form and 0 < λb <= 1", criterion_1),
        ("2 corpus classification", criterion_2),
        ("3 symmetric equality", criterion_3),
        ("4 q-limit", criterion_4),
        ("5 kernel refutations", criterion_5),
        ("6 Clarke estimator", criterion_6),
        ("7 AD vs finite differences", criterion_7),
        ("8 determinism and replay", criterion_8),
        ("9 implication lattice", criterion_9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

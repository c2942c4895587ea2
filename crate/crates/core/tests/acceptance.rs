//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values and the runtime. Runs without the test harness so the lines are
//! always printed; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use collar::cli::cmd_verify;
use collar::compactification::{compactify, verify_even_in_y};
use collar::config::{preset, RunConfig};
use collar::curvature::{
    oracle_sectional, richardson_ratio, sectional_curvature, slice_frame, verify_lemma_bounds, CollarMetric,
    GridSpec, TangentPlane,
};
use collar::dynamics::{
    certify_no_conjugate_points, jacobi_evolve, riccati_evolve, trace_geodesic, GeodesicState,
};
use collar::ode::OdeOptions;
use collar::profile::{
    build_profile, build_profile_adaptive, check_bridge_feasibility, default_t0, scan_kappa_min, select_far_field,
    CurvatureCase, FeasibilityCondition, Profile,
};
use collar::slice::{slice_data, ConformalPotential, SliceFamily, SliceWarp};

// tolerances and budgets
const CONSTANT_CURVATURE_REL: f64 = 1e-8;
const C1_BUDGET: Duration = Duration::from_secs(10);
const C2_BUDGET: Duration = Duration::from_secs(60);
const CONVEXITY_FLOOR: f64 = -1e-10;
const ORACLE_REL: f64 = 1e-4;
const RATIO_RANGE: (f64, f64) = (3.5, 4.5);
const RICCATI_REL: f64 = 1e-5;
const BLOWDOWN_ABS: f64 = 1e-6;
const C6_BUDGET: Duration = Duration::from_secs(120);
const ROUNDTRIP_TOL: f64 = 1e-12;
const WRONSKIAN_TOL: f64 = 1e-8;
const CLAIRAUT_REL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn hyperbolic_config(kappa: f64) -> RunConfig {
    let mut cfg = preset("hyperbolic-slice").unwrap();
    cfg.collar.kappa = kappa;
    cfg
}

fn rotated_pair(m: &CollarMetric, t: f64, x: &[f64], theta: f64) -> (DVector<f64>, DVector<f64>) {
    let e = slice_frame(m, t, x);
    let (s, c) = theta.sin_cos();
    (&e[0] * c + &e[1] * s, &e[1] * c - &e[0] * s)
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut count = 0usize;
    for kappa in [3.0, 10.0, 20.0] {
        let start = Instant::now();
        let mut cfg = hyperbolic_config(kappa);
        // the interior bound is irrelevant here; skip measuring it
        cfg.collar.c0 = Some(0.0);
        let m = cfg.build_metric().unwrap();
        let grid = GridSpec::default();
        let points = grid.slice_points(&m.slice);
        for i in 0..40 {
            let t = 1.0 + 2.0 * i as f64 / 39.0;
            for (j, x) in points.iter().enumerate().step_by(4) {
                let theta = 0.37 * j as f64;
                let (u, v) = rotated_pair(&m, t, x, theta);
                let mut planes = vec![TangentPlane::xt(t, x, u.clone()), TangentPlane::xy(t, x, u.clone(), v.clone())];
                for a in [-1e3, -2.0, -0.3, 0.5, 7.0, 1e4] {
                    planes.push(TangentPlane::mixed(t, x, u.clone(), v.clone(), a));
                }
                for p in planes {
                    let k = sectional_curvature(&m, &p).unwrap();
                    worst = worst.max((k + kappa * kappa).abs() / (kappa * kappa));
                    count += 1;
                }
            }
        }
        slowest = slowest.max(start.elapsed());
    }
    outcome(
        worst <= CONSTANT_CURVATURE_REL && slowest < C1_BUDGET,
        format!("{count} planes, max |K+k^2|/k^2 = {worst:.2e} (tol {CONSTANT_CURVATURE_REL:e}), slowest kappa {slowest:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["hyperbolic-slice", "flat-torus", "sphere-slice"] {
        let cfg = preset(name).unwrap();
        let m = cfg.build_metric().unwrap();
        let report = verify_lemma_bounds(&m, &cfg.grid);
        let deep = report.check("deep_negative").unwrap();
        let ok = report.pass() && deep.witness.value <= -200.0;
        pass &= ok;
        let failed: Vec<&str> = report.failed().map(|c| c.id.as_str()).collect();
        parts.push(format!("{name}: c0={:.3} maxK(t>=1/sqrt k)={:.2} failed={failed:?}", m.c0, deep.witness.value));
    }
    let elapsed = start.elapsed();
    outcome(pass && elapsed < C2_BUDGET, format!("{}; {elapsed:.2?}", parts.join("; ")))
}

fn max_profile_concavity(case: CurvatureCase, kappa: f64) -> f64 {
    let p = build_profile_adaptive(case, kappa).unwrap();
    let t_end = 2.0 * p.t0;
    (0..10_000)
        .map(|i| p.eval(t_end * i as f64 / 9_999.0).2)
        .fold(f64::INFINITY, f64::min)
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["hyperbolic-slice", "flat-torus", "sphere-slice"] {
        let case = preset(name).unwrap().curvature_case().unwrap();
        let scan = scan_kappa_min(case, 1e-2, 1e3, 200, FeasibilityCondition::Tangent).unwrap();
        let tangent = |k: f64| check_bridge_feasibility(case, k, default_t0(k)).unwrap().tangent_ok();
        let above_ok = (0..400).all(|i| tangent(scan.kappa_min * (1e3 / scan.kappa_min).powf(i as f64 / 399.0)));
        let below_fails = scan.holds_on_whole_range || !tangent(scan.kappa_min * (1.0 - 1e-6));
        // construction needs f_cc(t0) > 1 as well; build above that threshold
        let full = scan_kappa_min(case, 1e-2, 1e3, 200, FeasibilityCondition::Full).unwrap();
        let build_from = full.kappa_min.max(scan.kappa_min);
        let concavity = [1.01, 2.0, 10.0]
            .iter()
            .map(|s| build_from * s)
            .chain([20.0, 100.0])
            .filter(|&k| k >= build_from)
            .map(|k| max_profile_concavity(case, k))
            .fold(f64::INFINITY, f64::min);
        let ok = above_ok && below_fails && concavity >= CONVEXITY_FLOOR;
        pass &= ok;
        parts.push(format!(
            "{name}: kappa_min={:.6}{} min f''={concavity:.2e}",
            scan.kappa_min,
            if scan.holds_on_whole_range { " (holds on whole scan)" } else { "" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn random_plane(rng: &mut ChaCha8Rng, m: &CollarMetric, t: f64, x: &[f64]) -> TangentPlane {
    let (u, v) = rotated_pair(m, t, x, rng.gen_range(0.0..std::f64::consts::PI));
    match rng.gen_range(0..3) {
        0 => TangentPlane::xt(t, x, u),
        1 => TangentPlane::xy(t, x, u, v),
        _ => TangentPlane::mixed(t, x, u, v, rng.gen_range(-3.0..3.0)),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let static_slice = |k: f64| SliceFamily::ScaledConstCurv { k, warp: SliceWarp::Constant { a: 1.0 }, dim: 2 };
    let torus = |amp: f64| SliceFamily::ConformalTorus2D { phi: ConformalPotential::linear_sine(amp) };
    let metrics = [
        CollarMetric::new(Profile::Collar(build_profile(CurvatureCase::FlatSlice, 3.0).unwrap()), torus(0.15), 0.0),
        CollarMetric::new(
            Profile::Closed(select_far_field(CurvatureCase::FlatSlice, 2.0).unwrap()),
            torus(0.1),
            0.0,
        ),
        CollarMetric::new(
            Profile::Collar(build_profile(CurvatureCase::NegativeSlice { c: 1.0 }, 2.0).unwrap()),
            SliceFamily::ScaledConstCurv { k: -1.0, warp: SliceWarp::Exponential { a0: 1.0, rate: 0.7 }, dim: 2 },
            0.0,
        ),
        CollarMetric::new(
            Profile::Closed(select_far_field(CurvatureCase::NegativeSlice { c: 1.0 }, 3.0).unwrap()),
            static_slice(-1.0),
            0.0,
        ),
        CollarMetric::new(
            Profile::Collar(build_profile_adaptive(CurvatureCase::NonnegativeSlice { c: 1.0 }, 3.0).unwrap()),
            static_slice(1.0),
            0.0,
        ),
    ];
    let mut worst = 0.0f64;
    let mut codazzi_samples = 0;
    let mut ratios = Vec::new();
    for i in 0..200 {
        let m = &metrics[i % metrics.len()];
        let knots = match &m.profile {
            Profile::Collar(p) => p.bridge.knots.clone(),
            _ => Vec::new(),
        };
        let t = loop {
            let t = rng.gen_range(-0.2..1.5);
            if knots.iter().all(|k| (t - k).abs() >= 0.01) {
                break t;
            }
        };
        let x: Vec<f64> = match m.slice {
            SliceFamily::ConformalTorus2D { .. } => vec![rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)],
            _ => vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)],
        };
        let p = random_plane(&mut rng, m, t, &x);
        if matches!(m.slice, SliceFamily::ConformalTorus2D { .. }) && p.a != 0.0 {
            let codazzi = slice_data(&m.slice, t, &x).codazzi_term(&p.u, &p.v);
            if codazzi.abs() > 1e-3 {
                codazzi_samples += 1;
            }
        }
        // the bridge polynomials have large fourth derivatives; use a finer step there
        let h = if knots.is_empty() { 1e-3 } else { 2e-4 };
        let k = sectional_curvature(m, &p).unwrap();
        let fd = oracle_sectional(m, &p, h).unwrap();
        worst = worst.max((k - fd).abs() / k.abs().max(1.0));
        // step-halving ratio on the smooth closed-form metrics
        if knots.is_empty() && ratios.len() < 20 && matches!(m.slice, SliceFamily::ConformalTorus2D { .. }) {
            ratios.push(richardson_ratio(m, &p, 0.04).unwrap());
        }
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    outcome(
        worst <= ORACLE_REL && codazzi_samples > 0 && lo >= RATIO_RANGE.0 && hi <= RATIO_RANGE.1,
        format!(
            "200 samples, max rel err {worst:.2e} (tol {ORACLE_REL:e}), {codazzi_samples} mixed torus planes with |F|>1e-3, \
             halving ratio in [{lo:.3}, {hi:.3}] over {} planes",
            ratios.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let opts = OdeOptions::default();
    let mut worst_branch = 0.0f64;
    let mut worst_blow = 0.0f64;
    for c in [0.5, 2.0, 10.0 / 2f64.sqrt()] {
        let k = move |_: f64| -c * c;
        let tanh = riccati_evolve(&k, 0.0, 1.0, &opts).unwrap().final_value();
        worst_branch = worst_branch.max((tanh - c * c.tanh()).abs() / (c * c.tanh()));
        // coth branch above the cone: u0 = c coth(c s0)
        let s0 = 0.5f64.atanh() / c;
        let coth = riccati_evolve(&k, 2.0 * c, 1.0, &opts).unwrap().final_value();
        let exact = c / (c * (1.0 + s0)).tanh();
        worst_branch = worst_branch.max((coth - exact).abs() / exact);
        // below the cone: u = -c coth(c(s_* - s)) blows down at s_*
        let run = riccati_evolve(&k, -2.0 * c, 10.0, &opts).unwrap();
        worst_blow = worst_blow.max(run.blowdown.map_or(f64::INFINITY, |s| (s - s0).abs()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut monotone = 0;
    for _ in 0..50 {
        let (a0, a1, w) = (rng.gen_range(-50.0..0.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.5..6.0));
        let gap = rng.gen_range(0.0..20.0);
        let k2 = move |s: f64| a0 + a1 * (w * s).sin();
        let k1 = move |s: f64| k2(s) - gap * (1.0 + (3.0 * s).cos()) * 0.5;
        let u0 = rng.gen_range(-2.0..4.0);
        let r1 = riccati_evolve(&k1, u0, 2.0, &opts).unwrap();
        let r2 = riccati_evolve(&k2, u0, 2.0, &opts).unwrap();
        let horizon = r2.blowdown.unwrap_or(2.0).min(r1.blowdown.unwrap_or(2.0));
        let ok = r2
            .s
            .iter()
            .filter(|&&s| s < horizon)
            .all(|&s| r1.value_at(s) >= r2.value_at(s) - 1e-6 * r2.value_at(s).abs().max(1.0));
        monotone += usize::from(ok);
    }
    outcome(
        worst_branch <= RICCATI_REL && worst_blow <= BLOWDOWN_ABS && monotone == 50,
        format!(
            "branch rel err {worst_branch:.2e} (tol {RICCATI_REL:e}), blowdown err {worst_blow:.2e} (tol {BLOWDOWN_ABS:e}), \
             comparison {monotone}/50"
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = preset("hyperbolic-slice").unwrap();
    let m = cfg.build_metric().unwrap();
    let (spec, vcfg) = (cfg.dynamics.sampling(), cfg.dynamics.verifier());
    let cert = certify_no_conjugate_points(&m, &spec, &vcfg, cfg.seed, &OdeOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let conjugate: usize = cert.records.iter().map(|r| r.conjugate_events.len()).sum();
    let bound = vcfg.recovery_bound(m.kappa());
    let exits: Vec<f64> = cert
        .records
        .iter()
        .flat_map(|r| r.excursions.iter())
        .filter(|e| e.transit >= vcfg.min_transit)
        .map(|e| e.exit_mu)
        .collect();
    let min_exit = exits.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        cert.records.len() == 100 && conjugate == 0 && min_exit >= bound && elapsed < C6_BUDGET && cert.pass(),
        format!(
            "{} samples, {conjugate} conjugate events, {} long exits with min mu {min_exit:.3} >= {bound:.3}, {elapsed:.2?}",
            cert.records.len(),
            exits.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["hyperbolic-slice", "flat-torus", "sphere-slice"] {
        let m = preset(name).unwrap().build_metric().unwrap();
        let cf = compactify(&m).unwrap();
        let roundtrip = cf.metric_roundtrip_error(&m, &[0.1, -0.2], 20);
        let even = verify_even_in_y(&cf, 3).unwrap();
        let odd = even.checks.iter().filter(|c| c.id.starts_with("odd")).map(|c| c.witness.value).fold(0.0, f64::max);
        let closed = (1..=50)
            .map(|i| {
                let y = cf.y_max() * i as f64 / 50.0;
                (cf.m(y) - cf.m_closed_form(y)).abs() / cf.m_closed_form(y)
            })
            .fold(0.0, f64::max);
        let ok = roundtrip <= ROUNDTRIP_TOL && even.pass() && closed <= 1e-12;
        pass &= ok;
        parts.push(format!("{name}: roundtrip {roundtrip:.1e}, max|odd| {odd:.1e} (m0 {:.3}), closed form {closed:.1e}", even.checks[0].witness.value));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let opts = OdeOptions::default();
    // Wronskian and Clairaut over arclength 10
    let m = hyperbolic_config(10.0).build_metric().unwrap();
    let start = GeodesicState::from_angle(&m, 0.5, &[0.1, -0.1], 1.2, &[1.0, 0.4]).unwrap();
    let run = jacobi_evolve(
        &m,
        &start,
        &DMatrix::identity(2, 2),
        &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]),
        10.0,
        &opts,
    )
    .unwrap();
    let wronskian = run.max_wronskian_drift();
    let states = trace_geodesic(&m, &start, 10.0, &opts).unwrap();
    let clairaut = states.iter().map(|s| (s.l - start.l).abs() / start.l).fold(0.0, f64::max);
    // report determinism through the full pipeline
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = hyperbolic_config(20.0);
    cfg.dynamics.samples = 10;
    cfg.dynamics.growth_samples = 3;
    let mut bytes = Vec::new();
    for sub in ["a", "b"] {
        cfg.out = dir.path().join(sub);
        std::fs::create_dir_all(&cfg.out).unwrap();
        cmd_verify(&cfg).unwrap();
        bytes.push(std::fs::read(cfg.out.join("report.csv")).unwrap());
    }
    let identical = bytes[0] == bytes[1];
    outcome(
        wronskian <= WRONSKIAN_TOL && clairaut <= CLAIRAUT_REL && identical,
        format!(
            "wronskian drift {wronskian:.2e} (tol {WRONSKIAN_TOL:e}), clairaut rel drift {clairaut:.2e} over arclength 10 \
             (L = {:.3e}, tol {CLAIRAUT_REL:e}), reports identical: {identical}",
            start.l
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; only run for real invocations
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("constant-curvature identity", criterion_1),
        ("collar curvature bounds", criterion_2),
        ("bridge feasibility scan", criterion_3),
        ("oracle agreement", criterion_4),
        ("Riccati closed forms", criterion_5),
        ("no-conjugate-point certificate", criterion_6),
        ("compactified normal form", criterion_7),
        ("structural invariants", criterion_8),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {}: {} [{name}] {} ({:.2?})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 8 criteria passed");
}

//! Command-line entry points: `build`, `verify`, `trace`, `scan-kappa`.
//!
//! Exit codes: 0 when everything passes, 1 when a verification check fails,
//! 2 for configuration, I/O or construction errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::compactification::{compactify, verify_even_in_y};
use crate::config::{preset, save_metric, RunConfig};
use crate::curvature::{verify_lemma_bounds, CollarMetric};
use crate::dynamics::{certify_no_conjugate_points, certify_unbounded_growth, jacobi_trace, CertificateReport, trace_csv, GeodesicState};
use crate::error::{CollarError, Result};
use crate::ode::OdeOptions;
use crate::profile::{check_bridge_feasibility, default_t0, scan_kappa_min, FeasibilityCondition};
use crate::report::{merge_reports, Check, VerificationReport, Witness};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

const ROUNDTRIP_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "collar", version, about = "Boundary-collar metric construction and verification")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset: hyperbolic-slice, flat-torus, sphere-slice, oracle-torus.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Overrides the configured sampling seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default: the configured one).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Construct the collar metric and write `metric.toml`.
    Build,
    /// Run every verification and write `report.csv` (and `m.csv`).
    Verify,
    /// Integrate one geodesic with its Jacobi fields and write `trajectory.csv`.
    Trace,
    /// Bisect the smallest feasible kappa for the configured slice and write `scan.csv`.
    ScanKappa {
        #[arg(long, default_value_t = 1e-3)]
        lo: f64,
        #[arg(long, default_value_t = 1e3)]
        hi: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CollarError::Config("one of --config or --preset is required".into())),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CollarError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CollarError::Io(format!("cannot write {}: {e}", path.display())))
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    prepare_out(&cfg.out)?;
    match &cli.command {
        Command::Build => cmd_build(&cfg).map(|_| true),
        Command::Verify => cmd_verify(&cfg).map(|r| r.pass()),
        Command::Trace => cmd_trace(&cfg).map(|_| true),
        Command::ScanKappa { lo, hi, n } => cmd_scan_kappa(&cfg, *lo, *hi, *n).map(|_| true),
    }
}

/// Builds the metric and writes `metric.toml`; returns the artifact path.
pub fn cmd_build(cfg: &RunConfig) -> Result<PathBuf> {
    let m = cfg.build_metric()?;
    let path = cfg.out.join("metric.toml");
    save_metric(&m, &path)?;
    println!(
        "built: case={} kappa={} t0={:e} c0={:e} -> {}",
        m.profile.case().map(|c| c.name()).unwrap_or("none"),
        m.kappa(),
        m.t0(),
        m.c0,
        path.display()
    );
    Ok(path)
}

fn compactification_report(m: &CollarMetric, cfg: &RunConfig) -> Result<VerificationReport> {
    let cf = match compactify(m) {
        Ok(cf) => cf,
        Err(CollarError::NotFrozen { t }) => {
            let check = Check::new(
                "compactified_normal_form",
                false,
                Witness::new(t, &[], "not_frozen", 0.0, f64::NAN, f64::NAN),
            );
            return Ok(VerificationReport::new(vec![check]));
        }
        Err(e) => return Err(e),
    };
    let x = cfg.grid.slice_points(&m.slice).into_iter().next().unwrap_or_default();
    let err = cf.metric_roundtrip_error(m, &x, 20);
    let mut report = verify_even_in_y(&cf, 3)?;
    report.checks.insert(
        0,
        Check::new(
            "metric_roundtrip",
            err <= ROUNDTRIP_TOL,
            Witness::new(cf.t_freeze, &x, "max_rel_coeff_error", 0.0, err, ROUNDTRIP_TOL),
        ),
    );
    write(&cfg.out.join("m.csv"), &cf.m_csv(200))?;
    Ok(report)
}

/// A certificate whose trajectories cannot be integrated on this metric
/// (no return to the boundary, step collapse) is a failed verification, not
/// a configuration error.
fn dynamics_report(name: &str, res: Result<CertificateReport>) -> Result<VerificationReport> {
    match res {
        Ok(r) => Ok(r.into_report()),
        Err(e @ (CollarError::OutsideDomain(_) | CollarError::StepRejected { .. } | CollarError::StepTooSmall { .. })) => {
            let check = Check::new(
                format!("{name}_integration"),
                false,
                Witness::new(f64::NAN, &[], e.to_string(), 0.0, f64::NAN, f64::NAN),
            );
            Ok(VerificationReport::new(vec![check]))
        }
        Err(e) => Err(e),
    }
}

/// Full pipeline; writes `report.csv` and prints the summary line.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerificationReport> {
    let m = cfg.build_metric()?;
    let opts = OdeOptions::default();
    let (spec, vcfg) = (cfg.dynamics.sampling(), cfg.dynamics.verifier());
    let echo = cfg.echo();
    let parts = [
        verify_lemma_bounds(&m, &cfg.grid),
        compactification_report(&m, cfg)?,
        dynamics_report("no_conjugate_points", certify_no_conjugate_points(&m, &spec, &vcfg, cfg.seed, &opts))?,
        dynamics_report("unbounded_growth", certify_unbounded_growth(&m, &spec, &vcfg, cfg.seed, &opts))?,
    ];
    let stamped: Vec<VerificationReport> = parts.into_iter().map(|r| r.with_config(&echo, cfg.seed)).collect();
    let report = merge_reports(&stamped)?;
    write(&cfg.out.join("report.csv"), &report.to_csv())?;
    for c in report.failed() {
        eprintln!("FAIL {}: value={:e} bound={:e} at t={:e}", c.id, c.witness.value, c.witness.bound, c.witness.t);
    }
    println!("{}", report.summary_line());
    Ok(report)
}

/// Traces the configured initial state and writes `trajectory.csv`.
pub fn cmd_trace(cfg: &RunConfig) -> Result<PathBuf> {
    let m = cfg.build_metric()?;
    let d = m.slice.dim();
    let tr = &cfg.trace;
    let x = if tr.x.is_empty() { vec![0.0; d] } else { tr.x.clone() };
    let dir = if tr.direction.is_empty() {
        (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        tr.direction.clone()
    };
    let jd_diag = if tr.jdot0.is_empty() { vec![0.0; d] } else { tr.jdot0.clone() };
    if jd_diag.len() != d {
        return Err(CollarError::Config(format!("trace.jdot0 needs {d} entries, got {}", jd_diag.len())));
    }
    let start = GeodesicState::from_angle(&m, tr.t, &x, tr.angle_deg.to_radians(), &dir)?;
    let run = jacobi_trace(
        &m,
        &start,
        &DMatrix::identity(d, d),
        &DMatrix::from_diagonal(&nalgebra::DVector::from_vec(jd_diag)),
        tr.length,
        &OdeOptions::default(),
    )?;
    let path = cfg.out.join("trajectory.csv");
    write(&path, &trace_csv(&run))?;
    let events: Vec<String> = run.events.iter().map(|e| format!("{}@s={:.6}", e.kind.label(), e.state.s)).collect();
    println!("traced: L={:e} steps={} events=[{}] -> {}", start.l, run.states.len(), events.join(" "), path.display());
    Ok(path)
}

/// Scans `[lo, hi]` for the smallest kappa above which the bridge exists at
/// `t0 = 1/sqrt(kappa)`; writes the sampled conditions to `scan.csv`.
pub fn cmd_scan_kappa(cfg: &RunConfig, lo: f64, hi: f64, n: usize) -> Result<PathBuf> {
    let case = cfg.curvature_case()?;
    let tangent = scan_kappa_min(case, lo, hi, n, FeasibilityCondition::Tangent)?;
    let full = scan_kappa_min(case, lo, hi, n, FeasibilityCondition::Full)?;
    let mut csv = String::from("kappa,t0,tangent_slack,level_margin,feasible\n");
    let ratio = (hi / lo).ln() / (n.max(2) - 1) as f64;
    for i in 0..n.max(2) {
        let k = lo * (ratio * i as f64).exp();
        let fz = check_bridge_feasibility(case, k, default_t0(k))?;
        csv.push_str(&format!("{:e},{:e},{:e},{:e},{}\n", k, default_t0(k), fz.slack, fz.level_margin, fz.feasible));
    }
    let path = cfg.out.join("scan.csv");
    write(&path, &csv)?;
    println!(
        "scan: case={} kappa_min_tangent={:.9} kappa_min={:.9} -> {}",
        case.name(),
        tangent.kappa_min,
        full.kappa_min,
        path.display()
    );
    Ok(path)
}

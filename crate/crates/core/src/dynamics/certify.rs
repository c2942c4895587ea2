//! Sampled certificates: no conjugate points for seeds inside the entry cone,
//! recovery of `μ_J` after a transit of the deep-negative region, and growth
//! of `‖J‖` per excursion.
//!
//! The collar is open at infinity, so a return from the far end is emulated
//! by mirroring `∂_t` after a prescribed arclength beyond `t0`, and re-entry
//! into the compact part by mirroring at `t = 0`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geodesic::{integrate_collar, normal_frame, GeodesicState};
use super::jacobi::{wronskian_drift, CollarFlow, JacobiFrameState};
use crate::curvature::CollarMetric;
use crate::error::{CollarError, Result};
use crate::ode::{OdeOptions, Stop};
use crate::report::{Check, VerificationReport, Witness};
use crate::slice::SliceFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierConfig {
    /// Entry-slope threshold: seeds have `μ_J(0) > -q_m`.
    pub q_m: f64,
    pub epsilon: f64,
    /// Minimum arclength in `t > t0` for the recovery bound to apply.
    pub min_transit: f64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig { q_m: 2.0, epsilon: 0.1, min_transit: 1.0 }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_m > 0.0) {
            return Err(CollarError::InvalidParameter("Q_M must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(CollarError::InvalidParameter("epsilon must lie in (0, 1/2)".into()));
        }
        if !(self.min_transit > 0.0) {
            return Err(CollarError::InvalidParameter("min_transit must be positive".into()));
        }
        Ok(())
    }

    /// `(1 - ε) κ / √2`.
    pub fn recovery_bound(&self, kappa: f64) -> f64 {
        (1.0 - self.epsilon) * kappa / 2f64.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSpec {
    pub samples: usize,
    pub growth_samples: usize,
    /// Largest angle between the entering velocity and `∂_t`, in degrees.
    pub max_entry_angle_deg: f64,
    /// Excursion arclength beyond `t0`, as multiples of `min_transit`.
    pub excursion_min: f64,
    pub excursion_max: f64,
    /// Growth runs cycle through 1..=max_crossings excursions.
    pub max_crossings: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            samples: 100,
            growth_samples: 12,
            max_entry_angle_deg: 60.0,
            excursion_min: 0.5,
            excursion_max: 3.0,
            max_crossings: 3,
        }
    }
}

/// One pass through `t > t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    /// Arclength spent in `t > t0`.
    pub transit: f64,
    /// `μ_min` when re-crossing `t = t0` inward.
    pub exit_mu: f64,
    /// `∫ μ_min ds` over the pass.
    pub integral_mu: f64,
    /// `ln(‖J‖_exit / ‖J‖_entry)`.
    pub log_growth: f64,
    /// Arclength spent in `0 < t < t0` on the way in.
    pub bridge_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub alpha: f64,
    pub x: Vec<f64>,
    pub excursions: Vec<Excursion>,
    /// `(s, t)` at sign changes of `det J`.
    pub conjugate_events: Vec<(f64, f64)>,
    pub max_wronskian_drift: f64,
    pub states: Vec<JacobiFrameState>,
}

/// Integrates until `target` changes sign (or `s_end`), logging states and
/// `det J` sign changes on the way.
#[allow(clippy::too_many_arguments)]
fn advance(
    flow: &CollarFlow,
    s: &mut f64,
    y: &mut Vec<f64>,
    s_end: f64,
    target: Option<&dyn Fn(f64, &[f64]) -> f64>,
    opts: &OdeOptions,
    states: &mut Vec<JacobiFrameState>,
    conj: &mut Vec<(f64, f64)>,
) -> Result<bool> {
    let rhs = |_: f64, yy: &[f64], dy: &mut [f64]| flow.rhs(yy, dy);
    let det = |_: f64, yy: &[f64]| flow.jacobi(yy).0.determinant();
    let floor = |yy: &[f64], out: &mut [f64]| flow.error_floor(yy, out);
    loop {
        let mut ev: Vec<&dyn Fn(f64, &[f64]) -> f64> = vec![&det];
        if let Some(t) = target {
            ev.push(t);
        }
        let (tr, stop) = integrate_collar(flow.metric, &rhs, *s, y, s_end, opts, &ev, Some(&floor))?;
        for (si, yi) in tr.s.iter().zip(&tr.y).skip(1) {
            states.push(flow.frame_state(*si, yi));
        }
        let (se, ye) = tr.last();
        *s = se;
        *y = ye.to_vec();
        match stop {
            Stop::End => return Ok(false),
            Stop::Event(0) => conj.push((se, ye[0])),
            Stop::Event(_) => return Ok(true),
        }
    }
}

fn trapezoid_mu(states: &[JacobiFrameState], from: f64, to: f64) -> f64 {
    states
        .windows(2)
        .filter(|w| w[0].s >= from && w[1].s <= to)
        .map(|w| 0.5 * (w[0].mu_min + w[1].mu_min) * (w[1].s - w[0].s))
        .sum()
}

/// Runs a trajectory from `start` (at `t = 0`, heading in) through the given
/// excursions beyond `t0`, mirroring at the far end of each and at `t = 0`
/// between them.
pub fn run_excursions(
    m: &CollarMetric,
    start: &GeodesicState,
    j0: &DMatrix<f64>,
    jd0: &DMatrix<f64>,
    excursions: &[f64],
    opts: &OdeOptions,
) -> Result<TrajectoryRecord> {
    let flow = CollarFlow::new(m);
    let t0 = m.t0();
    let cap = 50.0;
    let mut y = flow.pack(start, &normal_frame(m, start), j0, jd0);
    let mut s = start.arc;
    let mut states = vec![flow.frame_state(s, &y)];
    let mut conj = Vec::new();
    let mut out = Vec::new();
    let above = move |_: f64, yy: &[f64]| yy[0] - t0;
    let at_zero = |_: f64, yy: &[f64]| yy[0];
    for (k, &delta) in excursions.iter().enumerate() {
        let s_start = s;
        let end = s + cap;
        if !advance(&flow, &mut s, &mut y, end, Some(&above), opts, &mut states, &mut conj)? {
            return Err(CollarError::OutsideDomain("trajectory never reached t0".into()));
        }
        let bridge_time = s - s_start;
        let s_in = s;
        let n_in = flow.frame_state(s, &y).norm_j;
        let end = s_in + 0.5 * delta;
        advance(&flow, &mut s, &mut y, end, None, opts, &mut states, &mut conj)?;
        flow.reflect(&mut y);
        let end = s + cap;
        if !advance(&flow, &mut s, &mut y, end, Some(&above), opts, &mut states, &mut conj)? {
            return Err(CollarError::OutsideDomain("trajectory did not return to t0".into()));
        }
        let exit = flow.frame_state(s, &y);
        out.push(Excursion {
            transit: s - s_in,
            exit_mu: exit.mu_min,
            integral_mu: trapezoid_mu(&states, s_in, s),
            log_growth: (exit.norm_j / n_in).ln(),
            bridge_time,
        });
        let end = s + cap;
        if !advance(&flow, &mut s, &mut y, end, Some(&at_zero), opts, &mut states, &mut conj)? {
            return Err(CollarError::OutsideDomain("trajectory did not return to t = 0".into()));
        }
        if k + 1 < excursions.len() {
            flow.reflect(&mut y);
        }
    }
    let first = &states[0];
    let drift = states.iter().map(|st| wronskian_drift(first, st)).fold(0.0, f64::max);
    Ok(TrajectoryRecord {
        index: 0,
        alpha: start.tdot.acos(),
        x: start.x.clone(),
        excursions: out,
        conjugate_events: conj,
        max_wronskian_drift: drift,
        states,
    })
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_slice_point(slice: &SliceFamily, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match slice {
        SliceFamily::ScaledConstCurv { k, dim, .. } => {
            let r = 0.5 / k.abs().max(1.0).sqrt() / (*dim as f64).sqrt();
            (0..*dim).map(|_| rng.gen_range(-r..r)).collect()
        }
        SliceFamily::ConformalTorus2D { .. } => {
            (0..2).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
        }
    }
}

/// Symmetric matrix with eigenvalues drawn from `(-bound, bound)`.
fn random_symmetric(d: usize, bound: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let q = raw.qr().q();
    let eig = DVector::from_fn(d, |_, _| rng.gen_range(-bound..bound) * (1.0 - 1e-9));
    &q * DMatrix::from_diagonal(&eig) * q.transpose()
}

fn random_start(
    m: &CollarMetric,
    spec: &SampleSpec,
    rng: &mut ChaCha8Rng,
) -> Result<GeodesicState> {
    let alpha = rng.gen_range(0.0..spec.max_entry_angle_deg.to_radians());
    let x = random_slice_point(&m.slice, rng);
    let dir: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GeodesicState::from_angle(m, 0.0, &x, alpha, &dir)
}

/// Result of a certificate run.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub records: Vec<TrajectoryRecord>,
    pub checks: Vec<Check>,
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn into_report(self) -> VerificationReport {
        VerificationReport::new(self.checks)
    }
}

fn validate_inputs(m: &CollarMetric, spec: &SampleSpec, cfg: &VerifierConfig) -> Result<()> {
    cfg.validate()?;
    if m.kappa() <= 0.0 {
        return Err(CollarError::InvalidParameter("certificates need a collar profile with kappa > 0".into()));
    }
    if !(spec.excursion_min > 0.0 && spec.excursion_max >= spec.excursion_min) {
        return Err(CollarError::InvalidParameter("excursion range must satisfy 0 < min <= max".into()));
    }
    if !(spec.max_entry_angle_deg > 0.0 && spec.max_entry_angle_deg < 90.0) {
        return Err(CollarError::InvalidParameter("max entry angle must lie in (0, 90) degrees".into()));
    }
    Ok(())
}

/// Samples entering states and Jacobi seeds with `μ_J(0) > -Q_M`, runs one
/// excursion each, and checks for conjugate points and `μ_J` recovery.
pub fn certify_no_conjugate_points(
    m: &CollarMetric,
    spec: &SampleSpec,
    cfg: &VerifierConfig,
    seed: u64,
    opts: &OdeOptions,
) -> Result<CertificateReport> {
    validate_inputs(m, spec, cfg)?;
    let d = m.slice.dim();
    let records: Vec<TrajectoryRecord> = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let start = random_start(m, spec, &mut rng)?;
            let jd0 = random_symmetric(d, cfg.q_m, &mut rng);
            let delta = rng.gen_range(spec.excursion_min..=spec.excursion_max) * cfg.min_transit;
            let mut rec = run_excursions(m, &start, &DMatrix::identity(d, d), &jd0, &[delta], opts)?;
            rec.index = i;
            rec.states.clear();
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let kappa = m.kappa();
    let mut checks = Vec::new();

    let conj: Vec<_> = records.iter().flat_map(|r| r.conjugate_events.iter().map(move |e| (r, e))).collect();
    let conj_witness = match conj.first() {
        Some((r, (_, t))) => Witness::new(*t, &r.x, "conjugate_events", r.alpha, conj.len() as f64, 0.0),
        None => Witness::scalar("conjugate_events", 0.0, 0.0),
    };
    checks.push(Check::new("no_conjugate_points", conj.is_empty(), conj_witness));

    let bound = cfg.recovery_bound(kappa);
    let worst_exit = records
        .iter()
        .flat_map(|r| r.excursions.iter().map(move |e| (r, e)))
        .filter(|(_, e)| e.transit >= cfg.min_transit)
        .min_by(|a, b| a.1.exit_mu.total_cmp(&b.1.exit_mu));
    checks.push(match worst_exit {
        Some((r, e)) => Check::new(
            "exit_mu_recovery",
            e.exit_mu >= bound,
            Witness::new(m.t0(), &r.x, format!("exit_mu(transit={:e})", e.transit), r.alpha, e.exit_mu, bound),
        ),
        None => Check::new("exit_mu_recovery", false, Witness::scalar("no_qualifying_exit", f64::NAN, bound)),
    });

    let drift = records.iter().map(|r| r.max_wronskian_drift).fold(0.0, f64::max);
    checks.push(Check::new("jacobi_wronskian", drift <= 1e-8, Witness::scalar("relative_drift", drift, 1e-8)));

    // measured, not asserted: time in 0 < t < t0 scaled by sqrt(kappa)
    let bridge = records
        .iter()
        .flat_map(|r| r.excursions.iter().map(|e| e.bridge_time))
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "bridge_transit_constant",
        true,
        Witness::scalar("max_bridge_time*sqrt(kappa)", bridge * kappa.sqrt(), f64::NAN),
    ));

    // a seed far below the cone in one direction must run into a conjugate point
    let radial = GeodesicState::new(m, 0.0, &random_slice_point(&m.slice, &mut sample_rng(seed, u64::MAX)), 1.0, &vec![1.0; d])?;
    let mut below = DMatrix::identity(d, d) * (-0.5 * cfg.q_m);
    below[(0, 0)] = -3.0 * kappa.max(cfg.q_m);
    let neg = run_excursions(m, &radial, &DMatrix::identity(d, d), &below, &[cfg.min_transit], opts)?;
    let first = neg.conjugate_events.first().map(|e| e.0).unwrap_or(f64::NAN);
    checks.push(Check::new(
        "below_cone_seed_blows_down",
        !neg.conjugate_events.is_empty(),
        Witness::scalar("expected_negative:first_event_s", first, f64::NAN),
    ));

    Ok(CertificateReport { records, checks })
}

/// Runs trajectories with 1..=max_crossings excursions of at least
/// `min_transit` each and checks `∫ μ_J` per excursion.
pub fn certify_unbounded_growth(
    m: &CollarMetric,
    spec: &SampleSpec,
    cfg: &VerifierConfig,
    seed: u64,
    opts: &OdeOptions,
) -> Result<CertificateReport> {
    validate_inputs(m, spec, cfg)?;
    let d = m.slice.dim();
    let offset = 1u64 << 32;
    let records: Vec<TrajectoryRecord> = (0..spec.growth_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, offset + i as u64);
            let start = random_start(m, spec, &mut rng)?;
            let jd0 = random_symmetric(d, cfg.q_m, &mut rng);
            let n_cross = 1 + i % spec.max_crossings.max(1);
            let hi = spec.excursion_max.max(1.0);
            let deltas: Vec<f64> = (0..n_cross).map(|_| rng.gen_range(1.0..=hi) * cfg.min_transit).collect();
            let mut rec = run_excursions(m, &start, &DMatrix::identity(d, d), &jd0, &deltas, opts)?;
            rec.index = i;
            rec.states.clear();
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let bound = cfg.recovery_bound(m.kappa()) * cfg.min_transit - cfg.epsilon;
    let mut checks = Vec::new();
    let all: Vec<_> = records.iter().flat_map(|r| r.excursions.iter().map(move |e| (r, e))).collect();
    let worst_int = all.iter().min_by(|a, b| a.1.integral_mu.total_cmp(&b.1.integral_mu));
    let worst_norm = all.iter().min_by(|a, b| a.1.log_growth.total_cmp(&b.1.log_growth));
    for (id, worst, value) in [
        ("growth_integral_mu", worst_int, worst_int.map(|w| w.1.integral_mu)),
        ("growth_log_norm", worst_norm, worst_norm.map(|w| w.1.log_growth)),
    ] {
        checks.push(match (worst, value) {
            (Some((r, e)), Some(v)) => Check::new(
                id,
                v >= bound,
                Witness::new(m.t0(), &r.x, format!("per_excursion(transit={:e})", e.transit), r.alpha, v, bound),
            ),
            _ => Check::new(id, false, Witness::scalar("no_excursions", f64::NAN, bound)),
        });
    }
    let conj = records.iter().map(|r| r.conjugate_events.len()).sum::<usize>();
    checks.push(Check::new(
        "growth_no_conjugate_points",
        conj == 0,
        Witness::scalar("conjugate_events", conj as f64, 0.0),
    ));
    Ok(CertificateReport { records, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_profile, select_far_field, CurvatureCase, Profile};
    use crate::slice::SliceWarp;

    fn hyperbolic(kappa: f64) -> CollarMetric {
        let p = build_profile(CurvatureCase::NegativeSlice { c: 1.0 }, kappa).unwrap();
        let slice = SliceFamily::ScaledConstCurv { k: -1.0, warp: SliceWarp::Constant { a: 1.0 }, dim: 2 };
        CollarMetric::new(Profile::Collar(p), slice, 0.0)
    }

    #[test]
    fn config_validation() {
        assert!(VerifierConfig::default().validate().is_ok());
        assert!(VerifierConfig { q_m: 0.0, ..Default::default() }.validate().is_err());
        assert!(VerifierConfig { epsilon: 0.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn excursion_growth_in_exact_far_field() {
        // radial, entirely in the constant-curvature region, cosh-dominant seed
        let kappa = 4.0;
        let far = select_far_field(CurvatureCase::NegativeSlice { c: 1.0 }, kappa).unwrap();
        let slice = SliceFamily::ScaledConstCurv { k: -1.0, warp: SliceWarp::Constant { a: 1.0 }, dim: 2 };
        let m = CollarMetric::new(Profile::Closed(far), slice, 0.0);
        let flow = CollarFlow::new(&m);
        let g = GeodesicState::new(&m, 1.0, &[0.0, 0.0], 1.0, &[1.0, 0.0]).unwrap();
        let id = DMatrix::identity(2, 2);
        let mut y = flow.pack(&g, &normal_frame(&m, &g), &id, &(&id * kappa));
        let (mut s, mut states, mut conj) = (0.0, Vec::new(), Vec::new());
        advance(&flow, &mut s, &mut y, 1.5, None, &OdeOptions::default(), &mut states, &mut conj).unwrap();
        let norm = flow.frame_state(s, &y).norm_j / 2f64.sqrt();
        assert!((norm / (kappa * 1.5).exp() - 1.0).abs() < 1e-6);
        // zero-length excursion: nothing happens
        let mut y2 = flow.pack(&g, &normal_frame(&m, &g), &id, &(&id * kappa));
        let mut s2 = 0.0;
        advance(&flow, &mut s2, &mut y2, 0.0, None, &OdeOptions::default(), &mut states, &mut conj).unwrap();
        assert_eq!(flow.frame_state(s2, &y2).norm_j, 2f64.sqrt());
    }

    #[test]
    fn one_excursion_grows_by_the_predicted_factor() {
        let m = hyperbolic(20.0);
        let g = GeodesicState::from_angle(&m, 0.0, &[0.0, 0.0], 0.3, &[1.0, 0.0]).unwrap();
        let id = DMatrix::identity(2, 2);
        let rec = run_excursions(&m, &g, &id, &DMatrix::zeros(2, 2), &[2.0], &OdeOptions::default()).unwrap();
        let e = &rec.excursions[0];
        assert!((e.transit - 2.0).abs() < 0.05, "transit {}", e.transit);
        assert!(e.log_growth >= 12.0, "log growth {}", e.log_growth);
        assert!(rec.conjugate_events.is_empty());
    }

    #[test]
    fn small_certificate_run_is_deterministic() {
        let m = hyperbolic(20.0);
        let spec = SampleSpec { samples: 4, growth_samples: 3, ..Default::default() };
        let cfg = VerifierConfig::default();
        let a = certify_no_conjugate_points(&m, &spec, &cfg, 7, &OdeOptions::default()).unwrap();
        let b = certify_no_conjugate_points(&m, &spec, &cfg, 7, &OdeOptions::default()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.pass(), "{:?}", a.checks);
        let g = certify_unbounded_growth(&m, &spec, &cfg, 7, &OdeOptions::default()).unwrap();
        assert!(g.pass(), "{:?}", g.checks);
    }
}

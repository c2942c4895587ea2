use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{slice_frame, BaseGeometry, CollarMetric, MixedPencil, PlaneMode};
use crate::profile::Profile;
use crate::report::{Check, VerificationReport, Witness};
use crate::slice::SliceFamily;

/// Sampling grid for the curvature checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub n_slice: usize,
    pub n_dir: usize,
    /// Relative tolerance for `|K̃ + κ²| / κ²` in the asymptotic check.
    pub asymptotic_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_min: -0.25, t_max: 3.0, n_t: 600, n_slice: 64, n_dir: 32, asymptotic_tol: 1e-8 }
    }
}

impl GridSpec {
    pub fn t_values(&self) -> Vec<f64> {
        let n = self.n_t.max(2);
        (0..n).map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / (n - 1) as f64).collect()
    }

    /// Deterministic slice sample points inside the chart.
    pub fn slice_points(&self, slice: &SliceFamily) -> Vec<Vec<f64>> {
        let d = slice.dim();
        // additive recurrence with generalized golden ratios
        let phi = (1..=40).fold(2.0f64, |x, _| (1.0 + x).powf(1.0 / (d as f64 + 1.0)));
        let alpha: Vec<f64> = (1..=d).map(|i| 1.0 / phi.powi(i as i32)).collect();
        let n = self.n_slice.max(1);
        (0..n)
            .map(|j| {
                let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * j as f64).fract()).collect();
                match slice {
                    SliceFamily::ScaledConstCurv { k, .. } => {
                        let r = 0.5 / k.abs().max(1.0).sqrt();
                        u.iter().map(|v| r * (2.0 * v - 1.0) / (d as f64).sqrt()).collect()
                    }
                    SliceFamily::ConformalTorus2D { .. } => {
                        u.iter().map(|v| 2.0 * std::f64::consts::PI * v).collect()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Extremum {
    value: f64,
    t: f64,
    x: Vec<f64>,
    mode: PlaneMode,
    a: f64,
}

impl Extremum {
    fn none(sign: f64) -> Self {
        Extremum { value: sign * f64::INFINITY, t: f64::NAN, x: Vec::new(), mode: PlaneMode::XT, a: 0.0 }
    }

    fn witness(&self, bound: f64) -> Witness {
        Witness::new(self.t, &self.x, self.mode.as_str(), self.a, self.value, bound)
    }
}

/// Largest value of the mixed pencil over `a ∈ ℝ`, searched over the angle
/// `a = f tan φ` by a coarse scan followed by golden-section refinement,
/// with the endpoints `a = ±1e6` and `a = 0` as extra candidates.
pub(crate) fn maximize_pencil(p: &MixedPencil, sign: f64) -> (f64, f64) {
    use std::f64::consts::FRAC_PI_2;
    let f = p.f2.sqrt();
    let obj = |phi: f64| sign * p.eval(f * phi.tan());
    let n = 24;
    let lo = -FRAC_PI_2 + 1e-9;
    let hi = FRAC_PI_2 - 1e-9;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|a, b| obj(*a).total_cmp(&obj(*b)))
        .expect("nonempty grid");
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = obj(d);
        }
    }
    let phi = 0.5 * (a + b);
    let mut cands = vec![(f * phi.tan(), sign * obj(phi))];
    for &e in &[1e6, -1e6, 0.0] {
        cands.push((e, p.eval(e)));
    }
    cands
        .into_iter()
        .max_by(|x, y| (sign * x.1).total_cmp(&(sign * y.1)))
        .expect("nonempty")
}

#[derive(Debug, Clone)]
struct BaseSummary {
    max: Extremum,
    min: Extremum,
    convexity: f64,
}

fn summarize_base(m: &CollarMetric, t: f64, x: &[f64], n_dir: usize) -> BaseSummary {
    let g = BaseGeometry::at(m, t, x);
    let frame = slice_frame(m, t, x);
    let d = frame.len();
    let mut max = Extremum::none(-1.0);
    let mut min = Extremum::none(1.0);
    let mut offer = |value: f64, mode: PlaneMode, a: f64| {
        if value > max.value {
            max = Extremum { value, t, x: x.to_vec(), mode, a };
        }
        if value < min.value {
            min = Extremum { value, t, x: x.to_vec(), mode, a };
        }
    };
    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    match d {
        1 => offer(g.curvature_xt(&frame[0]), PlaneMode::XT, 0.0),
        2 => {
            for j in 0..n_dir.max(1) {
                let th = std::f64::consts::PI * j as f64 / n_dir.max(1) as f64;
                let (s, c) = th.sin_cos();
                let u = &frame[0] * c + &frame[1] * s;
                let v = &frame[1] * c - &frame[0] * s;
                pairs.push((u, v));
            }
        }
        _ => {
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        pairs.push((frame[i].clone(), frame[j].clone()));
                    }
                }
            }
        }
    }
    for (u, v) in &pairs {
        offer(g.curvature_xt(u), PlaneMode::XT, 0.0);
        let pencil = g.pencil(u, v);
        offer(pencil.xy, PlaneMode::XY, 0.0);
        let (a_hi, k_hi) = maximize_pencil(&pencil, 1.0);
        offer(k_hi, PlaneMode::Mixed, a_hi);
        let (a_lo, k_lo) = maximize_pencil(&pencil, -1.0);
        offer(k_lo, PlaneMode::Mixed, a_lo);
    }
    BaseSummary { max, min, convexity: g.min_convexity() }
}

fn sweep(m: &CollarMetric, grid: &GridSpec) -> Vec<(f64, Vec<BaseSummary>)> {
    let pts = grid.slice_points(&m.slice);
    grid.t_values()
        .into_par_iter()
        .map(|t| (t, pts.iter().map(|x| summarize_base(m, t, x, grid.n_dir)).collect()))
        .collect()
}

/// Supremum of sectional curvature of `dt² + g_t` (no warping) over the grid.
pub fn measure_interior_bound(slice: &SliceFamily, grid: &GridSpec) -> f64 {
    let plain = CollarMetric::new(Profile::Constant { value: 1.0 }, slice.clone(), f64::INFINITY);
    // a family that never moves on the grid gives a t-translation invariant product
    let grid = if slice.is_frozen_at(grid.t_min) {
        GridSpec { t_max: grid.t_min, n_t: 1, ..grid.clone() }
    } else {
        grid.clone()
    };
    sweep(&plain, &grid)
        .iter()
        .flat_map(|(_, bases)| bases.iter().map(|b| b.max.value))
        .fold(f64::NEG_INFINITY, f64::max)
        + 0.0
}

/// Samples the four quantitative lemma properties on the grid.
pub fn verify_lemma_bounds(m: &CollarMetric, grid: &GridSpec) -> VerificationReport {
    let kappa = m.kappa();
    let k2 = kappa * kappa;
    let t0 = m.t0();
    let data = sweep(m, grid);

    // (1) convexity: over t > 0 when the original boundary is strictly
    // convex, otherwise only where f = f_cc
    let strictly_convex_boundary = m.slice.initial_convexity() > 0.0;
    let conv_start = if strictly_convex_boundary { 0.0 } else { t0 };
    let mut conv = Extremum::none(1.0);
    for (t, bases) in &data {
        let inside = if strictly_convex_boundary { *t > conv_start } else { *t >= conv_start };
        if !inside {
            continue;
        }
        for b in bases {
            if b.convexity < conv.value {
                conv = Extremum { value: b.convexity, t: *t, x: b.max.x.clone(), mode: PlaneMode::XT, a: 0.0 };
            }
        }
    }
    let conv_check = Check::new(
        "uniform_convexity",
        conv.value > 0.0,
        Witness::new(conv.t, &conv.x, format!("min_eig_shape(t>={conv_start:e})"), 0.0, conv.value, 0.0),
    );

    // (2) asymptotic curvature
    let constant_slice = m.slice.frozen_intrinsic_curvature().is_some();
    let freeze = match &m.slice {
        SliceFamily::ScaledConstCurv { warp, .. } => warp.freeze_time().unwrap_or(f64::INFINITY).max(1.0),
        SliceFamily::ConformalTorus2D { .. } => f64::INFINITY,
    };
    let t_last = data.last().map(|d| d.0).unwrap_or(f64::NAN);
    let mut dev = Extremum::none(-1.0);
    dev.value = 0.0;
    for (t, bases) in &data {
        let relevant = if constant_slice { *t >= freeze } else { *t == t_last };
        if !relevant {
            continue;
        }
        for b in bases {
            for e in [&b.max, &b.min] {
                let d = (e.value + k2).abs();
                if d > dev.value || dev.t.is_nan() {
                    dev = Extremum { value: d, ..e.clone() };
                }
            }
        }
    }
    let asym_bound = grid.asymptotic_tol * k2;
    let asym_check = Check::new(
        "asymptotic_curvature",
        dev.value <= asym_bound,
        Witness::new(
            dev.t,
            &dev.x,
            format!("{}|K+kappa^2|", if constant_slice { "exact:" } else { "tail:" }),
            dev.a,
            dev.value,
            asym_bound,
        ),
    );

    // (3) global upper bound, (4) deep-negative region
    // the deep region starts at 1/sqrt(kappa) even when the bridge was
    // pushed further out to become feasible
    let deep_start = crate::profile::default_t0(kappa);
    let mut global = Extremum::none(-1.0);
    let mut deep = Extremum::none(-1.0);
    for (t, bases) in &data {
        for b in bases {
            if b.max.value > global.value {
                global = b.max.clone();
            }
            if *t >= deep_start && b.max.value > deep.value {
                deep = b.max.clone();
            }
        }
    }
    let c0 = m.c0;
    let global_check = Check::new(
        "global_upper_bound",
        global.value <= c0 + 1e-9 * c0.abs().max(1.0),
        global.witness(c0),
    );
    let deep_bound = -0.5 * k2;
    let deep_check = Check::new("deep_negative", deep.value <= deep_bound, deep.witness(deep_bound));

    VerificationReport::new(vec![conv_check, asym_check, global_check, deep_check])
}

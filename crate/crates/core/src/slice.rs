//! Slice metric families `g_t` on the cross-section.
//!
//! Both families are conformally flat in the chart used here, so the slice
//! metric is `σ(t, x) δ` and the second fundamental form is umbilic
//! (`II = λ g_t`). The Codazzi term then reduces to a one-form `ω`:
//! `F(X, Y) = ω(X) g(Y, Y) - ω(Y) g(X, Y)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, CollarError, Result};

pub(crate) fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn smoothstep_d(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        6.0 * x * (1.0 - x)
    } else {
        0.0
    }
}

fn smoothstep_int(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x - 0.5 * x * x * x * x
}

/// Monotone C² warp `a(t)` for the scaled constant-curvature family:
/// linear with slope `a0_slope` on `t <= 0`, a smoothstep rise to a plateau
/// slope on `[0, 1/2]`, a smoothstep decay to zero slope on `[1/2, 1]`, and
/// constant `sqrt(target_c)` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSchedule {
    pub a0: f64,
    pub a0_slope: f64,
    pub target_c: f64,
    pub plateau: f64,
    pub t_freeze: f64,
    pub half_slope_horizon: f64,
    /// `½ d/dt(a²)` at `t = 0`, i.e. half of `∂_t g_t` at 0 relative to `g'`.
    pub initial_slope_floor: f64,
}

pub fn build_extension_schedule(a0: f64, a0_slope: f64, target_c: f64) -> Result<ExtensionSchedule> {
    ensure_positive("a0", a0)?;
    ensure_positive("a0_slope", a0_slope)?;
    ensure_positive("target_c", target_c)?;
    let rise = target_c.sqrt() - a0;
    let required = 0.5 * a0_slope;
    if rise < required {
        return Err(CollarError::InsufficientHeadroom { required, available: rise });
    }
    Ok(ExtensionSchedule {
        a0,
        a0_slope,
        target_c,
        plateau: 2.0 * (rise - 0.25 * a0_slope),
        t_freeze: 1.0,
        half_slope_horizon: 0.5,
        initial_slope_floor: a0 * a0_slope,
    })
}

impl ExtensionSchedule {
    /// `(a, a', a'')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (a0, s0, v) = (self.a0, self.a0_slope, self.plateau);
        if t <= 0.0 {
            (a0 + s0 * t, s0, 0.0)
        } else if t <= 0.5 {
            let x = 2.0 * t;
            (
                a0 + s0 * t + (v - s0) * 0.5 * smoothstep_int(x),
                s0 + (v - s0) * smoothstep(x),
                2.0 * (v - s0) * smoothstep_d(x),
            )
        } else if t < 1.0 {
            let x = 2.0 * t - 1.0;
            let a_half = a0 + 0.5 * s0 + 0.25 * (v - s0);
            (
                a_half + v * (t - 0.5 - 0.5 * smoothstep_int(x)),
                v * (1.0 - smoothstep(x)),
                -2.0 * v * smoothstep_d(x),
            )
        } else {
            (self.target_c.sqrt(), 0.0, 0.0)
        }
    }

    /// Largest collar overlap `ε` for which `∂_t g_t ≥ floor · g'` on `(-ε, 0]`.
    pub fn max_overlap(&self) -> f64 {
        0.5 * self.a0 / self.a0_slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SliceWarp {
    Constant { a: f64 },
    Exponential { a0: f64, rate: f64 },
    Schedule(ExtensionSchedule),
}

impl SliceWarp {
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            SliceWarp::Constant { a } => (a, 0.0, 0.0),
            SliceWarp::Exponential { a0, rate } => {
                let a = a0 * (rate * t).exp();
                (a, rate * a, rate * rate * a)
            }
            SliceWarp::Schedule(s) => s.eval(t),
        }
    }

    /// Value of `a` once the family is frozen (`None` if it never freezes).
    pub fn frozen_value(&self) -> Option<f64> {
        match *self {
            SliceWarp::Constant { a } => Some(a),
            SliceWarp::Exponential { rate, a0 } => (rate == 0.0).then_some(a0),
            SliceWarp::Schedule(s) => Some(s.target_c.sqrt()),
        }
    }

    pub fn freeze_time(&self) -> Option<f64> {
        match *self {
            SliceWarp::Constant { .. } => Some(f64::NEG_INFINITY),
            SliceWarp::Exponential { rate, .. } => (rate == 0.0).then_some(f64::NEG_INFINITY),
            SliceWarp::Schedule(s) => Some(s.t_freeze),
        }
    }
}

/// One term `amp · t^power · sin(k1 x1 + k2 x2 + phase)` of the conformal
/// potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub amp: f64,
    pub power: u32,
    pub k1: f64,
    pub k2: f64,
    pub phase: f64,
}

/// Derivatives of the potential at a point, up to order 2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PotentialJet {
    pub phi: f64,
    pub t: f64,
    pub tt: f64,
    pub x: [f64; 2],
    pub tx: [f64; 2],
    pub xx: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalPotential {
    pub terms: Vec<PotentialTerm>,
}

impl ConformalPotential {
    /// `φ = amp · t · sin(x1)`.
    pub fn linear_sine(amp: f64) -> Self {
        ConformalPotential {
            terms: vec![PotentialTerm { amp, power: 1, k1: 1.0, k2: 0.0, phase: 0.0 }],
        }
    }

    pub fn jet(&self, t: f64, x: &[f64]) -> PotentialJet {
        let mut j = PotentialJet::default();
        for term in &self.terms {
            let p = term.power as i32;
            let tp = t.powi(p);
            let dtp = if p >= 1 { p as f64 * t.powi(p - 1) } else { 0.0 };
            let ddtp = if p >= 2 { (p * (p - 1)) as f64 * t.powi(p - 2) } else { 0.0 };
            let theta = term.k1 * x[0] + term.k2 * x[1] + term.phase;
            let (s, c) = theta.sin_cos();
            let k = [term.k1, term.k2];
            let amp = term.amp;
            j.phi += amp * tp * s;
            j.t += amp * dtp * s;
            j.tt += amp * ddtp * s;
            for i in 0..2 {
                j.x[i] += amp * tp * k[i] * c;
                j.tx[i] += amp * dtp * k[i] * c;
                for l in 0..2 {
                    j.xx[i][l] -= amp * tp * k[i] * k[l] * s;
                }
            }
        }
        j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SliceFamily {
    /// `g_t = a(t)² g'` with `g'` of constant curvature `k`, in the chart
    /// `g' = 4 / (1 + k|x|²)² δ`.
    ScaledConstCurv { k: f64, warp: SliceWarp, dim: usize },
    /// `g_t = e^{2φ(t, x)} (dx1² + dx2²)` on a 2-torus.
    ConformalTorus2D { phi: ConformalPotential },
}

/// Slice geometry at a point, in chart coordinates. `shape` and
/// `shape_rate` are the operators `A` and `∂_t A` (mixed tensors).
#[derive(Debug, Clone, PartialEq)]
pub struct SliceData {
    pub metric: DMatrix<f64>,
    pub shape: DMatrix<f64>,
    pub shape_rate: DMatrix<f64>,
    /// Intrinsic sectional curvature (the same on every 2-plane here).
    pub intrinsic_curvature: f64,
    /// Codazzi one-form `ω`.
    pub codazzi: DVector<f64>,
}

impl SliceData {
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (&self.metric * v).dot(u)
    }

    /// `g_t(A u, v)`.
    pub fn second_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.inner(&(&self.shape * u), v)
    }

    /// `F(X, Y) = ∇_X II(Y, Y) - ∇_Y II(X, Y)` for the umbilic families.
    pub fn codazzi_term(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.codazzi.dot(x) * self.inner(y, y) - self.codazzi.dot(y) * self.inner(x, y)
    }
}

impl SliceFamily {
    pub fn dim(&self) -> usize {
        match self {
            SliceFamily::ScaledConstCurv { dim, .. } => *dim,
            SliceFamily::ConformalTorus2D { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SliceFamily::ScaledConstCurv { k, warp, dim } => {
                if *dim == 0 {
                    return Err(CollarError::InvalidParameter("slice dimension must be >= 1".into()));
                }
                if !k.is_finite() {
                    return Err(CollarError::InvalidParameter("slice curvature must be finite".into()));
                }
                match *warp {
                    SliceWarp::Constant { a } => ensure_positive("a", a),
                    SliceWarp::Exponential { a0, rate } => {
                        ensure_positive("a0", a0)?;
                        if rate.is_finite() {
                            Ok(())
                        } else {
                            Err(CollarError::InvalidParameter("rate must be finite".into()))
                        }
                    }
                    SliceWarp::Schedule(s) => {
                        ensure_positive("a0", s.a0)?;
                        ensure_positive("a0_slope", s.a0_slope)
                    }
                }
            }
            SliceFamily::ConformalTorus2D { phi } => {
                if phi.terms.iter().all(|t| t.amp.is_finite() && t.power <= 2) {
                    Ok(())
                } else {
                    Err(CollarError::InvalidParameter("potential terms need finite amp, power <= 2".into()))
                }
            }
        }
    }

    /// `ψ` with `g' = e^{2ψ} δ`, and its gradient.
    fn chart_log_factor(k: f64, x: &[f64]) -> (f64, Vec<f64>) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let denom = 1.0 + k * r2;
        let psi = (2.0 / denom).ln();
        let grad = x.iter().map(|&xi| -2.0 * k * xi / denom).collect();
        (psi, grad)
    }

    /// True if `x` lies in the chart domain.
    pub fn in_chart(&self, x: &[f64]) -> bool {
        match self {
            SliceFamily::ScaledConstCurv { k, dim, .. } => {
                x.len() == *dim && 1.0 + k * x.iter().map(|v| v * v).sum::<f64>() > 0.0
            }
            SliceFamily::ConformalTorus2D { .. } => x.len() == 2,
        }
    }

    /// `σ(t, x)` with `g_t = σ δ` in chart coordinates.
    pub fn conformal_coefficient(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            SliceFamily::ScaledConstCurv { k, warp, .. } => {
                let (a, _, _) = warp.eval(t);
                let (psi, _) = Self::chart_log_factor(*k, x);
                a * a * (2.0 * psi).exp()
            }
            SliceFamily::ConformalTorus2D { phi } => (2.0 * phi.jet(t, x).phi).exp(),
        }
    }

    /// Log-derivatives of `σ^{1/2}`: returns `(∂_t log σ^{1/2}, ∂_x log σ^{1/2})`.
    pub fn log_factor_gradient(&self, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            SliceFamily::ScaledConstCurv { k, warp, .. } => {
                let (a, da, _) = warp.eval(t);
                let (_, grad) = Self::chart_log_factor(*k, x);
                (da / a, grad)
            }
            SliceFamily::ConformalTorus2D { phi } => {
                let j = phi.jet(t, x);
                (j.t, j.x.to_vec())
            }
        }
    }

    /// Whether the family has stopped moving at `t` (`∂_t g_t = 0`).
    pub fn is_frozen_at(&self, t: f64) -> bool {
        match self {
            SliceFamily::ScaledConstCurv { warp, .. } => warp.freeze_time().is_some_and(|tf| t >= tf),
            SliceFamily::ConformalTorus2D { phi } => phi.terms.iter().all(|p| p.power == 0 || p.amp == 0.0),
        }
    }

    /// Frozen slice scale relative to `g'` (`g_{t≥1} = scale · g'`).
    pub fn frozen_scale(&self) -> Option<f64> {
        match self {
            SliceFamily::ScaledConstCurv { warp, .. } => warp.frozen_value().map(|a| a * a),
            SliceFamily::ConformalTorus2D { .. } => None,
        }
    }

    /// Intrinsic curvature of the frozen slice, for constant-curvature families.
    pub fn frozen_intrinsic_curvature(&self) -> Option<f64> {
        match self {
            SliceFamily::ScaledConstCurv { k, .. } => self.frozen_scale().map(|s| k / s),
            SliceFamily::ConformalTorus2D { .. } => None,
        }
    }

    /// Minimum eigenvalue of the shape operator at `t = 0`.
    pub fn initial_convexity(&self) -> f64 {
        match self {
            SliceFamily::ScaledConstCurv { warp, .. } => {
                let (a, da, _) = warp.eval(0.0);
                da / a
            }
            SliceFamily::ConformalTorus2D { .. } => f64::NAN,
        }
    }
}

pub fn slice_data(s: &SliceFamily, t: f64, x: &[f64]) -> SliceData {
    let d = s.dim();
    match s {
        SliceFamily::ScaledConstCurv { k, warp, .. } => {
            let (a, da, dda) = warp.eval(t);
            let sigma = s.conformal_coefficient(t, x);
            let lam = da / a;
            SliceData {
                metric: DMatrix::identity(d, d) * sigma,
                shape: DMatrix::identity(d, d) * lam,
                shape_rate: DMatrix::identity(d, d) * ((dda * a - da * da) / (a * a)),
                intrinsic_curvature: k / (a * a),
                codazzi: DVector::zeros(d),
            }
        }
        SliceFamily::ConformalTorus2D { phi } => {
            let j = phi.jet(t, x);
            let sigma = (2.0 * j.phi).exp();
            let laplacian = j.xx[0][0] + j.xx[1][1];
            SliceData {
                metric: DMatrix::identity(2, 2) * sigma,
                shape: DMatrix::identity(2, 2) * j.t,
                shape_rate: DMatrix::identity(2, 2) * j.tt,
                intrinsic_curvature: -laplacian / sigma,
                codazzi: DVector::from_row_slice(&j.tx),
            }
        }
    }
}

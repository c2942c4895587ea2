//! Sectional curvatures of `h̃ = dt² + f(t)² g_t`.
//!
//! Planes are given by `g_t`-orthonormal slice vectors `X, Y` in chart
//! coordinates, with three shapes: `σ(X, T)`, `σ(X, Y)` and
//! `σ(X + aT, Y)`. The mixed curvature is the rational pencil
//! `(f² K̃_XY + a² K̃_TY - 2a F(X, Y)) / (f² + a²)`, with
//! `F(X, Y) = (∇_X II)(Y, Y) - (∇_Y II)(X, Y)`.

mod oracle;
mod verify;

pub use oracle::{fd_christoffel, fd_sectional, oracle_sectional, richardson_ratio, CoordinateMetric};
pub use verify::{measure_interior_bound, verify_lemma_bounds, GridSpec};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CollarError, Result};
use crate::profile::Profile;
use crate::slice::{slice_data, SliceData, SliceFamily, SliceWarp};

/// The collar metric `h̃ = dt² + f(t)² g_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarMetric {
    pub profile: Profile,
    pub slice: SliceFamily,
    /// Upper bound for sectional curvature of the original metric.
    pub c0: f64,
}

impl CollarMetric {
    /// Values of `t` where the metric coefficients lose smoothness: profile
    /// knots and schedule junctions.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.profile {
            Profile::Collar(p) => p.bridge.knots.clone(),
            _ => Vec::new(),
        };
        if let SliceFamily::ScaledConstCurv { warp: SliceWarp::Schedule(_), .. } = &self.slice {
            b.extend([0.0, 0.5, 1.0]);
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn new(profile: Profile, slice: SliceFamily, c0: f64) -> Self {
        CollarMetric { profile, slice, c0 }
    }

    pub fn kappa(&self) -> f64 {
        self.profile.kappa().unwrap_or(0.0)
    }

    /// Start of the deep-negative region; `1/sqrt(kappa)` for built profiles.
    pub fn t0(&self) -> f64 {
        match self.profile.t0() {
            Some(t0) => t0,
            None => self.profile.kappa().map(|k| 1.0 / k.sqrt()).unwrap_or(0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.slice.dim() + 1
    }

    /// `F_tot = f · a` for scaled constant-curvature slices.
    pub fn total_warp(&self, t: f64) -> Option<(f64, f64, f64)> {
        match &self.slice {
            SliceFamily::ScaledConstCurv { warp, .. } => {
                let (f, df, ddf) = self.profile.eval(t);
                let (a, da, dda) = warp.eval(t);
                Some((f * a, df * a + f * da, ddf * a + 2.0 * df * da + f * dda))
            }
            SliceFamily::ConformalTorus2D { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaneMode {
    XT,
    XY,
    Mixed,
}

impl PlaneMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlaneMode::XT => "XT",
            PlaneMode::XY => "XY",
            PlaneMode::Mixed => "Mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentPlane {
    pub t: f64,
    pub x: Vec<f64>,
    pub mode: PlaneMode,
    /// Slice vector `X` (chart components).
    pub u: DVector<f64>,
    /// Slice vector `Y`; unused in `XT` mode.
    pub v: DVector<f64>,
    pub a: f64,
}

impl TangentPlane {
    pub fn xt(t: f64, x: &[f64], u: DVector<f64>) -> Self {
        let n = u.len();
        TangentPlane { t, x: x.to_vec(), mode: PlaneMode::XT, u, v: DVector::zeros(n), a: 0.0 }
    }

    pub fn xy(t: f64, x: &[f64], u: DVector<f64>, v: DVector<f64>) -> Self {
        TangentPlane { t, x: x.to_vec(), mode: PlaneMode::XY, u, v, a: 0.0 }
    }

    pub fn mixed(t: f64, x: &[f64], u: DVector<f64>, v: DVector<f64>, a: f64) -> Self {
        TangentPlane { t, x: x.to_vec(), mode: PlaneMode::Mixed, u, v, a }
    }

    /// Spanning vectors in full coordinates `(t, x...)`.
    pub fn spanning_vectors(&self) -> (DVector<f64>, DVector<f64>) {
        let d = self.u.len();
        let mut first = DVector::zeros(d + 1);
        let mut second = DVector::zeros(d + 1);
        match self.mode {
            PlaneMode::XT => {
                first.rows_mut(1, d).copy_from(&self.u);
                second[0] = 1.0;
            }
            PlaneMode::XY => {
                first.rows_mut(1, d).copy_from(&self.u);
                second.rows_mut(1, d).copy_from(&self.v);
            }
            PlaneMode::Mixed => {
                first[0] = self.a;
                first.rows_mut(1, d).copy_from(&self.u);
                second.rows_mut(1, d).copy_from(&self.v);
            }
        }
        (first, second)
    }
}

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Ingredients of the curvature formulas at one base point.
#[derive(Debug, Clone)]
pub struct BaseGeometry {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
    pub slice: SliceData,
}

impl BaseGeometry {
    pub fn at(m: &CollarMetric, t: f64, x: &[f64]) -> Self {
        let (f, df, ddf) = m.profile.eval(t);
        BaseGeometry { f, df, ddf, slice: slice_data(&m.slice, t, x) }
    }

    pub fn log_slope(&self) -> f64 {
        self.df / self.f
    }

    /// `K̃(σ_{X,T})` for a `g_t`-unit `X`.
    pub fn curvature_xt(&self, x: &DVector<f64>) -> f64 {
        let s = &self.slice;
        let riccati = &s.shape_rate + &s.shape * &s.shape;
        let k_original = -s.inner(&(riccati * x), x) / s.inner(x, x);
        -self.ddf / self.f + k_original - 2.0 * self.log_slope() * s.second_form(x, x)
    }

    /// `K̃(σ_{X,Y})` for `g_t`-orthonormal `X, Y` (Gauss equation).
    pub fn curvature_xy(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let s = &self.slice;
        let (axx, ayy, axy) = (s.second_form(x, x), s.second_form(y, y), s.second_form(x, y));
        let l = self.log_slope();
        s.intrinsic_curvature / (self.f * self.f) + (axy * axy - axx * ayy) - l * l - l * (axx + ayy)
    }

    pub fn pencil(&self, x: &DVector<f64>, y: &DVector<f64>) -> MixedPencil {
        MixedPencil {
            f2: self.f * self.f,
            xy: self.curvature_xy(x, y),
            ty: self.curvature_xt(y),
            // R̃(X, Y, Y, T) = -f² F(X, Y) for the plane X + aT
            codazzi: -self.slice.codazzi_term(x, y),
        }
    }

    /// Minimum eigenvalue of `Ã = f'/f + A`.
    pub fn min_convexity(&self) -> f64 {
        let sym = (&self.slice.shape + self.slice.shape.transpose()) * 0.5;
        self.log_slope() + sym.symmetric_eigenvalues().min()
    }
}

/// `a ↦ K̃(σ_{X+aT, Y})` at a fixed base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedPencil {
    pub f2: f64,
    pub xy: f64,
    pub ty: f64,
    /// Coefficient of `2a` in the numerator, i.e. `-F(X, Y)`.
    pub codazzi: f64,
}

impl MixedPencil {
    pub fn eval(&self, a: f64) -> f64 {
        if a.abs() > 1e150 {
            return self.ty;
        }
        (self.f2 * self.xy + a * a * self.ty + 2.0 * a * self.codazzi) / (self.f2 + a * a)
    }

    /// Exact supremum over `a`: the top eigenvalue of the 2×2 form in `(f, a)`.
    pub fn supremum(&self) -> f64 {
        let off = self.codazzi / self.f2.sqrt();
        let mean = 0.5 * (self.xy + self.ty);
        let half = 0.5 * (self.xy - self.ty);
        mean + (half * half + off * off).sqrt()
    }

    /// `max(K_XY, K_TY) + |2aF|/(f² + a²)`.
    pub fn envelope(&self, a: f64) -> f64 {
        self.xy.max(self.ty) + (2.0 * a * self.codazzi).abs() / (self.f2 + a * a)
    }
}

fn check_unit(s: &SliceData, u: &DVector<f64>) -> Result<()> {
    let r = (s.inner(u, u) - 1.0).abs();
    if r > ORTHONORMAL_TOL {
        return Err(CollarError::NonOrthonormalPlane { residual: r });
    }
    Ok(())
}

fn check_orthonormal(s: &SliceData, u: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
    check_unit(s, u)?;
    check_unit(s, v)?;
    let r = s.inner(u, v).abs();
    if r > ORTHONORMAL_TOL {
        return Err(CollarError::NonOrthonormalPlane { residual: r });
    }
    Ok(())
}

fn check_plane_dims(m: &CollarMetric, p: &TangentPlane) -> Result<()> {
    let d = m.slice.dim();
    if p.x.len() != d || p.u.len() != d || p.v.len() != d {
        return Err(CollarError::InvalidParameter(format!(
            "plane vectors must live in the {d}-dimensional slice"
        )));
    }
    Ok(())
}

pub fn sectional_curvature(m: &CollarMetric, p: &TangentPlane) -> Result<f64> {
    check_plane_dims(m, p)?;
    let g = BaseGeometry::at(m, p.t, &p.x);
    match p.mode {
        PlaneMode::XT => {
            check_unit(&g.slice, &p.u)?;
            Ok(g.curvature_xt(&p.u))
        }
        PlaneMode::XY => {
            check_orthonormal(&g.slice, &p.u, &p.v)?;
            Ok(g.curvature_xy(&p.u, &p.v))
        }
        PlaneMode::Mixed => {
            check_orthonormal(&g.slice, &p.u, &p.v)?;
            Ok(g.pencil(&p.u, &p.v).eval(p.a))
        }
    }
}

/// Simplified formulas valid once `∂_t g_t = 0`.
pub fn far_field_curvatures(m: &CollarMetric, p: &TangentPlane) -> Result<f64> {
    check_plane_dims(m, p)?;
    if !m.slice.is_frozen_at(p.t) {
        return Err(CollarError::NotFrozen { t: p.t });
    }
    let (f, df, ddf) = m.profile.eval(p.t);
    let s = slice_data(&m.slice, p.t, &p.x);
    let xt = -ddf / f;
    let xy = s.intrinsic_curvature / (f * f) - (df / f).powi(2);
    match p.mode {
        PlaneMode::XT => {
            check_unit(&s, &p.u)?;
            Ok(xt)
        }
        PlaneMode::XY => {
            check_orthonormal(&s, &p.u, &p.v)?;
            Ok(xy)
        }
        PlaneMode::Mixed => {
            check_orthonormal(&s, &p.u, &p.v)?;
            let a2 = p.a * p.a;
            Ok((f * f * xy + a2 * xt) / (f * f + a2))
        }
    }
}

/// `g_t`-orthonormal chart frame at a slice point.
pub fn slice_frame(m: &CollarMetric, t: f64, x: &[f64]) -> Vec<DVector<f64>> {
    let d = m.slice.dim();
    let scale = 1.0 / m.slice.conformal_coefficient(t, x).sqrt();
    (0..d)
        .map(|i| {
            let mut e = DVector::zeros(d);
            e[i] = scale;
            e
        })
        .collect()
}

/// Rewrites the plane spanned by `αT + P` and `βT + Q` (slice vectors in
/// chart coordinates) in one of the three normal forms.
pub fn plane_from_vectors(
    m: &CollarMetric,
    t: f64,
    x: &[f64],
    first: (f64, &DVector<f64>),
    second: (f64, &DVector<f64>),
) -> Result<TangentPlane> {
    let s = slice_data(&m.slice, t, x);
    let norm = |v: &DVector<f64>| s.inner(v, v).sqrt();
    // degeneracy is judged in the collar metric, where slice parts carry a factor f
    let (f, _, _) = m.profile.eval(t);
    let (alpha, p) = first;
    let (beta, q) = second;
    let scale = (alpha.abs() + f * norm(p)).max(beta.abs() + f * norm(q)).max(1e-300);
    let tiny = 1e-13 * scale;

    let w: DVector<f64> = p * beta - q * alpha;
    if alpha.abs() <= tiny && beta.abs() <= tiny {
        // both vertical
        let nu = norm(p);
        let u = p / nu;
        let q_perp = q - &u * s.inner(q, &u);
        let nq = norm(&q_perp);
        if f * nq <= tiny {
            return Err(CollarError::InvalidParameter("degenerate plane".into()));
        }
        return Ok(TangentPlane::xy(t, x, u, q_perp / nq));
    }
    let nw = norm(&w);
    if f * nw <= tiny * scale {
        return Err(CollarError::InvalidParameter("degenerate plane".into()));
    }
    let y = w / nw;
    let (gamma, r) = if alpha.abs() >= beta.abs() { (alpha, p) } else { (beta, q) };
    let mut r_perp: DVector<f64> = r - &y * s.inner(r, &y);
    // second pass restores orthogonality when r is nearly parallel to y
    r_perp -= &y * s.inner(&r_perp, &y);
    let nr = norm(&r_perp);
    if f * nr <= 1e-13 * gamma.abs() {
        return Ok(TangentPlane::xt(t, x, y));
    }
    Ok(TangentPlane::mixed(t, x, r_perp / nr, y, gamma / nr))
}

//! Unit-speed geodesics of the collar metric.
//!
//! Every supported metric is conformally flat in its slice chart,
//! `h̃ = dt² + e^{2Φ(t,x)} δ` with `e^{2Φ} = f² σ`, so one coordinate system
//! and closed-form Christoffel symbols serve all slice families.
//!
//! The integrator state carries the momentum `p = e^{2Φ} ẋ` rather than `ẋ`:
//! far out `ẋ` decays like `1/f²` and drops below any absolute tolerance,
//! while `|p|` stays comparable to the Clairaut constant.

use nalgebra::DVector;

use crate::curvature::CollarMetric;
use crate::error::{CollarError, Result};
use crate::ode::{adaptive_step, integrate_with_breaks, ErrorFloor, OdeOptions, Stop, Trajectory};
use crate::slice::SliceFamily;

/// `e^{2Φ}`, `∂_t Φ` and `∂_x Φ` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalJet {
    pub e2phi: f64,
    pub phi_t: f64,
    pub phi_x: Vec<f64>,
}

pub fn conformal_jet(m: &CollarMetric, t: f64, x: &[f64]) -> ConformalJet {
    let (f, df, _) = m.profile.eval(t);
    let sigma = m.slice.conformal_coefficient(t, x);
    let (lt, lx) = m.slice.log_factor_gradient(t, x);
    ConformalJet { e2phi: f * f * sigma, phi_t: df / f + lt, phi_x: lx }
}

impl ConformalJet {
    /// `Γ^a_{bc} v^b w^c` for vectors in `(t, x)` coordinates.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let d = v.len() - 1;
        let vx = &v[1..];
        let wx = &w[1..];
        let vw: f64 = vx.iter().zip(wx).map(|(a, b)| a * b).sum();
        let pv: f64 = self.phi_x.iter().zip(vx).map(|(a, b)| a * b).sum();
        let pw: f64 = self.phi_x.iter().zip(wx).map(|(a, b)| a * b).sum();
        let mut out = vec![0.0; d + 1];
        out[0] = -self.phi_t * self.e2phi * vw;
        for i in 0..d {
            out[i + 1] = self.phi_t * (v[0] * wx[i] + w[0] * vx[i]) + vx[i] * pw + wx[i] * pv - vw * self.phi_x[i];
        }
        out
    }

    /// `h̃(v, w)`.
    pub fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        v[0] * w[0] + self.e2phi * v[1..].iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Position and velocity of a geodesic in `(t, x)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub tdot: f64,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    /// Clairaut constant `F_tot² |ẋ|_{g'}` (NaN for families without one).
    pub l: f64,
    /// Arclength travelled so far.
    pub arc: f64,
}

/// Clairaut constant `a |p| / √σ` from the slice momentum.
fn clairaut_from_momentum(m: &CollarMetric, t: f64, x: &[f64], p: &[f64]) -> f64 {
    match &m.slice {
        SliceFamily::ScaledConstCurv { warp, .. } => {
            let (a, _, _) = warp.eval(t);
            let sigma = m.slice.conformal_coefficient(t, x);
            a * p.iter().map(|v| v * v).sum::<f64>().sqrt() / sigma.sqrt()
        }
        SliceFamily::ConformalTorus2D { .. } => f64::NAN,
    }
}

impl GeodesicState {
    /// Unit-speed state at `(t, x)` with `ṫ = tdot` and slice direction `dir`.
    pub fn new(m: &CollarMetric, t: f64, x: &[f64], tdot: f64, dir: &[f64]) -> Result<Self> {
        if x.len() != m.slice.dim() || dir.len() != x.len() {
            return Err(CollarError::InvalidParameter("slice point/direction dimension mismatch".into()));
        }
        if !m.slice.in_chart(x) {
            return Err(CollarError::OutsideDomain(format!("slice point {x:?} outside chart")));
        }
        if !(tdot.abs() <= 1.0) {
            return Err(CollarError::InvalidParameter(format!("|tdot| = {} exceeds 1", tdot.abs())));
        }
        let jet = conformal_jet(m, t, x);
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let slice_speed = (1.0 - tdot * tdot).max(0.0).sqrt();
        let xdot: Vec<f64> = if slice_speed == 0.0 {
            vec![0.0; x.len()]
        } else if norm == 0.0 {
            return Err(CollarError::InvalidParameter("zero slice direction".into()));
        } else {
            dir.iter().map(|v| v / norm * slice_speed / jet.e2phi.sqrt()).collect()
        };
        let p: Vec<f64> = xdot.iter().map(|v| v * jet.e2phi).collect();
        let l = clairaut_from_momentum(m, t, x, &p);
        Ok(GeodesicState { t, tdot, x: x.to_vec(), xdot, l, arc: 0.0 })
    }

    /// Unit-speed state making angle `alpha` with `∂_t`.
    pub fn from_angle(m: &CollarMetric, t: f64, x: &[f64], alpha: f64, dir: &[f64]) -> Result<Self> {
        Self::new(m, t, x, alpha.cos(), dir)
    }

    pub fn dim(&self) -> usize {
        self.x.len() + 1
    }

    pub fn position(&self) -> Vec<f64> {
        let mut p = vec![self.t];
        p.extend_from_slice(&self.x);
        p
    }

    pub fn velocity(&self) -> Vec<f64> {
        let mut v = vec![self.tdot];
        v.extend_from_slice(&self.xdot);
        v
    }

    /// Integrator state `[t, x, ṫ, p]`.
    pub(crate) fn pack(&self, m: &CollarMetric) -> Vec<f64> {
        let e2phi = conformal_jet(m, self.t, &self.x).e2phi;
        let mut y = self.position();
        y.push(self.tdot);
        y.extend(self.xdot.iter().map(|v| v * e2phi));
        y
    }

    pub(crate) fn unpack(m: &CollarMetric, y: &[f64], arc: f64) -> Self {
        let n = m.dim();
        let x = y[1..n].to_vec();
        let p = &y[n + 1..2 * n];
        let e2phi = conformal_jet(m, y[0], &x).e2phi;
        let xdot = p.iter().map(|v| v / e2phi).collect();
        let l = clairaut_from_momentum(m, y[0], &x, p);
        GeodesicState { t: y[0], tdot: y[n], x, xdot, l, arc }
    }

    /// `h̃(γ̇, γ̇)`.
    pub fn speed_squared(&self, m: &CollarMetric) -> f64 {
        let jet = conformal_jet(m, self.t, &self.x);
        let v = self.velocity();
        jet.inner(&v, &v)
    }

    /// The same point with reversed velocity.
    pub fn reversed(&self) -> Self {
        GeodesicState {
            tdot: -self.tdot,
            xdot: self.xdot.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

/// Hamiltonian geodesic flow on `[t, x, p_t, p]` for
/// `H = ½ (p_t² + e^{-2Φ} |p|²)`.
pub(crate) fn geodesic_rhs(m: &CollarMetric, y: &[f64], dy: &mut [f64]) {
    let n = m.dim();
    let jet = conformal_jet(m, y[0], &y[1..n]);
    let p = &y[n + 1..2 * n];
    let inv = 1.0 / jet.e2phi;
    let slice_energy = inv * p.iter().map(|v| v * v).sum::<f64>();
    dy[0] = y[n];
    for i in 0..n - 1 {
        dy[1 + i] = inv * p[i];
        dy[n + 1 + i] = jet.phi_x[i] * slice_energy;
    }
    dy[n] = jet.phi_t * slice_energy;
}

/// Integrates a system whose first component is `t`, restarting at the
/// metric's breakpoints.
pub(crate) fn integrate_collar<F>(
    m: &CollarMetric,
    f: &F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    opts: &OdeOptions,
    events: &[&dyn Fn(f64, &[f64]) -> f64],
    floor: Option<ErrorFloor>,
) -> Result<(Trajectory, Stop)>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    let knots: Vec<Box<dyn Fn(f64, &[f64]) -> f64>> = m
        .breakpoints()
        .into_iter()
        .map(|k| Box::new(move |_: f64, y: &[f64]| y[0] - k) as Box<dyn Fn(f64, &[f64]) -> f64>)
        .collect();
    let breaks: Vec<&dyn Fn(f64, &[f64]) -> f64> = knots.iter().map(|b| b.as_ref()).collect();
    integrate_with_breaks(f, s0, y0, s_end, opts, events, &breaks, floor)
}

/// One adaptive step; rejects when the step leaves the unit sphere bundle.
pub fn geodesic_step(
    m: &CollarMetric,
    s: &GeodesicState,
    h: f64,
    opts: &OdeOptions,
) -> Result<(GeodesicState, f64)> {
    let f = |_: f64, y: &[f64], dy: &mut [f64]| geodesic_rhs(m, y, dy);
    let (y, used, next) = adaptive_step(&f, s.arc, &s.pack(m), h, opts)?;
    let out = GeodesicState::unpack(m, &y, s.arc + used);
    if (out.speed_squared(m) - 1.0).abs() > 1e-9 {
        return Err(CollarError::StepRejected { suggested: 0.5 * used });
    }
    Ok((out, next))
}

/// Geodesic states at every accepted step over `length` of arclength.
pub fn trace_geodesic(
    m: &CollarMetric,
    start: &GeodesicState,
    length: f64,
    opts: &OdeOptions,
) -> Result<Vec<GeodesicState>> {
    let f = |_: f64, y: &[f64], dy: &mut [f64]| geodesic_rhs(m, y, dy);
    let (tr, _) = integrate_collar(m, &f, start.arc, &start.pack(m), start.arc + length, opts, &[], None)?;
    Ok(tr.s.iter().zip(&tr.y).map(|(s, y)| GeodesicState::unpack(m, y, *s)).collect())
}

/// Reduced warped-product geodesic on `(t, ṫ, slice arclength)` with a fixed
/// Clairaut constant: `ẗ = L² F'/F³`, `θ̇ = L/F²` for `F = F_tot`.
pub fn reduced_geodesic(
    m: &CollarMetric,
    t: f64,
    tdot: f64,
    l: f64,
    length: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    if m.total_warp(t).is_none() {
        return Err(CollarError::Unsupported("reduced geodesics need a scaled constant-curvature slice".into()));
    }
    let f = |_: f64, y: &[f64], dy: &mut [f64]| {
        let (ff, dff, _) = m.total_warp(y[0]).expect("checked");
        dy[0] = y[1];
        dy[1] = l * l * dff / (ff * ff * ff);
        dy[2] = l / (ff * ff);
    };
    let (tr, stop) = integrate_collar(m, &f, 0.0, &[t, tdot, 0.0], length, opts, &[], None)?;
    debug_assert_eq!(stop, Stop::End);
    Ok(tr)
}

/// `h̃`-orthonormal basis of `γ̇^⊥` by Gram–Schmidt on the coordinate axes.
pub fn normal_frame(m: &CollarMetric, s: &GeodesicState) -> Vec<DVector<f64>> {
    let jet = conformal_jet(m, s.t, &s.x);
    let n = s.dim();
    let v = s.velocity();
    let mut basis: Vec<Vec<f64>> = vec![v];
    for axis in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = vec![0.0; n];
        e[axis] = 1.0;
        for b in &basis {
            let c = jet.inner(&e, b) / jet.inner(b, b);
            for (ei, bi) in e.iter_mut().zip(b) {
                *ei -= c * bi;
            }
        }
        let norm = jet.inner(&e, &e).sqrt();
        let scale = if axis == 0 { 1.0 } else { jet.e2phi.sqrt() };
        if norm * scale > 1e-8 {
            basis.push(e.iter().map(|c| c / norm).collect());
        }
    }
    basis.into_iter().skip(1).map(DVector::from_vec).collect()
}

//! Matrix Jacobi fields `J'' + R J = 0` in a parallel normal frame.

use nalgebra::{DMatrix, DVector};

use super::riccati::BLOWDOWN_THRESHOLD;
use super::geodesic::{conformal_jet, geodesic_rhs, integrate_collar, normal_frame, GeodesicState};
use crate::curvature::{plane_from_vectors, sectional_curvature, CollarMetric};
use crate::error::{CollarError, Result};
use crate::ode::{integrate_floored, OdeOptions, Stop};

/// Jacobi data at one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiFrameState {
    pub s: f64,
    pub t: f64,
    pub tdot: f64,
    pub j: DMatrix<f64>,
    pub jdot: DMatrix<f64>,
    /// `½ (‖J e₁‖²)' / ‖J e₁‖²` for the first column.
    pub mu: f64,
    /// Smallest eigenvalue of `sym(J' J⁻¹)`: a lower bound for `μ_J` over all
    /// fields `J c` of a Lagrangian family.
    pub mu_min: f64,
    pub norm_j: f64,
    pub det_j: f64,
}

impl JacobiFrameState {
    pub fn new(s: f64, t: f64, tdot: f64, j: DMatrix<f64>, jdot: DMatrix<f64>) -> Self {
        let c0 = j.column(0);
        let mu = c0.dot(&jdot.column(0)) / c0.norm_squared();
        let det_j = j.determinant();
        let mu_min = match j.clone().try_inverse() {
            Some(inv) => {
                let u = &jdot * inv;
                let sym = (&u + u.transpose()) * 0.5;
                sym.symmetric_eigenvalues().min()
            }
            None => f64::NEG_INFINITY,
        };
        JacobiFrameState { s, t, tdot, norm_j: j.norm(), det_j, j, jdot, mu, mu_min }
    }

    /// `Jᵀ J' - J'ᵀ J`.
    pub fn wronskian(&self) -> DMatrix<f64> {
        self.j.transpose() * &self.jdot - self.jdot.transpose() * &self.j
    }
}

/// Wronskian change relative to `‖J‖ ‖J'‖`, the natural scale for growing fields.
pub fn wronskian_drift(a: &JacobiFrameState, b: &JacobiFrameState) -> f64 {
    let scale = (b.j.norm() * b.jdot.norm()).max(a.j.norm() * a.jdot.norm()).max(1.0);
    (b.wronskian() - a.wronskian()).norm() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiRun {
    pub states: Vec<JacobiFrameState>,
    /// Arclengths where `det J` changes sign.
    pub conjugate_events: Vec<f64>,
}

impl JacobiRun {
    pub fn last(&self) -> &JacobiFrameState {
        self.states.last().expect("nonempty run")
    }

    pub fn max_wronskian_drift(&self) -> f64 {
        let first = &self.states[0];
        self.states.iter().map(|s| wronskian_drift(first, s)).fold(0.0, f64::max)
    }
}

fn pack_mats(y: &mut Vec<f64>, j: &DMatrix<f64>, jd: &DMatrix<f64>) {
    y.extend(j.iter());
    y.extend(jd.iter());
}

fn unpack_mats(d: usize, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let j = DMatrix::from_column_slice(d, d, &y[..d * d]);
    let jd = DMatrix::from_column_slice(d, d, &y[d * d..2 * d * d]);
    (j, jd)
}

fn check_seed(d: usize, j0: &DMatrix<f64>, jd0: &DMatrix<f64>) -> Result<()> {
    if j0.shape() != (d, d) || jd0.shape() != (d, d) {
        return Err(CollarError::InvalidParameter(format!("Jacobi seeds must be {d}x{d}")));
    }
    Ok(())
}

/// Integrates `J'' + R(s) J = 0` for a prescribed curvature operator.
pub fn jacobi_evolve_matrix(
    r: &dyn Fn(f64) -> DMatrix<f64>,
    j0: &DMatrix<f64>,
    jd0: &DMatrix<f64>,
    length: f64,
    opts: &OdeOptions,
) -> Result<JacobiRun> {
    let d = j0.nrows();
    check_seed(d, j0, jd0)?;
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let (j, jd) = unpack_mats(d, y);
        let acc = -(r(s) * j);
        dy[..d * d].copy_from_slice(jd.as_slice());
        dy[d * d..].copy_from_slice(acc.as_slice());
    };
    let mut y0 = Vec::new();
    pack_mats(&mut y0, j0, jd0);
    let det = |_: f64, y: &[f64]| unpack_mats(d, y).0.determinant();
    let floor = |y: &[f64], out: &mut [f64]| {
        for block in [0..d * d, d * d..2 * d * d] {
            let big = y[block.clone()].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            out[block].fill(big);
        }
    };
    let mut states = Vec::new();
    let mut events = Vec::new();
    let (mut s, mut y) = (0.0, y0);
    loop {
        let (tr, stop) = integrate_floored(&rhs, s, &y, length, opts, &[&det], Some(&floor))?;
        let skip = usize::from(!states.is_empty());
        for (si, yi) in tr.s.iter().zip(&tr.y).skip(skip) {
            let (j, jd) = unpack_mats(d, yi);
            states.push(JacobiFrameState::new(*si, f64::NAN, f64::NAN, j, jd));
        }
        let (se, ye) = tr.last();
        (s, y) = (se, ye.to_vec());
        match stop {
            Stop::End => break,
            Stop::Event(_) => events.push(s),
        }
    }
    Ok(JacobiRun { states, conjugate_events: events })
}

/// Geodesic, parallel normal frame and Jacobi data integrated together.
///
/// State layout: geodesic state `[t, x, ṫ, p]` (`2n`), `d = n - 1` frame
/// vectors of length `n` in orthonormal components, then `J` and `J'`
/// (column-major `d×d`).
pub struct CollarFlow<'a> {
    pub metric: &'a CollarMetric,
    n: usize,
}

impl<'a> CollarFlow<'a> {
    pub fn new(metric: &'a CollarMetric) -> Self {
        CollarFlow { metric, n: metric.dim() }
    }

    pub fn normal_dim(&self) -> usize {
        self.n - 1
    }

    fn frame_offset(&self) -> usize {
        2 * self.n
    }

    fn jacobi_offset(&self) -> usize {
        2 * self.n + self.normal_dim() * self.n
    }

    /// Packs a start state; frame vectors are given in `(t, x)` coordinates
    /// and stored in orthonormal components `(v^t, e^Φ v^x)`.
    pub fn pack(
        &self,
        g: &GeodesicState,
        frame: &[DVector<f64>],
        j: &DMatrix<f64>,
        jd: &DMatrix<f64>,
    ) -> Vec<f64> {
        let mut y = g.pack(self.metric);
        let ephi = conformal_jet(self.metric, g.t, &g.x).e2phi.sqrt();
        for e in frame {
            y.push(e[0]);
            y.extend(e.iter().skip(1).map(|v| v * ephi));
        }
        pack_mats(&mut y, j, jd);
        y
    }

    pub fn geodesic(&self, y: &[f64], arc: f64) -> GeodesicState {
        GeodesicState::unpack(self.metric, &y[..2 * self.n], arc)
    }

    /// Coordinate velocity `(ṫ, ẋ)`.
    pub fn velocity(&self, y: &[f64]) -> DVector<f64> {
        let n = self.n;
        let e2phi = conformal_jet(self.metric, y[0], &y[1..n]).e2phi;
        DVector::from_fn(n, |a, _| if a == 0 { y[n] } else { y[n + a] / e2phi })
    }

    /// Parallel normal frame in `(t, x)` coordinates.
    pub fn frame(&self, y: &[f64]) -> Vec<DVector<f64>> {
        let n = self.n;
        let ephi = conformal_jet(self.metric, y[0], &y[1..n]).e2phi.sqrt();
        let o = self.frame_offset();
        (0..self.normal_dim())
            .map(|k| {
                let e = &y[o + k * n..o + (k + 1) * n];
                DVector::from_fn(n, |a, _| if a == 0 { e[0] } else { e[a] / ephi })
            })
            .collect()
    }

    pub fn jacobi(&self, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        unpack_mats(self.normal_dim(), &y[self.jacobi_offset()..])
    }

    pub fn frame_state(&self, s: f64, y: &[f64]) -> JacobiFrameState {
        let (j, jd) = self.jacobi(y);
        JacobiFrameState::new(s, y[0], y[self.n], j, jd)
    }

    /// Curvature operator `R_ij = ⟨R(e_i, γ̇)γ̇, e_j⟩` at a packed state.
    pub fn curvature(&self, y: &[f64]) -> DMatrix<f64> {
        curvature_operator(self.metric, &y[..self.n], &self.velocity(y), &self.frame(y))
    }

    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let d = self.normal_dim();
        geodesic_rhs(self.metric, &y[..2 * n], &mut dy[..2 * n]);
        // parallel transport in orthonormal components
        let jet = conformal_jet(self.metric, y[0], &y[1..n]);
        let inv_ephi = 1.0 / jet.e2phi.sqrt();
        let vx: Vec<f64> = y[n + 1..2 * n].iter().map(|p| p * inv_ephi).collect();
        let o = self.frame_offset();
        for k in 0..d {
            let e = &y[o + k * n..o + (k + 1) * n];
            let ex = &e[1..];
            let vw: f64 = vx.iter().zip(ex).map(|(a, b)| a * b).sum();
            let pw: f64 = jet.phi_x.iter().zip(ex).map(|(a, b)| a * b).sum();
            dy[o + k * n] = jet.phi_t * vw;
            for i in 0..d {
                dy[o + k * n + 1 + i] =
                    -jet.phi_t * e[0] * vx[i] - inv_ephi * (vx[i] * pw - vw * jet.phi_x[i]);
            }
        }
        let r = self.curvature(y);
        let jo = self.jacobi_offset();
        let (j, jd) = unpack_mats(d, &y[jo..]);
        let acc = -(r * j);
        dy[jo..jo + d * d].copy_from_slice(jd.as_slice());
        dy[jo + d * d..jo + 2 * d * d].copy_from_slice(acc.as_slice());
    }

    /// Tolerance floors: each matrix block and the frame are measured by
    /// their largest entry, so roundoff-level off-diagonal entries do not
    /// dictate the step size.
    pub fn error_floor(&self, y: &[f64], out: &mut [f64]) {
        let d = self.normal_dim();
        let jo = self.jacobi_offset();
        out[..jo].fill(0.0);
        out[self.frame_offset()..jo].fill(1.0);
        for block in [jo..jo + d * d, jo + d * d..jo + 2 * d * d] {
            let big = y[block.clone()].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            out[block].fill(big);
        }
    }

    /// Mirror `∂_t ↦ -∂_t` applied to velocity and frame; Jacobi components
    /// are frame coordinates and stay unchanged.
    pub fn reflect(&self, y: &mut [f64]) {
        let n = self.n;
        y[n] = -y[n];
        let o = self.frame_offset();
        for k in 0..self.normal_dim() {
            y[o + k * n] = -y[o + k * n];
        }
    }
}

/// Sectional curvature of `span(γ̇, v)` at `pos`, both in `(t, x)` coordinates.
fn plane_curvature(m: &CollarMetric, pos: &[f64], vel: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let d = pos.len() - 1;
    let p = vel.rows(1, d).into_owned();
    let q = v.rows(1, d).into_owned();
    let plane = plane_from_vectors(m, pos[0], &pos[1..], (vel[0], &p), (v[0], &q))
        .expect("frame vectors span a plane with the velocity");
    sectional_curvature(m, &plane).expect("normal form planes are orthonormal")
}

/// `R(s)` in the frame `e`, by polarization of `v ↦ K̃(γ̇, v)`.
pub fn curvature_operator(m: &CollarMetric, pos: &[f64], vel: &DVector<f64>, e: &[DVector<f64>]) -> DMatrix<f64> {
    let d = e.len();
    let diag: Vec<f64> = e.iter().map(|ei| plane_curvature(m, pos, vel, ei)).collect();
    let mut r = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
    for i in 0..d {
        for j in (i + 1)..d {
            let mid = (&e[i] + &e[j]) / 2f64.sqrt();
            let q = plane_curvature(m, pos, vel, &mid);
            let off = 0.5 * (2.0 * q - diag[i] - diag[j]);
            r[(i, j)] = off;
            r[(j, i)] = off;
        }
    }
    r
}

/// `R(s)` along a geodesic state with a given parallel normal frame.
pub fn curvature_operator_along(m: &CollarMetric, s: &GeodesicState, frame: &[DVector<f64>]) -> DMatrix<f64> {
    curvature_operator(m, &s.position(), &DVector::from_vec(s.velocity()), frame)
}

/// Integrates the geodesic from `start` together with `J'' + R J = 0`.
pub fn jacobi_evolve(
    m: &CollarMetric,
    start: &GeodesicState,
    j0: &DMatrix<f64>,
    jd0: &DMatrix<f64>,
    length: f64,
    opts: &OdeOptions,
) -> Result<JacobiRun> {
    let flow = CollarFlow::new(m);
    check_seed(flow.normal_dim(), j0, jd0)?;
    let frame = normal_frame(m, start);
    let y0 = flow.pack(start, &frame, j0, jd0);
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| flow.rhs(y, dy);
    let det = |_: f64, y: &[f64]| flow.jacobi(y).0.determinant();
    let floor = |y: &[f64], out: &mut [f64]| flow.error_floor(y, out);
    let mut states = Vec::new();
    let mut events = Vec::new();
    let (mut s, mut y) = (start.arc, y0);
    let end = start.arc + length;
    loop {
        let (tr, stop) = integrate_collar(m, &rhs, s, &y, end, opts, &[&det], Some(&floor))?;
        let skip = usize::from(!states.is_empty());
        for (si, yi) in tr.s.iter().zip(&tr.y).skip(skip) {
            states.push(flow.frame_state(*si, yi));
        }
        let (se, ye) = tr.last();
        (s, y) = (se, ye.to_vec());
        match stop {
            Stop::End => break,
            Stop::Event(_) => events.push(s),
        }
    }
    Ok(JacobiRun { states, conjugate_events: events })
}

/// Events reported along a traced trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEventKind {
    /// `det J` changes sign, i.e. `J' J⁻¹` blows down.
    Blowdown,
    /// `ṫ` changes sign, where `F_tot(t)` equals the Clairaut constant.
    TurningPoint,
    /// The geodesic reached the inner boundary `t = 0`.
    Boundary,
}

impl TraceEventKind {
    pub fn label(&self) -> &'static str {
        match self {
            TraceEventKind::Blowdown => "blowdown",
            TraceEventKind::TurningPoint => "turning_point",
            TraceEventKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub kind: TraceEventKind,
    pub state: JacobiFrameState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRun {
    pub states: Vec<JacobiFrameState>,
    pub events: Vec<TraceEvent>,
}

/// Like [`jacobi_evolve`], additionally localizing turning points and
/// stopping at `t = 0`.
pub fn jacobi_trace(
    m: &CollarMetric,
    start: &GeodesicState,
    j0: &DMatrix<f64>,
    jd0: &DMatrix<f64>,
    length: f64,
    opts: &OdeOptions,
) -> Result<TraceRun> {
    let flow = CollarFlow::new(m);
    check_seed(flow.normal_dim(), j0, jd0)?;
    if start.t < 0.0 {
        return Err(CollarError::OutsideDomain(format!("trace must start in the collar, t = {}", start.t)));
    }
    let n = m.dim();
    let frame = normal_frame(m, start);
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| flow.rhs(y, dy);
    // det J misses blowdowns of repeated eigenvalues (no sign change), so the
    // smallest eigenvalue of J'J⁻¹ crossing -BLOWDOWN_THRESHOLD is watched too
    let mu_min = |y: &[f64]| flow.frame_state(0.0, y).mu_min;
    let dive = |_: f64, y: &[f64]| mu_min(y) + BLOWDOWN_THRESHOLD;
    let det = |_: f64, y: &[f64]| flow.jacobi(y).0.determinant();
    let tdot = |_: f64, y: &[f64]| y[n];
    let boundary = |_: f64, y: &[f64]| y[0];
    let floor = |y: &[f64], out: &mut [f64]| flow.error_floor(y, out);
    let mut states = Vec::new();
    let mut events = Vec::new();
    let (mut s, mut y) = (start.arc, flow.pack(start, &frame, j0, jd0));
    let end = start.arc + length;
    // one blowdown per pole: disarmed until J'J⁻¹ is back above the threshold
    let mut armed = true;
    loop {
        let (tr, stop) =
            integrate_collar(m, &rhs, s, &y, end, opts, &[&dive, &det, &tdot, &boundary], Some(&floor))?;
        let skip = usize::from(!states.is_empty());
        for (si, yi) in tr.s.iter().zip(&tr.y).skip(skip) {
            states.push(flow.frame_state(*si, yi));
        }
        let (se, ye) = tr.last();
        (s, y) = (se, ye.to_vec());
        let above = mu_min(&y) > -BLOWDOWN_THRESHOLD;
        let kind = match stop {
            Stop::End => break,
            Stop::Event(0 | 1) => {
                let fire = armed && (stop == Stop::Event(1) || !above);
                armed = above;
                if !fire {
                    continue;
                }
                TraceEventKind::Blowdown
            }
            Stop::Event(2) => TraceEventKind::TurningPoint,
            Stop::Event(_) => TraceEventKind::Boundary,
        };
        events.push(TraceEvent { kind, state: flow.frame_state(s, &y) });
        if kind == TraceEventKind::Boundary {
            break;
        }
    }
    Ok(TraceRun { states, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CollarMetric;
    use crate::ode::integrate;
    use crate::profile::{build_profile, select_far_field, CurvatureCase, Profile};
    use crate::slice::{ConformalPotential, SliceFamily, SliceWarp};
    use approx::assert_relative_eq;

    fn static_slice(k: f64) -> SliceFamily {
        SliceFamily::ScaledConstCurv { k, warp: SliceWarp::Constant { a: 1.0 }, dim: 2 }
    }

    #[test]
    fn flat_jacobi_is_linear() {
        let id = DMatrix::identity(2, 2);
        let run = jacobi_evolve_matrix(&|_| DMatrix::zeros(2, 2), &DMatrix::zeros(2, 2), &id, 3.0, &OdeOptions::default())
            .unwrap();
        for st in &run.states {
            assert!((&st.j - &id * st.s).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_negative_curvature_grows_exponentially() {
        let c = 3.0;
        let id = DMatrix::identity(2, 2);
        let run = jacobi_evolve_matrix(&|_| &id * (-c * c), &id, &(&id * c), 1.0, &OdeOptions::default()).unwrap();
        let last = run.last();
        assert_eq!(last.s, 1.0);
        assert_relative_eq!(last.j[(0, 0)], (c).exp(), max_relative = 1e-8);
        assert!(last.j[(0, 1)].abs() < 1e-8);
        assert_relative_eq!(last.mu, c, max_relative = 1e-8);
    }

    #[test]
    fn positive_curvature_produces_conjugate_points() {
        // J'' + J = 0 with J(0) = 0: zeros at multiples of π
        let id = DMatrix::identity(1, 1);
        let run = jacobi_evolve_matrix(&|_| DMatrix::identity(1, 1), &(&id * 1.0), &(&id * 0.0), 7.0, &OdeOptions::default())
            .unwrap();
        assert_eq!(run.conjugate_events.len(), 2);
        assert_relative_eq!(run.conjugate_events[0], std::f64::consts::FRAC_PI_2, max_relative = 1e-10);
        assert_relative_eq!(run.conjugate_events[1], 1.5 * std::f64::consts::PI, max_relative = 1e-10);
    }

    #[test]
    fn far_field_operator_is_isotropic() {
        let far = select_far_field(CurvatureCase::NegativeSlice { c: 1.0 }, 4.0).unwrap();
        let m = CollarMetric::new(Profile::Closed(far), static_slice(-1.0), 0.0);
        let g = GeodesicState::from_angle(&m, 1.5, &[0.1, 0.2], 0.7, &[1.0, -0.3]).unwrap();
        let r = curvature_operator_along(&m, &g, &normal_frame(&m, &g));
        assert!((r.clone() + DMatrix::identity(2, 2) * 16.0).norm() < 1e-10 * 16.0, "{r}");
        assert_relative_eq!(r.trace(), -32.0, max_relative = 1e-10);
    }

    #[test]
    fn polarization_identity_is_exact() {
        let p = build_profile(CurvatureCase::FlatSlice, 4.0).unwrap();
        let slice = SliceFamily::ConformalTorus2D { phi: ConformalPotential::linear_sine(0.1) };
        let m = CollarMetric::new(Profile::Collar(p), slice, 0.0);
        let g = GeodesicState::from_angle(&m, 0.3, &[0.0, 0.5], 0.9, &[1.0, 0.2]).unwrap();
        let e = normal_frame(&m, &g);
        let pos = g.position();
        let vel = DVector::from_vec(g.velocity());
        let r = curvature_operator(&m, &pos, &vel, &e);
        let q0 = plane_curvature(&m, &pos, &vel, &e[0]);
        let q2 = plane_curvature(&m, &pos, &vel, &e[1]);
        let q1 = plane_curvature(&m, &pos, &vel, &((&e[0] + &e[1]) / 2f64.sqrt()));
        assert_eq!(r[(0, 1)], 0.5 * (q1 * 2.0 - q0 - q2));
        assert_eq!(r[(0, 0)], q0);
        assert_eq!(r[(1, 1)], q2);
    }

    #[test]
    fn transported_frame_stays_orthonormal_and_normal() {
        let p = build_profile(CurvatureCase::FlatSlice, 4.0).unwrap();
        let slice = SliceFamily::ConformalTorus2D { phi: ConformalPotential::linear_sine(0.1) };
        let m = CollarMetric::new(Profile::Collar(p), slice, 0.0);
        let flow = CollarFlow::new(&m);
        let g = GeodesicState::from_angle(&m, 0.1, &[0.3, 0.5], 0.9, &[1.0, 0.2]).unwrap();
        let id = DMatrix::identity(2, 2);
        let y0 = flow.pack(&g, &normal_frame(&m, &g), &id, &id);
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| flow.rhs(y, dy);
        let (tr, _) = integrate(&rhs, 0.0, &y0, 2.0, &OdeOptions::default(), &[]).unwrap();
        let (_, y) = tr.last();
        let jet = conformal_jet(&m, y[0], &y[1..3]);
        let v = flow.velocity(y);
        let e = flow.frame(y);
        assert!((jet.inner(v.as_slice(), v.as_slice()) - 1.0).abs() < 1e-9);
        for i in 0..2 {
            assert!(jet.inner(e[i].as_slice(), v.as_slice()).abs() < 1e-9);
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((jet.inner(e[i].as_slice(), e[j].as_slice()) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn wronskian_is_conserved_along_collar_geodesics() {
        let p = build_profile(CurvatureCase::NegativeSlice { c: 1.0 }, 20.0).unwrap();
        let m = CollarMetric::new(Profile::Collar(p), static_slice(-1.0), 0.0);
        let g = GeodesicState::from_angle(&m, 0.0, &[0.0, 0.1], 1.0, &[1.0, 0.5]).unwrap();
        let jd0 = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, -1.0]);
        let run = jacobi_evolve(&m, &g, &DMatrix::identity(2, 2), &jd0, 10.0, &OdeOptions::default()).unwrap();
        assert!(run.max_wronskian_drift() <= 1e-8, "drift {}", run.max_wronskian_drift());
        assert!(run.conjugate_events.is_empty());
    }

    #[test]
    fn radial_far_field_mu_matches_tanh() {
        let kappa = 5.0;
        let far = select_far_field(CurvatureCase::NegativeSlice { c: 1.0 }, kappa).unwrap();
        let m = CollarMetric::new(Profile::Closed(far), static_slice(-1.0), 0.0);
        let g = GeodesicState::new(&m, 1.0, &[0.0, 0.0], 1.0, &[1.0, 0.0]).unwrap();
        let run = jacobi_evolve(&m, &g, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2), 1.0, &OdeOptions::default())
            .unwrap();
        for st in &run.states {
            let s = st.s;
            assert!((st.mu - kappa * (kappa * s).tanh()).abs() <= 1e-6 * kappa, "s={s}");
        }
    }

    #[test]
    fn trace_localizes_blowdown_and_turning_point() {
        let kappa = 10.0;
        let far = select_far_field(CurvatureCase::NegativeSlice { c: 1.0 }, kappa).unwrap();
        let m = CollarMetric::new(Profile::Closed(far), static_slice(-1.0), 0.0);
        let g = GeodesicState::from_angle(&m, 1.0, &[0.1, 0.0], 2.5, &[0.0, 1.0]).unwrap();
        let jd0 = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0 * kappa, 0.0]));
        let run = jacobi_trace(&m, &g, &DMatrix::identity(2, 2), &jd0, 1.0, &OdeOptions::default()).unwrap();
        let kinds: Vec<_> = run.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [TraceEventKind::Blowdown, TraceEventKind::TurningPoint]);
        let s_star = (1.0f64 / 3.0).atanh() / kappa;
        assert!((run.events[0].state.s - s_star).abs() <= 1e-8);
        let turn = &run.events[1].state;
        assert!(turn.tdot.abs() < 1e-9);
        assert!((m.total_warp(turn.t).unwrap().0 - g.l).abs() <= 1e-9 * g.l);
    }

    #[test]
    fn trace_stops_at_the_inner_boundary() {
        let p = build_profile(CurvatureCase::FlatSlice, 5.0).unwrap();
        let m = CollarMetric::new(Profile::Collar(p), static_slice(0.0), 0.0);
        let g = GeodesicState::new(&m, 0.5, &[0.0, 0.0], -1.0, &[1.0, 0.0]).unwrap();
        let run = jacobi_trace(&m, &g, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2), 3.0, &OdeOptions::default())
            .unwrap();
        let last = run.events.last().unwrap();
        assert_eq!(last.kind, TraceEventKind::Boundary);
        assert!((last.state.s - 0.5).abs() < 1e-12);
        assert_eq!(run.states.last().unwrap().s, last.state.s);
    }
}

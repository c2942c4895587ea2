//! Dormand–Prince 5(4) with step-size control and event location.

use crate::error::{CollarError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, h_min: 1e-14, h_max: 0.05, max_steps: 2_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step. Returns the fifth-order solution and the
/// difference to the embedded fourth-order one.
pub fn dopri5_step<F>(f: &F, s: f64, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(s, y, &mut k[0]);
    for stage in 1..7 {
        let (done, rest) = k.split_at_mut(stage);
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in done.iter().enumerate() {
                acc += h * A[stage][j] * kj[i];
            }
            tmp[i] = acc;
        }
        f(s + C[stage] * h, &tmp, &mut rest[0]);
    }
    let mut y5 = vec![0.0; n];
    let mut err = vec![0.0; n];
    for i in 0..n {
        let mut a5 = 0.0;
        let mut a4 = 0.0;
        for j in 0..7 {
            a5 += B5[j] * k[j][i];
            a4 += B4[j] * k[j][i];
        }
        y5[i] = y[i] + h * a5;
        err[i] = h * (a5 - a4);
    }
    (y5, err)
}

/// Per-component magnitude floors for the relative tolerance, computed from
/// the current state. Components of a block that is accurate only as a whole
/// (a matrix whose small entries are roundoff) get the block's size as floor.
pub type ErrorFloor<'a> = &'a dyn Fn(&[f64], &mut [f64]);

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], o: &OdeOptions, floor: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    let s: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .zip(floor)
        .map(|(((a, b), e), fl)| {
            let sc = o.atol + o.rtol * a.abs().max(b.abs()).max(*fl);
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Accepted steps of an integration, including the initial point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.s.last().expect("nonempty"), self.y.last().expect("nonempty"))
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    End,
    /// The event function with this index changed sign.
    Event(usize),
}

/// Adaptive step attempt: `Ok((y_new, h_used, h_next))` or `StepRejected`
/// when the controller would go below `h_min`.
pub fn adaptive_step<F>(f: &F, s: f64, y: &[f64], h: f64, o: &OdeOptions) -> Result<(Vec<f64>, f64, f64)>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    adaptive_step_floored(f, s, y, h, o, &vec![0.0; y.len()])
}

fn adaptive_step_floored<F>(f: &F, s: f64, y: &[f64], h: f64, o: &OdeOptions, floor: &[f64]) -> Result<(Vec<f64>, f64, f64)>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    let mut h = h.min(o.h_max);
    loop {
        let (y_new, err) = dopri5_step(f, s, y, h);
        let e = error_norm(y, &y_new, &err, o, floor);
        let ok = e.is_finite() && e <= 1.0;
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        if ok {
            return Ok((y_new, h, (h * factor).min(o.h_max)));
        }
        let next = if e.is_finite() { h * factor.min(0.9) } else { h * 0.25 };
        if next < o.h_min {
            return Err(CollarError::StepRejected { suggested: next });
        }
        h = next;
    }
}

/// Integrates `y' = f(s, y)` from `s0` to `s_end` (forward), stopping early
/// at the first sign change of any event function. Event times are located
/// by bisection on single steps to within `1e-13` in `s`.
pub fn integrate<F>(
    f: &F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    o: &OdeOptions,
    events: &[&dyn Fn(f64, &[f64]) -> f64],
) -> Result<(Trajectory, Stop)>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    integrate_floored(f, s0, y0, s_end, o, events, None)
}

/// [`integrate`] with optional per-component tolerance floors.
pub fn integrate_floored<F>(
    f: &F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    o: &OdeOptions,
    events: &[&dyn Fn(f64, &[f64]) -> f64],
    floor: Option<ErrorFloor>,
) -> Result<(Trajectory, Stop)>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    let mut fl = vec![0.0; y0.len()];
    let mut traj = Trajectory { s: vec![s0], y: vec![y0.to_vec()] };
    if s_end <= s0 {
        return Ok((traj, Stop::End));
    }
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut h = o.h_init.min(s_end - s0);
    let mut ev_prev: Vec<f64> = events.iter().map(|e| e(s, &y)).collect();
    for _ in 0..o.max_steps {
        let last = s_end - s <= h;
        let try_h = if last { s_end - s } else { h };
        if let Some(g) = floor {
            g(&y, &mut fl);
        }
        let (y_new, used, next) = adaptive_step_floored(f, s, &y, try_h, o, &fl)?;
        let s_new = if last && used == try_h { s_end } else { s + used };
        // events
        let mut fired: Option<(usize, f64)> = None;
        for (i, e) in events.iter().enumerate() {
            let v = e(s_new, &y_new);
            if ev_prev[i] != 0.0 && v.signum() != ev_prev[i].signum() {
                let (mut lo, mut hi) = (0.0, used);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hi - lo <= 1e-13 * (1.0 + s.abs()) {
                        break;
                    }
                    let (ym, _) = dopri5_step(f, s, &y, mid);
                    if e(s + mid, &ym).signum() == ev_prev[i].signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if fired.is_none_or(|(_, best)| hi < best) {
                    fired = Some((i, hi));
                }
            }
        }
        if let Some((i, dh)) = fired {
            let (ye, _) = dopri5_step(f, s, &y, dh);
            traj.s.push(s + dh);
            traj.y.push(ye);
            return Ok((traj, Stop::Event(i)));
        }
        for (i, e) in events.iter().enumerate() {
            ev_prev[i] = e(s_new, &y_new);
        }
        s = s_new;
        y = y_new;
        traj.s.push(s);
        traj.y.push(y.clone());
        if s >= s_end {
            return Ok((traj, Stop::End));
        }
        h = next;
    }
    Err(CollarError::StepRejected { suggested: h })
}

/// Like [`integrate`], but restarts the integrator whenever a `breaks`
/// function changes sign, so no step straddles a point where the right-hand
/// side loses smoothness. Only `events` stop the integration.
pub fn integrate_with_breaks<F>(
    f: &F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    o: &OdeOptions,
    events: &[&dyn Fn(f64, &[f64]) -> f64],
    breaks: &[&dyn Fn(f64, &[f64]) -> f64],
    floor: Option<ErrorFloor>,
) -> Result<(Trajectory, Stop)>
where
    F: Fn(f64, &[f64], &mut [f64]) + ?Sized,
{
    let mut all: Vec<&dyn Fn(f64, &[f64]) -> f64> = events.to_vec();
    all.extend_from_slice(breaks);
    let mut traj = Trajectory { s: vec![s0], y: vec![y0.to_vec()] };
    let (mut s, mut y) = (s0, y0.to_vec());
    loop {
        let (tr, stop) = integrate_floored(f, s, &y, s_end, o, &all, floor)?;
        traj.s.extend_from_slice(&tr.s[1..]);
        traj.y.extend_from_slice(&tr.y[1..]);
        let (se, ye) = tr.last();
        (s, y) = (se, ye.to_vec());
        match stop {
            Stop::Event(i) if i >= events.len() => continue,
            other => return Ok((traj, other)),
        }
    }
}

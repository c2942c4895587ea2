//! Scalar Riccati equation `u' = -K(s) - u²` with blowdown location.
//!
//! Near a pole the solution is continued through `w = 1/u`, which obeys
//! `w' = K w² + 1` and crosses zero transversally at the blowdown time.

use crate::error::Result;
use crate::ode::{integrate, OdeOptions, Stop};

/// `|u|` above which the solution is treated as blown down.
pub const BLOWDOWN_THRESHOLD: f64 = 1e6;
const SWITCH: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiRun {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    /// First time `u → -∞`, if any.
    pub blowdown: Option<f64>,
}

impl RiccatiRun {
    pub fn final_value(&self) -> f64 {
        *self.u.last().expect("nonempty")
    }

    /// Linear interpolation of `u` at `s` (before any blowdown).
    pub fn value_at(&self, s: f64) -> f64 {
        match self.s.iter().position(|&x| x >= s) {
            Some(0) => self.u[0],
            Some(i) => {
                let w = (s - self.s[i - 1]) / (self.s[i] - self.s[i - 1]);
                self.u[i - 1] + w * (self.u[i] - self.u[i - 1])
            }
            None => self.final_value(),
        }
    }
}

pub fn riccati_evolve(k: &dyn Fn(f64) -> f64, u0: f64, length: f64, opts: &OdeOptions) -> Result<RiccatiRun> {
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| dy[0] = -k(s) - y[0] * y[0];
    let below = |_: f64, y: &[f64]| y[0] + SWITCH;
    let (tr, stop) = integrate(&rhs, 0.0, &[u0], length, opts, &[&below])?;
    let mut run = RiccatiRun { s: tr.s.clone(), u: tr.y.iter().map(|y| y[0]).collect(), blowdown: None };
    if stop == Stop::End {
        return Ok(run);
    }
    let (s1, y1) = tr.last();
    let wrhs = |s: f64, y: &[f64], dy: &mut [f64]| dy[0] = k(s) * y[0] * y[0] + 1.0;
    let zero = |_: f64, y: &[f64]| y[0];
    let (wt, wstop) = integrate(&wrhs, s1, &[1.0 / y1[0]], length, opts, &[&zero])?;
    for (s, w) in wt.s.iter().zip(&wt.y).skip(1) {
        if w[0] != 0.0 && (1.0 / w[0]).abs() <= BLOWDOWN_THRESHOLD {
            run.s.push(*s);
            run.u.push(1.0 / w[0]);
        }
    }
    match wstop {
        Stop::Event(_) => {
            let (s_star, _) = wt.last();
            run.blowdown = Some(s_star);
        }
        Stop::End => {
            // recovered from a large negative dip without a pole
            let (s_end, w) = wt.last();
            if run.s.last() != Some(&s_end) {
                run.s.push(s_end);
                run.u.push(1.0 / w[0]);
            }
        }
    }
    Ok(run)
}

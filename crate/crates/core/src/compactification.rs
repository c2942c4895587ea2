//! Conformally compact normal form of the far field.
//!
//! With `y = e^{-κt}` the frozen far field `dt² + f(t)² · scale · g'` becomes
//! `(dy² + m(y) g') / (κ² y²)` with `m(y) = κ² y² f(-ln y / κ)² · scale`.

use crate::curvature::CollarMetric;
use crate::error::{CollarError, Result};
use crate::profile::{CurvatureCase, FarField};
use crate::report::{Check, VerificationReport, Witness};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactifiedForm {
    pub far: FarField,
    /// `g_{t≥t_freeze} = scale · g'`.
    pub scale: f64,
    /// First `t` at which the metric equals the frozen far field.
    pub t_freeze: f64,
}

pub fn compactify(m: &CollarMetric) -> Result<CompactifiedForm> {
    let (kappa, case) = match (m.profile.kappa(), m.profile.case()) {
        (Some(k), Some(c)) => (k, c),
        _ => return Err(CollarError::Unsupported("compactification needs a far-field profile".into())),
    };
    let profile_start = m.profile.t0().unwrap_or(0.0);
    let (scale, slice_freeze) = match &m.slice {
        crate::slice::SliceFamily::ScaledConstCurv { warp, .. } => {
            match (m.slice.frozen_scale(), warp.freeze_time()) {
                (Some(s), Some(tf)) => (s, tf),
                _ => return Err(CollarError::NotFrozen { t: f64::INFINITY }),
            }
        }
        torus => {
            if !torus.is_frozen_at(f64::INFINITY) {
                return Err(CollarError::NotFrozen { t: f64::INFINITY });
            }
            (1.0, f64::NEG_INFINITY)
        }
    };
    Ok(CompactifiedForm {
        far: FarField { case, kappa },
        scale,
        t_freeze: profile_start.max(slice_freeze).max(0.0),
    })
}

impl CompactifiedForm {
    pub fn kappa(&self) -> f64 {
        self.far.kappa
    }

    /// `y₁ = e^{-κ t_freeze}`: the normal form holds on `(0, y₁]`.
    pub fn y_max(&self) -> f64 {
        (-self.kappa() * self.t_freeze).exp()
    }

    pub fn y_of_t(&self, t: f64) -> f64 {
        (-self.kappa() * t).exp()
    }

    pub fn t_of_y(&self, y: f64) -> f64 {
        -y.ln() / self.kappa()
    }

    /// `m(y)` from the far-field profile.
    pub fn m(&self, y: f64) -> f64 {
        let k = self.kappa();
        let (f, _, _) = self.far.eval(self.t_of_y(y));
        k * k * y * y * f * f * self.scale
    }

    /// `m(y)` as a polynomial in `y`, valid down to `y = 0`.
    pub fn m_closed_form(&self, y: f64) -> f64 {
        let y2 = y * y;
        let base = match self.far.case {
            CurvatureCase::NegativeSlice { c } => c * c * (1.0 + y2).powi(2) / 4.0,
            CurvatureCase::FlatSlice => self.kappa().powi(2),
            CurvatureCase::NonnegativeSlice { c } => c * c * (1.0 - y2).powi(2) / 4.0,
        };
        base * self.scale
    }

    /// Largest relative mismatch between the collar metric and the normal
    /// form at `n` points of `[t_freeze, t_freeze + 3/κ]`, comparing the `dt²`
    /// coefficient (after `dy = -κ y dt`) and the slice coefficient.
    pub fn metric_roundtrip_error(&self, m: &CollarMetric, x: &[f64], n: usize) -> f64 {
        let k = self.kappa();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let t = self.t_freeze + 3.0 / k * i as f64 / (n - 1).max(1) as f64;
            let y = self.y_of_t(t);
            let dydt = -k * y;
            let g_tt = dydt * dydt / (k * k * y * y);
            let (f, _, _) = m.profile.eval(t);
            let sigma = m.slice.conformal_coefficient(t, x);
            // σ = scale · σ' with σ' the conformal factor of g'
            let collar_slice = f * f * sigma;
            let normal_slice = self.m(y) / (k * k * y * y) * sigma / self.scale;
            worst = worst
                .max((g_tt - 1.0).abs())
                .max((normal_slice - collar_slice).abs() / collar_slice.abs());
        }
        worst
    }

    /// `(y, m)` samples on `(0, y₁]`.
    pub fn m_csv(&self, n: usize) -> String {
        let mut out = String::from("y,m\n");
        let y1 = self.y_max();
        for i in 1..=n {
            let y = y1 * i as f64 / n as f64;
            out.push_str(&format!("{:e},{:e}\n", y, self.m(y)));
        }
        out
    }
}

/// Derivatives at 0 of the degree-`k` interpolant through `(j h, m(j h))`,
/// `j = 1..=k+1`.
fn derivatives_at_zero(m: &dyn Fn(f64) -> f64, h: f64, k: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (1..=k + 1).map(|j| j as f64 * h).collect();
    let vals: Vec<f64> = nodes.iter().map(|&y| m(y)).collect();
    // Newton divided differences, then expand to monomial coefficients
    let mut coef = vals.clone();
    for level in 1..nodes.len() {
        for i in (level..nodes.len()).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (nodes[i] - nodes[i - level]);
        }
    }
    let mut poly = vec![0.0; nodes.len()];
    for i in (0..nodes.len()).rev() {
        // poly = poly * (y - nodes[i]) + coef[i]
        let mut next = vec![0.0; nodes.len()];
        for (p, &c) in poly.iter().enumerate() {
            if p + 1 < next.len() {
                next[p + 1] += c;
            }
            next[p] -= c * nodes[i];
        }
        next[0] += coef[i];
        poly = next;
    }
    let mut fact = 1.0;
    poly.iter()
        .enumerate()
        .map(|(p, c)| {
            if p > 0 {
                fact *= p as f64;
            }
            c * fact
        })
        .collect()
}

/// Estimates of `m^{(p)}(0)` for `p = 0..=order`: one-sided interpolation
/// at step `h` and `h/2`, combined by Richardson extrapolation.
pub fn boundary_derivatives(cf: &CompactifiedForm, order: usize, h: f64) -> Vec<f64> {
    let k = 5;
    let m = |y: f64| cf.m(y);
    let coarse = derivatives_at_zero(&m, h, k);
    let fine = derivatives_at_zero(&m, 0.5 * h, k);
    (0..=order)
        .map(|p| {
            let gain = 2f64.powi((k + 1 - p) as i32);
            fine[p] + (fine[p] - coarse[p]) / (gain - 1.0)
        })
        .collect()
}

/// Slope of `log |m(y) - m(0)|` against `log y` over `[1e-4, 1e-2]`; `None`
/// when `m` is constant to roundoff.
pub fn even_exponent(cf: &CompactifiedForm, m0: f64) -> Option<f64> {
    let n = 25;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let y = 10f64.powf(-4.0 + 2.0 * i as f64 / (n - 1) as f64);
            (y, (cf.m(y) - m0).abs())
        })
        .collect();
    if pts.iter().all(|&(_, d)| d <= 1e-13 * m0.abs().max(1.0)) {
        return None;
    }
    let (sx, sy, sxx, sxy) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(y, d)| {
        let (lx, ly) = (y.ln(), d.ln());
        (acc.0 + lx, acc.1 + ly, acc.2 + lx * lx, acc.3 + lx * ly)
    });
    let nf = n as f64;
    Some((nf * sxy - sx * sy) / (nf * sxx - sx * sx))
}

/// Checks that `m` is even in `y` at the boundary: odd derivatives up to
/// `order` (at most 3) vanish to `1e-6 · m(0)`, and `m - m(0) = O(y²)`.
pub fn verify_even_in_y(cf: &CompactifiedForm, order: usize) -> Result<VerificationReport> {
    if order > 3 {
        return Err(CollarError::InvalidParameter("evenness is checked up to order 3".into()));
    }
    let d = boundary_derivatives(cf, order, 0.05);
    let m0 = d[0];
    let tol = 1e-6 * m0.abs();
    let mut checks = vec![Check::new(
        "boundary_value_positive",
        m0 > 0.0,
        Witness::new(f64::INFINITY, &[], "m(0)", 0.0, m0, 0.0),
    )];
    for p in (1..=order).step_by(2) {
        checks.push(Check::new(
            format!("odd_derivative_{p}"),
            d[p].abs() <= tol,
            Witness::new(f64::INFINITY, &[], format!("|m^({p})(0)|"), 0.0, d[p].abs(), tol),
        ));
    }
    let exponent = even_exponent(cf, m0);
    checks.push(match exponent {
        Some(e) => Check::new(
            "even_exponent",
            (1.9..=2.1).contains(&e),
            Witness::new(f64::NAN, &[], "loglog_slope", 0.0, e, 2.0),
        ),
        None => Check::new("even_exponent", true, Witness::new(f64::NAN, &[], "constant_m", 0.0, f64::NAN, 2.0)),
    });
    Ok(VerificationReport::new(checks))
}

//! The warping profile `f(t)` of the collar metric `dt² + f(t)² g_t`.
//!
//! `f` is identically 1 on `t <= 0`, equals the far-field model `f_cc` on
//! `[t0, ∞)`, and on `[0, t0]` is a convex C² bridge. The bridge is stored as
//! a piecewise polynomial whose second derivative is a nonnegative density:
//! a biweight bump (the mollified kink of `max(1, tangent line)`) plus a
//! cubic ramp into `f_cc''(t0)` just before `t0`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, CollarError, Result};
use crate::poly::PiecewisePoly;

/// Sign class of the frozen slice curvature, with its scale `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CurvatureCase {
    /// `inf K_int = -C² < 0`
    NegativeSlice { c: f64 },
    /// `K_int = 0`
    FlatSlice,
    /// `K_int >= 0`, `sup K_int = C² > 0`
    NonnegativeSlice { c: f64 },
}

impl CurvatureCase {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CurvatureCase::NegativeSlice { c } | CurvatureCase::NonnegativeSlice { c } => {
                ensure_positive("C", c)
            }
            CurvatureCase::FlatSlice => Ok(()),
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            CurvatureCase::NegativeSlice { c } | CurvatureCase::NonnegativeSlice { c } => c,
            CurvatureCase::FlatSlice => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CurvatureCase::NegativeSlice { .. } => "negative",
            CurvatureCase::FlatSlice => "flat",
            CurvatureCase::NonnegativeSlice { .. } => "nonnegative",
        }
    }

    /// The case matching a constant slice curvature `k_int`.
    pub fn from_slice_curvature(k_int: f64) -> Self {
        if k_int < 0.0 {
            CurvatureCase::NegativeSlice { c: (-k_int).sqrt() }
        } else if k_int == 0.0 {
            CurvatureCase::FlatSlice
        } else {
            CurvatureCase::NonnegativeSlice { c: k_int.sqrt() }
        }
    }
}

/// Closed-form far-field profile `f_cc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub case: CurvatureCase,
    pub kappa: f64,
}

/// Far-field profile for the given case and curvature scale `kappa`.
pub fn select_far_field(case: CurvatureCase, kappa: f64) -> Result<FarField> {
    ensure_positive("kappa", kappa)?;
    case.validate()?;
    Ok(FarField { case, kappa })
}

impl FarField {
    /// `(f_cc, f_cc', f_cc'')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let k = self.kappa;
        match self.case {
            CurvatureCase::NegativeSlice { c } => {
                let (ch, sh) = ((k * t).cosh(), (k * t).sinh());
                (c / k * ch, c * sh, c * k * ch)
            }
            CurvatureCase::FlatSlice => {
                let e = (k * t).exp();
                (e, k * e, k * k * e)
            }
            CurvatureCase::NonnegativeSlice { c } => {
                let (ch, sh) = ((k * t).cosh(), (k * t).sinh());
                (c / k * sh, c * ch, c * k * sh)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `1 - (f_cc(t0) - f_cc'(t0) t0)`: height of `(0, 1)` above the tangent at `t0`.
    pub slack: f64,
    /// `f_cc(t0) - 1`: a convex bridge with `f'(0) = 0` cannot descend below 1.
    pub level_margin: f64,
}

impl Feasibility {
    pub fn tangent_ok(&self) -> bool {
        self.slack > 0.0
    }
}

pub fn check_bridge_feasibility(case: CurvatureCase, kappa: f64, t0: f64) -> Result<Feasibility> {
    ensure_positive("t0", t0)?;
    let far = select_far_field(case, kappa)?;
    let (f, df, _) = far.eval(t0);
    let slack = 1.0 - (f - df * t0);
    let level_margin = f - 1.0;
    Ok(Feasibility {
        feasible: slack > 0.0 && level_margin > 0.0,
        slack,
        level_margin,
    })
}

pub fn default_t0(kappa: f64) -> f64 {
    1.0 / kappa.sqrt()
}

/// Which feasibility predicate a kappa scan bisects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityCondition {
    /// Only the tangent condition `f_cc(t0) - f_cc'(t0) t0 < 1`.
    Tangent,
    /// Tangent condition and `f_cc(t0) > 1`; what the bridge builder needs.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaScan {
    pub kappa_min: f64,
    /// True when the condition already holds at the lower end of the scan,
    /// i.e. no failing kappa was found in range.
    pub holds_on_whole_range: bool,
    /// Largest scanned kappa where the condition fails (NaN if none).
    pub last_failure: f64,
}

fn condition_holds(case: CurvatureCase, kappa: f64, cond: FeasibilityCondition) -> bool {
    let fz = check_bridge_feasibility(case, kappa, default_t0(kappa)).expect("validated inputs");
    match cond {
        FeasibilityCondition::Tangent => fz.tangent_ok(),
        FeasibilityCondition::Full => fz.feasible,
    }
}

/// Smallest `kappa_min` in `[lo, hi]` such that the condition holds (at
/// `t0 = 1/sqrt(kappa)`) for every scanned kappa above it. A geometric grid
/// of `n` points locates the last failure, then bisection refines it.
pub fn scan_kappa_min(
    case: CurvatureCase,
    lo: f64,
    hi: f64,
    n: usize,
    cond: FeasibilityCondition,
) -> Result<KappaScan> {
    ensure_positive("lo", lo)?;
    case.validate()?;
    if !(hi > lo) || n < 2 {
        return Err(CollarError::InvalidParameter("scan needs hi > lo and n >= 2".into()));
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    let ok: Vec<bool> = grid.iter().map(|&k| condition_holds(case, k, cond)).collect();
    let last_fail = ok.iter().rposition(|b| !b);
    match last_fail {
        None => Ok(KappaScan { kappa_min: lo, holds_on_whole_range: true, last_failure: f64::NAN }),
        Some(i) if i + 1 == n => Err(CollarError::InfeasibleBridge {
            kappa: hi,
            slack: f64::NAN,
            level_margin: f64::NAN,
            hint: None,
        }),
        Some(i) => {
            let (mut bad, mut good) = (grid[i], grid[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (bad + good);
                if mid <= bad || mid >= good {
                    break;
                }
                if condition_holds(case, mid, cond) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            Ok(KappaScan { kappa_min: good, holds_on_whole_range: false, last_failure: bad })
        }
    }
}

/// The collar profile: flat, bridge, far field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFunction {
    pub case: CurvatureCase,
    pub kappa: f64,
    pub t0: f64,
    /// `f` on `[0, t0]`.
    pub bridge: PiecewisePoly,
}

fn biweight_density(mass: f64, rho: f64) -> Vec<f64> {
    // mass * 15/(16 rho) * (1 - (u/rho)^2)^2 in v = u + rho
    let s = mass * 15.0 / (16.0 * rho);
    vec![0.0, 0.0, 4.0 * s / (rho * rho), -4.0 * s / rho.powi(3), s / rho.powi(4)]
}

fn ramp_density(height: f64, delta: f64) -> Vec<f64> {
    // height * (3x^2 - 2x^3), x = v / delta
    vec![0.0, 0.0, 3.0 * height / (delta * delta), -2.0 * height / delta.powi(3)]
}

/// Builds the profile with `t0 = 1/sqrt(kappa)`.
pub fn build_profile(case: CurvatureCase, kappa: f64) -> Result<ProfileFunction> {
    build_profile_with_t0(case, kappa, default_t0(kappa))
}

/// Builds the profile at `t0 = 1/sqrt(kappa)` when that bridge is feasible;
/// otherwise at the smallest feasible `t0` in `[1/sqrt(kappa), max(1, 1/sqrt(kappa))]`
/// with a 5% margin. Both feasibility conditions improve monotonically in `t0`.
pub fn build_profile_adaptive(case: CurvatureCase, kappa: f64) -> Result<ProfileFunction> {
    let t_default = default_t0(kappa);
    let feasible = |t0: f64| check_bridge_feasibility(case, kappa, t0).map(|f| f.feasible);
    if feasible(t_default)? {
        return build_profile_with_t0(case, kappa, t_default);
    }
    let t_cap = t_default.max(1.0);
    if t_cap <= t_default || !feasible(t_cap)? {
        return build_profile_with_t0(case, kappa, t_default);
    }
    let (mut lo, mut hi) = (t_default, t_cap);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    build_profile_with_t0(case, kappa, (1.05 * hi).min(t_cap))
}

pub fn build_profile_with_t0(case: CurvatureCase, kappa: f64, t0: f64) -> Result<ProfileFunction> {
    let fz = check_bridge_feasibility(case, kappa, t0)?;
    if !fz.feasible {
        let hint = scan_kappa_min(case, 1e-3, 1e4, 400, FeasibilityCondition::Full)
            .ok()
            .map(|s| s.kappa_min);
        return Err(CollarError::InfeasibleBridge {
            kappa,
            slack: fz.slack,
            level_margin: fz.level_margin,
            hint,
        });
    }
    let far = FarField { case, kappa };
    let (f1, s1, c2) = far.eval(t0);
    // f'' = density p on [0, t0]: mass s1 = f_cc'(t0), first moment about t0 = f_cc(t0) - 1
    let moment = f1 - 1.0;
    let t_kink = t0 - moment / s1;
    let mut rho = 0.25 * t_kink.min(t0 - t_kink);
    let mut delta = (0.5 * rho).min(s1 / (4.0 * c2));
    for _ in 0..64 {
        let mass = s1 - 0.5 * c2 * delta;
        let center = t0 - (moment - 0.15 * c2 * delta * delta) / mass;
        let fits = mass > 0.0 && center - rho >= 0.0 && center + rho <= t0 - delta;
        if fits {
            let knots = vec![0.0, center - rho, center + rho, t0 - delta, t0];
            let density = PiecewisePoly::new(
                knots,
                vec![vec![0.0], biweight_density(mass, rho), vec![0.0], ramp_density(c2, delta)],
            );
            let bridge = density.integrate(0.0).integrate(1.0);
            return Ok(ProfileFunction { case, kappa, t0, bridge });
        }
        rho *= 0.5;
        delta *= 0.5;
    }
    Err(CollarError::InfeasibleBridge { kappa, slack: fz.slack, level_margin: fz.level_margin, hint: None })
}

impl ProfileFunction {
    pub fn far_field(&self) -> FarField {
        FarField { case: self.case, kappa: self.kappa }
    }

    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t <= 0.0 {
            (1.0, 0.0, 0.0)
        } else if t < self.t0 {
            self.bridge.eval3(t)
        } else {
            self.far_field().eval(t)
        }
    }

    /// Lower bound of `f'/f` on `[1/2, t_max]`, sampled on `n` points.
    pub fn convexity_constant(&self, t_max: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| 0.5 + (t_max - 0.5) * i as f64 / (n - 1).max(1) as f64)
            .map(|t| {
                let (f, df, _) = self.eval(t);
                df / f
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// A warping profile: either a constructed collar profile or a bare closed
/// form used on its whole domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Profile {
    Collar(ProfileFunction),
    Closed(FarField),
    Constant { value: f64 },
}

pub fn eval_profile(p: &Profile, t: f64) -> (f64, f64, f64) {
    p.eval(t)
}

impl Profile {
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match self {
            Profile::Collar(p) => p.eval(t),
            Profile::Closed(far) => far.eval(t),
            Profile::Constant { value } => (*value, 0.0, 0.0),
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self {
            Profile::Collar(p) => Some(p.kappa),
            Profile::Closed(far) => Some(far.kappa),
            Profile::Constant { .. } => None,
        }
    }

    pub fn t0(&self) -> Option<f64> {
        match self {
            Profile::Collar(p) => Some(p.t0),
            Profile::Closed(_) | Profile::Constant { .. } => None,
        }
    }

    pub fn case(&self) -> Option<CurvatureCase> {
        match self {
            Profile::Collar(p) => Some(p.case),
            Profile::Closed(far) => Some(far.case),
            Profile::Constant { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const NEG1: CurvatureCase = CurvatureCase::NegativeSlice { c: 1.0 };
    const POS1: CurvatureCase = CurvatureCase::NonnegativeSlice { c: 1.0 };

    /// Power series of sinh, independent of the libm implementation.
    fn sinh_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..40 {
            term *= x * x / ((2 * n) as f64 * (2 * n + 1) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn adaptive_t0_moves_only_when_needed() {
        let p = build_profile_adaptive(NEG1, 20.0).unwrap();
        assert_eq!(p.t0, default_t0(20.0));
        // hyperbolic slice at kappa = 3: default t0 misses f_cc(t0) > 1
        assert!(!check_bridge_feasibility(NEG1, 3.0, default_t0(3.0)).unwrap().feasible);
        let p = build_profile_adaptive(NEG1, 3.0).unwrap();
        assert!(p.t0 > default_t0(3.0) && p.t0 <= 1.0);
        let fz = check_bridge_feasibility(NEG1, 3.0, p.t0).unwrap();
        assert!(fz.feasible);
        let edge = check_bridge_feasibility(NEG1, 3.0, p.t0 / 1.05 * 0.999).unwrap();
        assert!(!edge.feasible);
        assert!(matches!(build_profile_adaptive(NEG1, 0.01), Err(CollarError::InfeasibleBridge { .. })));
    }

    #[test]
    fn far_field_values() {
        let flat = select_far_field(CurvatureCase::FlatSlice, 2.0).unwrap().eval(0.0);
        assert_eq!((flat.0, flat.1), (1.0, 2.0));
        let neg = select_far_field(NEG1, 1.0).unwrap().eval(0.0);
        assert_eq!((neg.0, neg.1), (1.0, 0.0));
        let pos = select_far_field(POS1, 2.0).unwrap().eval(1.0);
        assert_relative_eq!(pos.0, sinh_series(2.0) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(pos.0, 1.813_430_203_923_509, max_relative = 1e-12);
    }

    #[test]
    fn far_field_rejects_bad_parameters() {
        assert!(select_far_field(NEG1, 0.0).is_err());
        assert!(select_far_field(NEG1, -1.0).is_err());
        assert!(select_far_field(CurvatureCase::NegativeSlice { c: 0.0 }, 1.0).is_err());
        assert!(select_far_field(CurvatureCase::NonnegativeSlice { c: -2.0 }, 1.0).is_err());
    }

    #[test]
    fn feasibility_examples() {
        let a = check_bridge_feasibility(NEG1, 100.0, 0.1).unwrap();
        let expected = 1.0 - (10f64.cosh() / 100.0 - 10f64.sinh() * 0.1);
        assert_relative_eq!(a.slack, expected, max_relative = 1e-14);
        assert!(a.slack > 992.0 && a.feasible);

        for &k in &[1.0f64, 2.0, 10.0, 100.0, 1e4] {
            let s = k.sqrt();
            let fz = check_bridge_feasibility(CurvatureCase::FlatSlice, k, 1.0 / s).unwrap();
            assert_relative_eq!(fz.slack, 1.0 - s.exp() * (1.0 - s), max_relative = 1e-12);
            assert!(fz.feasible);
        }

        let c = check_bridge_feasibility(NEG1, 0.01, 10.0).unwrap();
        assert!(!c.feasible);
        assert!(c.slack < 0.0);
    }

    #[test]
    fn level_margin_blocks_tangent_only_kappa() {
        // cosh(2)/4 < 1: tangent condition holds but the bridge would have to descend
        let fz = check_bridge_feasibility(NEG1, 4.0, 0.5).unwrap();
        assert!(fz.tangent_ok());
        assert!(fz.level_margin < 0.0);
        assert!(!fz.feasible);
        assert!(matches!(build_profile(NEG1, 4.0), Err(CollarError::InfeasibleBridge { .. })));
    }

    #[test]
    fn flat_profile_examples() {
        let p = build_profile(CurvatureCase::FlatSlice, 4.0).unwrap();
        assert_eq!(p.eval(-0.5), (1.0, 0.0, 0.0));
        for &t in &[0.5, 0.75, 1.0, 2.0] {
            let (f, df, ddf) = p.eval(t);
            assert_eq!(f, (4.0 * t).exp());
            assert_eq!(df, 4.0 * (4.0 * t).exp());
            assert_eq!(ddf, 16.0 * (4.0 * t).exp());
        }
    }

    #[test]
    fn far_field_evaluation_through_profile() {
        let p = Profile::Closed(select_far_field(NEG1, 1.0).unwrap());
        let (f, df, ddf) = eval_profile(&p, 2.0);
        assert_eq!((f, df, ddf), (2f64.cosh(), 2f64.sinh(), 2f64.cosh()));
        let built = Profile::Collar(build_profile(NEG1, 20.0).unwrap());
        assert_eq!(eval_profile(&built, -1.0), (1.0, 0.0, 0.0));
    }

    fn check_profile_shape(p: &ProfileFunction) {
        let n = 10_000;
        let (lo, hi) = (-1.0, 3.0);
        let mut min_dd = f64::INFINITY;
        for i in 0..n {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let (f, df, ddf) = p.eval(t);
            min_dd = min_dd.min(ddf);
            assert!(f >= 1.0 - 1e-15, "f({t}) = {f}");
            assert!(df >= -1e-15, "f'({t}) = {df}");
        }
        assert!(min_dd >= -1e-10, "min f'' = {min_dd}");
        // C^2 at t0 and at 0
        let far = p.far_field().eval(p.t0);
        let left = p.bridge.eval3(p.t0);
        let scale = far.0.abs().max(1.0);
        assert!((left.0 - far.0).abs() <= 1e-12 * scale, "f jump {}", left.0 - far.0);
        assert!((left.1 - far.1).abs() <= 1e-11 * far.1.abs().max(1.0));
        assert!((left.2 - far.2).abs() <= 1e-10 * far.2.abs().max(1.0));
        let zero = p.bridge.eval3(0.0);
        assert_eq!(zero, (1.0, 0.0, 0.0));
    }

    #[test]
    fn built_profiles_are_convex_and_c2() {
        for case in [NEG1, CurvatureCase::FlatSlice, POS1] {
            for &k in &[10.0, 20.0, 50.0, 100.0, 400.0] {
                check_profile_shape(&build_profile(case, k).unwrap());
            }
        }
        // a small cross-section needs a larger kappa before f_cc(t0) > 1
        for &k in &[50.0, 100.0, 400.0] {
            check_profile_shape(&build_profile(CurvatureCase::NegativeSlice { c: 0.3 }, k).unwrap());
        }
    }

    #[test]
    fn convexity_constant_reported() {
        let p = build_profile(NEG1, 20.0).unwrap();
        let c = p.convexity_constant(3.0, 200);
        assert_relative_eq!(c, 20.0 * 10f64.tanh(), max_relative = 1e-12);
    }

    #[test]
    fn log_slope_increases_with_kappa() {
        for case in [NEG1, CurvatureCase::FlatSlice, POS1] {
            let kappas = [9.0, 16.0, 25.0, 50.0];
            for t in [1.0, 1.5, 2.5] {
                let slopes: Vec<f64> = kappas
                    .iter()
                    .map(|&k| {
                        let (f, df, _) = FarField { case, kappa: k }.eval(t);
                        df / f
                    })
                    .collect();
                assert!(slopes.windows(2).all(|w| w[1] > w[0]), "{case:?} {slopes:?}");
            }
        }
    }

    #[test]
    fn tangent_scan_brackets_the_boundary() {
        let scan = scan_kappa_min(NEG1, 0.05, 1e4, 300, FeasibilityCondition::Tangent).unwrap();
        assert!(!scan.holds_on_whole_range);
        let k = scan.kappa_min;
        assert!(check_bridge_feasibility(NEG1, k, default_t0(k)).unwrap().tangent_ok());
        let below = k * (1.0 - 1e-9);
        assert!(!check_bridge_feasibility(NEG1, below, default_t0(below)).unwrap().tangent_ok());
        // cosh(s)/s^2 - sinh(s)/s = 1 near s = 0.795
        assert!((k.sqrt() - 0.795).abs() < 0.01, "kappa_min = {k}");
    }

    #[test]
    fn full_scan_accounts_for_level_dip() {
        let scan = scan_kappa_min(NEG1, 0.05, 1e4, 400, FeasibilityCondition::Full).unwrap();
        assert!(scan.kappa_min > 6.0 && scan.kappa_min < 8.0, "{scan:?}");
        assert!(build_profile(NEG1, scan.kappa_min * (1.0 + 1e-9)).is_ok());
        let flat = scan_kappa_min(CurvatureCase::FlatSlice, 0.05, 1e4, 200, FeasibilityCondition::Full).unwrap();
        assert!(flat.holds_on_whole_range);
    }
}

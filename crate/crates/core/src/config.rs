//! Run configuration (TOML), shipped presets and the metric artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvature::{measure_interior_bound, CollarMetric, GridSpec};
use crate::dynamics::{SampleSpec, VerifierConfig};
use crate::error::{CollarError, Result};
use crate::profile::{build_profile_adaptive, build_profile_with_t0, CurvatureCase, Profile};
use crate::report::DEFAULT_SEED;
use crate::slice::{build_extension_schedule, ConformalPotential, PotentialTerm, SliceFamily, SliceWarp};

pub const PRESETS: [&str; 4] = ["hyperbolic-slice", "flat-torus", "sphere-slice", "oracle-torus"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WarpSpec {
    Constant { a: f64 },
    Exponential { a0: f64, rate: f64 },
    Schedule { a0: f64, a0_slope: f64, target_c: f64 },
}

impl Default for WarpSpec {
    fn default() -> Self {
        WarpSpec::Constant { a: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SliceSpec {
    /// `a(t)² g'` with `g'` of constant curvature `k`.
    ConstantCurvature {
        k: f64,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        warp: WarpSpec,
    },
    /// `e^{2φ} δ` on the flat 2-torus, `φ = Σ amp t^power sin(k1 x1 + k2 x2 + phase)`.
    ConformalTorus { terms: Vec<PotentialTerm> },
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollarSpec {
    pub kappa: f64,
    /// Curvature bound of the original metric; measured on the interior
    /// product when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// Overrides the automatic choice of `t0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSpec {
    pub q_m: f64,
    pub epsilon: f64,
    pub min_transit: f64,
    pub samples: usize,
    pub growth_samples: usize,
    pub max_entry_angle_deg: f64,
    pub excursion_min: f64,
    pub excursion_max: f64,
    pub max_crossings: usize,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        let v = VerifierConfig::default();
        let s = SampleSpec::default();
        DynamicsSpec {
            q_m: v.q_m,
            epsilon: v.epsilon,
            min_transit: v.min_transit,
            samples: s.samples,
            growth_samples: s.growth_samples,
            max_entry_angle_deg: s.max_entry_angle_deg,
            excursion_min: s.excursion_min,
            excursion_max: s.excursion_max,
            max_crossings: s.max_crossings,
        }
    }
}

impl DynamicsSpec {
    pub fn verifier(&self) -> VerifierConfig {
        VerifierConfig { q_m: self.q_m, epsilon: self.epsilon, min_transit: self.min_transit }
    }

    pub fn sampling(&self) -> SampleSpec {
        SampleSpec {
            samples: self.samples,
            growth_samples: self.growth_samples,
            max_entry_angle_deg: self.max_entry_angle_deg,
            excursion_min: self.excursion_min,
            excursion_max: self.excursion_max,
            max_crossings: self.max_crossings,
        }
    }
}

/// Initial data for `trace`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSpec {
    pub t: f64,
    /// Slice point; the chart origin when empty.
    pub x: Vec<f64>,
    /// Angle between the velocity and `∂_t`, in degrees.
    pub angle_deg: f64,
    /// Slice direction of the velocity; the first axis when empty.
    pub direction: Vec<f64>,
    pub length: f64,
    /// Diagonal of `J'(0)` in the parallel frame (`J(0) = I`); zeros when empty.
    pub jdot0: Vec<f64>,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec { t: 0.0, x: Vec::new(), angle_deg: 0.0, direction: Vec::new(), length: 2.0, jdot0: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; not part of the configuration echo.
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    pub slice: SliceSpec,
    pub collar: CollarSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub trace: TraceSpec,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn config_err(msg: impl Into<String>) -> CollarError {
    CollarError::Config(msg.into())
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let slice = match name {
        "hyperbolic-slice" => SliceSpec::ConstantCurvature { k: -1.0, dim: 2, warp: WarpSpec::default() },
        "flat-torus" => SliceSpec::ConstantCurvature { k: 0.0, dim: 2, warp: WarpSpec::default() },
        "sphere-slice" => SliceSpec::ConstantCurvature { k: 1.0, dim: 2, warp: WarpSpec::default() },
        "oracle-torus" => SliceSpec::ConformalTorus { terms: ConformalPotential::linear_sine(0.1).terms },
        other => {
            return Err(config_err(format!("unknown preset '{other}' (expected one of {})", PRESETS.join(", "))))
        }
    };
    let kappa = if name == "oracle-torus" { 3.0 } else { 20.0 };
    Ok(RunConfig {
        name: name.to_string(),
        seed: DEFAULT_SEED,
        out: default_out(),
        slice,
        collar: CollarSpec { kappa, c0: None, t0: None },
        grid: GridSpec::default(),
        dynamics: DynamicsSpec::default(),
        trace: TraceSpec::default(),
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The configuration as TOML, without the output directory.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.collar;
        if !(c.kappa.is_finite() && c.kappa > 0.0) {
            return Err(config_err(format!("kappa must be positive, got {}", c.kappa)));
        }
        if let Some(t0) = c.t0 {
            if !(t0.is_finite() && t0 > 0.0) {
                return Err(config_err("t0 override must be positive"));
            }
        }
        if let Some(c0) = c.c0 {
            if !c0.is_finite() {
                return Err(config_err("c0 must be finite"));
            }
        }
        let g = &self.grid;
        for (name, n) in [("grid.n_t", g.n_t), ("grid.n_slice", g.n_slice), ("grid.n_dir", g.n_dir)] {
            if n < 8 {
                return Err(config_err(format!("{name} must be at least 8, got {n}")));
            }
        }
        if !(g.t_max > g.t_min) {
            return Err(config_err("grid.t_max must exceed grid.t_min"));
        }
        if self.dynamics.samples == 0 {
            return Err(config_err("dynamics.samples must be at least 1"));
        }
        self.dynamics.verifier().validate().map_err(|e| config_err(e.to_string()))?;
        if !(self.trace.length > 0.0) {
            return Err(config_err("trace.length must be positive"));
        }
        self.slice_family()?.validate().map_err(|e| config_err(e.to_string()))
    }

    pub fn slice_family(&self) -> Result<SliceFamily> {
        Ok(match &self.slice {
            SliceSpec::ConstantCurvature { k, dim, warp } => {
                let warp = match *warp {
                    WarpSpec::Constant { a } => SliceWarp::Constant { a },
                    WarpSpec::Exponential { a0, rate } => SliceWarp::Exponential { a0, rate },
                    WarpSpec::Schedule { a0, a0_slope, target_c } => {
                        SliceWarp::Schedule(build_extension_schedule(a0, a0_slope, target_c)?)
                    }
                };
                SliceFamily::ScaledConstCurv { k: *k, warp, dim: *dim }
            }
            SliceSpec::ConformalTorus { terms } => {
                SliceFamily::ConformalTorus2D { phi: ConformalPotential { terms: terms.clone() } }
            }
        })
    }

    /// Far-field case from the frozen slice curvature; the conformal torus
    /// is treated as flat.
    pub fn curvature_case(&self) -> Result<CurvatureCase> {
        let slice = self.slice_family()?;
        match &slice {
            SliceFamily::ScaledConstCurv { .. } => slice
                .frozen_intrinsic_curvature()
                .map(CurvatureCase::from_slice_curvature)
                .ok_or_else(|| config_err("the slice family never freezes, so there is no far field")),
            SliceFamily::ConformalTorus2D { .. } => Ok(CurvatureCase::FlatSlice),
        }
    }

    pub fn build_metric(&self) -> Result<CollarMetric> {
        let slice = self.slice_family()?;
        let case = self.curvature_case()?;
        let kappa = self.collar.kappa;
        let profile = match self.collar.t0 {
            Some(t0) => build_profile_with_t0(case, kappa, t0)?,
            None => build_profile_adaptive(case, kappa)?,
        };
        let c0 = match self.collar.c0 {
            Some(c0) => c0,
            None => measure_interior_bound(&slice, &self.grid),
        };
        Ok(CollarMetric::new(Profile::Collar(profile), slice, c0))
    }
}

/// Serialized metric artifact.
pub fn metric_to_toml(m: &CollarMetric) -> String {
    toml::to_string(m).expect("metric serializes")
}

pub fn metric_from_toml(text: &str) -> Result<CollarMetric> {
    toml::from_str(text).map_err(|e| CollarError::Parse(e.to_string()))
}

pub fn save_metric(m: &CollarMetric, path: &Path) -> Result<()> {
    std::fs::write(path, metric_to_toml(m))?;
    Ok(())
}

pub fn load_metric(path: &Path) -> Result<CollarMetric> {
    metric_from_toml(&std::fs::read_to_string(path)?)
}

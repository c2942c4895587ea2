use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollarError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "infeasible bridge at kappa = {kappa}: tangent slack = {slack:.6e}, level margin = {level_margin:.6e}{}",
        hint.map(|k| format!(" (kappa_min ~ {k:.6})")).unwrap_or_default()
    )]
    InfeasibleBridge {
        kappa: f64,
        slack: f64,
        level_margin: f64,
        hint: Option<f64>,
    },

    #[error("insufficient headroom for the extension schedule: need sqrt(target_c) - a0 >= {required:.6e}, got {available:.6e}")]
    InsufficientHeadroom { required: f64, available: f64 },

    #[error("plane is not g_t-orthonormal (residual {residual:.3e})")]
    NonOrthonormalPlane { residual: f64 },

    #[error("finite-difference step {step:e} too small: {reason}")]
    StepTooSmall { step: f64, reason: String },

    #[error("integration step rejected; suggested step {suggested:e}")]
    StepRejected { suggested: f64 },

    #[error("slice family is not frozen at t = {t}")]
    NotFrozen { t: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("state outside domain: {0}")]
    OutsideDomain(String),

    #[error("config hash mismatch: {left} vs {right}")]
    ConfigMismatch { left: String, right: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CollarError>;

impl From<std::io::Error> for CollarError {
    fn from(e: std::io::Error) -> Self {
        CollarError::Io(e.to_string())
    }
}

pub(crate) fn ensure_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CollarError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

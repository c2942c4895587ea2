//! Negatively curved collar extensions of manifolds with boundary.

pub mod compactification;
pub mod cli;
pub mod config;
pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod ode;
pub mod poly;
pub mod profile;
pub mod report;
pub mod slice;

pub use error::{CollarError, Result};

//! De-noising of Gaussian process drifts by unbiased risk minimization.
//!
//! The observed signal is modelled as `X_t = u_t + X^u_t` on `[0, T]`, where
//! `u` is an unknown deterministic drift and `X^u` is centered Gaussian noise
//! with covariance `gamma(s, t)`. A shrinkage estimator pulls the observation
//! toward a parametric center `alpha(t)` inside a band of width
//! `lambda * sqrt(gamma(t, t))`; its quality is scored by an unbiased risk
//! statistic that can be evaluated from a single path through occupation and
//! local times of the standardized process `Z_t = (X_t - alpha(t)) / sqrt(gamma(t, t))`.
//! Minimizing that statistic over `(alpha, lambda)` recovers the drift
//! parameters and the optimal noise-removal threshold.
//!
//! Modules follow the pipeline: [`covariance`] (models and risk measures),
//! [`simulate`] (path generation), [`pathstats`] (occupation and local
//! times), [`shrinkage`] (threshold estimators), [`sure`] (risk
//! functionals and gradients), [`optimize`] (parameter search),
//! [`montecarlo`] (replication checks) and [`io`] (CSV surfaces).
//!
//! All numeric code is generic over the scalar type via [`scalar::Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod covariance;
pub mod io;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod pathstats;
pub mod scalar;
pub mod shrinkage;
pub mod simulate;
pub mod sure;

pub use covariance::{CovarianceModel, RiskMeasure};
pub use optimize::{OptimResult, SearchSpace};
pub use pathstats::{LocalTimeEstimate, StandardizedPath};
pub use scalar::Real;
pub use shrinkage::{ThresholdKind, ThresholdSpec};
pub use simulate::{DriftFunction, SamplePath, Scenario};
pub use sure::SureReport;

/// Errors shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A value failed construction-time validation.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure failed to converge or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// An operation received a model of the wrong kind.
    #[error("model mismatch: {0}")]
    Model(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed data in a text interchange file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

// Concrete double-precision aliases.
pub type CovarianceModel64 = covariance::CovarianceModel<f64>;
pub type RiskMeasure64 = covariance::RiskMeasure<f64>;
pub type DriftFunction64 = simulate::DriftFunction<f64>;
pub type SamplePath64 = simulate::SamplePath<f64>;
pub type StandardizedPath64 = pathstats::StandardizedPath<f64>;
pub type ThresholdSpec64 = shrinkage::ThresholdSpec<f64>;
pub type SureReport64 = sure::SureReport<f64>;
pub type SearchSpace64 = optimize::SearchSpace<f64>;
pub type OptimResult64 = optimize::OptimResult<f64>;
pub type McConfig64 = montecarlo::McConfig<f64>;
pub type McReport64 = montecarlo::McReport<f64>;

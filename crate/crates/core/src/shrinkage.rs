//! Threshold functions and the shrinkage estimators they induce.
//!
//! An estimator pulls the observation toward the center `alpha(t)` inside a
//! band whose width `lambda * sqrt(gamma(t, t))` scales with the local noise
//! level: soft thresholding shrinks by the distance capped at the band
//! width, hard thresholding replaces in-band values by the center outright.

use std::fmt;

use crate::covariance::CovarianceModel;
use crate::scalar::Real;
use crate::simulate::{DriftFunction, SamplePath};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    Soft,
    Hard,
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdKind::Soft => write!(f, "soft"),
            ThresholdKind::Hard => write!(f, "hard"),
        }
    }
}

/// Shrinkage family: kind, center parametrization and level. The band width
/// at time `t` is always `lambda * sqrt(gamma(t, t))`.
#[derive(Debug, Clone)]
pub struct ThresholdSpec<T> {
    pub kind: ThresholdKind,
    pub alpha: DriftFunction<T>,
    pub lambda: T,
}

impl<T: Real> ThresholdSpec<T> {
    pub fn new(kind: ThresholdKind, alpha: DriftFunction<T>, lambda: T) -> Result<Self> {
        if !(lambda >= T::zero() && lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { kind, alpha, lambda })
    }

    pub fn soft(alpha: DriftFunction<T>, lambda: T) -> Result<Self> {
        Self::new(ThresholdKind::Soft, alpha, lambda)
    }

    pub fn hard(alpha: DriftFunction<T>, lambda: T) -> Result<Self> {
        Self::new(ThresholdKind::Hard, alpha, lambda)
    }
}

/// Soft threshold `sign(y) (|y| - 1)^+`.
pub fn eta_soft<T: Real>(y: T) -> T {
    let shrunk = (y.abs() - T::one()).max(T::zero());
    if y < T::zero() {
        -shrunk
    } else {
        shrunk
    }
}

/// Hard threshold `y 1{|y| > 1}`, strict at the boundary.
pub fn eta_hard<T: Real>(y: T) -> T {
    if y.abs() > T::one() {
        y
    } else {
        T::zero()
    }
}

/// Pointwise shrinkage value at one sample.
///
/// The soft form is the direct min expression, which stays defined and
/// continuous as the band width goes to zero; the hard band is strict at its
/// boundary.
pub fn shrink_value<T: Real>(x: T, center: T, half_width: T, kind: ThresholdKind) -> T {
    let dev = x - center;
    match kind {
        ThresholdKind::Soft => {
            let pull = half_width.min(dev.abs());
            if dev < T::zero() {
                x + pull
            } else {
                x - pull
            }
        }
        ThresholdKind::Hard => {
            if dev.abs() < half_width {
                center
            } else {
                x
            }
        }
    }
}

/// Applies `X_t + xi_t(X_t)` pointwise over the path grid.
pub fn apply_estimator<T: Real>(
    path: &SamplePath<T>,
    spec: &ThresholdSpec<T>,
    model: &CovarianceModel<T>,
) -> Result<SamplePath<T>> {
    let denoised: Vec<T> = path
        .grid()
        .iter()
        .zip(path.values())
        .map(|(&t, &x)| {
            let half_width = spec.lambda * model.variance_at(t)?.sqrt();
            Ok(shrink_value(x, spec.alpha.eval(t), half_width, spec.kind))
        })
        .collect::<Result<_>>()?;
    path.with_values(denoised)
}

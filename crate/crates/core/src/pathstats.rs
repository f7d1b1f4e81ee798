//! Occupation and local times of the standardized process
//! `Z_t = (X_t - alpha(t)) / sqrt(gamma(t, t))` and of transformed level
//! processes, plus the occupation-density self-consistency diagnostics.
//!
//! Paths are treated as piecewise linear between grid samples. Indicator
//! integrals locate band crossings inside each cell instead of counting
//! whole intervals, which removes the O(dt) staircase bias that would
//! otherwise dominate the risk surface near its minimizer.

use rayon::prelude::*;

use crate::covariance::{trapezoid, CovarianceModel};
use crate::scalar::{lit, pairwise_sum, Real};
use crate::simulate::{DriftFunction, PathMeta, SamplePath};
use crate::{Error, Result};

/// The recentered, variance-normalized observation.
#[derive(Debug, Clone)]
pub struct StandardizedPath<T> {
    grid: Vec<T>,
    z: Vec<T>,
    pub alpha: DriftFunction<T>,
    pub source: PathMeta<T>,
}

impl<T: Real> StandardizedPath<T> {
    pub fn new(
        path: &SamplePath<T>,
        alpha: &DriftFunction<T>,
        model: &CovarianceModel<T>,
    ) -> Result<Self> {
        let z: Vec<T> = path
            .grid()
            .iter()
            .zip(path.values())
            .map(|(&t, &x)| {
                let g = model.variance_at(t)?;
                let z = (x - alpha.eval(t)) / g.sqrt();
                if !z.is_finite() {
                    return Err(Error::Numeric(format!(
                        "standardized value non-finite at t={t} (variance {g})"
                    )));
                }
                Ok(z)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: path.grid().to_vec(),
            z,
            alpha: alpha.clone(),
            source: path.meta.clone(),
        })
    }

    /// Builds directly from standardized values; used for synthetic paths.
    pub fn from_z_values(grid: Vec<T>, z: Vec<T>) -> Result<Self> {
        if grid.len() != z.len() || grid.is_empty() {
            return Err(Error::Validation("grid/z length mismatch or empty".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("grid must be strictly increasing".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("z values must be finite".into()));
        }
        Ok(Self {
            grid,
            z,
            alpha: DriftFunction::Zero,
            source: PathMeta {
                model: "synthetic".into(),
                seed: 0,
                drift: None,
                truth: None,
            },
        })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    pub fn horizon(&self) -> T {
        *self.grid.last().expect("nonempty")
    }
}

/// Local time estimate at one level, with the occupation value and the
/// finite-difference bandwidth it was computed from.
#[derive(Debug, Clone, Copy)]
pub struct LocalTimeEstimate<T> {
    pub level: T,
    pub occupation: T,
    pub local_time: T,
    pub bandwidth: T,
    /// Set when the bandwidth exceeds the level range of the data.
    pub warning: bool,
}

/// Parameter fractions `(u0, u1)` of the sub-interval of a cell on which the
/// linear interpolant between `z0` and `z1` lies in `[lo, hi]`.
#[inline]
fn cell_band_overlap<T: Real>(z0: T, z1: T, lo: T, hi: T) -> Option<(T, T)> {
    if z0 == z1 {
        return if z0 >= lo && z0 <= hi {
            Some((T::zero(), T::one()))
        } else {
            None
        };
    }
    let du = z1 - z0;
    let a = (lo - z0) / du;
    let b = (hi - z0) / du;
    let (mut u0, mut u1) = if a <= b { (a, b) } else { (b, a) };
    u0 = u0.max(T::zero());
    u1 = u1.min(T::one());
    if u1 > u0 {
        Some((u0, u1))
    } else {
        None
    }
}

/// Time the piecewise-linear path spends in `[-lam, lam]`.
pub(crate) fn band_time<T: Real>(grid: &[T], z: &[T], lam: T) -> T {
    let terms: Vec<T> = grid
        .windows(2)
        .zip(z.windows(2))
        .filter_map(|(t, zz)| {
            cell_band_overlap(zz[0], zz[1], -lam, lam)
                .map(|(u0, u1)| (t[1] - t[0]) * (u1 - u0))
        })
        .collect();
    pairwise_sum(&terms)
}

/// `integral of 1{|z(t)| <= lam} w(t) dt` with `w` linear on each cell.
pub(crate) fn weighted_band_time<T: Real>(grid: &[T], z: &[T], lam: T, w: &[T]) -> T {
    let two = lit::<T>(2.0);
    let terms: Vec<T> = grid
        .windows(2)
        .zip(z.windows(2))
        .zip(w.windows(2))
        .filter_map(|((t, zz), ww)| {
            cell_band_overlap(zz[0], zz[1], -lam, lam).map(|(u0, u1)| {
                let w0 = ww[0] + (ww[1] - ww[0]) * u0;
                let w1 = ww[0] + (ww[1] - ww[0]) * u1;
                (t[1] - t[0]) * (u1 - u0) * (w0 + w1) / two
            })
        })
        .collect();
    pairwise_sum(&terms)
}

/// `integral of z(t)^2 1{|z(t)| <= lam} dt`, exact for piecewise-linear `z`.
pub(crate) fn band_square_time<T: Real>(grid: &[T], z: &[T], lam: T) -> T {
    let three = lit::<T>(3.0);
    let terms: Vec<T> = grid
        .windows(2)
        .zip(z.windows(2))
        .filter_map(|(t, zz)| {
            cell_band_overlap(zz[0], zz[1], -lam, lam).map(|(u0, u1)| {
                let du = zz[1] - zz[0];
                let za = zz[0] + du * u0;
                let zb = zz[0] + du * u1;
                (t[1] - t[0]) * (u1 - u0) * (za * za + za * zb + zb * zb) / three
            })
        })
        .collect();
    pairwise_sum(&terms)
}

/// Time the piecewise-linear path `v` spends at or below `level`.
pub(crate) fn time_below<T: Real>(grid: &[T], v: &[T], level: T) -> T {
    let terms: Vec<T> = grid
        .windows(2)
        .zip(v.windows(2))
        .map(|(t, vv)| {
            let dt = t[1] - t[0];
            let (v0, v1) = (vv[0], vv[1]);
            let frac = if v0 == v1 {
                if v0 <= level {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                let u = ((level - v0) / (v1 - v0)).max(T::zero()).min(T::one());
                if v1 > v0 {
                    u
                } else {
                    T::one() - u
                }
            };
            dt * frac
        })
        .collect();
    pairwise_sum(&terms)
}

/// Occupation time of `|Z|` in `[0, lam]` up to the horizon.
pub fn occupation_time<T: Real>(path: &StandardizedPath<T>, lam: T) -> Result<T> {
    if lam < T::zero() || !lam.is_finite() {
        return Err(Error::Domain(format!("level must be >= 0, got {lam}")));
    }
    Ok(band_time(path.grid(), path.z(), lam))
}

/// Bandwidth rule `2 * std(z) * n^(-1/5)` used when the caller does not
/// supply one.
pub fn default_bandwidth<T: Real>(path: &StandardizedPath<T>) -> T {
    let sd = crate::scalar::sample_std(path.z());
    let n = lit::<T>(path.z().len() as f64);
    let rate = n.powf(-lit::<T>(0.2));
    (lit::<T>(2.0) * sd * rate).max(lit::<T>(1e-6))
}

/// Local time of `|Z|` at `lam`, as a central difference of the occupation
/// time. Below `bandwidth` the lower level clamps at zero and the divisor
/// shrinks to the actual level gap.
pub fn local_time<T: Real>(
    path: &StandardizedPath<T>,
    lam: T,
    bandwidth: T,
) -> Result<LocalTimeEstimate<T>> {
    if bandwidth.is_nan() || bandwidth <= T::zero() {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    if lam < T::zero() {
        return Err(Error::Domain(format!("level must be >= 0, got {lam}")));
    }
    let upper = lam + bandwidth;
    let lower = (lam - bandwidth).max(T::zero());
    let gap = upper - lower;
    let occ_hi = band_time(path.grid(), path.z(), upper);
    let occ_lo = band_time(path.grid(), path.z(), lower);
    let local = ((occ_hi - occ_lo) / gap).max(T::zero());
    let range = path.z().iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    Ok(LocalTimeEstimate {
        level: lam,
        occupation: band_time(path.grid(), path.z(), lam),
        local_time: local,
        bandwidth,
        warning: bandwidth > range,
    })
}

/// Local time at level zero of the transformed process
/// `v(t) = (x(t) - level(t)) * weight(t)`, estimated as the symmetric
/// difference of the one-sided occupation `measure{v <= a}` around zero.
///
/// Shifting the level process translates `v`, so the local time at a level
/// `c` of a path equals the local time at zero of the path minus `c`.
pub fn signed_local_time<T: Real>(
    path: &SamplePath<T>,
    level_fn: impl Fn(T) -> T,
    weight_fn: impl Fn(T) -> T,
    bandwidth: T,
) -> Result<T> {
    if bandwidth.is_nan() || bandwidth <= T::zero() {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let v: Vec<T> = path
        .grid()
        .iter()
        .zip(path.values())
        .map(|(&t, &x)| (x - level_fn(t)) * weight_fn(t))
        .collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(
            "transformed level process is not finite on the grid".into(),
        ));
    }
    let hi = time_below(path.grid(), &v, bandwidth);
    let lo = time_below(path.grid(), &v, -bandwidth);
    Ok(((hi - lo) / (lit::<T>(2.0) * bandwidth)).max(T::zero()))
}

/// Standardized increment variance
/// `Delta(s, t) = 2 - 2 gamma(s, t) / sqrt(gamma(s, s) gamma(t, t))`.
pub fn standardized_increment_variance<T: Real>(
    model: &CovarianceModel<T>,
    s: T,
    t: T,
) -> Result<T> {
    let g = model.gamma(s, t)?;
    let gs = model.variance_at(s)?;
    let gt = model.variance_at(t)?;
    Ok(lit::<T>(2.0) - lit::<T>(2.0) * g / (gs * gt).sqrt())
}

/// Diagnostic for the local-time existence condition: growth of the
/// inverse-increment-variance double integral as the excluded diagonal band
/// shrinks.
#[derive(Debug, Clone)]
pub struct BermanReport<T> {
    /// Excluded half-widths, largest first.
    pub deltas: Vec<T>,
    /// Double-integral estimate for each excluded band.
    pub estimates: Vec<T>,
    /// Ratio of the last two growth increments; near 1 for logarithmic
    /// growth, 2^p for a power-law divergence of order p.
    pub growth_ratio: T,
    pub likely_finite: bool,
}

/// Estimates `integral integral of 1 / Delta(s, t) ds dt` on a coarse grid,
/// excluding the diagonal band `|s - t| < delta` for three shrinking values
/// of `delta`, and flags whether the growth looks summable. Deterministic
/// centering does not enter the increment variance; `alpha` is only
/// evaluated to confirm it is finite on the domain.
pub fn check_berman<T: Real>(
    model: &CovarianceModel<T>,
    alpha: &DriftFunction<T>,
) -> Result<BermanReport<T>> {
    const K: usize = 96;
    let a = model.start();
    let b = model.horizon();
    let h = (b - a) / lit::<T>(K as f64);
    let mids: Vec<T> = (0..K)
        .map(|i| a + h * (lit::<T>(i as f64) + lit::<T>(0.5)))
        .collect();
    if mids.iter().any(|&t| !alpha.eval(t).is_finite()) {
        return Err(Error::Domain("alpha is not finite on the model domain".into()));
    }
    let deltas: Vec<T> = [8.0, 4.0, 2.0].iter().map(|&m| h * lit::<T>(m)).collect();
    let mut estimates = Vec::with_capacity(3);
    for &delta in &deltas {
        let mut sum = T::zero();
        let mut finite = true;
        'outer: for (i, &s) in mids.iter().enumerate() {
            for (j, &t) in mids.iter().enumerate() {
                if i == j || (s - t).abs() < delta {
                    continue;
                }
                let d = standardized_increment_variance(model, s, t)?;
                if d <= T::zero() {
                    finite = false;
                    break 'outer;
                }
                sum += h * h / d;
            }
        }
        estimates.push(if finite { sum } else { T::infinity() });
    }
    let g1 = estimates[1] - estimates[0];
    let g2 = estimates[2] - estimates[1];
    let growth_ratio = if g1 > T::zero() { g2 / g1 } else { T::one() };
    let likely_finite = estimates.iter().all(|e| e.is_finite())
        && growth_ratio <= lit::<T>(1.25);
    Ok(BermanReport {
        deltas,
        estimates,
        growth_ratio,
        likely_finite,
    })
}

/// Residual of the occupation-density identity
/// `integral f(|Z_t|) dt = integral f(a) local_time(a) da`, evaluated with
/// this module's own estimators over `level_grid`.
pub fn occupation_density_check<T: Real>(
    path: &StandardizedPath<T>,
    f: impl Fn(T) -> T + Sync,
    level_grid: &[T],
    bandwidth: T,
) -> Result<T> {
    if level_grid.len() < 2 {
        return Err(Error::Domain("level grid needs >= 2 points".into()));
    }
    let lhs_samples: Vec<T> = path.z().iter().map(|&z| f(z.abs())).collect();
    let lhs = trapezoid(path.grid(), &lhs_samples);
    let locals = level_sweep(path, level_grid, bandwidth)?;
    let rhs_samples: Vec<T> = level_grid
        .iter()
        .zip(&locals)
        .map(|(&a, est)| f(a) * est.local_time)
        .collect();
    let rhs = trapezoid(level_grid, &rhs_samples);
    Ok((lhs - rhs).abs())
}

/// Occupation and local time across a grid of levels; levels evaluate
/// independently and in parallel.
pub fn level_sweep<T: Real>(
    path: &StandardizedPath<T>,
    levels: &[T],
    bandwidth: T,
) -> Result<Vec<LocalTimeEstimate<T>>> {
    levels
        .par_iter()
        .map(|&lam| local_time(path, lam, bandwidth))
        .collect()
}

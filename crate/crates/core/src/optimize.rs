//! Almost-sure minimization of the soft risk surface over the threshold
//! level and the center parameter, under the canonical measure.
//!
//! The search is a coarse grid scan followed by golden-section refinement
//! inside the bracketing cell; the surface is continuously differentiable
//! but its local-time estimates are noisy, so a bracketing search is more
//! robust than gradient descent here. Ties break toward the smallest level,
//! then the smallest center, so the selected minimizer does not depend on
//! evaluation order.

use rayon::prelude::*;

use crate::covariance::{uniform_grid, CovarianceModel, RiskMeasure};
use crate::scalar::{lit, Real};
use crate::simulate::{DriftFunction, SamplePath};
use crate::sure::{
    sure_grad_alpha, sure_grad_lambda, AlphaVariant, SoftEvalContext, SureComponents,
};
use crate::{Error, Result};

/// Fallback level bound when the horizon is too short for the asymptotic
/// `sqrt(2 r log T)` range.
pub const DEFAULT_LAMBDA_FLOOR: f64 = 3.0;

/// Upper end of the admissible level range: `sqrt(2 r log T)` for `T > 1`,
/// the configured floor otherwise. The range is only a guaranteed
/// asymptotic envelope of `sup |Z|` for `r > 1`.
pub fn c_of_t_with_floor<T: Real>(horizon: T, r: T, floor: T) -> T {
    if horizon <= T::one() {
        floor
    } else {
        (lit::<T>(2.0) * r * horizon.ln()).sqrt()
    }
}

pub fn c_of_t<T: Real>(horizon: T, r: T) -> T {
    c_of_t_with_floor(horizon, r, lit::<T>(DEFAULT_LAMBDA_FLOOR))
}

/// Whether the coverage guarantee behind the level range applies.
pub fn coverage_guaranteed<T: Real>(r: T) -> bool {
    r > T::one()
}

/// Admissible parameter box and scan resolution.
#[derive(Debug, Clone)]
pub struct SearchSpace<T> {
    /// Level range is `[0, lambda_max]`.
    pub lambda_max: T,
    pub lambda_points: usize,
    pub alpha_range: (T, T),
    pub alpha_points: usize,
    /// Golden-section refinement of the bracketing cell.
    pub refine: bool,
    /// Local minima within this relative margin of the minimum are reported
    /// as alternates.
    pub alternate_margin: T,
}

impl<T: Real> SearchSpace<T> {
    /// One-dimensional level search with the default 200-point scan.
    pub fn for_level_search(horizon: T, r: T) -> Self {
        Self {
            lambda_max: c_of_t(horizon, r),
            lambda_points: 200,
            alpha_range: (T::zero(), T::zero()),
            alpha_points: 1,
            refine: true,
            alternate_margin: lit::<T>(0.05),
        }
    }

    /// Joint search with the default 60 x 60 scan.
    pub fn for_joint_search(horizon: T, r: T, alpha_range: (T, T)) -> Self {
        Self {
            lambda_max: c_of_t(horizon, r),
            lambda_points: 60,
            alpha_range,
            alpha_points: 60,
            refine: true,
            alternate_margin: lit::<T>(0.05),
        }
    }

    fn validate(&self, joint: bool) -> Result<()> {
        if !(self.lambda_max > T::zero() && self.lambda_max.is_finite()) {
            return Err(Error::Validation(format!(
                "lambda_max must be > 0 and finite, got {}",
                self.lambda_max
            )));
        }
        if self.lambda_points < 2 {
            return Err(Error::Domain("lambda grid needs >= 2 points".into()));
        }
        if joint {
            if self.alpha_points < 2 {
                return Err(Error::Domain("alpha grid needs >= 2 points".into()));
            }
            if !self.alpha_range.0.is_finite()
                || !self.alpha_range.1.is_finite()
                || self.alpha_range.1 <= self.alpha_range.0
            {
                return Err(Error::Validation(
                    "alpha range must have positive width".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn lambda_grid(&self) -> Vec<T> {
        uniform_grid(T::zero(), self.lambda_max, self.lambda_points)
    }

    pub fn alpha_grid(&self) -> Vec<T> {
        uniform_grid(self.alpha_range.0, self.alpha_range.1, self.alpha_points)
    }
}

/// One evaluated point of the risk surface.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint<T> {
    pub alpha: T,
    pub lambda: T,
    pub value: T,
    pub components: SureComponents<T>,
}

/// Minimizer with its full scan trace.
#[derive(Debug, Clone)]
pub struct OptimResult<T> {
    pub alpha_star: T,
    pub lambda_star: T,
    pub sure_min: T,
    /// Best grid point before refinement.
    pub grid_alpha_star: T,
    pub grid_lambda_star: T,
    pub grid_sure_min: T,
    pub trace: Vec<TracePoint<T>>,
    /// Analytic gradient at the returned point: (d/d alpha, d/d lambda);
    /// the alpha component is present for joint searches.
    pub gradient_at_min: (Option<T>, T),
    /// Local minima of the scan within the alternate margin of the optimum.
    pub alternates: Vec<TracePoint<T>>,
}

/// Lexicographic minimum by (value, lambda, alpha); independent of the order
/// the trace was filled in.
fn select_min<T: Real>(trace: &[TracePoint<T>]) -> Result<TracePoint<T>> {
    if trace.is_empty() {
        return Err(Error::Domain("empty search trace".into()));
    }
    if trace.iter().any(|p| !p.value.is_finite()) {
        return Err(Error::Numeric("risk surface evaluated to non-finite value".into()));
    }
    let mut best = trace[0];
    for p in &trace[1..] {
        let better = p.value < best.value
            || (p.value == best.value && p.lambda < best.lambda)
            || (p.value == best.value && p.lambda == best.lambda && p.alpha < best.alpha);
        if better {
            best = *p;
        }
    }
    Ok(best)
}

/// Golden-section minimization on `[a, b]`. Ties move the bracket left and
/// the best probe is selected by (value, point), so on plateaus the search
/// settles at the left edge (the smallest level).
fn golden_section<T: Real>(mut a: T, mut b: T, mut f: impl FnMut(T) -> T) -> (T, T) {
    let inv_phi = lit::<T>(0.618_033_988_749_894_9);
    let mut best: Option<(T, T)> = None;
    let record = |u: T, v: T, best: &mut Option<(T, T)>| {
        let better = match *best {
            None => true,
            Some((bu, bv)) => v < bv || (v == bv && u < bu),
        };
        if better {
            *best = Some((u, v));
        }
    };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    record(c, fc, &mut best);
    record(d, fd, &mut best);
    for _ in 0..80 {
        if (b - a).abs() <= lit::<T>(1e-9) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
            record(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
            record(d, fd, &mut best);
        }
    }
    let mid = (a + b) / lit::<T>(2.0);
    record(mid, f(mid), &mut best);
    best.expect("at least one probe")
}

/// Local minima of a 1-D slice (indices), strict interior comparisons with
/// non-strict ties allowed on one side.
fn local_minima_1d<T: Real>(values: &[T]) -> Vec<usize> {
    let n = values.len();
    (1..n.saturating_sub(1))
        .filter(|&i| values[i] <= values[i - 1] && values[i] <= values[i + 1])
        .collect()
}

/// Secondary basins of the scan, reported as alternate parameter candidates.
///
/// A local minimum of the parameter profile (the best value per center for
/// joint scans, per level otherwise) qualifies when it captures at least the
/// margin fraction of the optimum's improvement over the baseline risk —
/// i.e. it is a dip that genuinely beats doing nothing, not scan noise.
fn alternates_from_trace<T: Real>(
    trace: &[TracePoint<T>],
    shape: (usize, usize),
    best: &TracePoint<T>,
    margin: T,
) -> Vec<TracePoint<T>> {
    let (n_alpha, n_lambda) = shape;
    let baseline = best.components.baseline;
    let improvement = baseline - best.value;
    if improvement <= T::zero() {
        return Vec::new();
    }
    let threshold = baseline - margin * improvement;
    // Profile over the scanned parameter: best level per center for joint
    // scans, the level profile itself otherwise.
    let profile: Vec<TracePoint<T>> = if n_alpha == 1 {
        trace.to_vec()
    } else {
        (0..n_alpha)
            .map(|ia| {
                let row = &trace[ia * n_lambda..(ia + 1) * n_lambda];
                *row.iter()
                    .reduce(|a, b| if b.value < a.value { b } else { a })
                    .expect("nonempty row")
            })
            .collect()
    };
    let values: Vec<T> = profile.iter().map(|p| p.value).collect();
    let mut out = Vec::new();
    for i in local_minima_1d(&values) {
        let p = profile[i];
        let is_global = if n_alpha == 1 {
            p.lambda == best.lambda
        } else {
            p.alpha == best.alpha
        };
        if !is_global && p.value <= threshold {
            out.push(p);
        }
    }
    out
}

/// Evaluates the lambda sweep for one fixed center, sharing the evaluation
/// context across all levels.
fn lambda_sweep_with_ctx<T: Real>(
    ctx: &SoftEvalContext<T>,
    alpha_tag: T,
    lambdas: &[T],
) -> Vec<TracePoint<T>> {
    lambdas
        .iter()
        .map(|&lam| {
            let components = ctx.components(lam);
            TracePoint {
                alpha: alpha_tag,
                lambda: lam,
                value: components.baseline + components.quadratic + components.correction,
                components,
            }
        })
        .collect()
}

/// Risk values over the level grid for a fixed center function.
pub fn sweep_lambda<T: Real>(
    path: &SamplePath<T>,
    alpha: &DriftFunction<T>,
    space: &SearchSpace<T>,
    model: &CovarianceModel<T>,
) -> Result<Vec<TracePoint<T>>> {
    space.validate(false)?;
    let mu = RiskMeasure::canonical(model);
    let ctx = SoftEvalContext::new(path, alpha, model, &mu)?;
    let tag = match alpha {
        DriftFunction::Constant(c) => *c,
        DriftFunction::Linear(s) => *s,
        _ => T::zero(),
    };
    Ok(lambda_sweep_with_ctx(&ctx, tag, &space.lambda_grid()))
}

/// Risk surface over the joint (alpha, lambda) grid; rows scan the center
/// grid in order, levels vary fastest.
pub fn sweep_joint<T: Real>(
    path: &SamplePath<T>,
    variant: AlphaVariant,
    space: &SearchSpace<T>,
    model: &CovarianceModel<T>,
) -> Result<Vec<TracePoint<T>>> {
    space.validate(true)?;
    if variant == AlphaVariant::Slope && path.grid()[0] <= T::zero() {
        return Err(Error::Domain("slope variant requires grid[0] > 0".into()));
    }
    let mu = RiskMeasure::canonical(model);
    let lambdas = space.lambda_grid();
    let rows: Vec<Vec<TracePoint<T>>> = space
        .alpha_grid()
        .par_iter()
        .map(|&a| {
            let center = center_function(variant, a);
            let ctx = SoftEvalContext::new(path, &center, model, &mu)?;
            Ok(lambda_sweep_with_ctx(&ctx, a, &lambdas))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn center_function<T: Real>(variant: AlphaVariant, a: T) -> DriftFunction<T> {
    match variant {
        AlphaVariant::Level => DriftFunction::Constant(a),
        AlphaVariant::Slope => DriftFunction::Linear(a),
    }
}

/// Default finite-difference bandwidth for gradients reported at the optimum.
const GRADIENT_BANDWIDTH: f64 = 1e-3;

/// Minimizes the soft risk over the level for a fixed center.
///
/// A coarse scan over `[0, lambda_max]` locates the global grid minimizer;
/// when refinement is enabled a golden-section pass inside the bracketing
/// cell polishes it. The refined value never exceeds the grid minimum and
/// the refinement never leaves the bracket.
pub fn minimize_lambda<T: Real>(
    path: &SamplePath<T>,
    alpha: &DriftFunction<T>,
    space: &SearchSpace<T>,
    model: &CovarianceModel<T>,
) -> Result<OptimResult<T>> {
    space.validate(false)?;
    let mu = RiskMeasure::canonical(model);
    let ctx = SoftEvalContext::new(path, alpha, model, &mu)?;
    let tag = match alpha {
        DriftFunction::Constant(c) => *c,
        DriftFunction::Linear(s) => *s,
        _ => T::zero(),
    };
    let lambdas = space.lambda_grid();
    let trace = lambda_sweep_with_ctx(&ctx, tag, &lambdas);
    let best = select_min(&trace)?;

    let value_of = |lam: T| {
        let c = ctx.components(lam);
        c.baseline + c.quadratic + c.correction
    };
    let (mut lambda_star, mut sure_min) = (best.lambda, best.value);
    if space.refine {
        let k = lambdas
            .iter()
            .position(|&l| l == best.lambda)
            .expect("minimizer from grid");
        let lo = if k == 0 { lambdas[0] } else { lambdas[k - 1] };
        let hi = if k + 1 == lambdas.len() {
            lambdas[k]
        } else {
            lambdas[k + 1]
        };
        if hi > lo {
            let (cand, val) = golden_section(lo, hi, value_of);
            if val <= sure_min {
                lambda_star = cand;
                sure_min = val;
            }
        }
    }
    let gradient = sure_grad_lambda(path, alpha, lambda_star, model, lit::<T>(GRADIENT_BANDWIDTH))?;
    let alternates = alternates_from_trace(&trace, (1, trace.len()), &best, space.alternate_margin);
    Ok(OptimResult {
        alpha_star: tag,
        lambda_star,
        sure_min,
        grid_alpha_star: best.alpha,
        grid_lambda_star: best.lambda,
        grid_sure_min: best.value,
        trace,
        gradient_at_min: (None, gradient),
        alternates,
    })
}

/// Joint minimization over (center, level) by a 2-D scan with coordinatewise
/// golden-section refinement in the bracketing cells.
pub fn minimize_joint<T: Real>(
    path: &SamplePath<T>,
    variant: AlphaVariant,
    space: &SearchSpace<T>,
    model: &CovarianceModel<T>,
) -> Result<OptimResult<T>> {
    let trace = sweep_joint(path, variant, space, model)?;
    let best = select_min(&trace)?;
    let mu = RiskMeasure::canonical(model);
    let alphas = space.alpha_grid();
    let lambdas = space.lambda_grid();

    let eval = |a: T, lam: T| -> Result<T> {
        let ctx = SoftEvalContext::new(path, &center_function(variant, a), model, &mu)?;
        let c = ctx.components(lam);
        Ok(c.baseline + c.quadratic + c.correction)
    };

    let (mut alpha_star, mut lambda_star, mut sure_min) = (best.alpha, best.lambda, best.value);
    if space.refine {
        let ka = alphas.iter().position(|&a| a == best.alpha).expect("grid");
        let kl = lambdas
            .iter()
            .position(|&l| l == best.lambda)
            .expect("grid");
        // Level pass at the fixed best center, then a center pass.
        let (l_lo, l_hi) = bracket(&lambdas, kl);
        let ctx = SoftEvalContext::new(path, &center_function(variant, best.alpha), model, &mu)?;
        let (cand_l, val_l) = golden_section(l_lo, l_hi, |lam| {
            let c = ctx.components(lam);
            c.baseline + c.quadratic + c.correction
        });
        if val_l <= sure_min {
            lambda_star = cand_l;
            sure_min = val_l;
        }
        let (a_lo, a_hi) = bracket(&alphas, ka);
        if a_hi > a_lo {
            let lam_fixed = lambda_star;
            let mut cache_err = None;
            let (cand_a, val_a) = golden_section(a_lo, a_hi, |a| match eval(a, lam_fixed) {
                Ok(v) => v,
                Err(e) => {
                    cache_err = Some(e);
                    T::infinity()
                }
            });
            if let Some(e) = cache_err {
                return Err(e);
            }
            if val_a <= sure_min {
                alpha_star = cand_a;
                sure_min = val_a;
            }
        }
    }
    let bw = lit::<T>(GRADIENT_BANDWIDTH);
    let grad_alpha = sure_grad_alpha(path, alpha_star, lambda_star, model, variant, bw)?;
    let grad_lambda = sure_grad_lambda(
        path,
        &center_function(variant, alpha_star),
        lambda_star,
        model,
        bw,
    )?;
    let alternates = alternates_from_trace(
        &trace,
        (alphas.len(), lambdas.len()),
        &best,
        space.alternate_margin,
    );
    Ok(OptimResult {
        alpha_star,
        lambda_star,
        sure_min,
        grid_alpha_star: best.alpha,
        grid_lambda_star: best.lambda,
        grid_sure_min: best.value,
        trace,
        gradient_at_min: (Some(grad_alpha), grad_lambda),
        alternates,
    })
}

fn bracket<T: Real>(grid: &[T], k: usize) -> (T, T) {
    let lo = if k == 0 { grid[0] } else { grid[k - 1] };
    let hi = if k + 1 == grid.len() { grid[k] } else { grid[k + 1] };
    (lo, hi)
}

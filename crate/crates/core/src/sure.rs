//! Unbiased risk functionals for shrinkage estimators of the drift.
//!
//! Two independent evaluation routes are kept deliberately separate. The
//! generic route integrates a caller-supplied pair `(xi, d xi / dx)` along
//! the path, resolving discontinuities of the derivative inside grid cells
//! by bisection. The threshold-specific routes use the closed forms: the
//! soft risk reduces to occupation time of the standardized path, the hard
//! risk additionally needs its local time. On the same inputs the two routes
//! agree to near machine precision, which the test suites exploit as a
//! consistency check.
//!
//! All path integrals represent time-dependent factors by their piecewise
//! linear interpolants between grid samples; the capped quadratic term takes
//! the elementwise min before quadrature.

use crate::covariance::{baseline_risk, trapezoid, CovarianceModel, RiskMeasure};
use crate::pathstats::{
    band_square_time, band_time, default_bandwidth, local_time, signed_local_time,
    weighted_band_time, StandardizedPath,
};
use crate::scalar::{lit, pairwise_sum, Real};
use crate::shrinkage::ThresholdSpec;
use crate::simulate::{DriftFunction, SamplePath};
use crate::{Error, Result};

/// Additive decomposition of a risk value.
#[derive(Debug, Clone, Copy)]
pub struct SureComponents<T> {
    /// Risk of the raw observation under the measure.
    pub baseline: T,
    /// Squared-shrinkage term.
    pub quadratic: T,
    /// Derivative (occupation / local time) term.
    pub correction: T,
}

/// Evaluated risk with its components and provenance.
#[derive(Debug, Clone)]
pub struct SureReport<T> {
    pub value: T,
    pub components: SureComponents<T>,
    /// Threshold specification when evaluated for a threshold family.
    pub spec: Option<ThresholdSpec<T>>,
    /// Identifier of the risk measure used.
    pub measure: String,
    /// Local-time bandwidth, recorded for the hard form.
    pub bandwidth: Option<T>,
    /// Set when a local-time estimate flagged its bandwidth.
    pub warning: Option<String>,
}

impl<T: Real> SureReport<T> {
    fn assemble(
        components: SureComponents<T>,
        spec: Option<ThresholdSpec<T>>,
        measure: &str,
        bandwidth: Option<T>,
        warning: Option<String>,
    ) -> Self {
        Self {
            value: components.baseline + components.quadratic + components.correction,
            components,
            spec,
            measure: measure.to_string(),
            bandwidth,
            warning,
        }
    }
}

/// Path value at an arbitrary time by linear interpolation, clamped at the
/// grid endpoints.
fn value_at<T: Real>(path: &SamplePath<T>, t: T) -> T {
    let grid = path.grid();
    let values = path.values();
    if t <= grid[0] {
        return values[0];
    }
    if t >= *grid.last().expect("nonempty") {
        return *values.last().expect("nonempty");
    }
    let hi = grid.partition_point(|&g| g < t).max(1);
    let lo = hi - 1;
    let frac = (t - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + (values[hi] - values[lo]) * frac
}

/// Generic unbiased risk of `X + xi(X)` for a caller-supplied estimator.
///
/// `xi` and `dxi` are functions of `(t, x)`; the correction term uses the
/// identity that the noise derivative contributes a factor `gamma(t, t)`.
/// Atomic measures are summed exactly; densities are integrated on the path
/// grid, splitting cells where `dxi` jumps along the interpolated path.
pub fn sure_generic<T: Real>(
    path: &SamplePath<T>,
    xi: impl Fn(T, T) -> T,
    dxi: impl Fn(T, T) -> T,
    model: &CovarianceModel<T>,
    mu: &RiskMeasure<T>,
) -> Result<SureReport<T>> {
    let baseline = baseline_risk(model, mu)?;
    let (quadratic, correction) = if let Some(atoms) = mu.atoms() {
        let mut quad_terms = Vec::with_capacity(atoms.len());
        let mut corr_terms = Vec::with_capacity(atoms.len());
        for &(t, a) in atoms {
            let x = value_at(path, t);
            let xv = xi(t, x);
            let dv = dxi(t, x);
            if !xv.is_finite() || !dv.is_finite() {
                return Err(Error::Numeric(format!(
                    "estimator evaluation non-finite at t={t}"
                )));
            }
            quad_terms.push(a * xv * xv);
            corr_terms.push(a * model.variance_at(t)? * dv);
        }
        (
            pairwise_sum(&quad_terms),
            lit::<T>(2.0) * pairwise_sum(&corr_terms),
        )
    } else {
        let grid = path.grid();
        if grid.len() < 2 {
            return Err(Error::Domain(
                "density measures need at least two grid points".into(),
            ));
        }
        let f = mu.density_on_grid(grid)?;
        let quad_samples: Vec<T> = grid
            .iter()
            .zip(path.values())
            .zip(&f)
            .map(|((&t, &x), &fi)| {
                let v = xi(t, x);
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("xi non-finite at t={t}")));
                }
                Ok(v * v * fi)
            })
            .collect::<Result<_>>()?;
        let quadratic = trapezoid(grid, &quad_samples);
        let weights: Vec<T> = grid
            .iter()
            .zip(&f)
            .map(|(&t, &fi)| Ok(model.variance_at(t)? * fi))
            .collect::<Result<_>>()?;
        let corr = correction_integral(grid, path.values(), &weights, &dxi)?;
        (quadratic, lit::<T>(2.0) * corr)
    };
    Ok(SureReport::assemble(
        SureComponents {
            baseline,
            quadratic,
            correction,
        },
        None,
        mu.name(),
        None,
        None,
    ))
}

/// Sub-sampling depth per grid cell when scanning for derivative jumps.
const SUBSCAN: usize = 8;
/// Relative change of `dxi` between scan points treated as a jump.
const JUMP_TOL: f64 = 1e-6;

/// `integral of w(t) dxi(t, x(t)) dt` with `w` and `x` piecewise linear on
/// the grid. Each cell is scanned at `SUBSCAN + 1` points; where adjacent
/// samples of `dxi` differ, the transition is located by bisection and the
/// cell is split there, so indicator-type derivatives integrate with the
/// same crossing resolution as the occupation-time machinery.
fn correction_integral<T: Real>(
    grid: &[T],
    values: &[T],
    weights: &[T],
    dxi: &impl Fn(T, T) -> T,
) -> Result<T> {
    let mut cell_terms = Vec::with_capacity(grid.len() - 1);
    let two = lit::<T>(2.0);
    for i in 0..grid.len() - 1 {
        let (ta, tb) = (grid[i], grid[i + 1]);
        let (xa, xb) = (values[i], values[i + 1]);
        let (wa, wb) = (weights[i], weights[i + 1]);
        let dt = tb - ta;
        let eval = |u: T| -> T {
            let t = ta + dt * u;
            let x = xa + (xb - xa) * u;
            dxi(t, x)
        };
        let mut d = [T::zero(); SUBSCAN + 1];
        for (k, dk) in d.iter_mut().enumerate() {
            let u = lit::<T>(k as f64 / SUBSCAN as f64);
            *dk = eval(u);
            if !dk.is_finite() {
                return Err(Error::Numeric(format!(
                    "estimator derivative non-finite inside cell [{ta}, {tb}]"
                )));
            }
        }
        let scale = d
            .iter()
            .fold(T::one(), |a, &b| a.max(b.abs()));
        let tol = lit::<T>(JUMP_TOL) * scale;

        // Integration nodes: (u, d on the left side, d on the right side).
        let mut nodes: Vec<(T, T, T)> = Vec::with_capacity(SUBSCAN + 2);
        nodes.push((T::zero(), d[0], d[0]));
        for k in 0..SUBSCAN {
            let (ul, ur) = (
                lit::<T>(k as f64 / SUBSCAN as f64),
                lit::<T>((k + 1) as f64 / SUBSCAN as f64),
            );
            if (d[k + 1] - d[k]).abs() > tol {
                let (ustar, dl, dr) = locate_jump(&eval, ul, d[k], ur, d[k + 1]);
                nodes.push((ustar, dl, dr));
            }
            nodes.push((ur, d[k + 1], d[k + 1]));
        }

        let w_at = |u: T| wa + (wb - wa) * u;
        let mut cell = T::zero();
        for pair in nodes.windows(2) {
            let (u0, _, d_out) = pair[0];
            let (u1, d_in, _) = pair[1];
            cell += (u1 - u0) * (w_at(u0) * d_out + w_at(u1) * d_in) / two;
        }
        cell_terms.push(dt * cell);
    }
    Ok(pairwise_sum(&cell_terms))
}

/// Bisects a transition of `f` between `ul` and `ur`, classifying the probe
/// by whichever endpoint value it is closer to. Returns the split point with
/// the one-sided values.
fn locate_jump<T: Real>(
    f: &impl Fn(T) -> T,
    mut ul: T,
    mut dl: T,
    mut ur: T,
    mut dr: T,
) -> (T, T, T) {
    for _ in 0..80 {
        if ur - ul <= lit::<T>(1e-15) {
            break;
        }
        let um = (ul + ur) / lit::<T>(2.0);
        let dm = f(um);
        if (dm - dl).abs() <= (dm - dr).abs() {
            ul = um;
            dl = dm;
        } else {
            ur = um;
            dr = dm;
        }
    }
    ((ul + ur) / lit::<T>(2.0), dl, dr)
}

/// The analytic `(xi, d xi / dx)` pair of the soft-threshold estimator,
/// for feeding the generic route.
pub fn soft_xi_pair<T: Real>(
    alpha: &DriftFunction<T>,
    lam: T,
    model: &CovarianceModel<T>,
) -> (impl Fn(T, T) -> T, impl Fn(T, T) -> T) {
    let (a1, m1) = (alpha.clone(), model.clone());
    let (a2, m2) = (alpha.clone(), model.clone());
    let xi = move |t: T, x: T| {
        let half_width = lam * m1.variance_at(t).unwrap_or(T::nan()).sqrt();
        let dev = x - a1.eval(t);
        let pull = half_width.min(dev.abs());
        if dev < T::zero() {
            pull
        } else {
            -pull
        }
    };
    let dxi = move |t: T, x: T| {
        let half_width = lam * m2.variance_at(t).unwrap_or(T::nan()).sqrt();
        let dev = x - a2.eval(t);
        if dev.abs() <= half_width {
            -T::one()
        } else {
            T::zero()
        }
    };
    (xi, dxi)
}

/// Precomputed per-grid data for repeated soft-risk evaluations of one path
/// under one density measure. Grid sweeps and single evaluations go through
/// the same arithmetic, so shared points agree bit for bit.
pub(crate) struct SoftEvalContext<T> {
    grid: Vec<T>,
    z: Vec<T>,
    dev: Vec<T>,
    gamma: Vec<T>,
    f: Vec<T>,
    weights: Vec<T>,
    baseline: T,
}

impl<T: Real> SoftEvalContext<T> {
    pub(crate) fn new(
        path: &SamplePath<T>,
        alpha: &DriftFunction<T>,
        model: &CovarianceModel<T>,
        mu: &RiskMeasure<T>,
    ) -> Result<Self> {
        if mu.is_atomic() {
            return Err(Error::Domain("evaluation context expects a density measure".into()));
        }
        let grid = path.grid();
        if grid.len() < 2 {
            return Err(Error::Domain(
                "density measures need at least two grid points".into(),
            ));
        }
        let baseline = baseline_risk(model, mu)?;
        let f = mu.density_on_grid(grid)?;
        let std_path = StandardizedPath::new(path, alpha, model)?;
        let mut dev = Vec::with_capacity(grid.len());
        let mut gamma = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for ((&t, &x), &fi) in grid.iter().zip(path.values()).zip(&f) {
            let g = model.variance_at(t)?;
            dev.push(x - alpha.eval(t));
            gamma.push(g);
            weights.push(g * fi);
        }
        Ok(Self {
            grid: grid.to_vec(),
            z: std_path.z().to_vec(),
            dev,
            gamma,
            f,
            weights,
            baseline,
        })
    }

    pub(crate) fn components(&self, lam: T) -> SureComponents<T> {
        let quad_samples: Vec<T> = self
            .dev
            .iter()
            .zip(&self.gamma)
            .zip(&self.f)
            .map(|((&d, &g), &fi)| (d * d).min(lam * lam * g) * fi)
            .collect();
        let quadratic = trapezoid(&self.grid, &quad_samples);
        let correction =
            -lit::<T>(2.0) * weighted_band_time(&self.grid, &self.z, lam, &self.weights);
        SureComponents {
            baseline: self.baseline,
            quadratic,
            correction,
        }
    }
}

/// Soft-threshold risk in closed form.
///
/// For a density measure the three components are the baseline risk, the
/// capped quadratic term and `-2 integral 1{|X - alpha| <= lambda sqrt(gamma)}
/// gamma f dt`; under the canonical measure the last term is exactly
/// `-2` times the occupation time of the standardized path.
pub fn sure_soft<T: Real>(
    path: &SamplePath<T>,
    alpha: &DriftFunction<T>,
    lam: T,
    model: &CovarianceModel<T>,
    mu: &RiskMeasure<T>,
) -> Result<SureReport<T>> {
    if !(lam >= T::zero() && lam.is_finite()) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lam}")));
    }
    let two = lit::<T>(2.0);
    let components = if let Some(atoms) = mu.atoms() {
        let baseline = baseline_risk(model, mu)?;
        let mut quad_terms = Vec::with_capacity(atoms.len());
        let mut corr_terms = Vec::with_capacity(atoms.len());
        for &(t, a) in atoms {
            let x = value_at(path, t);
            let g = model.variance_at(t)?;
            let dev = x - alpha.eval(t);
            let bw2 = lam * lam * g;
            quad_terms.push(a * (dev * dev).min(bw2));
            if dev * dev <= bw2 {
                corr_terms.push(a * g);
            }
        }
        SureComponents {
            baseline,
            quadratic: pairwise_sum(&quad_terms),
            correction: -two * pairwise_sum(&corr_terms),
        }
    } else {
        SoftEvalContext::new(path, alpha, model, mu)?.components(lam)
    };
    let spec = ThresholdSpec::soft(alpha.clone(), lam)?;
    Ok(SureReport::assemble(
        components,
        Some(spec),
        mu.name(),
        None,
        None,
    ))
}

/// Hard-threshold risk under the canonical measure
/// `mu(dt) = gamma(t, t)^{-1} dt`: the capped quadratic becomes the in-band
/// square integral of the standardized path and the correction is
/// `2 lambda local_time - 2 occupation`. The local time comes from the
/// finite-difference estimator; its bandwidth is recorded in the report.
pub fn sure_hard<T: Real>(
    path: &SamplePath<T>,
    alpha: &DriftFunction<T>,
    lam: T,
    model: &CovarianceModel<T>,
    bandwidth: Option<T>,
) -> Result<SureReport<T>> {
    if !(lam >= T::zero() && lam.is_finite()) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lam}")));
    }
    let mu = RiskMeasure::canonical(model);
    let baseline = baseline_risk(model, &mu)?;
    let std_path = StandardizedPath::new(path, alpha, model)?;
    let eps = bandwidth.unwrap_or_else(|| default_bandwidth(&std_path));
    let grid = std_path.grid();
    let quadratic = band_square_time(grid, std_path.z(), lam);
    let occupation = band_time(grid, std_path.z(), lam);
    let local = local_time(&std_path, lam, eps)?;
    let two = lit::<T>(2.0);
    let correction = two * lam * local.local_time - two * occupation;
    let warning = local.warning.then(|| {
        format!(
            "local-time bandwidth {eps} exceeds the level range of the path"
        )
    });
    let spec = ThresholdSpec::hard(alpha.clone(), lam)?;
    Ok(SureReport::assemble(
        SureComponents {
            baseline,
            quadratic,
            correction,
        },
        Some(spec),
        "canonical",
        Some(eps),
        warning,
    ))
}

/// Derivative of the soft risk in the level `lambda` under the canonical
/// measure: `2 lambda (T - occupation) - 2 local_time`.
///
/// The occupation factor here uses the pointwise trapezoid of the band
/// indicator, which is the exact lambda-derivative of the capped quadratic
/// term as implemented in [`sure_soft`]; the local-time factor is the
/// finite-difference estimator at `bandwidth`. With matching steps the
/// value agrees with a centered difference of the evaluated risk to second
/// order.
pub fn sure_grad_lambda<T: Real>(
    path: &SamplePath<T>,
    alpha: &DriftFunction<T>,
    lam: T,
    model: &CovarianceModel<T>,
    bandwidth: T,
) -> Result<T> {
    if !(lam >= T::zero() && lam.is_finite()) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lam}")));
    }
    let std_path = StandardizedPath::new(path, alpha, model)?;
    let grid = std_path.grid();
    let span = *grid.last().expect("nonempty") - grid[0];
    let indicator: Vec<T> = std_path
        .z()
        .iter()
        .map(|&z| if z.abs() <= lam { T::one() } else { T::zero() })
        .collect();
    let occ_pointwise = trapezoid(grid, &indicator);
    let local = local_time(&std_path, lam, bandwidth)?;
    let two = lit::<T>(2.0);
    Ok(two * lam * (span - occ_pointwise) - two * local.local_time)
}

/// Which parametrization of the center the joint search moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaVariant {
    /// Constant center `alpha(t) = a`.
    Level,
    /// Linear center `alpha(t) = a t`; requires `grid[0] > 0`.
    Slope,
}

/// Derivative of the soft risk in the center parameter under the canonical
/// measure.
///
/// The integral term is the pointwise trapezoid matching the quadratic
/// term's quadrature. For the level variant the two local-time terms are
/// the signed local times at level `a` of `X + lambda sqrt(gamma)` and
/// `X - lambda sqrt(gamma)`. The slope variant evaluates the same pair
/// through the equivalent derivative of the band occupation in `a`, which
/// keeps the estimate consistent with the implemented risk when the level
/// process `(X + lambda sqrt(gamma)) / t` curves between grid samples.
pub fn sure_grad_alpha<T: Real>(
    path: &SamplePath<T>,
    alpha_param: T,
    lam: T,
    model: &CovarianceModel<T>,
    variant: AlphaVariant,
    bandwidth: T,
) -> Result<T> {
    if !(lam >= T::zero() && lam.is_finite()) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lam}")));
    }
    if bandwidth.is_nan() || bandwidth <= T::zero() {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    let grid = path.grid();
    if variant == AlphaVariant::Slope && grid[0] <= T::zero() {
        return Err(Error::Domain(
            "slope variant requires grid[0] > 0".into(),
        ));
    }
    let two = lit::<T>(2.0);

    let center = |t: T| match variant {
        AlphaVariant::Level => alpha_param,
        AlphaVariant::Slope => alpha_param * t,
    };
    // Pointwise trapezoid of the in-band deviation, the exact derivative of
    // the capped quadratic term.
    let mut samples = Vec::with_capacity(grid.len());
    for (&t, &x) in grid.iter().zip(path.values()) {
        let g = model.variance_at(t)?;
        let dev = x - center(t);
        let weight = match variant {
            AlphaVariant::Level => T::one(),
            AlphaVariant::Slope => t,
        };
        let inside = dev * dev <= lam * lam * g;
        samples.push(if inside { dev * weight / g } else { T::zero() });
    }
    let integral = trapezoid(grid, &samples);

    let local_terms = match variant {
        AlphaVariant::Level => {
            let m_plus = model.clone();
            let m_minus = model.clone();
            let ell_plus = signed_local_time(
                path,
                move |t| alpha_param - lam * m_plus.variance_at(t).unwrap_or(T::nan()).sqrt(),
                |_| T::one(),
                bandwidth,
            )?;
            let ell_minus = signed_local_time(
                path,
                move |t| alpha_param + lam * m_minus.variance_at(t).unwrap_or(T::nan()).sqrt(),
                |_| T::one(),
                bandwidth,
            )?;
            two * ell_plus - two * ell_minus
        }
        AlphaVariant::Slope => {
            // -2 d/da of the band occupation, via a symmetric difference of
            // the standardized band time in the slope parameter.
            let occ = |a: T| -> Result<T> {
                let z: Vec<T> = grid
                    .iter()
                    .zip(path.values())
                    .map(|(&t, &x)| Ok((x - a * t) / model.variance_at(t)?.sqrt()))
                    .collect::<Result<_>>()?;
                Ok(band_time(grid, &z, lam))
            };
            let hi = occ(alpha_param + bandwidth)?;
            let lo = occ(alpha_param - bandwidth)?;
            -two * (hi - lo) / (two * bandwidth)
        }
    };
    Ok(-two * integral + local_terms)
}

/// Left-Riemann discretization of a density measure on a grid: atoms
/// `(t_i, f(t_i) (t_{i+1} - t_i))`. Atoms with zero weight contribute
/// nothing and are dropped.
pub fn mu_n_discretize<T: Real>(mu: &RiskMeasure<T>, grid: &[T]) -> Result<RiskMeasure<T>> {
    if mu.is_atomic() {
        return Err(Error::Domain(
            "mu_n_discretize expects a density measure".into(),
        ));
    }
    if grid.len() < 2 {
        return Err(Error::Domain("grid needs >= 2 points".into()));
    }
    let mut atoms = Vec::with_capacity(grid.len() - 1);
    for w in grid.windows(2) {
        let weight = mu.density_at(w[0])? * (w[1] - w[0]);
        if weight > T::zero() {
            atoms.push((w[0], weight));
        }
    }
    if atoms.is_empty() {
        return Err(Error::Validation(
            "discretized measure has no positive atoms".into(),
        ));
    }
    RiskMeasure::atomic(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::uniform_grid;
    use crate::simulate::{simulate_ou, PathMeta};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// OU model with unit variance on the diagonal.
    fn unit_model() -> CovarianceModel<f64> {
        CovarianceModel::ornstein_uhlenbeck(0.5, 1.0, 1.0).unwrap()
    }

    fn experiment_model() -> CovarianceModel<f64> {
        CovarianceModel::ornstein_uhlenbeck(0.5, 0.05, 1.0).unwrap()
    }

    fn ramp_path(n: usize) -> SamplePath<f64> {
        let grid = uniform_grid(0.0, 1.0, n);
        SamplePath::new(
            grid.clone(),
            grid,
            PathMeta { model: "ramp".into(), seed: 0, drift: None, truth: None },
        )
        .unwrap()
    }

    #[test]
    fn soft_ramp_closed_form() {
        // Risk = 1 + (lam^2 - 2/3 lam^3) - 2 lam at lam = 1/2, i.e. 1/6.
        let m = unit_model();
        let mu = RiskMeasure::canonical(&m);
        let r = sure_soft(&ramp_path(1000), &DriftFunction::Zero, 0.5, &m, &mu).unwrap();
        assert_relative_eq!(r.value, 1.0 / 6.0, epsilon = 1e-3);
        assert_relative_eq!(r.components.baseline, 1.0, epsilon = 1e-10);
        assert_relative_eq!(r.components.quadratic, 1.0 / 6.0, epsilon = 1e-4);
        assert_relative_eq!(r.components.correction, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn soft_lambda_zero_is_baseline() {
        let m = experiment_model();
        let grid = m.default_grid(500);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 4).unwrap();
        let mu = RiskMeasure::canonical(&m);
        let r = sure_soft(&path, &DriftFunction::Zero, 0.0, &m, &mu).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-9);
        assert_eq!(r.components.quadratic, 0.0);
        assert_eq!(r.components.correction, 0.0);
    }

    #[test]
    fn soft_atomic_hand_example() {
        // Unit-variance model, unit weights, X = (0.5, 2.0), lam = 1:
        // 2 + (0.25 + 1) - 2 = 1.25.
        let m = unit_model();
        let grid = uniform_grid(0.0, 1.0, 2);
        let path = SamplePath::new(
            grid,
            vec![0.5, 2.0],
            PathMeta { model: "pair".into(), seed: 0, drift: None, truth: None },
        )
        .unwrap();
        let mu = RiskMeasure::atomic(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let r = sure_soft(&path, &DriftFunction::Zero, 1.0, &m, &mu).unwrap();
        assert_relative_eq!(r.value, 1.25, epsilon = 1e-12);
    }

    #[test]
    fn generic_zero_estimator_is_baseline() {
        let m = experiment_model();
        let grid = m.default_grid(300);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 9).unwrap();
        let mu = RiskMeasure::canonical(&m);
        let r = sure_generic(&path, |_, _| 0.0, |_, _| 0.0, &m, &mu).unwrap();
        assert_relative_eq!(r.value, baseline_risk(&m, &mu).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn generic_negation_matches_wide_soft() {
        // xi = -x zeroes the estimator; its risk T + int z^2 - 2T equals the
        // soft closed form once the band swallows the whole path.
        let m = experiment_model();
        let grid = m.default_grid(400);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 12).unwrap();
        let mu = RiskMeasure::canonical(&m);
        let g = sure_generic(&path, |_, x| -x, |_, _| -1.0, &m, &mu).unwrap();
        let z = StandardizedPath::new(&path, &DriftFunction::Zero, &m).unwrap();
        let max_z = z.z().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let s = sure_soft(&path, &DriftFunction::Zero, max_z + 1.0, &m, &mu).unwrap();
        assert_relative_eq!(g.value, s.value, epsilon = 1e-10);
        assert_relative_eq!(g.components.correction, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn soft_equals_generic_on_noise_paths() {
        let m = experiment_model();
        let grid = m.default_grid(800);
        let mu = RiskMeasure::canonical(&m);
        for seed in [1u64, 2, 3] {
            let path = simulate_ou(&m, &DriftFunction::Zero, &grid, seed).unwrap();
            for lam in [0.0, 0.2, 0.5, 1.0, 2.0] {
                let s = sure_soft(&path, &DriftFunction::Zero, lam, &m, &mu).unwrap();
                let (xi, dxi) = soft_xi_pair(&DriftFunction::Zero, lam, &m);
                let g = sure_generic(&path, xi, dxi, &m, &mu).unwrap();
                assert!(
                    (s.value - g.value).abs() <= 1e-12,
                    "seed {seed} lam {lam}: {} vs {}",
                    s.value,
                    g.value
                );
            }
        }
    }

    #[test]
    fn soft_equals_generic_under_atomic_measure() {
        let m = experiment_model();
        let grid = m.default_grid(200);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 31).unwrap();
        let mu_density = RiskMeasure::canonical(&m);
        let mu_n = mu_n_discretize(&mu_density, &grid).unwrap();
        let s = sure_soft(&path, &DriftFunction::Zero, 0.4, &m, &mu_n).unwrap();
        let (xi, dxi) = soft_xi_pair(&DriftFunction::Zero, 0.4, &m);
        let g = sure_generic(&path, xi, dxi, &m, &mu_n).unwrap();
        assert!((s.value - g.value).abs() <= 1e-12);
    }

    #[test]
    fn hard_ramp_closed_form() {
        // 1 + 1/24 + 2 * 0.5 * 1 - 2 * 0.5 = 1.0416667 on the ramp.
        let m = unit_model();
        let r = sure_hard(&ramp_path(1000), &DriftFunction::Zero, 0.5, &m, Some(0.01)).unwrap();
        assert_relative_eq!(r.value, 1.0416667, epsilon = 5e-3);
        assert_relative_eq!(r.components.quadratic, 1.0 / 24.0, epsilon = 1e-6);
        assert_eq!(r.bandwidth, Some(0.01));
    }

    #[test]
    fn hard_lambda_zero_is_baseline() {
        let m = experiment_model();
        let grid = m.default_grid(300);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 6).unwrap();
        let r = sure_hard(&path, &DriftFunction::Zero, 0.0, &m, None).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn hard_beyond_range_drops_local_term() {
        let m = experiment_model();
        let grid = m.default_grid(400);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 13).unwrap();
        let z = StandardizedPath::new(&path, &DriftFunction::Zero, &m).unwrap();
        let max_z = z.z().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let lam = max_z + 0.5;
        let r = sure_hard(&path, &DriftFunction::Zero, lam, &m, Some(0.05)).unwrap();
        let sq: Vec<f64> = z.z().iter().map(|&v| v * v).collect();
        let expect = 1.0 + trapezoid(z.grid(), &sq) - 2.0;
        assert_relative_eq!(r.value, expect, epsilon = 1e-3);
    }

    #[test]
    fn grad_lambda_at_zero_is_minus_local_time() {
        let m = experiment_model();
        let grid = m.default_grid(600);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 8).unwrap();
        let std_path = StandardizedPath::new(&path, &DriftFunction::Zero, &m).unwrap();
        let eps = 1e-3;
        let g = sure_grad_lambda(&path, &DriftFunction::Zero, 0.0, &m, eps).unwrap();
        let ell = local_time(&std_path, 0.0, eps).unwrap();
        assert_relative_eq!(g, -2.0 * ell.local_time, epsilon = 1e-12);
    }

    #[test]
    fn grad_lambda_ramp() {
        // d/dlam of (1 + lam^2 - 2/3 lam^3 - 2 lam) at 0.5 is -1.5.
        let m = unit_model();
        let g = sure_grad_lambda(&ramp_path(1000), &DriftFunction::Zero, 0.5, &m, 1e-3).unwrap();
        assert_relative_eq!(g, -1.5, epsilon = 1e-3);
    }

    #[test]
    fn grad_lambda_matches_finite_difference() {
        let m = experiment_model();
        let grid = m.default_grid(1000);
        let mu = RiskMeasure::canonical(&m);
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 14).unwrap();
        let h = 1e-3;
        let lam = 0.3;
        let analytic = sure_grad_lambda(&path, &DriftFunction::Zero, lam, &m, h).unwrap();
        let up = sure_soft(&path, &DriftFunction::Zero, lam + h, &m, &mu).unwrap().value;
        let dn = sure_soft(&path, &DriftFunction::Zero, lam - h, &m, &mu).unwrap().value;
        let fd = (up - dn) / (2.0 * h);
        assert!((analytic - fd).abs() <= 1e-3, "analytic {analytic} vs fd {fd}");
    }

    #[test]
    fn grad_alpha_constant_path_integral_vanishes() {
        let m = unit_model();
        let grid = uniform_grid(0.0, 1.0, 200);
        let path = SamplePath::new(
            grid,
            vec![0.3; 200],
            PathMeta { model: "const".into(), seed: 0, drift: None, truth: None },
        )
        .unwrap();
        let g = sure_grad_alpha(&path, 0.3, 0.5, &m, AlphaVariant::Level, 1e-3).unwrap();
        assert_relative_eq!(g, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn grad_alpha_symmetric_band_integral() {
        // Ramp centered at its band midpoint: the in-band deviations cancel
        // pairwise on the uniform grid.
        let m = unit_model();
        let path = ramp_path(1001);
        let g = sure_grad_alpha(&path, 0.5, 0.2, &m, AlphaVariant::Level, 1e-4).unwrap();
        // The local-time terms cancel by symmetry as well.
        assert!(g.abs() < 1e-6, "gradient {g}");
    }

    #[test]
    fn grad_alpha_level_matches_finite_difference() {
        let m = experiment_model();
        let grid = m.default_grid(1000);
        let mu = RiskMeasure::canonical(&m);
        let path = simulate_ou(&m, &DriftFunction::Constant(0.1), &grid, 15).unwrap();
        let h = 1e-3;
        let (alpha, lam) = (0.08, 0.3);
        let analytic =
            sure_grad_alpha(&path, alpha, lam, &m, AlphaVariant::Level, h).unwrap();
        let up = sure_soft(&path, &DriftFunction::Constant(alpha + h), lam, &m, &mu)
            .unwrap()
            .value;
        let dn = sure_soft(&path, &DriftFunction::Constant(alpha - h), lam, &m, &mu)
            .unwrap()
            .value;
        let fd = (up - dn) / (2.0 * h);
        assert!((analytic - fd).abs() <= 1e-2, "analytic {analytic} vs fd {fd}");
    }

    #[test]
    fn grad_alpha_slope_matches_finite_difference() {
        let m = experiment_model();
        let n = 1000;
        let grid = uniform_grid(1.0 / n as f64, 1.0, n);
        let mu = RiskMeasure::canonical(&m);
        let path = simulate_ou(&m, &DriftFunction::Linear(0.3), &grid, 16).unwrap();
        let h = 1e-3;
        let (alpha, lam) = (0.28, 0.3);
        let analytic =
            sure_grad_alpha(&path, alpha, lam, &m, AlphaVariant::Slope, h).unwrap();
        let up = sure_soft(&path, &DriftFunction::Linear(alpha + h), lam, &m, &mu)
            .unwrap()
            .value;
        let dn = sure_soft(&path, &DriftFunction::Linear(alpha - h), lam, &m, &mu)
            .unwrap()
            .value;
        let fd = (up - dn) / (2.0 * h);
        assert!((analytic - fd).abs() <= 1e-2, "analytic {analytic} vs fd {fd}");
    }

    #[test]
    fn grad_alpha_slope_rejects_zero_start() {
        let m = experiment_model();
        let grid = m.default_grid(100); // starts at 0
        let path = simulate_ou(&m, &DriftFunction::Zero, &grid, 2).unwrap();
        assert!(matches!(
            sure_grad_alpha(&path, 0.3, 0.3, &m, AlphaVariant::Slope, 1e-3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mu_n_two_cell_example() {
        let mu = RiskMeasure::lebesgue();
        let grid = vec![0.0, 0.5, 1.0];
        let m_n = mu_n_discretize(&mu, &grid).unwrap();
        let atoms = m_n.atoms().unwrap();
        assert_eq!(atoms, &[(0.0, 0.5), (0.5, 0.5)]);
    }

    #[test]
    fn mu_n_total_mass_converges() {
        let mu = RiskMeasure::density("ramp", |t: f64| t);
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let grid = uniform_grid(0.0, 1.0, n + 1);
            let m_n = mu_n_discretize(&mu, &grid).unwrap();
            let mass: f64 = m_n.atoms().unwrap().iter().map(|a| a.1).sum();
            errs.push((mass - 0.5).abs());
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
    }

    #[test]
    fn mu_n_sure_error_halves_with_grid() {
        // First-order quadrature: the discretization error of the risk value
        // roughly halves when the grid doubles.
        let m = unit_model();
        let mu = RiskMeasure::canonical(&m);
        let path = ramp_path(4001);
        let continuous = sure_soft(&path, &DriftFunction::Zero, 0.5, &m, &mu).unwrap().value;
        let mut errs = Vec::new();
        for n in [250, 500, 1000] {
            let grid = uniform_grid(0.0, 1.0, n + 1);
            let mu_n = mu_n_discretize(&mu, &grid).unwrap();
            let v = sure_soft(&path, &DriftFunction::Zero, 0.5, &m, &mu_n).unwrap().value;
            errs.push((v - continuous).abs());
        }
        let r1 = errs[1] / errs[0];
        let r2 = errs[2] / errs[1];
        assert!(r1 > 0.3 && r1 < 0.7, "ratio {r1}");
        assert!(r2 > 0.3 && r2 < 0.7, "ratio {r2}");
    }

    #[test]
    fn generic_negation_unbiased_over_replicates() {
        // xi = -x estimates the drift by zero; its risk statistic averages
        // to the weighted drift energy across seeded replicates.
        let m = experiment_model();
        let grid = m.default_grid(300);
        let mu = RiskMeasure::canonical(&m);
        let drift = DriftFunction::Scenario(crate::simulate::Scenario::Simple);
        let f = mu.density_on_grid(&grid).unwrap();
        let diffs: Vec<f64> = (0..200u64)
            .map(|seed| {
                let path = simulate_ou(&m, &drift, &grid, seed).unwrap();
                let sure = sure_generic(&path, |_, x| -x, |_, _| -1.0, &m, &mu).unwrap().value;
                let truth = path.meta.truth.clone().unwrap();
                let sq: Vec<f64> = truth.iter().zip(&f).map(|(&u, &fi)| u * u * fi).collect();
                sure - trapezoid(&grid, &sq)
            })
            .collect();
        let mean = crate::scalar::mean(&diffs);
        let se = crate::scalar::std_error(&diffs);
        assert!(mean.abs() <= 3.0 * se, "mean {mean} vs 3 se {}", 3.0 * se);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn decomposition_is_exact(seed in 0u64..200, lam in 0.0..2.5f64) {
            let m = experiment_model();
            let grid = m.default_grid(200);
            let path = simulate_ou(&m, &DriftFunction::Zero, &grid, seed).unwrap();
            let mu = RiskMeasure::canonical(&m);
            let r = sure_soft(&path, &DriftFunction::Zero, lam, &m, &mu).unwrap();
            let sum = r.components.baseline + r.components.quadratic + r.components.correction;
            prop_assert!((r.value - sum).abs() <= 1e-12);
        }

        #[test]
        fn soft_canonical_lower_bound(seed in 0u64..200, lam in 0.0..3.0f64) {
            // Occupation is at most the horizon, so the risk is >= -T.
            let m = experiment_model();
            let grid = m.default_grid(200);
            let path = simulate_ou(&m, &DriftFunction::Zero, &grid, seed).unwrap();
            let mu = RiskMeasure::canonical(&m);
            let r = sure_soft(&path, &DriftFunction::Zero, lam, &m, &mu).unwrap();
            prop_assert!(r.value >= -1.0 - 1e-12);
        }

        #[test]
        fn soft_canonical_components_identities(seed in 0u64..100, lam in 0.05..2.0f64) {
            // Under the canonical measure the correction is -2 occupation and
            // the quadratic is the trapezoid of the capped standardized square.
            let m = experiment_model();
            let grid = m.default_grid(300);
            let path = simulate_ou(&m, &DriftFunction::Zero, &grid, seed).unwrap();
            let mu = RiskMeasure::canonical(&m);
            let r = sure_soft(&path, &DriftFunction::Zero, lam, &m, &mu).unwrap();
            let std_path = StandardizedPath::new(&path, &DriftFunction::Zero, &m).unwrap();
            let occ = crate::pathstats::occupation_time(&std_path, lam).unwrap();
            prop_assert!((r.components.correction + 2.0 * occ).abs() <= 1e-12);
            let capped: Vec<f64> = std_path.z().iter().map(|&z| (z * z).min(lam * lam)).collect();
            let quad = trapezoid(std_path.grid(), &capped);
            prop_assert!((r.components.quadratic - quad).abs() <= 1e-10);
        }
    }
}

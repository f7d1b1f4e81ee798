//! Covariance models `gamma(s, t)` on `[0, T]` and the risk measures `mu`
//! weighting the L^2 estimation error, together with the baseline risk
//! `integral of gamma(t, t) d mu` attained by the observation itself.

use std::fmt;
use std::sync::Arc;

use crate::linalg::min_eigenvalue;
use crate::scalar::{lit, Real};
use crate::{Error, Result};

/// Tolerance on the smallest eigenvalue when validating tabulated matrices.
const PSD_TOL: f64 = 1e-10;

/// Covariance function of the noise process.
///
/// The variance `gamma(t, t)` must stay strictly positive on the model's
/// domain; Brownian motion therefore carries a start offset `start > 0`
/// (default `horizon / 1000`), since the canonical measure
/// `gamma(t, t)^{-1} dt` diverges at the origin otherwise.
#[derive(Debug, Clone)]
pub enum CovarianceKind<T> {
    /// Stationary exponential kernel `sigma^2 / (2 rate) * exp(-rate |t - s|)`.
    OrnsteinUhlenbeck { rate: T, sigma: T },
    /// `sigma^2 * min(s, t)`, valid on `[start, horizon]`.
    BrownianMotion { sigma: T, start: T },
    /// Values on a fixed grid, queried by bilinear interpolation.
    Tabulated { grid: Vec<T>, matrix: Vec<T> },
}

#[derive(Debug, Clone)]
pub struct CovarianceModel<T> {
    kind: CovarianceKind<T>,
    horizon: T,
}

impl<T: Real> CovarianceModel<T> {
    pub fn ornstein_uhlenbeck(rate: T, sigma: T, horizon: T) -> Result<Self> {
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::Validation(format!("OU rate must be > 0, got {rate}")));
        }
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::Validation(format!("OU sigma must be > 0, got {sigma}")));
        }
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::Validation(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(Self {
            kind: CovarianceKind::OrnsteinUhlenbeck { rate, sigma },
            horizon,
        })
    }

    /// Brownian motion with the default start offset `horizon / 1000`.
    pub fn brownian(sigma: T, horizon: T) -> Result<Self> {
        let start = horizon / lit::<T>(1000.0);
        Self::brownian_with_start(sigma, horizon, start)
    }

    pub fn brownian_with_start(sigma: T, horizon: T, start: T) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::Validation(format!("sigma must be > 0, got {sigma}")));
        }
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::Validation(format!("horizon must be > 0, got {horizon}")));
        }
        if !(start > T::zero() && start < horizon) {
            return Err(Error::Validation(format!(
                "Brownian start offset must lie in (0, horizon), got {start}"
            )));
        }
        Ok(Self {
            kind: CovarianceKind::BrownianMotion { sigma, start },
            horizon,
        })
    }

    /// Tabulated covariance on `grid` (row-major `matrix`, `n * n`). The
    /// horizon is the last grid point. The matrix must be symmetric with a
    /// strictly positive diagonal and positive semi-definite within `1e-10`
    /// on its smallest eigenvalue.
    pub fn tabulated(grid: Vec<T>, matrix: Vec<T>) -> Result<Self> {
        let n = grid.len();
        if n < 2 {
            return Err(Error::Validation("tabulated grid needs >= 2 points".into()));
        }
        if matrix.len() != n * n {
            return Err(Error::Validation(format!(
                "matrix has {} entries, expected {}",
                matrix.len(),
                n * n
            )));
        }
        if grid[0] < T::zero() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "tabulated grid must be strictly increasing and nonnegative".into(),
            ));
        }
        let mut scale = T::zero();
        for i in 0..n {
            let dii = matrix[i * n + i];
            if dii.is_nan() || dii <= T::zero() {
                return Err(Error::Validation(format!(
                    "tabulated variance at grid index {i} is {dii}, must be > 0"
                )));
            }
            scale = scale.max(dii);
            for j in 0..i {
                let asym = (matrix[i * n + j] - matrix[j * n + i]).abs();
                if asym > lit::<T>(1e-12) * scale {
                    return Err(Error::Validation(format!(
                        "tabulated matrix asymmetric at ({i}, {j}): difference {asym}"
                    )));
                }
            }
        }
        let min_eig = min_eigenvalue(&matrix, n)?;
        if min_eig < -lit::<T>(PSD_TOL) * scale.max(T::one()) {
            return Err(Error::Validation(format!(
                "tabulated matrix is not PSD: smallest eigenvalue {min_eig}"
            )));
        }
        let horizon = *grid.last().expect("n >= 2");
        Ok(Self {
            kind: CovarianceKind::Tabulated { grid, matrix },
            horizon,
        })
    }

    pub fn kind(&self) -> &CovarianceKind<T> {
        &self.kind
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// First usable time: the start offset for Brownian motion, the first
    /// tabulated point otherwise, zero for stationary kernels.
    pub fn start(&self) -> T {
        match &self.kind {
            CovarianceKind::OrnsteinUhlenbeck { .. } => T::zero(),
            CovarianceKind::BrownianMotion { start, .. } => *start,
            CovarianceKind::Tabulated { grid, .. } => grid[0],
        }
    }

    /// Covariance value `gamma(s, t)`; symmetric in its arguments exactly.
    pub fn gamma(&self, s: T, t: T) -> Result<T> {
        if !(s >= T::zero() && s <= self.horizon && t >= T::zero() && t <= self.horizon) {
            return Err(Error::Domain(format!(
                "({s}, {t}) outside [0, {}]",
                self.horizon
            )));
        }
        // Canonical argument order keeps symmetry bit-exact.
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        match &self.kind {
            CovarianceKind::OrnsteinUhlenbeck { rate, sigma } => {
                let var = *sigma * *sigma / (lit::<T>(2.0) * *rate);
                Ok(var * (-*rate * (b - a)).exp())
            }
            CovarianceKind::BrownianMotion { sigma, .. } => Ok(*sigma * *sigma * a),
            CovarianceKind::Tabulated { grid, matrix } => {
                let lo = grid[0];
                let hi = *grid.last().expect("nonempty");
                if a < lo || b > hi {
                    return Err(Error::Domain(format!(
                        "({s}, {t}) outside tabulated span [{lo}, {hi}]"
                    )));
                }
                Ok(bilinear(grid, matrix, a, b))
            }
        }
    }

    /// Variance `gamma(t, t)` along the diagonal.
    pub fn variance_at(&self, t: T) -> Result<T> {
        self.gamma(t, t)
    }

    /// Uniform simulation grid with `n` points from `start()` to the horizon.
    pub fn default_grid(&self, n: usize) -> Vec<T> {
        uniform_grid(self.start(), self.horizon, n)
    }

    /// Gram matrix `[gamma(t_i, t_j)]` on a grid, row-major.
    pub fn gram_matrix(&self, grid: &[T]) -> Result<Vec<T>> {
        let n = grid.len();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let g = self.gamma(grid[i], grid[j])?;
                out[i * n + j] = g;
                out[j * n + i] = g;
            }
        }
        Ok(out)
    }
}

impl<T: Real> fmt::Display for CovarianceModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CovarianceKind::OrnsteinUhlenbeck { rate, sigma } => {
                write!(f, "ou(rate={rate},sigma={sigma},horizon={})", self.horizon)
            }
            CovarianceKind::BrownianMotion { sigma, start } => {
                write!(
                    f,
                    "brownian(sigma={sigma},start={start},horizon={})",
                    self.horizon
                )
            }
            CovarianceKind::Tabulated { grid, .. } => {
                write!(f, "tabulated(n={},horizon={})", grid.len(), self.horizon)
            }
        }
    }
}

fn bilinear<T: Real>(grid: &[T], matrix: &[T], a: T, b: T) -> T {
    let n = grid.len();
    let (i, fa) = locate(grid, a);
    let (j, fb) = locate(grid, b);
    let m = |r: usize, c: usize| matrix[r * n + c];
    let one = T::one();
    (one - fa) * (one - fb) * m(i, j)
        + fa * (one - fb) * m(i + 1, j)
        + (one - fa) * fb * m(i, j + 1)
        + fa * fb * m(i + 1, j + 1)
}

/// Cell index and fractional position of `x` in a sorted grid.
fn locate<T: Real>(grid: &[T], x: T) -> (usize, T) {
    let n = grid.len();
    let mut hi = match grid.binary_search_by(|g| g.partial_cmp(&x).expect("finite grid")) {
        Ok(k) => k,
        Err(k) => k,
    };
    if hi == 0 {
        hi = 1;
    }
    if hi > n - 1 {
        hi = n - 1;
    }
    let lo = hi - 1;
    let frac = (x - grid[lo]) / (grid[hi] - grid[lo]);
    (lo, frac.max(T::zero()).min(T::one()))
}

/// Measure `mu` on `[0, T]`: either a density `f(t) dt` or a finite sum of
/// weighted atoms `a_i delta_{t_i}`.
#[derive(Clone)]
pub struct RiskMeasure<T> {
    kind: MeasureKind<T>,
    name: String,
}

#[derive(Clone)]
enum MeasureKind<T> {
    Density(Arc<dyn Fn(T) -> T + Send + Sync>),
    Atomic(Vec<(T, T)>),
}

impl<T: Real> RiskMeasure<T> {
    /// Lebesgue measure `dt`.
    pub fn lebesgue() -> Self {
        Self {
            kind: MeasureKind::Density(Arc::new(|_| T::one())),
            name: "lebesgue".into(),
        }
    }

    /// The canonical measure `gamma(t, t)^{-1} dt` of a model.
    pub fn canonical(model: &CovarianceModel<T>) -> Self {
        let m = model.clone();
        Self {
            kind: MeasureKind::Density(Arc::new(move |t| {
                T::one() / m.variance_at(t).unwrap_or(T::nan())
            })),
            name: "canonical".into(),
        }
    }

    /// Arbitrary nonnegative density.
    pub fn density(name: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            kind: MeasureKind::Density(Arc::new(f)),
            name: name.into(),
        }
    }

    /// Atomic measure; every weight must be strictly positive and finite.
    pub fn atomic(atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Validation("atomic measure needs >= 1 atom".into()));
        }
        for &(t, a) in &atoms {
            if !(a > T::zero() && a.is_finite() && t.is_finite()) {
                return Err(Error::Validation(format!(
                    "atom ({t}, {a}) invalid: weights must be > 0 and finite"
                )));
            }
        }
        let name = format!("atomic(n={})", atoms.len());
        Ok(Self {
            kind: MeasureKind::Atomic(atoms),
            name,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, MeasureKind::Atomic(_))
    }

    pub fn atoms(&self) -> Option<&[(T, T)]> {
        match &self.kind {
            MeasureKind::Atomic(a) => Some(a),
            MeasureKind::Density(_) => None,
        }
    }

    /// Density value at `t`; errors if the density is negative or non-finite.
    pub fn density_at(&self, t: T) -> Result<T> {
        match &self.kind {
            MeasureKind::Density(f) => {
                let v = f(t);
                if !v.is_finite() {
                    Err(Error::Numeric(format!("density non-finite at t={t}: {v}")))
                } else if v < T::zero() {
                    Err(Error::Validation(format!("density negative at t={t}: {v}")))
                } else {
                    Ok(v)
                }
            }
            MeasureKind::Atomic(_) => Err(Error::Domain(
                "atomic measure has no density".into(),
            )),
        }
    }

    /// Density samples on a grid.
    pub fn density_on_grid(&self, grid: &[T]) -> Result<Vec<T>> {
        grid.iter().map(|&t| self.density_at(t)).collect()
    }
}

impl<T: Real> fmt::Debug for RiskMeasure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RiskMeasure({})", self.name)
    }
}

/// `n` equally spaced points from `a` to `b` inclusive, endpoints exact.
pub fn uniform_grid<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "grid needs at least two points");
    let len = lit::<T>((n - 1) as f64);
    let mut g: Vec<T> = (0..n)
        .map(|i| a + (b - a) * lit::<T>(i as f64) / len)
        .collect();
    g[0] = a;
    g[n - 1] = b;
    g
}

/// Composite trapezoid rule for samples on an arbitrary grid.
pub fn trapezoid<T: Real>(grid: &[T], values: &[T]) -> T {
    debug_assert_eq!(grid.len(), values.len());
    let terms: Vec<T> = grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) / lit::<T>(2.0))
        .collect();
    crate::scalar::pairwise_sum(&terms)
}

/// Operation surface mirroring the covariance evaluation contract.
pub fn eval_gamma<T: Real>(model: &CovarianceModel<T>, s: T, t: T) -> Result<T> {
    model.gamma(s, t)
}

/// Baseline risk `integral of gamma(t, t) d mu(t)` of the raw observation.
///
/// Atomic measures are summed exactly. Densities are integrated by the
/// composite trapezoid rule on the simulation-scale grid with Richardson
/// extrapolation, doubling the grid until the extrapolated value moves by
/// less than `1e-9` relatively; failure to settle within the refinement
/// budget is a numeric error.
pub fn baseline_risk<T: Real>(model: &CovarianceModel<T>, mu: &RiskMeasure<T>) -> Result<T> {
    match &mu.kind {
        MeasureKind::Atomic(atoms) => {
            let terms: Vec<T> = atoms
                .iter()
                .map(|&(t, a)| Ok(a * model.variance_at(t)?))
                .collect::<Result<_>>()?;
            Ok(crate::scalar::pairwise_sum(&terms))
        }
        MeasureKind::Density(_) => {
            let g = |t: T| -> Result<T> { Ok(model.variance_at(t)? * mu.density_at(t)?) };
            adaptive_trapezoid(model.start(), model.horizon(), g)
        }
    }
}

const QUAD_REL_TOL: f64 = 1e-9;
const QUAD_MAX_DOUBLINGS: usize = 12;
const QUAD_BASE_SEGMENTS: usize = 1024;

/// Trapezoid quadrature with Richardson extrapolation and grid doubling.
fn adaptive_trapezoid<T: Real>(a: T, b: T, g: impl Fn(T) -> Result<T>) -> Result<T> {
    let mut segments = QUAD_BASE_SEGMENTS;
    let grid = uniform_grid(a, b, segments + 1);
    let vals: Vec<T> = grid.iter().map(|&t| g(t)).collect::<Result<_>>()?;
    let mut trap = trapezoid(&grid, &vals);
    let mut prev_extrap = trap;
    for step in 0..QUAD_MAX_DOUBLINGS {
        // Midpoint refinement: halve the step reusing previous evaluations.
        let h = (b - a) / lit::<T>(segments as f64);
        let mids: Vec<T> = (0..segments)
            .map(|i| g(a + h * (lit::<T>(i as f64) + lit::<T>(0.5))))
            .collect::<Result<_>>()?;
        let mid_sum = crate::scalar::pairwise_sum(&mids);
        let finer = trap / lit::<T>(2.0) + h / lit::<T>(2.0) * mid_sum;
        let extrap = finer + (finer - trap) / lit::<T>(3.0);
        let scale = extrap.abs().max(lit::<T>(1e-30));
        if step > 0 && (extrap - prev_extrap).abs() <= lit::<T>(QUAD_REL_TOL) * scale {
            return Ok(extrap);
        }
        if step == 0 && (extrap - trap).abs() <= lit::<T>(QUAD_REL_TOL) * scale {
            return Ok(extrap);
        }
        prev_extrap = extrap;
        trap = finer;
        segments *= 2;
    }
    Err(Error::Numeric(format!(
        "quadrature did not converge to relative {QUAD_REL_TOL} within {QUAD_MAX_DOUBLINGS} refinements"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ou_experiment() -> CovarianceModel<f64> {
        CovarianceModel::ornstein_uhlenbeck(0.5, 0.05, 1.0).unwrap()
    }

    #[test]
    fn ou_diagonal_value() {
        // sigma^2 / (2a) with the experiment parameters.
        let m = ou_experiment();
        assert_relative_eq!(m.gamma(0.3, 0.3).unwrap(), 0.0025, epsilon = 1e-15);
    }

    #[test]
    fn ou_closed_form_off_diagonal() {
        // a = 1, sigma = sqrt(2): gamma(0, ln 2) = exp(-ln 2) = 1/2.
        let m = CovarianceModel::ornstein_uhlenbeck(1.0, 2f64.sqrt(), 1.0).unwrap();
        assert_relative_eq!(eval_gamma(&m, 0.0, 2f64.ln()).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gamma_domain_checked() {
        let m = ou_experiment();
        assert!(matches!(m.gamma(-0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(m.gamma(0.1, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn brownian_requires_offset() {
        let m = CovarianceModel::brownian(1.0, 1.0).unwrap();
        assert_relative_eq!(m.start(), 1e-3);
        assert_relative_eq!(m.gamma(0.25, 0.75).unwrap(), 0.25);
        assert!(CovarianceModel::brownian_with_start(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_validates() {
        let grid: Vec<f64> = vec![0.0, 0.5, 1.0];
        // Gram matrix of exp(-|s-t|), PSD.
        let mut matrix = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                matrix[i * 3 + j] = (-(grid[i] - grid[j]).abs()).exp();
            }
        }
        let m = CovarianceModel::tabulated(grid, matrix).unwrap();
        assert_relative_eq!(m.gamma(0.5, 0.5).unwrap(), 1.0);
        // Bilinear between nodes, symmetric exactly.
        let v = m.gamma(0.2, 0.7).unwrap();
        assert_eq!(v, m.gamma(0.7, 0.2).unwrap());
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn tabulated_rejects_non_psd() {
        let grid = vec![0.0, 1.0];
        let matrix = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalue -1
        assert!(matches!(
            CovarianceModel::tabulated(grid, matrix),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn baseline_canonical_equals_horizon() {
        let m = ou_experiment();
        let mu = RiskMeasure::canonical(&m);
        assert_relative_eq!(baseline_risk(&m, &mu).unwrap(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn baseline_single_atom() {
        let m = ou_experiment();
        let mu = RiskMeasure::atomic(vec![(0.5, 1.0)]).unwrap();
        assert_relative_eq!(baseline_risk(&m, &mu).unwrap(), 0.0025, epsilon = 1e-15);
    }

    #[test]
    fn baseline_brownian_lebesgue() {
        // integral of t over [t0, 1] with t0 = 1e-3.
        let m = CovarianceModel::brownian(1.0, 1.0).unwrap();
        let v = baseline_risk(&m, &RiskMeasure::lebesgue()).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-6);
        assert_relative_eq!(v, (1.0 - 1e-6) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn baseline_curved_density_matches_closed_form() {
        // OU variance is constant, so integral gamma * f = 0.0025 * integral f.
        let m = ou_experiment();
        let mu = RiskMeasure::density("quadratic", |t: f64| t * t);
        assert_relative_eq!(
            baseline_risk(&m, &mu).unwrap(),
            0.0025 / 3.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn atomic_rejects_nonpositive_weights() {
        assert!(RiskMeasure::atomic(vec![(0.5_f64, 0.0)]).is_err());
        assert!(RiskMeasure::atomic(vec![(0.5_f64, -1.0)]).is_err());
    }

    #[test]
    fn canonical_density_is_inverse_variance() {
        let m = ou_experiment();
        let mu = RiskMeasure::canonical(&m);
        assert_relative_eq!(mu.density_at(0.3).unwrap(), 400.0, epsilon = 1e-9);
    }

    #[test]
    fn works_in_single_precision() {
        let m = CovarianceModel::<f32>::ornstein_uhlenbeck(0.5, 0.05, 1.0).unwrap();
        assert!((m.gamma(0.2, 0.2).unwrap() - 0.0025).abs() < 1e-9);
    }

    #[test]
    fn gram_matrix_is_psd_for_ou_and_brownian() {
        let grid: Vec<f64> = uniform_grid(0.0, 1.0, 24);
        let m = ou_experiment();
        let gram = m.gram_matrix(&grid).unwrap();
        assert!(crate::linalg::min_eigenvalue(&gram, 24).unwrap() >= -1e-8);

        let bm = CovarianceModel::brownian(1.0, 1.0).unwrap();
        let bgrid = bm.default_grid(24);
        let bgram = bm.gram_matrix(&bgrid).unwrap();
        assert!(crate::linalg::min_eigenvalue(&bgram, 24).unwrap() >= -1e-8);
    }

    proptest! {
        #[test]
        fn gamma_symmetric_exactly(s in 0.0..1.0f64, t in 0.0..1.0f64) {
            let m = ou_experiment();
            prop_assert_eq!(m.gamma(s, t).unwrap(), m.gamma(t, s).unwrap());
            let bm = CovarianceModel::brownian(1.3, 1.0).unwrap();
            prop_assert_eq!(bm.gamma(s, t).unwrap(), bm.gamma(t, s).unwrap());
        }

        #[test]
        fn variance_positive(t in 0.0..1.0f64) {
            let m = ou_experiment();
            prop_assert!(m.variance_at(t).unwrap() > 0.0);
        }
    }
}

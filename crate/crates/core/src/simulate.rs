//! Seeded generation of drifted Gaussian sample paths `X_t = u_t + X^u_t`.
//!
//! Three samplers are provided: the exact stationary AR(1) recursion for
//! Ornstein-Uhlenbeck noise, a Cholesky factor sampler for any valid
//! covariance, and a truncated Karhunen-Loeve expansion built from the
//! Nystrom discretization of the covariance operator under Lebesgue weight.
//! All samplers are bit-reproducible for a fixed 64-bit seed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::{CovarianceKind, CovarianceModel};
use crate::linalg::{cholesky, lower_tri_mul, symmetric_eigen};
use crate::scalar::{lit, Real};
use crate::{Error, Result};

/// Deterministic drift `u_t` or shrinkage center `alpha(t)`.
#[derive(Debug, Clone)]
pub enum DriftFunction<T> {
    Zero,
    Constant(T),
    /// `t -> slope * t`.
    Linear(T),
    /// Values on an explicit time grid, linearly interpolated, constant
    /// beyond the endpoints.
    Tabulated { times: Vec<T>, values: Vec<T> },
    /// Named experiment drift.
    Scenario(Scenario),
}

/// The three experiment drifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `0.2 * max(0, sin(3 pi t))`, de-noised around level 0.
    Simple,
    /// `0.3 + 0.2 * sign(sin(2 pi t)) * max(0, sin(3 pi t))`, level 0.3.
    Level,
    /// `0.3 t + 0.2 * sign(sin(2 pi t)) * max(0, sin(3 pi t))`, slope 0.3.
    Slope,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Simple => "simple",
            Scenario::Level => "level",
            Scenario::Slope => "slope",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "simple" => Some(Scenario::Simple),
            "level" => Some(Scenario::Level),
            "slope" => Some(Scenario::Slope),
            _ => None,
        }
    }
}

/// Sign with `sign(0) = 0`, independent of float zero signs.
fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl<T: Real> DriftFunction<T> {
    pub fn tabulated(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "tabulated drift length mismatch: {} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "tabulated drift times must be nonempty and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("tabulated drift values must be finite".into()));
        }
        Ok(DriftFunction::Tabulated { times, values })
    }

    pub fn eval(&self, t: T) -> T {
        match self {
            DriftFunction::Zero => T::zero(),
            DriftFunction::Constant(c) => *c,
            DriftFunction::Linear(slope) => *slope * t,
            DriftFunction::Tabulated { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().expect("nonempty") {
                    return *values.last().expect("nonempty");
                }
                let hi = times.partition_point(|&x| x < t).max(1);
                let lo = hi - 1;
                let frac = (t - times[lo]) / (times[hi] - times[lo]);
                values[lo] + (values[hi] - values[lo]) * frac
            }
            DriftFunction::Scenario(s) => {
                let pi = T::PI();
                let three = lit::<T>(3.0);
                let bump = lit::<T>(0.2) * T::zero().max((three * pi * t).sin());
                match s {
                    Scenario::Simple => bump,
                    Scenario::Level => {
                        lit::<T>(0.3) + sign((lit::<T>(2.0) * pi * t).sin()) * bump
                    }
                    Scenario::Slope => {
                        lit::<T>(0.3) * t + sign((lit::<T>(2.0) * pi * t).sin()) * bump
                    }
                }
            }
        }
    }

    pub fn eval_on_grid(&self, grid: &[T]) -> Vec<T> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DriftFunction::Zero)
    }
}

impl<T: Real> fmt::Display for DriftFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftFunction::Zero => write!(f, "zero"),
            DriftFunction::Constant(c) => write!(f, "constant({c})"),
            DriftFunction::Linear(s) => write!(f, "linear({s})"),
            DriftFunction::Tabulated { times, .. } => write!(f, "tabulated(n={})", times.len()),
            DriftFunction::Scenario(s) => write!(f, "scenario({})", s.name()),
        }
    }
}

/// Provenance of a simulated path.
#[derive(Debug, Clone)]
pub struct PathMeta<T> {
    pub model: String,
    pub seed: u64,
    pub drift: Option<String>,
    /// True drift sampled on the grid, when the path was simulated.
    pub truth: Option<Vec<T>>,
}

/// A discretized trajectory on a strictly increasing time grid.
#[derive(Debug, Clone)]
pub struct SamplePath<T> {
    grid: Vec<T>,
    values: Vec<T>,
    pub meta: PathMeta<T>,
}

impl<T: Real> SamplePath<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>, meta: PathMeta<T>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Domain("empty grid".into()));
        }
        if grid.len() != values.len() {
            return Err(Error::Validation(format!(
                "grid/value length mismatch: {} vs {}",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] < T::zero() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "grid must be strictly increasing and nonnegative".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("path values must be finite".into()));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn horizon(&self) -> T {
        *self.grid.last().expect("nonempty")
    }

    /// Replaces the value column, keeping grid and provenance.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.meta.clone())
    }
}

fn validate_grid_for_model<T: Real>(model: &CovarianceModel<T>, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("grid must be strictly increasing".into()));
    }
    let last = *grid.last().expect("nonempty");
    if grid[0] < model.start() || last != model.horizon() {
        return Err(Error::Domain(format!(
            "grid must cover [{}, {}], got [{}, {}]",
            model.start(),
            model.horizon(),
            grid[0],
            last
        )));
    }
    Ok(())
}

/// Exact stationary sampling of Ornstein-Uhlenbeck noise plus drift.
///
/// The initial value is drawn from the stationary law `N(0, sigma^2 / 2a)`
/// and transitions follow the exact AR(1) recursion with autocorrelation
/// `exp(-a dt)`, so no discretization error enters the noise law.
pub fn simulate_ou<T: Real>(
    model: &CovarianceModel<T>,
    drift: &DriftFunction<T>,
    grid: &[T],
    seed: u64,
) -> Result<SamplePath<T>>
where
    StandardNormal: Distribution<T>,
{
    let (rate, var) = match model.kind() {
        CovarianceKind::OrnsteinUhlenbeck { rate, sigma } => {
            (*rate, *sigma * *sigma / (lit::<T>(2.0) * *rate))
        }
        _ => {
            return Err(Error::Model(format!(
                "simulate_ou requires an Ornstein-Uhlenbeck model, got {model}"
            )))
        }
    };
    validate_grid_for_model(model, grid)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut noise = Vec::with_capacity(grid.len());
    let z0: T = rng.sample(StandardNormal);
    let mut x = var.sqrt() * z0;
    noise.push(x);
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let rho = (-rate * dt).exp();
        let innov_sd = (var * (T::one() - rho * rho)).sqrt();
        let z: T = rng.sample(StandardNormal);
        x = rho * x + innov_sd * z;
        noise.push(x);
    }
    let truth = drift.eval_on_grid(grid);
    let values: Vec<T> = truth.iter().zip(&noise).map(|(&u, &n)| u + n).collect();
    SamplePath::new(
        grid.to_vec(),
        values,
        PathMeta {
            model: model.to_string(),
            seed,
            drift: Some(drift.to_string()),
            truth: Some(truth),
        },
    )
}

/// Reusable Cholesky factor of a Gram matrix; factors once, samples many.
pub struct CholeskySampler<T> {
    model_id: String,
    grid: Vec<T>,
    factor: Vec<T>,
}

impl<T: Real> CholeskySampler<T> {
    pub fn new(model: &CovarianceModel<T>, grid: &[T]) -> Result<Self> {
        validate_grid_for_model(model, grid)?;
        let n = grid.len();
        let gram = model.gram_matrix(grid)?;
        let factor = match cholesky(&gram, n) {
            Ok(l) => l,
            Err(_) => {
                // Retry once with diagonal jitter before giving up.
                let scale = (0..n)
                    .map(|i| gram[i * n + i])
                    .fold(T::zero(), |a, b| a.max(b));
                let jitter = lit::<T>(1e-10) * scale.max(T::one());
                let mut bumped = gram;
                for i in 0..n {
                    bumped[i * n + i] += jitter;
                }
                cholesky(&bumped, n).map_err(|_| {
                    Error::Numeric(
                        "Gram matrix is not positive semi-definite within jitter 1e-10".into(),
                    )
                })?
            }
        };
        Ok(Self {
            model_id: model.to_string(),
            grid: grid.to_vec(),
            factor,
        })
    }

    pub fn sample(&self, drift: &DriftFunction<T>, seed: u64) -> Result<SamplePath<T>>
    where
        StandardNormal: Distribution<T>,
    {
        let n = self.grid.len();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let z: Vec<T> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let noise = lower_tri_mul(&self.factor, n, &z);
        let truth = drift.eval_on_grid(&self.grid);
        let values: Vec<T> = truth.iter().zip(&noise).map(|(&u, &x)| u + x).collect();
        SamplePath::new(
            self.grid.clone(),
            values,
            PathMeta {
                model: self.model_id.clone(),
                seed,
                drift: Some(drift.to_string()),
                truth: Some(truth),
            },
        )
    }
}

/// Exact sampler for any valid covariance: `values = drift + L z` with
/// `L L^T` the Gram matrix on the grid.
pub fn simulate_cholesky<T: Real>(
    model: &CovarianceModel<T>,
    drift: &DriftFunction<T>,
    grid: &[T],
    seed: u64,
) -> Result<SamplePath<T>>
where
    StandardNormal: Distribution<T>,
{
    CholeskySampler::new(model, grid)?.sample(drift, seed)
}

/// Nystrom discretization of the covariance operator under Lebesgue weight:
/// eigenpairs of `W^{1/2} K W^{1/2}` with trapezoid weights `W`, rescaled to
/// basis functions orthonormal in the weighted inner product.
pub struct KlBasis<T> {
    model_id: String,
    grid: Vec<T>,
    /// Eigenvalues of the discretized operator, descending, clamped at zero.
    pub eigenvalues: Vec<T>,
    /// Basis function values, row-major: `functions[i * n + k]` is `h_k(t_i)`.
    functions: Vec<T>,
}

impl<T: Real> KlBasis<T> {
    pub fn new(model: &CovarianceModel<T>, grid: &[T]) -> Result<Self> {
        validate_grid_for_model(model, grid)?;
        let n = grid.len();
        if n < 2 {
            return Err(Error::Domain("KL basis needs >= 2 grid points".into()));
        }
        let mut weights = vec![T::zero(); n];
        for i in 0..n - 1 {
            let half = (grid[i + 1] - grid[i]) / lit::<T>(2.0);
            weights[i] += half;
            weights[i + 1] += half;
        }
        let gram = model.gram_matrix(grid)?;
        let mut b = vec![T::zero(); n * n];
        let sqrt_w: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = sqrt_w[i] * gram[i * n + j] * sqrt_w[j];
            }
        }
        let eig = symmetric_eigen(&b, n)?;
        let eigenvalues: Vec<T> = eig.values.iter().map(|&v| v.max(T::zero())).collect();
        let mut functions = vec![T::zero(); n * n];
        for k in 0..n {
            for i in 0..n {
                functions[i * n + k] = eig.vector_component(k, i) / sqrt_w[i];
            }
        }
        Ok(Self {
            model_id: model.to_string(),
            grid: grid.to_vec(),
            eigenvalues,
            functions,
        })
    }

    /// Marginal variance of the truncated expansion at every grid point.
    pub fn marginal_variance(&self, n_terms: usize) -> Vec<T> {
        let n = self.grid.len();
        let k_max = n_terms.min(n);
        (0..n)
            .map(|i| {
                (0..k_max)
                    .map(|k| {
                        let h = self.functions[i * n + k];
                        self.eigenvalues[k] * h * h
                    })
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }

    /// Fraction of total operator variance captured by the leading terms.
    pub fn captured_fraction(&self, n_terms: usize) -> T {
        let total: T = self.eigenvalues.iter().copied().fold(T::zero(), |a, b| a + b);
        if total == T::zero() {
            return T::one();
        }
        let head: T = self.eigenvalues[..n_terms.min(self.eigenvalues.len())]
            .iter()
            .copied()
            .fold(T::zero(), |a, b| a + b);
        head / total
    }

    pub fn sample(
        &self,
        drift: &DriftFunction<T>,
        n_terms: usize,
        seed: u64,
    ) -> Result<SamplePath<T>>
    where
        StandardNormal: Distribution<T>,
    {
        if n_terms == 0 {
            return Err(Error::Domain("n_terms must be >= 1".into()));
        }
        let n = self.grid.len();
        let k_max = n_terms.min(n);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let coeffs: Vec<T> = (0..k_max)
            .map(|k| {
                let z: T = rng.sample(StandardNormal);
                self.eigenvalues[k].sqrt() * z
            })
            .collect();
        let truth = drift.eval_on_grid(&self.grid);
        let values: Vec<T> = (0..n)
            .map(|i| {
                let noise = (0..k_max)
                    .map(|k| self.functions[i * n + k] * coeffs[k])
                    .fold(T::zero(), |a, b| a + b);
                truth[i] + noise
            })
            .collect();
        SamplePath::new(
            self.grid.clone(),
            values,
            PathMeta {
                model: self.model_id.clone(),
                seed,
                drift: Some(drift.to_string()),
                truth: Some(truth),
            },
        )
    }
}

/// Truncated Karhunen-Loeve sampler. The truncation bias is the discarded
/// eigenvalue mass: with `n_terms` equal to the grid size the expansion
/// reproduces the Gram matrix exactly.
pub fn simulate_kl<T: Real>(
    model: &CovarianceModel<T>,
    drift: &DriftFunction<T>,
    grid: &[T],
    n_terms: usize,
    seed: u64,
) -> Result<SamplePath<T>>
where
    StandardNormal: Distribution<T>,
{
    KlBasis::new(model, grid)?.sample(drift, n_terms, seed)
}

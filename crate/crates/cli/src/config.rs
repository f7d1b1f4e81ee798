//! Experiment configuration: flat key-value TOML with sections. Unknown keys
//! are errors, not warnings — a silently ignored typo would corrupt an
//! experiment.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use suredrift::covariance::uniform_grid;
use suredrift::montecarlo::StatisticSet;
use suredrift::shrinkage::ThresholdKind;
use suredrift::{
    CovarianceModel64, DriftFunction64, Error, Result, RiskMeasure64, Scenario, SearchSpace64,
    ThresholdSpec64,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// simple | level | slope | custom
    pub scenario: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub drift: Option<DriftSection>,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    pub horizon: Option<f64>,
    /// Brownian start offset; defaults to horizon / 1000.
    pub start: Option<f64>,
    /// Tabulated covariance support.
    pub grid: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: "ou".into(),
            a: None,
            sigma: None,
            horizon: None,
            start: None,
            grid: None,
            matrix: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 1000 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub kind: String,
    pub atoms: Option<Vec<(f64, f64)>>,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            kind: "canonical".into(),
            atoms: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub kind: String,
    pub value: Option<f64>,
    pub slope: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub kind: String,
    pub alpha: f64,
    pub lambda: f64,
    pub bandwidth: Option<f64>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            kind: "soft".into(),
            alpha: 0.0,
            lambda: 0.3,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub r: f64,
    pub lambda_floor: f64,
    pub lambda_points: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    pub refine: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            r: 1.01,
            lambda_floor: suredrift::optimize::DEFAULT_LAMBDA_FLOOR,
            lambda_points: 200,
            alpha_min: 0.0,
            alpha_max: 0.6,
            alpha_points: 60,
            refine: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub n_reps: usize,
    pub statistics: Vec<String>,
    pub lambdas: Vec<f64>,
    pub coverage_r: f64,
    pub coverage_horizons: Vec<f64>,
    pub coverage_reps: Option<usize>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            n_reps: 400,
            statistics: vec![
                "unbiasedness".into(),
                "risk_bound".into(),
                "coverage".into(),
                "baseline_efficiency".into(),
            ],
            lambdas: vec![0.5, 1.0, 2.0],
            coverage_r: 1.5,
            coverage_horizons: vec![10.0, 100.0, 1000.0],
            coverage_reps: Some(300),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Which parameter family a run searches over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// One-dimensional level search around a fixed center.
    LevelOnly,
    /// Joint (constant center, level) search.
    JointLevel,
    /// Joint (slope, level) search.
    JointSlope,
}

/// Fully validated run plan; every command starts from one of these.
pub struct ResolvedConfig {
    pub scenario_name: String,
    pub run_kind: RunKind,
    pub model: CovarianceModel64,
    pub grid: Vec<f64>,
    pub measure: RiskMeasure64,
    pub drift: DriftFunction64,
    /// Fixed center for level-only runs.
    pub center: DriftFunction64,
    pub threshold: ThresholdSpec64,
    pub bandwidth: Option<f64>,
    pub search: SearchSpace64,
    pub validate: ValidateSection,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config_hash: String,
}

impl ResolvedConfig {
    /// Parses and validates the TOML text; `seed_override` and
    /// `out_override` take precedence over the file (flag > env > file).
    pub fn from_toml(
        text: &str,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| Error::Parse(format!("config: {e}")))?;
        let seed = seed_override.or(raw.seed).unwrap_or(0);

        let model = build_model(&raw.model)?;
        let horizon = model.horizon();
        let n = raw.grid.n;
        if n < 2 {
            return Err(Error::Validation("grid.n must be >= 2".into()));
        }

        let (run_kind, drift): (RunKind, DriftFunction64) = match raw.scenario.as_str() {
            "simple" => (RunKind::LevelOnly, DriftFunction64::Scenario(Scenario::Simple)),
            "level" => (RunKind::JointLevel, DriftFunction64::Scenario(Scenario::Level)),
            "slope" => (RunKind::JointSlope, DriftFunction64::Scenario(Scenario::Slope)),
            "custom" => (RunKind::LevelOnly, build_drift(raw.drift.as_ref())?),
            other => {
                return Err(Error::Validation(format!(
                    "unknown scenario {other:?}; expected simple | level | slope | custom"
                )))
            }
        };
        if raw.scenario != "custom" && raw.drift.is_some() {
            return Err(Error::Validation(
                "[drift] section is only valid for the custom scenario".into(),
            ));
        }

        // The slope center divides by t, so slope runs start one step in.
        let grid_start = match run_kind {
            RunKind::JointSlope => {
                let step = (horizon - model.start()) / n as f64;
                model.start().max(step)
            }
            _ => model.start(),
        };
        let grid = uniform_grid(grid_start, horizon, n);

        let measure = build_measure(&raw.measure, &model)?;

        let threshold_kind = match raw.threshold.kind.as_str() {
            "soft" => ThresholdKind::Soft,
            "hard" => ThresholdKind::Hard,
            other => {
                return Err(Error::Validation(format!(
                    "unknown threshold kind {other:?}; expected soft | hard"
                )))
            }
        };
        let center = if raw.threshold.alpha == 0.0 {
            DriftFunction64::Zero
        } else {
            DriftFunction64::Constant(raw.threshold.alpha)
        };
        let threshold = ThresholdSpec64::new(threshold_kind, center.clone(), raw.threshold.lambda)?;

        let s = &raw.search;
        if s.r.is_nan() || s.r <= 1.0 {
            eprintln!(
                "warning: search.r = {} is not > 1; the level-range coverage guarantee does not apply",
                s.r
            );
        }
        // One-dimensional sweeps use the long lambda grid; joint sweeps use a
        // square alpha_points x alpha_points grid.
        let search = SearchSpace64 {
            lambda_max: suredrift::optimize::c_of_t_with_floor(horizon, s.r, s.lambda_floor),
            lambda_points: if run_kind == RunKind::LevelOnly {
                s.lambda_points
            } else {
                s.alpha_points
            },
            alpha_range: (s.alpha_min, s.alpha_max),
            alpha_points: s.alpha_points,
            refine: s.refine,
            alternate_margin: 0.05,
        };

        let out_dir = out_override
            .or(raw.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));

        // Provenance hash: the raw config text plus the effective seed.
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update(seed.to_le_bytes());
        let digest = hasher.finalize();
        let config_hash: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();

        Ok(Self {
            scenario_name: raw.scenario,
            run_kind,
            model,
            grid,
            measure,
            drift,
            center,
            threshold,
            bandwidth: raw.threshold.bandwidth,
            search,
            validate: raw.validate,
            seed,
            out_dir,
            config_hash,
        })
    }

    pub fn statistic_set(&self) -> Result<StatisticSet> {
        let mut set = StatisticSet {
            unbiasedness: false,
            risk_bound: false,
            coverage: false,
            baseline_efficiency: false,
        };
        for name in &self.validate.statistics {
            match name.as_str() {
                "unbiasedness" => set.unbiasedness = true,
                "risk_bound" => set.risk_bound = true,
                "coverage" => set.coverage = true,
                "baseline_efficiency" => set.baseline_efficiency = true,
                other => {
                    return Err(Error::Validation(format!(
                        "unknown statistic {other:?} in validate.statistics"
                    )))
                }
            }
        }
        Ok(set)
    }
}

fn build_model(section: &ModelSection) -> Result<CovarianceModel64> {
    match section.kind.as_str() {
        "ou" => CovarianceModel64::ornstein_uhlenbeck(
            section.a.unwrap_or(0.5),
            section.sigma.unwrap_or(0.05),
            section.horizon.unwrap_or(1.0),
        ),
        "brownian" => {
            let sigma = section.sigma.unwrap_or(1.0);
            let horizon = section.horizon.unwrap_or(1.0);
            match section.start {
                Some(start) => CovarianceModel64::brownian_with_start(sigma, horizon, start),
                None => CovarianceModel64::brownian(sigma, horizon),
            }
        }
        "tabulated" => {
            let grid = section
                .grid
                .clone()
                .ok_or_else(|| Error::Validation("tabulated model requires model.grid".into()))?;
            let rows = section
                .matrix
                .clone()
                .ok_or_else(|| Error::Validation("tabulated model requires model.matrix".into()))?;
            let n = grid.len();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Validation(format!(
                    "model.matrix must be {n} rows of {n} values"
                )));
            }
            CovarianceModel64::tabulated(grid, rows.into_iter().flatten().collect())
        }
        other => Err(Error::Validation(format!(
            "unknown model kind {other:?}; expected ou | brownian | tabulated"
        ))),
    }
}

fn build_measure(section: &MeasureSection, model: &CovarianceModel64) -> Result<RiskMeasure64> {
    match section.kind.as_str() {
        "canonical" => Ok(RiskMeasure64::canonical(model)),
        "lebesgue" => Ok(RiskMeasure64::lebesgue()),
        "atomic" => {
            let atoms = section
                .atoms
                .clone()
                .ok_or_else(|| Error::Validation("atomic measure requires measure.atoms".into()))?;
            RiskMeasure64::atomic(atoms)
        }
        other => Err(Error::Validation(format!(
            "unknown measure kind {other:?}; expected canonical | lebesgue | atomic"
        ))),
    }
}

fn build_drift(section: Option<&DriftSection>) -> Result<DriftFunction64> {
    let Some(section) = section else {
        return Ok(DriftFunction64::Zero);
    };
    match section.kind.as_str() {
        "zero" => Ok(DriftFunction64::Zero),
        "constant" => Ok(DriftFunction64::Constant(section.value.ok_or_else(|| {
            Error::Validation("constant drift requires drift.value".into())
        })?)),
        "linear" => Ok(DriftFunction64::Linear(section.slope.ok_or_else(|| {
            Error::Validation("linear drift requires drift.slope".into())
        })?)),
        "tabulated" => {
            let times = section.times.clone().ok_or_else(|| {
                Error::Validation("tabulated drift requires drift.times".into())
            })?;
            let values = section.values.clone().ok_or_else(|| {
                Error::Validation("tabulated drift requires drift.values".into())
            })?;
            DriftFunction64::tabulated(times, values)
        }
        other => Err(Error::Validation(format!(
            "unknown drift kind {other:?}; expected zero | constant | linear | tabulated"
        ))),
    }
}

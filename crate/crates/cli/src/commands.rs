//! The five experiment commands. Each writes its results under the output
//! directory with the configuration hash and seed in every file header, so
//! a rerun with identical inputs reproduces the files byte for byte.

use std::path::PathBuf;

use suredrift::covariance::CovarianceKind;
use suredrift::io::{
    read_path_csv, write_denoised_csv, write_mc_report, write_optimum, write_path_csv,
    write_surface_csv, FileMeta,
};
use suredrift::montecarlo::{run_validation_suite, McConfig, McScenario, ValidationOptions};
use suredrift::optimize::{minimize_joint, minimize_lambda, sweep_joint, sweep_lambda};
use suredrift::shrinkage::{apply_estimator, ThresholdKind};
use suredrift::simulate::{simulate_cholesky, simulate_ou};
use suredrift::sure::AlphaVariant;
use suredrift::{DriftFunction64, Error, OptimResult64, Result, SamplePath64, ThresholdSpec64};

use crate::config::{ResolvedConfig, RunKind};

fn file_meta(cfg: &ResolvedConfig) -> FileMeta {
    FileMeta {
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
    }
}

fn path_file(cfg: &ResolvedConfig) -> PathBuf {
    cfg.out_dir.join("path.csv")
}

/// Simulates the configured scenario and writes `path.csv` (`t,x,u`).
pub fn cmd_simulate(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let path = simulate(cfg)?;
    let file = path_file(cfg);
    write_path_csv(&file, &path, &file_meta(cfg))?;
    Ok(vec![file])
}

fn simulate(cfg: &ResolvedConfig) -> Result<SamplePath64> {
    match cfg.model.kind() {
        CovarianceKind::OrnsteinUhlenbeck { .. } => {
            simulate_ou(&cfg.model, &cfg.drift, &cfg.grid, cfg.seed)
        }
        _ => simulate_cholesky(&cfg.model, &cfg.drift, &cfg.grid, cfg.seed),
    }
}

fn load_input(cfg: &ResolvedConfig) -> Result<SamplePath64> {
    let file = path_file(cfg);
    if !file.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "input path file {} not found; run --command simulate first",
                file.display()
            ),
        )));
    }
    read_path_csv(&file)
}

/// Sweeps the risk surface over the configured grid and writes
/// `surface.csv` (`alpha,lambda,sure,baseline,quadratic,correction`).
pub fn cmd_sweep(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let path = load_input(cfg)?;
    let trace = match cfg.run_kind {
        RunKind::LevelOnly => sweep_lambda(&path, &cfg.center, &cfg.search, &cfg.model)?,
        RunKind::JointLevel => sweep_joint(&path, AlphaVariant::Level, &cfg.search, &cfg.model)?,
        RunKind::JointSlope => sweep_joint(&path, AlphaVariant::Slope, &cfg.search, &cfg.model)?,
    };
    let file = cfg.out_dir.join("surface.csv");
    write_surface_csv(&file, &trace, &file_meta(cfg))?;
    Ok(vec![file])
}

fn optimize(cfg: &ResolvedConfig, path: &SamplePath64) -> Result<(OptimResult64, DriftFunction64)> {
    match cfg.run_kind {
        RunKind::LevelOnly => {
            let r = minimize_lambda(path, &cfg.center, &cfg.search, &cfg.model)?;
            Ok((r, cfg.center.clone()))
        }
        RunKind::JointLevel => {
            let r = minimize_joint(path, AlphaVariant::Level, &cfg.search, &cfg.model)?;
            let center = DriftFunction64::Constant(r.alpha_star);
            Ok((r, center))
        }
        RunKind::JointSlope => {
            let r = minimize_joint(path, AlphaVariant::Slope, &cfg.search, &cfg.model)?;
            let center = DriftFunction64::Linear(r.alpha_star);
            Ok((r, center))
        }
    }
}

/// Minimizes the risk surface, then writes `optimum.txt` and the de-noised
/// path at the optimum as `denoised.csv`.
pub fn cmd_optimize(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let path = load_input(cfg)?;
    let (result, center) = optimize(cfg, &path)?;
    let spec = ThresholdSpec64::new(ThresholdKind::Soft, center, result.lambda_star)?;
    let denoised = apply_estimator(&path, &spec, &cfg.model)?;
    let meta = file_meta(cfg);
    let opt_file = cfg.out_dir.join("optimum.txt");
    write_optimum(&opt_file, &result, &meta)?;
    let den_file = cfg.out_dir.join("denoised.csv");
    write_denoised_csv(&den_file, &denoised, &meta)?;
    Ok(vec![opt_file, den_file])
}

/// Applies the configured threshold spec as-is and writes `denoised.csv`.
pub fn cmd_denoise(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let path = load_input(cfg)?;
    let denoised = apply_estimator(&path, &cfg.threshold, &cfg.model)?;
    let file = cfg.out_dir.join("denoised.csv");
    write_denoised_csv(&file, &denoised, &file_meta(cfg))?;
    Ok(vec![file])
}

/// Runs the configured replication checks; writes `report.txt` and
/// `report.csv` and returns whether every statistic passed.
pub fn cmd_validate(cfg: &ResolvedConfig) -> Result<(bool, Vec<PathBuf>)> {
    let mc = McConfig {
        n_reps: cfg.validate.n_reps,
        seed_base: cfg.seed,
        scenario: McScenario {
            model: cfg.model.clone(),
            drift: cfg.drift.clone(),
            alpha: cfg.center.clone(),
            measure: cfg.measure.clone(),
            grid: cfg.grid.clone(),
        },
        statistics: cfg.statistic_set()?,
    };
    let opts = ValidationOptions {
        threshold: cfg.threshold.clone(),
        risk_bound_alpha: cfg.center.clone(),
        risk_bound_lambdas: cfg.validate.lambdas.clone(),
        coverage_r: cfg.validate.coverage_r,
        coverage_horizons: cfg.validate.coverage_horizons.clone(),
        coverage_reps: cfg.validate.coverage_reps,
    };
    let report = run_validation_suite(&mc, &opts)?;
    let meta = file_meta(cfg);
    let txt = cfg.out_dir.join("report.txt");
    let csv = cfg.out_dir.join("report.csv");
    write_mc_report(&txt, &csv, &report, &meta)?;
    Ok((report.all_passed(), vec![txt, csv]))
}

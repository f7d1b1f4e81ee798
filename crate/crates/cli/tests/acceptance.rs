//! Acceptance criterion 10 (byte-identical reruns) plus the command-level
//! contracts: file schemas, scenario drifts, sweep/optimize consistency and
//! validation exit behavior.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

use suredrift::Error;
use suredrift_cli::config::ResolvedConfig;
use suredrift_cli::{run_command, CommandName};

const SIMPLE: &str = "scenario = \"simple\"\nseed = 42\n";
const LEVEL: &str = "scenario = \"level\"\nseed = 42\n";

fn resolve(text: &str, out: &Path) -> ResolvedConfig {
    ResolvedConfig::from_toml(text, None, Some(out.to_path_buf())).unwrap()
}

fn run(text: &str, out: &Path, command: CommandName) -> Vec<PathBuf> {
    run_command(command, &resolve(text, out)).unwrap().files
}

fn data_rows(file: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let validate_cfg = "scenario = \"simple\"\nseed = 9\n\n[validate]\nn_reps = 40\nstatistics = [\"unbiasedness\", \"risk_bound\"]\nlambdas = [0.5]\ncoverage_r = 1.5\ncoverage_horizons = [5.0]\n";
    let commands: [(&str, &[CommandName]); 2] = [
        (
            SIMPLE,
            &[
                CommandName::Simulate,
                CommandName::Sweep,
                CommandName::Optimize,
                CommandName::Denoise,
            ],
        ),
        (validate_cfg, &[CommandName::Simulate, CommandName::Validate]),
    ];
    for (cfg_text, names) in commands {
        let (dir_a, dir_b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        for name in names {
            let files_a = run(cfg_text, dir_a.path(), *name);
            let files_b = run(cfg_text, dir_b.path(), *name);
            assert_eq!(files_a.len(), files_b.len());
            for (a, b) in files_a.iter().zip(&files_b) {
                assert_eq!(
                    fs::read(a).unwrap(),
                    fs::read(b).unwrap(),
                    "{name:?}: {} differs from {}",
                    a.display(),
                    b.display()
                );
            }
        }
    }

    // Same through the installed binary.
    let dir = TempDir::new().unwrap();
    let cfg_file = dir.path().join("exp.toml");
    fs::write(&cfg_file, SIMPLE).unwrap();
    let run_bin = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_suredrift"))
            .args([
                "--config",
                cfg_file.to_str().unwrap(),
                "--command",
                "simulate",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    run_bin(&out_a);
    run_bin(&out_b);
    assert_eq!(
        fs::read(out_a.join("path.csv")).unwrap(),
        fs::read(out_b.join("path.csv")).unwrap()
    );
    println!("criterion 10: PASS - reruns with identical config and seed are byte-identical for every command");
}

#[test]
fn simulate_writes_scenario_drift() {
    let dir = TempDir::new().unwrap();
    let files = run(SIMPLE, dir.path(), CommandName::Simulate);
    let rows = data_rows(&files[0]);
    assert_eq!(rows.len(), 1000);
    for row in rows.iter().step_by(97) {
        let (t, u) = (row[0], row[2]);
        let expect = 0.2 * (3.0 * std::f64::consts::PI * t).sin().max(0.0);
        assert!((u - expect).abs() < 1e-12, "drift at t={t}");
    }

    let dir2 = TempDir::new().unwrap();
    let files2 = run(LEVEL, dir2.path(), CommandName::Simulate);
    for row in data_rows(&files2[0]).iter().step_by(113) {
        let (t, u) = (row[0], row[2]);
        let s = (2.0 * std::f64::consts::PI * t).sin();
        let sign = if s > 0.0 { 1.0 } else if s < 0.0 { -1.0 } else { 0.0 };
        let expect = 0.3 + 0.2 * sign * (3.0 * std::f64::consts::PI * t).sin().max(0.0);
        assert!((u - expect).abs() < 1e-12, "level drift at t={t}");
    }
}

#[test]
fn sweep_shape_and_zero_level_value() {
    let dir = TempDir::new().unwrap();
    run(SIMPLE, dir.path(), CommandName::Simulate);
    let files = run(SIMPLE, dir.path(), CommandName::Sweep);
    let rows = data_rows(&files[0]);
    assert_eq!(rows.len(), 200);
    // At level zero nothing is shrunk: the risk equals the horizon.
    let first = &rows[0];
    assert_eq!(first[1], 0.0);
    assert!((first[2] - 1.0).abs() < 1e-9, "value at level 0: {}", first[2]);
}

#[test]
fn sweep_minimum_matches_optimize_grid_point() {
    let dir = TempDir::new().unwrap();
    run(LEVEL, dir.path(), CommandName::Simulate);
    let surface = &run(LEVEL, dir.path(), CommandName::Sweep)[0];
    let optimum = &run(LEVEL, dir.path(), CommandName::Optimize)[0];

    // Lexicographic minimum of the written surface, exactly as text.
    let text = fs::read_to_string(surface).unwrap();
    let mut best: Option<(f64, f64, String, String, String)> = None;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (a, l, v) = (
            f[0].parse::<f64>().unwrap(),
            f[1].parse::<f64>().unwrap(),
            f[2].parse::<f64>().unwrap(),
        );
        let key = (v, l, a);
        let better = match &best {
            None => true,
            Some((bv, bl, ba, ..)) => {
                key < (*bv, *bl, ba.parse().unwrap())
            }
        };
        if better {
            best = Some((v, l, f[0].to_string(), f[1].to_string(), f[2].to_string()));
        }
    }
    let (_, _, a_str, l_str, v_str) = best.unwrap();
    let opt_text = fs::read_to_string(optimum).unwrap();
    assert!(
        opt_text.contains(&format!("grid_alpha_star = {a_str}")),
        "surface min alpha {a_str} not in {opt_text}"
    );
    assert!(opt_text.contains(&format!("grid_lambda_star = {l_str}")));
    assert!(opt_text.contains(&format!("grid_sure_min = {v_str}")));
}

#[test]
fn optimize_reports_alternate_centers_on_level_scenario() {
    let dir = TempDir::new().unwrap();
    run(LEVEL, dir.path(), CommandName::Simulate);
    let optimum = &run(LEVEL, dir.path(), CommandName::Optimize)[0];
    let text = fs::read_to_string(optimum).unwrap();
    let n: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("alternates = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(n >= 1, "no alternate centers reported:\n{text}");
}

#[test]
fn optimize_zero_noise_recovers_drift() {
    // Noise at the representable floor and the center pinned at the drift
    // level: the de-noised path is the drift itself.
    let cfg = "scenario = \"custom\"\nseed = 3\n\n[model]\nkind = \"ou\"\na = 0.5\nsigma = 1e-30\nhorizon = 1.0\n\n[drift]\nkind = \"constant\"\nvalue = 0.3\n\n[threshold]\nkind = \"soft\"\nalpha = 0.3\nlambda = 0.1\n";
    let dir = TempDir::new().unwrap();
    run(cfg, dir.path(), CommandName::Simulate);
    let denoised = run(cfg, dir.path(), CommandName::Optimize)
        .into_iter()
        .find(|f| f.ends_with("denoised.csv"))
        .unwrap();
    for row in data_rows(&denoised) {
        assert!((row[1] - 0.3).abs() < 1e-12);
    }
}

#[test]
fn denoise_applies_configured_threshold() {
    let dir = TempDir::new().unwrap();
    run(SIMPLE, dir.path(), CommandName::Simulate);
    let files = run(SIMPLE, dir.path(), CommandName::Denoise);
    let rows = data_rows(&files[0]);
    assert_eq!(rows.len(), 1000);
    // Soft threshold at the default lambda never moves a point by more than
    // the band width and never crosses the center.
    let band = 0.3 * 0.05;
    let path_rows = data_rows(&dir.path().join("path.csv"));
    for (r, p) in rows.iter().zip(&path_rows) {
        assert!((r[1] - p[1]).abs() <= band + 1e-12);
        assert!(r[1] * p[1] >= -1e-12);
    }
}

#[test]
fn sweep_without_input_is_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = resolve(SIMPLE, dir.path());
    match run_command(CommandName::Sweep, &cfg) {
        Err(Error::Io(e)) => assert!(e.to_string().contains("path.csv")),
        other => panic!("expected I/O error, got {other:?}"),
    }
}

#[test]
fn validate_rejects_single_replicate_as_usage_error() {
    let cfg_text = "scenario = \"simple\"\nseed = 1\n\n[validate]\nn_reps = 1\nstatistics = [\"unbiasedness\"]\nlambdas = [0.5]\ncoverage_r = 1.5\ncoverage_horizons = [5.0]\n";
    let dir = TempDir::new().unwrap();
    let cfg = resolve(cfg_text, dir.path());
    assert!(matches!(
        run_command(CommandName::Validate, &cfg),
        Err(Error::Domain(_))
    ));

    // Through the binary this surfaces as a usage error (exit code 2).
    let cfg_file = dir.path().join("exp.toml");
    fs::write(&cfg_file, cfg_text).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_suredrift"))
        .args([
            "--config",
            cfg_file.to_str().unwrap(),
            "--command",
            "validate",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("n_reps"));
}

#[test]
fn validate_default_suite_passes_on_simple_scenario() {
    let dir = TempDir::new().unwrap();
    let cfg = resolve(SIMPLE, dir.path());
    let outcome = run_command(CommandName::Validate, &cfg).unwrap();
    assert_eq!(outcome.validation_passed, Some(true));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("overall: pass"), "{report}");
}

#[test]
fn validate_small_suite_passes_and_reruns_identically() {
    let cfg_text = "scenario = \"simple\"\nseed = 77\n\n[validate]\nn_reps = 120\nstatistics = [\"unbiasedness\", \"risk_bound\"]\nlambdas = [0.5, 2.0]\ncoverage_r = 1.5\ncoverage_horizons = [5.0]\n";
    let dir = TempDir::new().unwrap();
    let cfg = resolve(cfg_text, dir.path());
    let outcome = run_command(CommandName::Validate, &cfg).unwrap();
    assert_eq!(outcome.validation_passed, Some(true));
    let report_a = fs::read(dir.path().join("report.txt")).unwrap();
    run_command(CommandName::Validate, &cfg).unwrap();
    let report_b = fs::read(dir.path().join("report.txt")).unwrap();
    assert_eq!(report_a, report_b);
}

#[test]
fn failing_validation_exits_nonzero() {
    // Coverage at a short horizon sits far below the 0.95 floor, so the
    // suite fails and the process reports it.
    let cfg_text = "scenario = \"simple\"\nseed = 5\n\n[validate]\nn_reps = 60\nstatistics = [\"coverage\"]\nlambdas = [0.5]\ncoverage_r = 1.5\ncoverage_horizons = [5.0]\n";
    let dir = TempDir::new().unwrap();
    let cfg_file = dir.path().join("exp.toml");
    fs::write(&cfg_file, cfg_text).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_suredrift"))
        .args([
            "--config",
            cfg_file.to_str().unwrap(),
            "--command",
            "validate",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("FAIL"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let bad = "scenario = \"simple\"\ntypo_key = 1\n";
    assert!(matches!(
        ResolvedConfig::from_toml(bad, None, None),
        Err(Error::Parse(_))
    ));
    let bad_section = "scenario = \"simple\"\n\n[grid]\nn = 100\nextra = 2\n";
    assert!(matches!(
        ResolvedConfig::from_toml(bad_section, None, None),
        Err(Error::Parse(_))
    ));
}

#[test]
fn env_seed_override_through_binary() {
    let dir = TempDir::new().unwrap();
    let cfg_file = dir.path().join("exp.toml");
    fs::write(&cfg_file, SIMPLE).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_suredrift"))
        .env("SURE_SEED", "123")
        .env("SURE_OUT", dir.path().join("envout"))
        .args(["--config", cfg_file.to_str().unwrap(), "--command", "simulate"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("envout/path.csv")).unwrap();
    assert!(text.contains("# seed: 123"));
}

#[test]
fn seed_override_beats_config() {
    let dir = TempDir::new().unwrap();
    let cfg = ResolvedConfig::from_toml(SIMPLE, Some(7), Some(dir.path().to_path_buf())).unwrap();
    assert_eq!(cfg.seed, 7);
    run_command(CommandName::Simulate, &cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert!(text.contains("# seed: 7"));
}

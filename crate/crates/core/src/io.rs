//! Text interchange formats. Every file starts with `#`-prefixed header
//! comments carrying the configuration hash and seed, followed by a column
//! header row; floats print in shortest round-trip form, so rerunning a
//! command with the same inputs reproduces files byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::montecarlo::McReport;
use crate::optimize::{OptimResult, TracePoint};
use crate::pathstats::LocalTimeEstimate;
use crate::scalar::{lit, Real};
use crate::simulate::{PathMeta, SamplePath};
use crate::{Error, Result};

/// Provenance header of an output file.
#[derive(Debug, Clone, Default)]
pub struct FileMeta {
    pub config_hash: String,
    pub seed: u64,
}

fn header(meta: &FileMeta, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash: {}\n", meta.config_hash));
    out.push_str(&format!("# seed: {}\n", meta.seed));
    for (k, v) in extra {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out
}

/// Writes a path as `t,x[,u]`, the drift column included when the path
/// carries its true drift.
pub fn write_path_csv<T: Real>(
    file: &Path,
    path: &SamplePath<T>,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = header(
        meta,
        &[
            ("model", path.meta.model.clone()),
            ("drift", path.meta.drift.clone().unwrap_or_else(|| "unknown".into())),
        ],
    );
    match &path.meta.truth {
        Some(truth) => {
            out.push_str("t,x,u\n");
            for ((t, x), u) in path.grid().iter().zip(path.values()).zip(truth) {
                out.push_str(&format!("{t},{x},{u}\n"));
            }
        }
        None => {
            out.push_str("t,x\n");
            for (t, x) in path.grid().iter().zip(path.values()) {
                out.push_str(&format!("{t},{x}\n"));
            }
        }
    }
    write_atomic(file, &out)
}

/// Reads `t,x[,u]` back into a path; header comments restore the recorded
/// seed and model id when present.
pub fn read_path_csv<T: Real>(file: &Path) -> Result<SamplePath<T>> {
    let text = fs::read_to_string(file)?;
    let mut seed = 0u64;
    let mut model = String::from("unknown");
    let mut drift = None;
    let mut columns: Option<usize> = None;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut truth = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("seed:") {
                seed = v.trim().parse().unwrap_or(0);
            } else if let Some(v) = rest.strip_prefix("model:") {
                model = v.trim().to_string();
            } else if let Some(v) = rest.strip_prefix("drift:") {
                drift = Some(v.trim().to_string());
            }
            continue;
        }
        if columns.is_none() {
            columns = Some(match line {
                "t,x" => 2,
                "t,x,u" => 3,
                other => {
                    return Err(Error::Parse(format!(
                        "{}: unexpected header row {other:?}",
                        file.display()
                    )))
                }
            });
            continue;
        }
        let ncols = columns.expect("header parsed");
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ncols {
            return Err(Error::Parse(format!(
                "{}:{}: expected {ncols} fields, got {}",
                file.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<T> {
            let v: f64 = s.parse().map_err(|_| {
                Error::Parse(format!("{}:{}: bad float {s:?}", file.display(), lineno + 1))
            })?;
            Ok(lit::<T>(v))
        };
        grid.push(parse(fields[0])?);
        values.push(parse(fields[1])?);
        if ncols == 3 {
            truth.push(parse(fields[2])?);
        }
    }
    if columns.is_none() {
        return Err(Error::Parse(format!("{}: no header row", file.display())));
    }
    SamplePath::new(
        grid,
        values,
        PathMeta {
            model,
            seed,
            drift,
            truth: if truth.is_empty() { None } else { Some(truth) },
        },
    )
}

/// Writes a denoised path as `t,x_denoised`.
pub fn write_denoised_csv<T: Real>(
    file: &Path,
    path: &SamplePath<T>,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = header(meta, &[("model", path.meta.model.clone())]);
    out.push_str("t,x_denoised\n");
    for (t, x) in path.grid().iter().zip(path.values()) {
        out.push_str(&format!("{t},{x}\n"));
    }
    write_atomic(file, &out)
}

/// Writes a risk surface as `alpha,lambda,sure,baseline,quadratic,correction`.
pub fn write_surface_csv<T: Real>(
    file: &Path,
    trace: &[TracePoint<T>],
    meta: &FileMeta,
) -> Result<()> {
    let mut out = header(meta, &[]);
    out.push_str("alpha,lambda,sure,baseline,quadratic,correction\n");
    for p in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.alpha,
            p.lambda,
            p.value,
            p.components.baseline,
            p.components.quadratic,
            p.components.correction
        ));
    }
    write_atomic(file, &out)
}

/// Writes a level sweep as `lambda,occupation,local_time`.
pub fn write_level_sweep_csv<T: Real>(
    file: &Path,
    estimates: &[LocalTimeEstimate<T>],
    meta: &FileMeta,
) -> Result<()> {
    let mut out = header(meta, &[]);
    out.push_str("lambda,occupation,local_time\n");
    for e in estimates {
        out.push_str(&format!("{},{},{}\n", e.level, e.occupation, e.local_time));
    }
    write_atomic(file, &out)
}

/// Writes the optimum summary as flat `key = value` lines, the alternate
/// minima last.
pub fn write_optimum<T: Real>(
    file: &Path,
    result: &OptimResult<T>,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = header(meta, &[]);
    out.push_str(&format!("alpha_star = {}\n", result.alpha_star));
    out.push_str(&format!("lambda_star = {}\n", result.lambda_star));
    out.push_str(&format!("sure_min = {}\n", result.sure_min));
    out.push_str(&format!("grid_alpha_star = {}\n", result.grid_alpha_star));
    out.push_str(&format!("grid_lambda_star = {}\n", result.grid_lambda_star));
    out.push_str(&format!("grid_sure_min = {}\n", result.grid_sure_min));
    if let Some(ga) = result.gradient_at_min.0 {
        out.push_str(&format!("gradient_alpha = {ga}\n"));
    }
    out.push_str(&format!("gradient_lambda = {}\n", result.gradient_at_min.1));
    out.push_str(&format!("alternates = {}\n", result.alternates.len()));
    for p in &result.alternates {
        out.push_str(&format!("alternate = {},{},{}\n", p.alpha, p.lambda, p.value));
    }
    write_atomic(file, &out)
}

/// Writes a replication report as structured text plus CSV.
pub fn write_mc_report<T: Real>(
    txt_file: &Path,
    csv_file: &Path,
    report: &McReport<T>,
    meta: &FileMeta,
) -> Result<()> {
    let mut text = header(meta, &[]);
    text.push_str(&report.to_string());
    write_atomic(txt_file, &text)?;
    let mut csv = header(meta, &[]);
    csv.push_str(&report.to_csv());
    write_atomic(csv_file, &csv)
}

fn write_atomic(file: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = file.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("creating {}: {e}", parent.display()),
                ))
            })?;
        }
    }
    let mut f = fs::File::create(file).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("writing {}: {e}", file.display()),
        ))
    })?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

//! Artifact formatting and atomic file output.
//!
//! Floats in CSV files use `{:.16e}` (17 significant digits, exact
//! round-trip). JSON numbers use the shortest round-tripping form. Nothing
//! time-dependent is written, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use userkit::sear::{SampleRecord, SearResult};
use userkit::user::SampleGrid;

use crate::config::{Emit, ExperimentConfig};
use crate::error::CliError;
use crate::experiment::{Experiment, TwirlReport};

/// Writes `bytes` to a temporary file in the target directory, then renames
/// it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.as_file().sync_all().map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

/// `k,eta,value` over the whole grid; `eta` is the encountering time
/// `k·λ·t_eff`.
pub fn samples_csv(grid: &SampleGrid, t_eff: f64) -> String {
    let mut out = String::from("k,eta,value\n");
    for (k, value) in grid.indexed() {
        let eta = k as f64 * grid.lambda * t_eff;
        writeln!(out, "{k},{eta:.16e},{value:.16e}").expect("write to string");
    }
    out
}

/// `eta,interpolated_value` on `n_points` evenly spaced powers in `[0, 1]`,
/// with `eta` scaled to time.
pub fn reconstruction_csv(grid: &SampleGrid, t_eff: f64, n_points: usize) -> String {
    let mut out = String::from("eta,interpolated_value\n");
    for i in 0..n_points {
        let power = i as f64 / (n_points - 1) as f64;
        let value = grid.interpolate(power);
        writeln!(out, "{:.16e},{value:.16e}", power * t_eff).expect("write to string");
    }
    out
}

#[derive(Debug, Serialize)]
struct EpsilonJson<'a> {
    per_k: Vec<f64>,
    mean: f64,
    method: &'static str,
    n_t: usize,
    twirl_source: &'static str,
    stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic_per_k: Option<&'a [f64]>,
}

pub fn epsilon_json(exp: &Experiment, per_sample: &[SampleRecord], stderr: f64) -> String {
    let per_k: Vec<f64> = per_sample.iter().map(|r| r.epsilon).collect();
    let doc = EpsilonJson {
        mean: userkit::stats::mean(&per_k),
        per_k,
        method: "discrete_sim",
        n_t: exp.sear.n_t,
        twirl_source: exp.config.twirl_source().as_str(),
        stderr,
        analytic_per_k: None,
    };
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

pub fn twirl_json(exp: &Experiment, report: &TwirlReport) -> String {
    let doc = EpsilonJson {
        per_k: report.estimate.per_k.clone(),
        mean: report.estimate.mean,
        method: "discrete_sim",
        n_t: exp.sear.n_t,
        twirl_source: exp.config.twirl_source().as_str(),
        stderr: report.estimate.stderr(),
        analytic_per_k: Some(&report.analytic_per_k),
    };
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

#[derive(Debug, Serialize)]
struct ResultJson {
    mean: f64,
    error_bar: f64,
    epsilon: f64,
    spread: f64,
    exact: Option<f64>,
    config_hash: String,
}

pub fn result_json(cfg: &ExperimentConfig, result: &SearResult) -> String {
    let doc = ResultJson {
        mean: result.mean_value,
        error_bar: result.error_bar,
        epsilon: result.noise_strength,
        spread: result.spread,
        exact: result.exact_value,
        config_hash: cfg.config_hash(),
    };
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

/// `⟨O_i⟩ ~ mean ± error_bar`, plus the exact value when known.
pub fn summary_line(result: &SearResult) -> String {
    let mut line = format!(
        "<O_i> ~ {:.10} +/- {:.3e}",
        result.mean_value, result.error_bar
    );
    if let Some(x) = result.exact_value {
        write!(line, "  (exact {x:.10})").expect("write to string");
    }
    line
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub result: SearResult,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Runs the pipeline and writes the requested artifacts into `out_dir`.
pub fn run_experiment(exp: &Experiment, out_dir: &Path) -> Result<RunReport, CliError> {
    let result = exp.run()?;
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let emit = &exp.config.emit;
    let t_eff = exp.target.t_eff;
    let mut files = Vec::new();
    let mut put = |name: String, text: String| -> Result<(), CliError> {
        let path = out_dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        files.push(path);
        Ok(())
    };

    for record in &result.per_sample {
        let Some(grid) = &record.grid else { continue };
        if emit.contains(&Emit::SamplesCsv) {
            put(
                format!("samples_{}.csv", record.k),
                samples_csv(grid, t_eff),
            )?;
        }
        if emit.contains(&Emit::ReconstructionCsv) {
            put(
                format!("reconstruction_{}.csv", record.k),
                reconstruction_csv(grid, t_eff, exp.config.curve_points),
            )?;
        }
    }
    if emit.contains(&Emit::EpsilonJson) {
        put(
            "epsilon.json".into(),
            epsilon_json(exp, &result.per_sample, result.noise_stderr),
        )?;
    }
    if emit.contains(&Emit::ResultJson) {
        put("result.json".into(), result_json(&exp.config, &result))?;
    }
    Ok(RunReport {
        summary: summary_line(&result),
        result,
        files,
    })
}

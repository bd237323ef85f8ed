//! Argument parsing and subcommand dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use userkit::matrix::{eig_hermitian, hermiticity_residual, is_unitary};
use userkit::user::{aliasing_rate, min_eigenvalue_gap, phase_separation, spectral_decompose};
use userkit::{Error, Tolerances};

use crate::artifacts::{run_experiment, twirl_json, write_atomic};
use crate::config::{Emit, ExperimentConfig};
use crate::error::CliError;
use crate::experiment::Experiment;
use crate::matrix_file::read_matrix_file;
use crate::presets::preset;

const DEFAULT_OUT: &str = "userkit-out";

#[derive(Debug, Parser)]
#[command(
    name = "userkit",
    version,
    about = "Reconstruct expectation values of inaccessible unitaries on a driven lattice"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline from a JSON config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a named preset, or print its config with --show.
    Preset {
        /// One of: exact-small, coverage, simulable-twirl.
        name: String,
        #[arg(long)]
        show: bool,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Estimate only the twirled noise strength and compare with the
    /// closed-form twirl.
    Twirl {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Spectral summary of a Hermitian or unitary matrix file.
    Decompose { matrix: PathBuf },
}

#[derive(Debug, Args, Default)]
pub struct RunFlags {
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: config `output_dir`, else `userkit-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated artifacts: samples_csv, reconstruction_csv,
    /// epsilon_json, result_json.
    #[arg(long, value_delimiter = ',')]
    pub emit: Vec<String>,
}

impl RunFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<PathBuf, CliError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if !self.emit.is_empty() {
            cfg.emit = self
                .emit
                .iter()
                .map(|s| Emit::parse(s))
                .collect::<Result<_, _>>()?;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        cfg.output_dir = Some(out.clone());
        Ok(out)
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run_pipeline(
    mut cfg: ExperimentConfig,
    base: &Path,
    flags: &RunFlags,
    stdout: &mut dyn Write,
) -> Result<(), (CliError, Option<PathBuf>)> {
    let out = flags.apply(&mut cfg).map_err(|e| (e, None))?;
    let fail = |e: CliError| (e, Some(out.clone()));
    let exp = Experiment::build(&cfg, base).map_err(fail)?;
    let report = run_experiment(&exp, &out).map_err(fail)?;
    writeln!(stdout, "{}", report.summary).ok();
    for f in &report.files {
        writeln!(stdout, "wrote {}", f.display()).ok();
    }
    Ok(())
}

fn run_twirl(
    mut cfg: ExperimentConfig,
    base: &Path,
    flags: &RunFlags,
    stdout: &mut dyn Write,
) -> Result<(), (CliError, Option<PathBuf>)> {
    let out = flags.apply(&mut cfg).map_err(|e| (e, None))?;
    let fail = |e: CliError| (e, Some(out.clone()));
    let exp = Experiment::build(&cfg, base).map_err(fail)?;
    let report = exp.twirl().map_err(fail)?;
    let text = twirl_json(&exp, &report);
    if cfg.emit.contains(&Emit::EpsilonJson) {
        std::fs::create_dir_all(&out).map_err(|e| fail(CliError::io(&out)(e)))?;
        write_atomic(&out.join("epsilon.json"), text.as_bytes()).map_err(fail)?;
    }
    write!(stdout, "{text}").ok();
    Ok(())
}

fn decompose(path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let m = read_matrix_file(path)?;
    let tol = Tolerances::default();
    let hermitian = hermiticity_residual(&m) <= tol.tol_eig;
    let unitary = is_unitary(&m, &tol);
    let mut doc = json!({ "dim": m.nrows(), "hermitian": hermitian, "unitary": unitary });
    if hermitian {
        let eig = eig_hermitian(&m, &tol).map_err(CliError::numerical("eigendecomposition"))?;
        let gap = match min_eigenvalue_gap(&eig, &tol) {
            Ok(g) => Some(g),
            Err(Error::AllDegenerate | Error::InvalidInput(_)) => None,
            Err(e) => return Err(CliError::numerical("eigenvalue gap")(e)),
        };
        doc["eigenvalues"] = json!(eig.values);
        doc["min_gap"] = json!(gap);
        doc["spread"] = json!(eig.spread());
    }
    if unitary {
        let su =
            spectral_decompose(&m, &tol).map_err(CliError::numerical("spectral decomposition"))?;
        doc["phases"] = json!(su.phases());
        doc["phase_separation"] = json!(phase_separation(&su));
        doc["aliasing_rate"] = json!(aliasing_rate(&su).ok());
    }
    if !hermitian && !unitary {
        return Err(CliError::numerical("decompose")(Error::NotHermitian {
            deviation: hermiticity_residual(&m),
            tol: tol.tol_eig,
        }));
    }
    writeln!(
        stdout,
        "{}",
        serde_json::to_string_pretty(&doc).expect("json")
    )
    .ok();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                write!(stdout, "{rendered}").ok();
            } else {
                write!(stderr, "{rendered}").ok();
            }
            return code;
        }
    };

    let outcome = match cli.command {
        Command::Run { config, flags } => load_config(&config)
            .map_err(|e| (e, None))
            .and_then(|cfg| run_pipeline(cfg, &base_dir(&config), &flags, stdout)),
        Command::Twirl { config, flags } => load_config(&config)
            .map_err(|e| (e, None))
            .and_then(|cfg| run_twirl(cfg, &base_dir(&config), &flags, stdout)),
        Command::Preset { name, show, flags } => match preset(&name) {
            Ok(cfg) if show => {
                writeln!(stdout, "{}", cfg.to_json_pretty()).ok();
                Ok(())
            }
            Ok(cfg) => run_pipeline(cfg, Path::new("."), &flags, stdout),
            Err(e) => Err((e, None)),
        },
        Command::Decompose { matrix } => decompose(&matrix, stdout).map_err(|e| (e, None)),
    };

    match outcome {
        Ok(()) => 0,
        Err((err, out_dir)) => {
            writeln!(stderr, "error: {err}").ok();
            if let CliError::Numerical { .. } = err {
                let diag = err.diagnostic_json();
                writeln!(stderr, "{diag}").ok();
                if let Some(dir) = out_dir {
                    if std::fs::create_dir_all(&dir).is_ok() {
                        write_atomic(&dir.join("diagnostic.json"), (diag + "\n").as_bytes()).ok();
                    }
                }
            }
            err.exit_code()
        }
    }
}

//! Named lattice experiments.
//!
//! All presets use unit mass and spacing, a linear potential of slope 0.1,
//! a dispersion correction `0.05·(sin(p̂a)/a)²`, and an off-centre Gaussian
//! probe measured in position.

use crate::config::{ExperimentConfig, TwirlSourceKind, SCHEMA_VERSION};
use crate::error::CliError;

pub const PRESET_NAMES: [&str; 3] = ["exact-small", "coverage", "simulable-twirl"];

fn base() -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION,
        ..ExperimentConfig::default()
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let cfg = match name {
        // exact discretization, 8 sites: the pipeline must collapse onto the
        // exact value with zero noise strength
        "exact-small" => ExperimentConfig {
            n_sites: 8,
            perturbation: 0.0,
            n_t: 100,
            ..base()
        },
        "coverage" => ExperimentConfig {
            n_sites: 16,
            perturbation: 1e-2,
            n_t: 500,
            ..base()
        },
        "simulable-twirl" => ExperimentConfig {
            n_sites: 8,
            perturbation: 1e-2,
            n_t: 200,
            twirl_source: TwirlSourceKind::Simulable,
            ..base()
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            assert!(preset(name).is_ok(), "{name}");
        }
        assert_eq!(preset("nope").unwrap_err().exit_code(), 2);
    }
}

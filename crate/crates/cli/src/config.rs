//! Flat JSON experiment configuration.
//!
//! Every key is optional except `schema`, which must be `1`. Unknown keys are
//! rejected so a typo never silently falls back to a default.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use userkit::lattice::LatticeSpec;
use userkit::magnus::{DesignMode, DEFAULT_N_S};
use userkit::sear::{Evaluation, SearConfig, TwirlSource};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Synthetic,
    DriveFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationKind {
    Reconstruct,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlSourceKind {
    Haar,
    Simulable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Gaussian wavepacket from `probe_center`, `probe_width`, `probe_momentum`.
    Gaussian,
    /// Site basis state `probe_index`.
    Basis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Position,
    /// `sin(p̂a)/a`.
    Momentum,
    /// Read from `observable_file`.
    Matrix,
}

/// Artifact kinds selectable with `emit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    SamplesCsv,
    ReconstructionCsv,
    EpsilonJson,
    ResultJson,
}

impl Emit {
    pub const ALL: [Emit; 4] = [
        Emit::SamplesCsv,
        Emit::ReconstructionCsv,
        Emit::EpsilonJson,
        Emit::ResultJson,
    ];

    pub fn parse(name: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(name.trim().to_owned()))
            .map_err(|_| CliError::Config(format!("unknown artifact kind `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,

    pub n_sites: usize,
    pub mass: f64,
    pub spacing: f64,
    pub drive_omega: f64,
    pub slope: f64,
    pub kinetic_mod: Vec<f64>,
    /// Target evolution time before rescaling into the unit spectral ball.
    pub evolution_time: f64,

    pub n_a: usize,
    pub n_t: usize,
    pub kappa: usize,
    /// Empty selects the default alternation of ¼ and ⅕.
    pub lambdas: Vec<f64>,
    pub perturbation: f64,
    pub safety: f64,
    pub seed: u64,
    pub n_s: usize,
    pub design: DesignKind,
    pub evaluation: EvaluationKind,
    pub max_n_l: usize,
    pub twirl_source: TwirlSourceKind,

    pub probe: ProbeKind,
    pub probe_center: f64,
    pub probe_width: f64,
    pub probe_momentum: f64,
    pub probe_index: usize,

    pub observable: ObservableKind,
    pub observable_file: Option<PathBuf>,

    /// Points on the interpolated curve in `reconstruction_*.csv`.
    pub curve_points: usize,

    pub output_dir: Option<PathBuf>,
    pub emit: BTreeSet<Emit>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lattice = LatticeSpec::default();
        let sear = SearConfig::default();
        Self {
            schema: 0,
            n_sites: lattice.n_sites,
            mass: lattice.mass,
            spacing: lattice.spacing,
            drive_omega: lattice.drive_omega,
            slope: lattice.slope,
            kinetic_mod: lattice.kinetic_mod,
            evolution_time: 2.5,
            n_a: sear.n_a,
            n_t: sear.n_t,
            kappa: sear.kappa,
            lambdas: Vec::new(),
            perturbation: sear.perturbation,
            safety: sear.safety,
            seed: sear.seed,
            n_s: DEFAULT_N_S,
            design: DesignKind::Synthetic,
            evaluation: EvaluationKind::Reconstruct,
            max_n_l: sear.max_n_l,
            twirl_source: TwirlSourceKind::Haar,
            probe: ProbeKind::Gaussian,
            probe_center: -2.0,
            probe_width: 1.5,
            probe_momentum: 0.5,
            probe_index: 0,
            observable: ObservableKind::Position,
            observable_file: None,
            curve_points: 101,
            output_dir: None,
            emit: Emit::ALL.into_iter().collect(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "`schema` must be {SCHEMA_VERSION}, got {}",
                self.schema
            )));
        }
        if !(self.evolution_time > 0.0 && self.evolution_time.is_finite()) {
            return Err(CliError::Config(format!(
                "`evolution_time` must be positive, got {}",
                self.evolution_time
            )));
        }
        if self.curve_points < 2 {
            return Err(CliError::Config("`curve_points` must be at least 2".into()));
        }
        if self.probe == ProbeKind::Basis && self.probe_index >= self.n_sites {
            return Err(CliError::Config(format!(
                "`probe_index` {} out of range for {} sites",
                self.probe_index, self.n_sites
            )));
        }
        if self.observable == ObservableKind::Matrix && self.observable_file.is_none() {
            return Err(CliError::Config(
                "`observable` = \"matrix\" requires `observable_file`".into(),
            ));
        }
        self.lattice()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.sear()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn lattice(&self) -> LatticeSpec {
        LatticeSpec {
            n_sites: self.n_sites,
            mass: self.mass,
            spacing: self.spacing,
            drive_omega: self.drive_omega,
            slope: self.slope,
            kinetic_mod: self.kinetic_mod.clone(),
        }
    }

    pub fn sear(&self) -> SearConfig {
        let lambdas = if self.lambdas.is_empty() {
            SearConfig::with_ensemble(self.n_a).lambdas
        } else {
            self.lambdas.clone()
        };
        SearConfig {
            n_a: self.n_a,
            n_t: self.n_t,
            kappa: self.kappa,
            lambdas,
            perturbation: self.perturbation,
            safety: self.safety,
            seed: self.seed,
            n_s: self.n_s,
            design: match self.design {
                DesignKind::Synthetic => DesignMode::Synthetic,
                DesignKind::DriveFit => DesignMode::DriveFit,
            },
            evaluation: match self.evaluation {
                EvaluationKind::Reconstruct => Evaluation::Reconstruct,
                EvaluationKind::Direct => Evaluation::Direct,
            },
            max_n_l: self.max_n_l,
        }
    }

    pub fn twirl_source(&self) -> TwirlSource {
        match self.twirl_source {
            TwirlSourceKind::Haar => TwirlSource::Haar,
            TwirlSourceKind::Simulable => TwirlSource::Simulable,
        }
    }

    /// SHA-256 of the canonical (sorted-key, compact) JSON of every field
    /// that affects numbers. `output_dir` and `emit` are excluded.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
            map.remove("emit");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

//! A configuration resolved into lattice operators, probe and pipeline
//! inputs.

use std::path::Path;

use userkit::channels::{complementary_error_channel, twirl_analytic};
use userkit::lattice::{
    build_lattice_family, build_target_hamiltonian, gaussian_wavepacket, momentum_observable,
    position_observable, target_a_from_hamiltonian, LatticeSpec, TargetGenerator,
};
use userkit::magnus::HamiltonianFamily;
use userkit::sear::{
    estimate_noise_strength, generate_approx_unitaries, run_sear_with_unitaries, twirl_set,
    NoiseEstimate, SearConfig, SearResult,
};
use userkit::user::{Observable, PureState};
use userkit::{CMatrix, Tolerances};

use crate::config::{ExperimentConfig, ObservableKind, ProbeKind};
use crate::error::CliError;
use crate::matrix_file::read_matrix_file;

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub lattice: LatticeSpec,
    pub sear: SearConfig,
    pub family: HamiltonianFamily,
    pub target: TargetGenerator,
    pub psi: PureState,
    pub obs: Observable,
}

/// Noise-strength stage on its own, with the closed-form twirl of each
/// complementary channel for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TwirlReport {
    pub estimate: NoiseEstimate,
    pub analytic_per_k: Vec<f64>,
}

impl Experiment {
    /// Resolves `cfg`; relative file paths are taken from `base_dir`.
    pub fn build(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Self, CliError> {
        cfg.validate()?;
        let lattice = cfg.lattice();
        let family =
            build_lattice_family(&lattice).map_err(CliError::numerical("lattice family"))?;
        let h_t = build_target_hamiltonian(&lattice)
            .map_err(CliError::numerical("target Hamiltonian"))?;
        let target = target_a_from_hamiltonian(&h_t, cfg.evolution_time)
            .map_err(CliError::numerical("target generator"))?;

        let psi = match cfg.probe {
            ProbeKind::Gaussian => gaussian_wavepacket(
                &lattice,
                cfg.probe_center,
                cfg.probe_width,
                cfg.probe_momentum,
            )
            .map_err(|e| CliError::Config(format!("probe: {e}")))?,
            ProbeKind::Basis => PureState::basis_state(lattice.n_sites, cfg.probe_index)
                .map_err(|e| CliError::Config(format!("probe: {e}")))?,
        };

        let obs = match cfg.observable {
            ObservableKind::Position => position_observable(&lattice),
            ObservableKind::Momentum => momentum_observable(&lattice),
            ObservableKind::Matrix => {
                let rel = cfg.observable_file.as_ref().expect("validated");
                let m = read_matrix_file(&base_dir.join(rel))?;
                if m.nrows() != lattice.n_sites {
                    return Err(CliError::Config(format!(
                        "observable file has dimension {}, lattice has {} sites",
                        m.nrows(),
                        lattice.n_sites
                    )));
                }
                Observable::new(m, &Tolerances::default())
            }
        }
        .map_err(|e| CliError::Config(format!("observable: {e}")))?;

        Ok(Self {
            config: cfg.clone(),
            sear: cfg.sear(),
            lattice,
            family,
            target,
            psi,
            obs,
        })
    }

    pub fn twirl_set(&self) -> Result<Vec<CMatrix>, CliError> {
        twirl_set(
            &self.family,
            self.config.twirl_source(),
            self.sear.n_t,
            self.sear.seed,
        )
        .map_err(CliError::numerical("twirl set"))
    }

    pub fn run(&self) -> Result<SearResult, CliError> {
        let approx = generate_approx_unitaries(&self.family, &self.target.a, &self.sear)
            .map_err(CliError::numerical("ensemble generation"))?;
        let set = self.twirl_set()?;
        run_sear_with_unitaries(
            &approx,
            &self.target.a,
            &self.psi,
            &self.obs,
            &set,
            &self.sear,
        )
        .map_err(CliError::numerical("reconstruction"))
    }

    pub fn twirl(&self) -> Result<TwirlReport, CliError> {
        let approx = generate_approx_unitaries(&self.family, &self.target.a, &self.sear)
            .map_err(CliError::numerical("ensemble generation"))?;
        let list: Vec<CMatrix> = approx.into_iter().map(|m| m.intermediate).collect();
        let set = self.twirl_set()?;
        let estimate = estimate_noise_strength(&list, &set, &self.psi, &self.obs)
            .map_err(CliError::numerical("noise strength"))?;
        let tol = Tolerances::default();
        let analytic_per_k = (0..list.len())
            .map(|k| {
                let ch = complementary_error_channel(&list, k, &tol)?;
                Ok(twirl_analytic(&ch)?.epsilon)
            })
            .collect::<userkit::Result<Vec<_>>>()
            .map_err(CliError::numerical("analytic twirl"))?;
        Ok(TwirlReport {
            estimate,
            analytic_per_k,
        })
    }
}

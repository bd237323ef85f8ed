//! Approximate reconstruction with an error bar.
//!
//! Stage I builds an ensemble of approximate intermediate unitaries from
//! designed discretization sequences. Stage II reconstructs each member's
//! expectation value from integer powers of its discretization unitary.
//! Stage III twirls the complementary error channels over a finite set of
//! unitaries to obtain a noise strength `ε̄`, and reports
//! `mean ± ε̄·Δω` where `Δω` is the observable's eigenvalue spread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channels::DENOM_FLOOR;
use crate::error::{Error, Result};
use crate::magnus::{
    approx_discretization_unitary, design_sequence_with, time_ordered_evolve, DesignMode,
    DesignOptions, EvolutionSpec, HamiltonianFamily, SequencePlan, DEFAULT_N_S,
};
use crate::matrix::{
    check_hermitian, eig_hermitian, expm_hermitian_i, haar_unitary, hermitian_part, op_norm, trace,
    CMatrix, CVector, Tolerances,
};
use crate::stats::{mean, mean_and_stderr, pairwise_sum};
use crate::user::{
    min_eigenvalue_gap, user_sample, Observable, PureState, ReconstructionPlan, SampleGrid,
};

/// Largest dimension for which the exact value is computed alongside.
pub const EXACT_DIM_LIMIT: usize = 64;

/// How each member's expectation value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// Sinc reconstruction from integer powers of the discretization unitary.
    Reconstruct,
    /// Direct evaluation under the approximate intermediate unitary.
    Direct,
}

/// Ensemble, design and reconstruction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearConfig {
    pub n_a: usize,
    pub n_t: usize,
    pub kappa: usize,
    /// Power step for each ensemble member; length `n_a`, each in `(0, ½)`.
    pub lambdas: Vec<f64>,
    /// Operator norm of each synthetic member defect.
    pub perturbation: f64,
    pub safety: f64,
    pub seed: u64,
    pub n_s: usize,
    pub design: DesignMode,
    pub evaluation: Evaluation,
    /// Upper limit on the grid half-width `n_l`.
    pub max_n_l: usize,
}

impl SearConfig {
    /// `n_a` members alternating between `λ = ¼` and `λ = ⅕`.
    pub fn with_ensemble(n_a: usize) -> Self {
        Self {
            n_a,
            lambdas: (0..n_a)
                .map(|k| if k % 2 == 0 { 0.25 } else { 0.2 })
                .collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n_a == 0 {
            return bad("n_a must be positive".into());
        }
        if self.n_t == 0 {
            return bad("n_t must be positive".into());
        }
        if self.lambdas.len() != self.n_a {
            return bad(format!(
                "expected {} lambdas (one per ensemble member), got {}",
                self.n_a,
                self.lambdas.len()
            ));
        }
        if let Some(&l) = self.lambdas.iter().find(|&&l| !(l > 0.0 && l < 0.5)) {
            return Err(Error::InvalidLambda(l));
        }
        if !(1..=2).contains(&self.kappa) {
            return Err(Error::UnsupportedOrder(self.kappa));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return bad(format!(
                "perturbation must be non-negative, got {}",
                self.perturbation
            ));
        }
        if !(self.safety >= 1.0 && self.safety.is_finite()) {
            return bad(format!("safety must be >= 1, got {}", self.safety));
        }
        if self.n_s == 0 {
            return bad("n_s must be positive".into());
        }
        if self.max_n_l == 0 {
            return bad("max_n_l must be positive".into());
        }
        Ok(())
    }
}

impl Default for SearConfig {
    fn default() -> Self {
        Self {
            n_a: 4,
            n_t: 500,
            kappa: 2,
            lambdas: vec![0.25, 0.2, 0.25, 0.2],
            perturbation: 0.0,
            safety: 10.0,
            seed: 0,
            n_s: DEFAULT_N_S,
            design: DesignMode::Synthetic,
            evaluation: Evaluation::Reconstruct,
            max_n_l: 1 << 20,
        }
    }
}

/// Independent, reproducible sub-seed for `(stream, index)`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combined key
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_DESIGN: u64 = 1;
const STREAM_TWIRL: u64 = 2;

/// One ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxUnitary {
    pub lambda: f64,
    /// `round(1/λ)`.
    pub tau: usize,
    /// The approximate discretization unitary `U′_sd`.
    pub discretization: CMatrix,
    /// `(U′_sd)^τ`.
    pub intermediate: CMatrix,
    pub plan: SequencePlan,
}

fn integer_power(u: &CMatrix, n: usize) -> CMatrix {
    let d = u.nrows();
    let mut result = CMatrix::identity(d, d);
    let mut base = u.clone();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Designs one discretization sequence per `λ^(k)` and raises its product
/// to `τ^(k) = round(1/λ^(k))`.
pub fn generate_approx_unitaries(
    fam: &HamiltonianFamily,
    target_a: &CMatrix,
    config: &SearConfig,
) -> Result<Vec<ApproxUnitary>> {
    config.validate()?;
    let opts = DesignOptions {
        n_s: config.n_s,
        mode: config.design,
        ..DesignOptions::default()
    };
    config
        .lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let seed = derive_seed(config.seed, STREAM_DESIGN, k as u64);
            let plan = design_sequence_with(
                fam,
                target_a,
                lambda,
                config.kappa,
                config.perturbation,
                seed,
                &opts,
            )?;
            let discretization = approx_discretization_unitary(&plan, config.kappa)?;
            let tau = (1.0 / lambda).round() as usize;
            let intermediate = integer_power(&discretization, tau);
            Ok(ApproxUnitary {
                lambda,
                tau,
                discretization,
                intermediate,
                plan,
            })
        })
        .collect()
}

/// Eigenvalue gap that sizes a member's sample grid. Synthetic members use
/// the target's gap; fitted members use the gap of their own κ-truncated
/// generator. A scalar generator gets the largest possible gap, 2.
pub fn planning_gap(member: &ApproxUnitary, kappa: usize) -> Result<f64> {
    let tol = Tolerances::default();
    let generator = match member.plan.mode {
        DesignMode::Synthetic => member.plan.target_a.clone(),
        DesignMode::DriveFit => {
            let d = member.plan.target_a.nrows();
            let mut sum = CMatrix::zeros(d, d);
            for m in &member.plan.members {
                sum += m.magnus(kappa)?;
            }
            hermitian_part(&sum.scale(1.0 / (std::f64::consts::PI * member.lambda)))
        }
    };
    match min_eigenvalue_gap(&eig_hermitian(&generator, &tol)?, &tol) {
        Err(Error::AllDegenerate) => Ok(2.0),
        other => other,
    }
}

/// Reconstruction plan for one member, bounded by `config.max_n_l`.
pub fn member_plan(member: &ApproxUnitary, config: &SearConfig) -> Result<ReconstructionPlan> {
    let gap = planning_gap(member, config.kappa)?;
    let plan = ReconstructionPlan::from_gap(gap, member.lambda, config.safety)?;
    if plan.n_l > config.max_n_l {
        return Err(Error::InvalidInput(format!(
            "grid half-width {} for eigenvalue gap {gap:.3e} exceeds max_n_l {}",
            plan.n_l, config.max_n_l
        )));
    }
    Ok(plan)
}

/// Per-member value, and its sample grid when reconstructed.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberValue {
    pub value: f64,
    pub grid: Option<SampleGrid>,
}

fn member_value(
    psi: &PureState,
    obs: &Observable,
    member: &ApproxUnitary,
    config: &SearConfig,
) -> Result<MemberValue> {
    match config.evaluation {
        Evaluation::Reconstruct => {
            let plan = member_plan(member, config)?;
            let grid = user_sample(
                psi,
                obs,
                &member.discretization,
                &plan,
                &Tolerances::default(),
            )?;
            Ok(MemberValue {
                value: grid.reconstruct(),
                grid: Some(grid),
            })
        }
        Evaluation::Direct => {
            let v = &member.intermediate * psi.amplitudes();
            Ok(MemberValue {
                value: obs.quadratic_form(&v).re,
                grid: None,
            })
        }
    }
}

/// Values of every member, in ensemble order.
pub fn member_values(
    psi: &PureState,
    obs: &Observable,
    approx: &[ApproxUnitary],
    config: &SearConfig,
) -> Result<Vec<MemberValue>> {
    if approx.is_empty() {
        return Err(Error::InvalidInput("approximation list is empty".into()));
    }
    approx
        .par_iter()
        .map(|m| member_value(psi, obs, m, config))
        .collect()
}

/// `(1/n_a) Σ_k ⟨O⟩_k` with each term from [`member_values`].
pub fn mean_approx_expectation(
    psi: &PureState,
    obs: &Observable,
    approx: &[ApproxUnitary],
    config: &SearConfig,
) -> Result<f64> {
    let values: Vec<f64> = member_values(psi, obs, approx, config)?
        .into_iter()
        .map(|m| m.value)
        .collect();
    Ok(mean(&values))
}

/// Per-member and mean noise strengths from the discrete twirl.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEstimate {
    pub mean: f64,
    pub per_k: Vec<f64>,
    /// Standard error of each `ε_k` over the twirl set.
    pub per_k_stderr: Vec<f64>,
}

impl NoiseEstimate {
    /// Standard error of `mean`, treating members as independent.
    pub fn stderr(&self) -> f64 {
        let n = self.per_k_stderr.len() as f64;
        self.per_k_stderr.iter().map(|s| s * s).sum::<f64>().sqrt() / n
    }
}

/// For every `k`, averages `⟨ψ|Û† O Û|ψ⟩` with
/// `Û = U_m† U^{(μ)} U^{(k)†} U_m` over `μ` and the twirl set, and converts
/// to a noise strength against the probe `ρ = |ψ⟩⟨ψ|`.
pub fn estimate_noise_strength(
    intermediates: &[CMatrix],
    twirl_set: &[CMatrix],
    psi: &PureState,
    obs: &Observable,
) -> Result<NoiseEstimate> {
    if intermediates.is_empty() {
        return Err(Error::InvalidInput("approximation list is empty".into()));
    }
    if twirl_set.is_empty() {
        return Err(Error::InvalidInput("twirl set is empty".into()));
    }
    let tol = Tolerances::default();
    let d = psi.dim();
    for u in intermediates.iter().chain(twirl_set) {
        let found = crate::matrix::check_unitary(u, &tol)?;
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    if obs.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: obs.dim(),
        });
    }

    let base = obs.expectation(psi);
    let denom = trace(obs.matrix()).re / d as f64 - base;
    if denom.abs() <= DENOM_FLOOR {
        return Err(Error::DegenerateDenominator(denom.abs()));
    }

    let rotated: Vec<CVector> = twirl_set.iter().map(|u| u * psi.amplitudes()).collect();
    let n_a = intermediates.len();
    let per_k: Vec<(f64, f64)> = (0..n_a)
        .into_par_iter()
        .map(|k| {
            let u_k_dag = intermediates[k].adjoint();
            let rel: Vec<CMatrix> = intermediates.iter().map(|u_mu| u_mu * &u_k_dag).collect();
            let eps_m: Vec<f64> = twirl_set
                .iter()
                .zip(&rotated)
                .map(|(u_m, phi)| {
                    let vals: Vec<f64> = rel
                        .iter()
                        .map(|w| {
                            let v = u_m.ad_mul(&(w * phi));
                            obs.quadratic_form(&v).re
                        })
                        .collect();
                    (mean(&vals) - base) / denom
                })
                .collect();
            mean_and_stderr(&eps_m)
        })
        .collect();

    Ok(NoiseEstimate {
        mean: mean(&per_k.iter().map(|p| p.0).collect::<Vec<_>>()),
        per_k: per_k.iter().map(|p| p.0).collect(),
        per_k_stderr: per_k.iter().map(|p| p.1).collect(),
    })
}

/// Where twirl unitaries come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwirlSource {
    /// Haar-random stand-ins.
    Haar,
    /// Evolutions of the simulable family at seeded `(γ, t)`.
    Simulable,
}

impl TwirlSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            TwirlSource::Haar => "haar",
            TwirlSource::Simulable => "simulable",
        }
    }
}

pub fn haar_twirl_set(dim: usize, n_t: usize, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_TWIRL, 0));
    (0..n_t).map(|_| haar_unitary(dim, &mut rng)).collect()
}

/// `n_t` time-ordered evolutions of `fam` with `γ ∈ [0.5, 8)` and
/// `t ∈ [0.5, 4)` drawn from the seed.
pub fn simulable_twirl_set(fam: &HamiltonianFamily, n_t: usize, seed: u64) -> Result<Vec<CMatrix>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_TWIRL, 1));
    let specs: Vec<EvolutionSpec> = (0..n_t)
        .map(|_| EvolutionSpec::new(rng.random_range(0.5..8.0), rng.random_range(0.5..4.0), 64))
        .collect::<Result<_>>()?;
    specs
        .par_iter()
        .map(|s| time_ordered_evolve(fam, s))
        .collect()
}

pub fn twirl_set(
    fam: &HamiltonianFamily,
    source: TwirlSource,
    n_t: usize,
    seed: u64,
) -> Result<Vec<CMatrix>> {
    match source {
        TwirlSource::Haar => Ok(haar_twirl_set(fam.dim(), n_t, seed)),
        TwirlSource::Simulable => simulable_twirl_set(fam, n_t, seed),
    }
}

/// One ensemble member's contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub k: usize,
    pub lambda: f64,
    pub tau: usize,
    pub value: f64,
    pub epsilon: f64,
    pub epsilon_stderr: f64,
    /// Operator-norm defect of the member's designed sequence.
    pub residual: f64,
    /// Sample grid used for reconstruction; `None` under direct evaluation.
    pub grid: Option<SampleGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearResult {
    pub mean_value: f64,
    pub noise_strength: f64,
    pub noise_stderr: f64,
    /// `ω_max − ω_min` of the observable.
    pub spread: f64,
    /// `noise_strength · spread`.
    pub error_bar: f64,
    pub exact_value: Option<f64>,
    pub per_sample: Vec<SampleRecord>,
}

/// `⟨ψ|e^{−iπA} O e^{iπA}|ψ⟩` computed directly, for dimensions up to
/// [`EXACT_DIM_LIMIT`].
pub fn exact_value(psi: &PureState, obs: &Observable, target_a: &CMatrix) -> Result<Option<f64>> {
    if psi.dim() > EXACT_DIM_LIMIT {
        return Ok(None);
    }
    let u = expm_hermitian_i(target_a, std::f64::consts::PI)?;
    Ok(Some(obs.quadratic_form(&(u * psi.amplitudes())).re))
}

/// Stages II and III on an existing ensemble.
pub fn run_sear_with_unitaries(
    approx: &[ApproxUnitary],
    target_a: &CMatrix,
    psi: &PureState,
    obs: &Observable,
    twirl_set: &[CMatrix],
    config: &SearConfig,
) -> Result<SearResult> {
    config.validate()?;
    check_hermitian(target_a, &Tolerances::default())?;
    if op_norm(target_a) > 1.0 + 1e-10 {
        return Err(Error::SpectrumOutOfRange {
            norm: op_norm(target_a),
        });
    }
    let values = member_values(psi, obs, approx, config)?;
    let intermediates: Vec<CMatrix> = approx.iter().map(|m| m.intermediate.clone()).collect();
    let spread = obs.spread();
    let noise = if spread == 0.0 {
        // scalar observable: every probe is degenerate and no error is possible
        NoiseEstimate {
            mean: 0.0,
            per_k: vec![0.0; approx.len()],
            per_k_stderr: vec![0.0; approx.len()],
        }
    } else {
        estimate_noise_strength(&intermediates, twirl_set, psi, obs)?
    };

    let per_sample: Vec<SampleRecord> = approx
        .iter()
        .zip(values)
        .enumerate()
        .map(|(k, (m, v))| SampleRecord {
            k,
            lambda: m.lambda,
            tau: m.tau,
            value: v.value,
            epsilon: noise.per_k[k],
            epsilon_stderr: noise.per_k_stderr[k],
            residual: m.plan.residual,
            grid: v.grid,
        })
        .collect();
    let mean_value = pairwise_sum(&per_sample.iter().map(|r| r.value).collect::<Vec<_>>())
        / per_sample.len() as f64;

    Ok(SearResult {
        mean_value,
        noise_strength: noise.mean,
        noise_stderr: noise.stderr(),
        spread,
        error_bar: noise.mean * spread,
        exact_value: exact_value(psi, obs, target_a)?,
        per_sample,
    })
}

/// The full pipeline: ensemble generation, per-member reconstruction and
/// twirled noise strength.
pub fn run_sear(
    fam: &HamiltonianFamily,
    target_a: &CMatrix,
    psi: &PureState,
    obs: &Observable,
    twirl_set: &[CMatrix],
    config: &SearConfig,
) -> Result<SearResult> {
    let approx = generate_approx_unitaries(fam, target_a, config)?;
    run_sear_with_unitaries(&approx, target_a, psi, obs, twirl_set, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{
        complementary_error_channel, density_from_pure, twirl_analytic, twirl_discrete,
    };
    use crate::matrix::{
        max_abs, random_gaussian, random_hermitian, random_hermitian_with_spectrum,
    };
    use crate::oracle::{exact_intermediate_expectation, op_distance};
    use crate::stats::median;
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn setup(d: usize, seed: u64) -> (HamiltonianFamily, CMatrix, PureState, Observable) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..d)
            .map(|j| -0.9 + 1.8 * j as f64 / (d - 1) as f64)
            .collect();
        let a = random_hermitian_with_spectrum(&values, &mut rng);
        let psi =
            PureState::normalized(random_gaussian(d, 1, &mut rng).column(0).into_owned()).unwrap();
        let obs = Observable::new(random_hermitian(d, &mut rng), &tol()).unwrap();
        let fam = HamiltonianFamily::constant(CMatrix::zeros(d, d), "unused");
        (fam, a, psi, obs)
    }

    fn config(n_a: usize, perturbation: f64, seed: u64) -> SearConfig {
        SearConfig {
            perturbation,
            seed,
            n_t: 200,
            ..SearConfig::with_ensemble(n_a)
        }
    }

    #[test]
    fn config_validation() {
        assert!(SearConfig::default().validate().is_ok());
        let mut c = SearConfig::default();
        c.lambdas.pop();
        assert!(c.validate().is_err());
        let c = SearConfig {
            lambdas: vec![0.25, 0.5, 0.2, 0.2],
            ..SearConfig::default()
        };
        assert_eq!(c.validate(), Err(Error::InvalidLambda(0.5)));
        let c = SearConfig {
            kappa: 3,
            ..SearConfig::default()
        };
        assert_eq!(c.validate(), Err(Error::UnsupportedOrder(3)));
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..4).map(|k| derive_seed(7, 1, k)).collect();
        assert!(s.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(derive_seed(7, 1, 2), s[2]);
        assert_ne!(derive_seed(7, 2, 0), derive_seed(7, 1, 0));
    }

    #[test]
    fn integer_power_matches_repeated_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary(3, &mut rng);
        let mut p = CMatrix::identity(3, 3);
        for n in 0..7 {
            assert!(max_abs(&(integer_power(&u, n) - &p)) < 1e-13);
            p = &p * &u;
        }
    }

    #[test]
    fn exact_mode_members_equal_target() {
        let (fam, a, _, _) = setup(4, 2);
        let u_i = expm_hermitian_i(&a, PI).unwrap();
        let approx = generate_approx_unitaries(&fam, &a, &config(4, 0.0, 3)).unwrap();
        assert_eq!(
            approx.iter().map(|m| m.tau).collect::<Vec<_>>(),
            vec![4, 5, 4, 5]
        );
        for m in &approx {
            assert!(op_distance(&m.intermediate, &u_i) < 1e-8);
        }
    }

    #[test]
    fn rounding_defect_is_recorded() {
        let (fam, a, _, _) = setup(3, 4);
        let c = SearConfig {
            lambdas: vec![0.3],
            ..config(1, 0.0, 0)
        };
        let approx = generate_approx_unitaries(&fam, &a, &c).unwrap();
        assert_eq!(approx[0].tau, 3);
        let want = expm_hermitian_i(&a, 0.9 * PI).unwrap();
        assert!(op_distance(&approx[0].intermediate, &want) < 1e-10);
    }

    #[test]
    fn generation_is_deterministic() {
        let (fam, a, _, _) = setup(3, 5);
        let c = config(3, 1e-2, 9);
        let x = generate_approx_unitaries(&fam, &a, &c).unwrap();
        let y = generate_approx_unitaries(&fam, &a, &c).unwrap();
        assert_eq!(x, y);
        let z = generate_approx_unitaries(&fam, &a, &config(3, 1e-2, 10)).unwrap();
        assert_ne!(x[0].intermediate, z[0].intermediate);
    }

    #[test]
    fn mean_of_identity_is_one() {
        let (fam, a, psi, _) = setup(4, 6);
        let c = config(4, 1e-2, 1);
        let approx = generate_approx_unitaries(&fam, &a, &c).unwrap();
        let v = mean_approx_expectation(&psi, &Observable::identity(4), &approx, &c).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_mode_mean_matches_oracle() {
        for seed in 0..5 {
            let (fam, a, psi, obs) = setup(4, 10 + seed);
            let c = config(4, 0.0, seed);
            let approx = generate_approx_unitaries(&fam, &a, &c).unwrap();
            let v = mean_approx_expectation(&psi, &obs, &approx, &c).unwrap();
            let exact = exact_intermediate_expectation(&psi, &obs, &a).unwrap();
            assert!((v - exact).abs() < 1e-3, "{v} vs {exact}");

            let values = member_values(&psi, &obs, &approx, &c).unwrap();
            for w in values.windows(2) {
                assert!((w[0].value - w[1].value).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_member_mean_is_its_reconstruction() {
        let (fam, a, psi, obs) = setup(3, 7);
        let c = config(1, 1e-2, 2);
        let approx = generate_approx_unitaries(&fam, &a, &c).unwrap();
        let v = mean_approx_expectation(&psi, &obs, &approx, &c).unwrap();
        let plan = member_plan(&approx[0], &c).unwrap();
        let grid = user_sample(&psi, &obs, &approx[0].discretization, &plan, &tol()).unwrap();
        assert_eq!(v, grid.reconstruct());
    }

    #[test]
    fn direct_evaluation_flag() {
        let (fam, a, psi, obs) = setup(4, 8);
        let c = SearConfig {
            evaluation: Evaluation::Direct,
            ..config(4, 0.0, 1)
        };
        let approx = generate_approx_unitaries(&fam, &a, &c).unwrap();
        let values = member_values(&psi, &obs, &approx, &c).unwrap();
        let exact = exact_intermediate_expectation(&psi, &obs, &a).unwrap();
        for v in values {
            assert!(v.grid.is_none());
            assert!((v.value - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_members_have_zero_noise() {
        let (fam, a, psi, obs) = setup(3, 9);
        let approx = generate_approx_unitaries(&fam, &a, &config(1, 0.05, 0)).unwrap();
        let u = approx[0].intermediate.clone();
        let set = haar_twirl_set(3, 50, 1);
        let est = estimate_noise_strength(&[u.clone(), u], &set, &psi, &obs).unwrap();
        assert!(est.per_k.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn discrete_noise_matches_channel_twirl() {
        let (fam, a, psi, obs) = setup(4, 11);
        let approx = generate_approx_unitaries(&fam, &a, &config(3, 5e-2, 4)).unwrap();
        let list: Vec<CMatrix> = approx.iter().map(|m| m.intermediate.clone()).collect();
        let set = haar_twirl_set(4, 100, 2);
        let est = estimate_noise_strength(&list, &set, &psi, &obs).unwrap();
        let rho = density_from_pure(&psi).unwrap();
        for k in 0..3 {
            let ch = complementary_error_channel(&list, k, &tol()).unwrap();
            let via_channel = twirl_discrete(&ch, &set, &rho, &obs).unwrap();
            assert!((via_channel.epsilon - est.per_k[k]).abs() < 1e-10);
            assert!((via_channel.stderr - est.per_k_stderr[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_noise_agrees_with_analytic_twirl() {
        let (fam, a, psi, obs) = setup(4, 12);
        let approx = generate_approx_unitaries(&fam, &a, &config(4, 1e-2, 5)).unwrap();
        let list: Vec<CMatrix> = approx.iter().map(|m| m.intermediate.clone()).collect();
        let set = haar_twirl_set(4, 500, 3);
        let est = estimate_noise_strength(&list, &set, &psi, &obs).unwrap();
        let analytic: Vec<f64> = (0..4)
            .map(|k| {
                twirl_analytic(&complementary_error_channel(&list, k, &tol()).unwrap())
                    .unwrap()
                    .epsilon
            })
            .collect();
        let want = mean(&analytic);
        assert!(
            (est.mean - want).abs() <= 3.0 * est.stderr(),
            "{} vs {want} ± {}",
            est.mean,
            est.stderr()
        );
    }

    #[test]
    fn degenerate_probe_is_reported() {
        let d = 2;
        let psi = PureState::basis_state(d, 0).unwrap();
        let obs = Observable::new(crate::matrix::real_diag(&[0.5, 0.5]), &tol()).unwrap();
        let u = CMatrix::identity(d, d);
        assert!(matches!(
            estimate_noise_strength(
                std::slice::from_ref(&u),
                std::slice::from_ref(&u),
                &psi,
                &obs
            ),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn run_sear_exact_mode_collapses() {
        let (fam, a, psi, obs) = setup(4, 13);
        let set = haar_twirl_set(4, 100, 0);
        let r = run_sear(&fam, &a, &psi, &obs, &set, &config(4, 0.0, 0)).unwrap();
        let exact = r.exact_value.unwrap();
        assert!((r.mean_value - exact).abs() <= 1e-3);
        assert!(r.error_bar <= 1e-4);
        assert_eq!(r.error_bar, r.noise_strength * r.spread);
        assert_eq!(r.per_sample.len(), 4);
    }

    #[test]
    fn run_sear_identity_observable_has_no_error_bar() {
        let (fam, a, psi, _) = setup(3, 14);
        let set = haar_twirl_set(3, 100, 0);
        let r = run_sear(
            &fam,
            &a,
            &psi,
            &Observable::identity(3),
            &set,
            &config(2, 1e-2, 0),
        )
        .unwrap();
        assert_eq!(r.spread, 0.0);
        assert_eq!(r.error_bar, 0.0);
        assert!((r.mean_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn run_sear_permutation_invariance() {
        let (fam, a, psi, obs) = setup(4, 15);
        let c = config(4, 1e-2, 6);
        let approx = generate_approx_unitaries(&fam, &a, &c).unwrap();
        let set = haar_twirl_set(4, 100, 0);
        let r = run_sear_with_unitaries(&approx, &a, &psi, &obs, &set, &c).unwrap();
        let mut perm = approx.clone();
        perm.rotate_left(1);
        perm.swap(0, 2);
        let c_perm = SearConfig {
            lambdas: perm.iter().map(|m| m.lambda).collect(),
            ..c.clone()
        };
        let q = run_sear_with_unitaries(&perm, &a, &psi, &obs, &set, &c_perm).unwrap();
        assert!((r.mean_value - q.mean_value).abs() < 1e-12);
        assert!((r.noise_strength - q.noise_strength).abs() < 1e-12);
        assert!((r.error_bar - q.error_bar).abs() < 1e-12);
    }

    #[test]
    fn noise_median_is_monotone_in_perturbation() {
        let d = 4;
        let mut medians = Vec::new();
        for p in [0.0, 1e-3, 1e-2, 1e-1] {
            let eps: Vec<f64> = (0..20)
                .map(|seed| {
                    let (fam, a, psi, obs) = setup(d, 100 + seed);
                    let set = haar_twirl_set(d, 200, seed);
                    run_sear(&fam, &a, &psi, &obs, &set, &config(4, p, seed))
                        .unwrap()
                        .noise_strength
                })
                .collect();
            medians.push(median(&eps));
        }
        assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
        assert!(medians[0].abs() < 1e-12);
    }

    #[test]
    fn simulable_twirl_set_is_unitary_and_seeded() {
        let spec = crate::lattice::LatticeSpec::with_sites(4);
        let fam = crate::lattice::build_lattice_family(&spec).unwrap();
        let set = simulable_twirl_set(&fam, 5, 3).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.iter().all(|u| crate::matrix::is_unitary(u, &tol())));
        assert_eq!(set, simulable_twirl_set(&fam, 5, 3).unwrap());
    }
}

//! Density matrices, Kraus channels, twirls to depolarizing channels, and
//! noise-strength extraction.
//!
//! The error channel of an ensemble of approximate unitaries uses Kraus
//! operators `S_μ = U^{(μ)} U_ref† / √n_a`. The `1/√n_a` weight makes the
//! channel trace preserving, and `Tr[𝒮[ρ_i] O]` is then exactly the mean of
//! the ensemble's expectation values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{
    check_hermitian, check_unitary, eig_hermitian, haar_unitary, hermitian_part, max_abs, trace,
    trace_product, CMatrix, Tolerances, C64,
};
use crate::stats::mean_and_stderr;
use crate::user::{Observable, PureState};

/// Minimum `|Tr[O]/d − Tr[ρO]|` for which a noise strength is resolvable.
pub const DENOM_FLOOR: f64 = 1e-8;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_hermitian(&matrix, tol)?;
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > tol.tol_trace.max(1e-12) {
            return Err(Error::TraceViolation(tr));
        }
        let eig = eig_hermitian(&matrix, tol)?;
        if let Some(&min) = eig.values.first() {
            if min < -1e-10 {
                return Err(Error::InvalidInput(format!(
                    "density matrix has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self {
            matrix: hermitian_part(&(u * &self.matrix * u.adjoint())),
        }
    }
}

/// `|ψ⟩⟨ψ|`.
pub fn density_from_pure(psi: &PureState) -> Result<DensityMatrix> {
    let v = psi.amplitudes();
    let n2 = v.norm_squared();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n2));
    }
    Ok(DensityMatrix {
        matrix: v * v.adjoint(),
    })
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `Re Tr[ρ O]`.
pub fn expectation(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    check_dims(rho.dim(), obs.dim())?;
    let v = trace_product(rho.matrix(), obs.matrix());
    debug_assert!(
        v.im.abs() < 1e-10 * (1.0 + max_abs(obs.matrix())),
        "imaginary expectation residue {}",
        v.im
    );
    Ok(v.re)
}

/// Channel `ρ ↦ Σ_μ K_μ ρ K_μ†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    /// Validates shape and trace preservation `Σ K†K = 1` (within 1e-8).
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(kraus)?;
        let dev = ch.trace_preservation_defect();
        if dev > 1e-8 {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(ch)
    }

    /// Validates shape only.
    pub fn new_unchecked(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| {
            Error::InvalidInput("a channel needs at least one Kraus operator".into())
        })?;
        let d = first.nrows();
        for k in &kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: if k.nrows() != d { k.nrows() } else { k.ncols() },
                });
            }
        }
        Ok(Self { kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kraus: vec![CMatrix::identity(dim, dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `max |Σ K†K − 1|`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim();
        let mut acc = CMatrix::zeros(d, d);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        max_abs(&(acc - CMatrix::identity(d, d)))
    }

    /// Channel with every Kraus operator replaced by `U† K U`.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        let u_dag = u.adjoint();
        Self {
            kraus: self.kraus.iter().map(|k| &u_dag * k * u).collect(),
        }
    }

    /// `Tr[𝒞[ρ] O]` without forming the output state.
    pub fn output_expectation(&self, rho: &CMatrix, obs: &CMatrix) -> f64 {
        self.kraus
            .iter()
            .map(|k| trace_product(&(k * rho * k.adjoint()), obs).re)
            .sum()
    }
}

pub fn apply_channel(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dims(ch.dim(), rho.dim())?;
    let d = rho.dim();
    let mut out = CMatrix::zeros(d, d);
    for k in ch.kraus() {
        out += k * rho.matrix() * k.adjoint();
    }
    let tr = trace(&out).re;
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::TraceViolation(tr));
    }
    Ok(DensityMatrix {
        matrix: hermitian_part(&out),
    })
}

fn ensemble_channel(
    reference: &CMatrix,
    approx_list: &[CMatrix],
    tol: &Tolerances,
) -> Result<KrausChannel> {
    if approx_list.is_empty() {
        return Err(Error::InvalidInput("approximation list is empty".into()));
    }
    let d = check_unitary(reference, tol)?;
    let weight = C64::new(1.0 / (approx_list.len() as f64).sqrt(), 0.0);
    let ref_dag = reference.adjoint();
    let kraus = approx_list
        .iter()
        .map(|u| {
            check_dims(d, check_unitary(u, tol)?)?;
            Ok(u * &ref_dag * weight)
        })
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::new(kraus)
}

/// Kraus operators `S_μ = U^{(μ)} U_i† / √n_a`.
pub fn sear_error_channel(
    u_i: &CMatrix,
    approx_list: &[CMatrix],
    tol: &Tolerances,
) -> Result<KrausChannel> {
    ensemble_channel(u_i, approx_list, tol)
}

/// Kraus operators `S_μ^{(k)} = U^{(μ)} U^{(k)†} / √n_a`.
pub fn complementary_error_channel(
    approx_list: &[CMatrix],
    k: usize,
    tol: &Tolerances,
) -> Result<KrausChannel> {
    let reference = approx_list.get(k).ok_or(Error::IndexOutOfRange {
        index: k,
        len: approx_list.len(),
    })?;
    ensemble_channel(reference, approx_list, tol)
}

/// How a noise strength was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwirlMethod {
    Analytic,
    HaarMc,
    DiscreteSim,
}

impl TwirlMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TwirlMethod::Analytic => "analytic",
            TwirlMethod::HaarMc => "haar_mc",
            TwirlMethod::DiscreteSim => "discrete_sim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizingEstimate {
    pub epsilon: f64,
    pub stderr: f64,
    pub method: TwirlMethod,
}

/// Noise strength of the Haar twirl in closed form:
/// `ε = d²(1 − F_e)/(d² − 1)` with entanglement fidelity
/// `F_e = Σ_μ |Tr K_μ|² / d²`.
pub fn twirl_analytic(ch: &KrausChannel) -> Result<DepolarizingEstimate> {
    let dev = ch.trace_preservation_defect();
    if dev > 1e-8 {
        return Err(Error::NotTracePreserving(dev));
    }
    let d = ch.dim() as f64;
    let epsilon = if ch.dim() == 1 {
        0.0
    } else {
        let fe: f64 = ch.kraus().iter().map(|k| trace(k).norm_sqr()).sum::<f64>() / (d * d);
        d * d * (1.0 - fe) / (d * d - 1.0)
    };
    Ok(DepolarizingEstimate {
        epsilon,
        stderr: 0.0,
        method: TwirlMethod::Analytic,
    })
}

/// `ε = (comp − Tr[ρO]) / (Tr[O]/d − Tr[ρO])`.
pub fn noise_strength_from_expectation(
    comp_value: f64,
    rho: &DensityMatrix,
    obs: &Observable,
) -> Result<f64> {
    let base = expectation(rho, obs)?;
    let mixed = trace(obs.matrix()).re / obs.dim() as f64;
    let denom = mixed - base;
    if denom.abs() <= DENOM_FLOOR {
        return Err(Error::DegenerateDenominator(denom.abs()));
    }
    Ok((comp_value - base) / denom)
}

/// Monte-Carlo Haar twirl: each sample conjugates the channel by a Haar
/// unitary, evaluates the probe, and converts to a noise strength.
pub fn twirl_haar_mc(
    ch: &KrausChannel,
    n_samples: usize,
    seed: u64,
    probe: &DensityMatrix,
    obs: &Observable,
) -> Result<DepolarizingEstimate> {
    if n_samples < 100 {
        return Err(Error::InvalidInput(format!(
            "Haar twirl needs at least 100 samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let twirls: Vec<CMatrix> = (0..n_samples)
        .map(|_| haar_unitary(ch.dim(), &mut rng))
        .collect();
    let est = twirl_samples(ch, &twirls, probe, obs)?;
    Ok(DepolarizingEstimate {
        method: TwirlMethod::HaarMc,
        ..est
    })
}

/// Twirl over an explicit finite set `{U_m}`: the probe value is averaged
/// over `m` and converted to a noise strength. The reported standard error
/// is the spread of the per-`m` noise strengths.
pub fn twirl_discrete(
    ch: &KrausChannel,
    twirl_set: &[CMatrix],
    probe: &DensityMatrix,
    obs: &Observable,
) -> Result<DepolarizingEstimate> {
    if twirl_set.is_empty() {
        return Err(Error::InvalidInput("twirl set is empty".into()));
    }
    let tol = Tolerances::default();
    for u in twirl_set {
        check_dims(ch.dim(), check_unitary(u, &tol)?)?;
    }
    twirl_samples(ch, twirl_set, probe, obs)
}

fn twirl_samples(
    ch: &KrausChannel,
    twirls: &[CMatrix],
    probe: &DensityMatrix,
    obs: &Observable,
) -> Result<DepolarizingEstimate> {
    check_dims(ch.dim(), probe.dim())?;
    check_dims(ch.dim(), obs.dim())?;
    let values: Vec<f64> = twirls
        .par_iter()
        .map(|u| {
            ch.conjugated(u)
                .output_expectation(probe.matrix(), obs.matrix())
        })
        .collect();
    let per_sample = values
        .iter()
        .map(|&v| noise_strength_from_expectation(v, probe, obs))
        .collect::<Result<Vec<_>>>()?;
    // ε is affine in the probe value, so the mean of per-sample strengths is
    // the strength of the mean value.
    let (epsilon, stderr) = mean_and_stderr(&per_sample);
    Ok(DepolarizingEstimate {
        epsilon,
        stderr,
        method: TwirlMethod::DiscreteSim,
    })
}

/// `(1 − ε)ρ + ε 1/d`, for `ε ∈ [0, d²/(d² − 1)]`.
pub fn depolarize(rho: &DensityMatrix, epsilon: f64) -> Result<DensityMatrix> {
    let d = rho.dim() as f64;
    let max = if rho.dim() == 1 {
        1.0
    } else {
        d * d / (d * d - 1.0)
    };
    if !(epsilon >= 0.0 && epsilon <= max + 1e-12) {
        return Err(Error::UnphysicalEpsilon { epsilon, max });
    }
    let mixed = CMatrix::identity(rho.dim(), rho.dim()).scale(epsilon / d);
    Ok(DensityMatrix {
        matrix: rho.matrix().scale(1.0 - epsilon) + mixed,
    })
}

//! Unitary sampling and expectation-value reconstruction.
//!
//! A unitary `U = Σ e^{iφ_α}|α⟩⟨α|` generates the one-parameter family of
//! powers `U^η`. The expectation value `⟨ψ|U^{-η} O U^η|ψ⟩` is a
//! trigonometric polynomial in `η` whose frequencies are the phase
//! differences `φ_β − φ_α`, so it can be recovered at `η = 1` from samples at
//! integer multiples of a small step `λ` by sinc interpolation, provided the
//! step is below the aliasing rate.

use std::f64::consts::PI;

use nalgebra::linalg::Schur;

use crate::error::{Error, Result};
use crate::matrix::{
    check_hermitian, check_square, check_unitary, eig_hermitian, CMatrix, CVector, HermitianEig,
    Tolerances, C64,
};

/// Eigenphases on the principal branch `(−π, π]` with their eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralUnitary {
    phases: Vec<f64>,
    basis: CMatrix,
}

impl SpectralUnitary {
    /// Builds from explicit phases and a unitary basis (columns are the
    /// eigenvectors). Phases are wrapped onto `(−π, π]`.
    pub fn from_parts(phases: Vec<f64>, basis: CMatrix, tol: &Tolerances) -> Result<Self> {
        let d = check_unitary(&basis, tol)?;
        if phases.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: phases.len(),
            });
        }
        Ok(Self {
            phases: phases.into_iter().map(principal_phase).collect(),
            basis,
        })
    }

    /// Diagonal unitary `diag(e^{iφ})` in the computational basis.
    pub fn diagonal(phases: &[f64]) -> Self {
        let d = phases.len();
        Self {
            phases: phases.iter().copied().map(principal_phase).collect(),
            basis: CMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// `Σ e^{iφ_α}|α⟩⟨α|`.
    pub fn to_matrix(&self) -> CMatrix {
        unitary_power(self, 1.0)
    }
}

/// Maps an angle onto `(−π, π]`.
pub fn principal_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Spectral decomposition of a unitary via its complex Schur form.
///
/// A unitary is normal, so the Schur factor is diagonal up to rounding; the
/// diagonal gives the eigenvalues and the Schur vectors the eigenbasis.
/// Phases are sorted ascending.
pub fn spectral_decompose(u: &CMatrix, tol: &Tolerances) -> Result<SpectralUnitary> {
    let d = check_unitary(u, tol)?;
    let (q, t) = Schur::new(u.clone()).unpack();
    let mut pairs: Vec<(f64, usize)> = (0..d)
        .map(|j| (principal_phase(t[(j, j)].arg()), j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut basis = CMatrix::zeros(d, d);
    for (col, &(_, j)) in pairs.iter().enumerate() {
        let mut v: CVector = q.column(j).into_owned();
        let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(pivot) = v.iter().find(|z| z.norm() > 1e-8 * max).copied() {
            let phase = pivot.conj() / pivot.norm();
            v.iter_mut().for_each(|z| *z *= phase);
        }
        basis.set_column(col, &v);
    }
    Ok(SpectralUnitary {
        phases: pairs.into_iter().map(|(p, _)| p).collect(),
        basis,
    })
}

/// `𝒫 = max_{α,β} |φ_α − φ_β|`.
pub fn phase_separation(su: &SpectralUnitary) -> f64 {
    let (lo, hi) = su
        .phases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    if su.phases.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// `(U)^η = V diag(e^{iηφ}) V†`.
pub fn unitary_power(su: &SpectralUnitary, eta: f64) -> CMatrix {
    let d = su.dim();
    let mut scaled = su.basis.clone();
    for j in 0..d {
        let f = C64::from_polar(1.0, eta * su.phases[j]);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= f);
    }
    &scaled * su.basis.adjoint()
}

/// Normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector, tol: &Tolerances) -> Result<Self> {
        let n2 = amplitudes.norm_squared();
        if (n2 - 1.0).abs() > tol.tol_trace.max(1e3 * f64::EPSILON) || !n2.is_finite() {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self { amplitudes })
    }

    /// Scales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NotNormalized(n * n));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(n),
        })
    }

    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        let mut v = CVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }
}

/// Hermitian observable with its cached eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    eig: HermitianEig,
}

impl Observable {
    pub fn new(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_hermitian(&matrix, tol)?;
        let eig = eig_hermitian(&matrix, tol)?;
        Ok(Self { matrix, eig })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CMatrix::identity(dim, dim), &Tolerances::default())
            .expect("identity is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eig(&self) -> &HermitianEig {
        &self.eig
    }

    /// Eigenvalue spread `Δω = ω_max − ω_min`.
    pub fn spread(&self) -> f64 {
        self.eig.spread()
    }

    /// `⟨φ|O|φ⟩` for an arbitrary (not necessarily normalized) vector.
    pub fn quadratic_form(&self, v: &CVector) -> C64 {
        v.dotc(&(&self.matrix * v))
    }

    pub fn expectation(&self, psi: &PureState) -> f64 {
        self.quadratic_form(psi.amplitudes()).re
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `⟨ψ|(U†)^η O (U)^η|ψ⟩ = Σ_{α,β} c_α* c_β 𝒪_{αβ} e^{iη(φ_β − φ_α)}`, evaluated
/// in the eigenbasis of `U`.
pub fn multiplicative_expectation(
    psi: &PureState,
    obs: &Observable,
    su: &SpectralUnitary,
    eta: f64,
) -> Result<f64> {
    let d = su.dim();
    check_dims(d, psi.dim())?;
    check_dims(d, obs.dim())?;
    let coeffs = su.basis.adjoint() * psi.amplitudes();
    let o_eig = su.basis.adjoint() * obs.matrix() * &su.basis;
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            let weight = coeffs[a].conj() * coeffs[b] * o_eig[(a, b)];
            acc += weight * C64::from_polar(1.0, eta * (su.phases[b] - su.phases[a]));
        }
    }
    Ok(acc.re)
}

/// `η_alias = π / 𝒫`.
pub fn aliasing_rate(su: &SpectralUnitary) -> Result<f64> {
    let p = phase_separation(su);
    if p <= Tolerances::default().tol_eig {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(PI / p)
}

/// True iff sampling with step `eta_d` is alias free: `η_d 𝒫 < π`.
pub fn check_discretization(su: &SpectralUnitary, eta_d: f64) -> bool {
    eta_d * phase_separation(su) < PI
}

/// Smallest gap between distinct eigenvalues. Eigenvalues closer than
/// `tol_eig` to their neighbour count as one level.
pub fn min_eigenvalue_gap(eig: &HermitianEig, tol: &Tolerances) -> Result<f64> {
    if eig.values.len() < 2 {
        return Err(Error::InvalidInput(
            "eigenvalue gap needs dimension >= 2".into(),
        ));
    }
    let mut sorted = eig.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut levels = vec![sorted[0]];
    for w in sorted.windows(2) {
        if w[1] - w[0] > tol.tol_eig {
            levels.push(w[1]);
        }
    }
    levels
        .windows(2)
        .map(|w| w[1] - w[0])
        .reduce(f64::min)
        .ok_or(Error::AllDegenerate)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

/// `⌈safety · (2 + gap) / (λ · gap)⌉`.
pub fn required_n_l(gap: f64, lambda: f64, safety: f64) -> Result<usize> {
    check_lambda(lambda)?;
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "gap must be positive, got {gap}"
        )));
    }
    if !(safety >= 1.0 && safety.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "safety must be >= 1, got {safety}"
        )));
    }
    let bound = safety * (2.0 + gap) / (lambda * gap);
    // absorb rounding in quotients that are integers in exact arithmetic
    let n = (bound * (1.0 - 1e-12)).ceil();
    if n > u32::MAX as f64 {
        return Err(Error::InvalidInput(format!(
            "n_l bound {bound:.3e} is too large"
        )));
    }
    Ok((n as usize).max(1))
}

/// Power step `λ`, grid half-width `n_l`, and the safety multiplier used to
/// choose `n_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionPlan {
    pub lambda: f64,
    pub n_l: usize,
    pub safety: f64,
}

impl ReconstructionPlan {
    pub fn new(lambda: f64, n_l: usize) -> Result<Self> {
        check_lambda(lambda)?;
        if n_l == 0 {
            return Err(Error::InvalidInput("n_l must be positive".into()));
        }
        Ok(Self {
            lambda,
            n_l,
            safety: 1.0,
        })
    }

    /// Plan whose `n_l` satisfies the lower bound for the given intermediate
    /// eigenvalue gap, multiplied by `safety`.
    pub fn from_gap(gap: f64, lambda: f64, safety: f64) -> Result<Self> {
        let n_l = required_n_l(gap, lambda, safety)?;
        Ok(Self {
            lambda,
            n_l,
            safety,
        })
    }

    pub fn n_samples(&self) -> usize {
        2 * self.n_l + 1
    }
}

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Expectation values on the symmetric grid `k = −n_l ..= n_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub lambda: f64,
    pub values: Vec<f64>,
}

impl SampleGrid {
    pub fn new(lambda: f64, values: Vec<f64>) -> Result<Self> {
        if values.len().is_multiple_of(2) {
            return Err(Error::BadLength {
                found: values.len(),
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self { lambda, values })
    }

    pub fn n_l(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    /// `(k, value)` pairs in increasing `k`.
    pub fn indexed(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let n = self.n_l() as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as i64 - n, v))
    }

    pub fn interpolate(&self, eta: f64) -> f64 {
        self.indexed()
            .map(|(k, v)| v * sinc((eta - k as f64 * self.lambda) / self.lambda))
            .sum()
    }

    pub fn reconstruct(&self) -> f64 {
        self.interpolate(1.0)
    }
}

/// `Σ_k samples[k] · sinc((1 − kλ)/λ)` over `k = −n_l ..= n_l`.
pub fn sinc_reconstruct(samples: &[f64], lambda: f64) -> Result<f64> {
    Ok(SampleGrid::new(lambda, samples.to_vec())?.reconstruct())
}

/// Samples `⟨ψ|(U_d†)^k O (U_d)^k|ψ⟩` for `k = −n_l ..= n_l` by repeatedly
/// applying `U_d` (or `U_d†`) to the state. No fractional powers are used.
pub fn sample_integer_powers(
    psi: &PureState,
    obs: &Observable,
    u_d: &CMatrix,
    n_l: usize,
) -> Result<Vec<f64>> {
    let d = check_square(u_d)?;
    check_dims(d, psi.dim())?;
    check_dims(d, obs.dim())?;
    let mut values = vec![0.0; 2 * n_l + 1];
    values[n_l] = obs.expectation(psi);

    let u_dag = u_d.adjoint();
    let mut forward = psi.amplitudes().clone();
    let mut backward = psi.amplitudes().clone();
    for k in 1..=n_l {
        forward = u_d * &forward;
        backward = &u_dag * &backward;
        values[n_l + k] = obs.quadratic_form(&forward).re;
        values[n_l - k] = obs.quadratic_form(&backward).re;
    }
    Ok(values)
}

/// Samples on the plan's grid, ready for reconstruction.
pub fn user_sample(
    psi: &PureState,
    obs: &Observable,
    u_sd: &CMatrix,
    plan: &ReconstructionPlan,
    tol: &Tolerances,
) -> Result<SampleGrid> {
    check_unitary(u_sd, tol)?;
    check_lambda(plan.lambda)?;
    let values = sample_integer_powers(psi, obs, u_sd, plan.n_l)?;
    SampleGrid::new(plan.lambda, values)
}

/// Approximates `⟨ψ|U_i† O U_i|ψ⟩` where `U_sd ≈ U_i^λ`, using only integer
/// powers of `U_sd`.
pub fn user_reconstruct(
    psi: &PureState,
    obs: &Observable,
    u_sd: &CMatrix,
    plan: &ReconstructionPlan,
    tol: &Tolerances,
) -> Result<f64> {
    Ok(user_sample(psi, obs, u_sd, plan, tol)?.reconstruct())
}

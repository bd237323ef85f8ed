//! Analog-simulator model: time-dependent Hamiltonian families, their
//! time-ordered evolutions, and the first two Magnus terms.
//!
//! Sign convention: an evolution is written `U = e^{iM}` with
//! `Ω₁ = −∫H dt`, so `e^{iΩ₁} = e^{−i∫H dt}` at leading order.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{
    check_hermitian, commutator, eig_hermitian, expm_hermitian_i_with, hermitian_part, op_norm,
    random_hermitian_with_norm, CMatrix, Tolerances, C64,
};

/// Default quadrature resolution for evolutions and Magnus integrals.
pub const DEFAULT_N_STEPS: usize = 512;
/// Number of members in a designed sequence unless overridden.
pub const DEFAULT_N_S: usize = 4;

type Generator = dyn Fn(f64, f64) -> CMatrix + Send + Sync;

/// `H_γ(t)`: a Hermitian generator parameterized by a real `γ` and time.
#[derive(Clone)]
pub struct HamiltonianFamily {
    dim: usize,
    label: String,
    generator: Arc<Generator>,
}

impl fmt::Debug for HamiltonianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianFamily")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl HamiltonianFamily {
    pub fn new<F>(dim: usize, label: impl Into<String>, generator: F) -> Self
    where
        F: Fn(f64, f64) -> CMatrix + Send + Sync + 'static,
    {
        Self {
            dim,
            label: label.into(),
            generator: Arc::new(generator),
        }
    }

    /// Family whose every member is the same time-independent `H`.
    pub fn constant(h: CMatrix, label: impl Into<String>) -> Self {
        let dim = h.nrows();
        Self::new(dim, label, move |_, _| h.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at(&self, gamma: f64, t: f64) -> CMatrix {
        (self.generator)(gamma, t)
    }

    pub fn checked_at(&self, gamma: f64, t: f64, tol: &Tolerances) -> Result<CMatrix> {
        let h = self.at(gamma, t);
        let d = check_hermitian(&h, tol)?;
        if d != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: d,
            });
        }
        Ok(h)
    }

    fn midpoints(
        &self,
        gamma: f64,
        t: f64,
        n_steps: usize,
        tol: &Tolerances,
    ) -> Result<Vec<CMatrix>> {
        let dt = t / n_steps as f64;
        (0..n_steps)
            .map(|j| self.checked_at(gamma, (j as f64 + 0.5) * dt, tol))
            .collect()
    }
}

/// One member evolution: `H_γ` run for `t_final`, integrated with
/// `n_steps` midpoint slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionSpec {
    pub gamma: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl EvolutionSpec {
    pub fn new(gamma: f64, t_final: f64, n_steps: usize) -> Result<Self> {
        let spec = Self {
            gamma,
            t_final,
            n_steps,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.n_steps < 16 {
            return Err(Error::InvalidInput(format!(
                "n_steps must be >= 16, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }
}

/// `𝒯 exp(−i∫H dt)` as the product of midpoint slices, later times on the
/// left. Second order in the slice width.
pub fn time_ordered_evolve(fam: &HamiltonianFamily, spec: &EvolutionSpec) -> Result<CMatrix> {
    spec.validate()?;
    let tol = Tolerances::default();
    let d = fam.dim();
    let dt = spec.t_final / spec.n_steps as f64;
    let mut u = CMatrix::identity(d, d);
    for j in 0..spec.n_steps {
        let h = fam.checked_at(spec.gamma, (j as f64 + 0.5) * dt, &tol)?;
        let step = expm_hermitian_i_with(&h, -dt, &tol)?;
        u = step * u;
    }
    Ok(u)
}

fn check_time(t: f64, n_steps: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be positive".into()));
    }
    Ok(())
}

/// `Ω₁ = −∫₀ᵗ H(t₁) dt₁` by the midpoint rule.
pub fn magnus_omega1(
    fam: &HamiltonianFamily,
    gamma: f64,
    t: f64,
    n_steps: usize,
) -> Result<CMatrix> {
    check_time(t, n_steps)?;
    let hs = fam.midpoints(gamma, t, n_steps, &Tolerances::default())?;
    Ok(omega1_from_samples(&hs, t / n_steps as f64))
}

fn omega1_from_samples(hs: &[CMatrix], dt: f64) -> CMatrix {
    let d = hs[0].nrows();
    let mut acc = CMatrix::zeros(d, d);
    for h in hs {
        acc += h;
    }
    acc.scale(-dt)
}

/// `Ω₂ = (i/2) ∫₀ᵗ dt₁ ∫₀^{t₁} dt₂ [H(t₁), H(t₂)]`.
///
/// Midpoint cells strictly below the diagonal contribute `[H_j, H_l] Δt²`;
/// the half cells on the diagonal vanish at this order.
pub fn magnus_omega2(
    fam: &HamiltonianFamily,
    gamma: f64,
    t: f64,
    n_steps: usize,
) -> Result<CMatrix> {
    check_time(t, n_steps)?;
    let hs = fam.midpoints(gamma, t, n_steps, &Tolerances::default())?;
    Ok(omega2_from_samples(&hs, t / n_steps as f64))
}

fn omega2_from_samples(hs: &[CMatrix], dt: f64) -> CMatrix {
    let d = hs[0].nrows();
    let mut acc = CMatrix::zeros(d, d);
    let mut earlier = CMatrix::zeros(d, d);
    for h in hs {
        acc += commutator(h, &earlier);
        earlier += h;
    }
    hermitian_part(&(acc * C64::new(0.0, 0.5 * dt * dt)))
}

/// `M_κ = Σ_{n≤κ} Ω_n`, with its order.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnusOperator {
    pub order: usize,
    pub matrix: CMatrix,
}

fn check_order(kappa: usize) -> Result<()> {
    if !(1..=2).contains(&kappa) {
        return Err(Error::UnsupportedOrder(kappa));
    }
    Ok(())
}

pub fn magnus_truncated(
    fam: &HamiltonianFamily,
    gamma: f64,
    t: f64,
    kappa: usize,
    n_steps: usize,
) -> Result<MagnusOperator> {
    check_order(kappa)?;
    check_time(t, n_steps)?;
    let hs = fam.midpoints(gamma, t, n_steps, &Tolerances::default())?;
    let dt = t / n_steps as f64;
    let mut m = omega1_from_samples(&hs, dt);
    if kappa >= 2 {
        m += omega2_from_samples(&hs, dt);
    }
    Ok(MagnusOperator {
        order: kappa,
        matrix: hermitian_part(&m),
    })
}

/// How a [`SequencePlan`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    /// Members are abstract evolutions whose Magnus operators are set
    /// directly to `πλA/n_s + δ_ξ`.
    Synthetic,
    /// Members are real evolutions of the family with fitted `(γ, t)`.
    DriveFit,
}

/// One member of a sequence together with its Magnus terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMember {
    /// `None` for synthetic members.
    pub spec: Option<EvolutionSpec>,
    pub omega1: CMatrix,
    pub omega2: CMatrix,
}

impl SequenceMember {
    pub fn magnus(&self, kappa: usize) -> Result<CMatrix> {
        check_order(kappa)?;
        Ok(if kappa == 1 {
            self.omega1.clone()
        } else {
            &self.omega1 + &self.omega2
        })
    }

    fn from_evolution(fam: &HamiltonianFamily, spec: EvolutionSpec) -> Result<Self> {
        spec.validate()?;
        let hs = fam.midpoints(
            spec.gamma,
            spec.t_final,
            spec.n_steps,
            &Tolerances::default(),
        )?;
        let dt = spec.t_final / spec.n_steps as f64;
        Ok(Self {
            spec: Some(spec),
            omega1: omega1_from_samples(&hs, dt),
            omega2: omega2_from_samples(&hs, dt),
        })
    }
}

/// A sequence of members whose κ-truncated Magnus operators sum to `πλA`
/// up to `residual` (operator norm).
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePlan {
    pub members: Vec<SequenceMember>,
    pub target_a: CMatrix,
    pub lambda: f64,
    pub kappa: usize,
    pub residual: f64,
    pub mode: DesignMode,
}

impl SequencePlan {
    pub fn n_s(&self) -> usize {
        self.members.len()
    }

    /// `Σ_ξ M_{ξ,κ} − πλA`.
    pub fn defect(&self, kappa: usize) -> Result<CMatrix> {
        let d = self.target_a.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for m in &self.members {
            sum += m.magnus(kappa)?;
        }
        Ok(sum - self.target_a.scale(std::f64::consts::PI * self.lambda))
    }

    /// Plan built from explicit member evolutions of `fam`.
    pub fn from_evolutions(
        fam: &HamiltonianFamily,
        specs: &[EvolutionSpec],
        target_a: CMatrix,
        lambda: f64,
        kappa: usize,
    ) -> Result<Self> {
        check_order(kappa)?;
        check_target(&target_a, lambda)?;
        if specs.is_empty() {
            return Err(Error::InvalidInput(
                "a sequence needs at least one member".into(),
            ));
        }
        let members = specs
            .iter()
            .map(|&s| SequenceMember::from_evolution(fam, s))
            .collect::<Result<Vec<_>>>()?;
        let mut plan = Self {
            members,
            target_a,
            lambda,
            kappa,
            residual: 0.0,
            mode: DesignMode::DriveFit,
        };
        plan.residual = op_norm(&plan.defect(kappa)?);
        Ok(plan)
    }
}

fn check_target(target_a: &CMatrix, lambda: f64) -> Result<()> {
    let tol = Tolerances::default();
    check_hermitian(target_a, &tol)?;
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::InvalidLambda(lambda));
    }
    let norm = op_norm(target_a);
    if norm > 1.0 + tol.tol_eig {
        return Err(Error::SpectrumOutOfRange { norm });
    }
    Ok(())
}

/// Options for [`design_sequence_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    pub n_s: usize,
    pub mode: DesignMode,
    /// Quadrature resolution for drive-fit members.
    pub n_steps: usize,
    /// Coordinate-descent sweeps for drive fitting.
    pub max_sweeps: usize,
    /// Starting `(γ, t)` per member for drive fitting; empty picks a default
    /// grid.
    pub initial: Vec<(f64, f64)>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            n_s: DEFAULT_N_S,
            mode: DesignMode::Synthetic,
            n_steps: 128,
            max_sweeps: 200,
            initial: Vec::new(),
        }
    }
}

/// Synthetic-mode sequence design with the default member count.
pub fn design_sequence(
    fam: &HamiltonianFamily,
    target_a: &CMatrix,
    lambda: f64,
    kappa: usize,
    perturbation: f64,
    seed: u64,
) -> Result<SequencePlan> {
    design_sequence_with(
        fam,
        target_a,
        lambda,
        kappa,
        perturbation,
        seed,
        &DesignOptions::default(),
    )
}

pub fn design_sequence_with(
    fam: &HamiltonianFamily,
    target_a: &CMatrix,
    lambda: f64,
    kappa: usize,
    perturbation: f64,
    seed: u64,
    opts: &DesignOptions,
) -> Result<SequencePlan> {
    check_order(kappa)?;
    check_target(target_a, lambda)?;
    if opts.n_s == 0 {
        return Err(Error::InvalidInput("n_s must be positive".into()));
    }
    if !(perturbation >= 0.0 && perturbation.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "perturbation must be non-negative, got {perturbation}"
        )));
    }
    match opts.mode {
        DesignMode::Synthetic => {
            synthetic_plan(target_a, lambda, kappa, perturbation, seed, opts.n_s)
        }
        DesignMode::DriveFit => fit_drive_plan(fam, target_a, lambda, kappa, opts),
    }
}

fn synthetic_plan(
    target_a: &CMatrix,
    lambda: f64,
    kappa: usize,
    perturbation: f64,
    seed: u64,
    n_s: usize,
) -> Result<SequencePlan> {
    let d = target_a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let share = target_a.scale(std::f64::consts::PI * lambda / n_s as f64);
    let mut defect = CMatrix::zeros(d, d);
    let mut members = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        let delta = if perturbation > 0.0 {
            random_hermitian_with_norm(d, perturbation, &mut rng)
        } else {
            CMatrix::zeros(d, d)
        };
        defect += &delta;
        members.push(SequenceMember {
            spec: None,
            omega1: &share + delta,
            omega2: CMatrix::zeros(d, d),
        });
    }
    Ok(SequencePlan {
        members,
        target_a: target_a.clone(),
        lambda,
        kappa,
        residual: op_norm(&defect),
        mode: DesignMode::Synthetic,
    })
}

/// Coordinate descent on the members' `(γ, t)` minimizing
/// `‖Σ M_{ξ,κ} − πλA‖_F`. No optimality claim; the achieved residual is
/// recorded in the plan.
fn fit_drive_plan(
    fam: &HamiltonianFamily,
    target_a: &CMatrix,
    lambda: f64,
    kappa: usize,
    opts: &DesignOptions,
) -> Result<SequencePlan> {
    let goal = target_a.scale(std::f64::consts::PI * lambda);
    let n_s = opts.n_s;
    let mut params: Vec<f64> = if opts.initial.is_empty() {
        let t0 = (std::f64::consts::PI * lambda / n_s as f64).max(1e-3);
        (0..n_s).flat_map(|xi| [1.0 + xi as f64, t0]).collect()
    } else if opts.initial.len() == n_s {
        opts.initial.iter().flat_map(|&(g, t)| [g, t]).collect()
    } else {
        return Err(Error::InvalidInput(format!(
            "expected {n_s} initial (gamma, t) pairs, got {}",
            opts.initial.len()
        )));
    };

    let objective = |p: &[f64]| -> Result<f64> {
        let d = goal.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for xi in 0..n_s {
            let (gamma, t) = (p[2 * xi], p[2 * xi + 1]);
            sum += magnus_truncated(fam, gamma, t, kappa, opts.n_steps)?.matrix;
        }
        Ok((sum - &goal).norm())
    };

    let mut best = objective(&params)?;
    let mut steps: Vec<f64> = params.iter().map(|p| 0.25 * p.abs().max(0.1)).collect();
    for _ in 0..opts.max_sweeps {
        let mut improved = false;
        for i in 0..params.len() {
            for dir in [1.0, -1.0] {
                let mut trial = params.clone();
                trial[i] += dir * steps[i];
                // times stay positive
                if i % 2 == 1 && trial[i] <= 1e-6 {
                    continue;
                }
                let value = objective(&trial)?;
                if value < best {
                    best = value;
                    params = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
            if steps.iter().all(|&s| s < 1e-6) {
                break;
            }
        }
    }

    let specs: Vec<EvolutionSpec> = (0..n_s)
        .map(|xi| EvolutionSpec::new(params[2 * xi], params[2 * xi + 1], opts.n_steps.max(16)))
        .collect::<Result<_>>()?;
    SequencePlan::from_evolutions(fam, &specs, target_a.clone(), lambda, kappa)
}

/// `Π_ξ e^{iM_{ξ,κ}}`, with `ξ = 1` leftmost.
pub fn approx_discretization_unitary(plan: &SequencePlan, kappa: usize) -> Result<CMatrix> {
    check_order(kappa)?;
    let tol = Tolerances::default();
    let d = plan.target_a.nrows();
    let mut u = CMatrix::identity(d, d);
    for m in &plan.members {
        let gen = hermitian_part(&m.magnus(kappa)?);
        u *= expm_hermitian_i_with(&gen, 1.0, &tol)?;
    }
    Ok(u)
}

/// Eigenvalues of a plan's target, for gap estimates.
pub fn target_spectrum(plan: &SequencePlan) -> Result<Vec<f64>> {
    Ok(eig_hermitian(&plan.target_a, &Tolerances::default())?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{expm_hermitian_i, is_unitary, max_abs, random_hermitian, real_diag};
    use crate::oracle::{log_log_slope, op_distance};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }
    fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }
    fn z() -> CMatrix {
        real_diag(&[1.0, -1.0])
    }

    fn linear_family() -> HamiltonianFamily {
        let (x, z) = (x(), z());
        HamiltonianFamily::new(2, "X + tZ", move |_, t| &x + z.scale(t))
    }

    fn commuting_family(h0: CMatrix) -> HamiltonianFamily {
        HamiltonianFamily::new(h0.nrows(), "f(t) H0", move |_, t| h0.scale(1.0 + t.sin()))
    }

    #[test]
    fn constant_family_evolution_is_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(4, &mut rng);
        let fam = HamiltonianFamily::constant(h.clone(), "const");
        let u = time_ordered_evolve(&fam, &EvolutionSpec::new(0.0, 0.7, 256).unwrap()).unwrap();
        let exact = expm_hermitian_i(&h, -0.7).unwrap();
        assert!(max_abs(&(u - exact)) < 1e-8);
    }

    #[test]
    fn commuting_family_evolution_uses_scalar_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h0 = random_hermitian(3, &mut rng);
        let fam = commuting_family(h0.clone());
        let t = 1.3;
        let u = time_ordered_evolve(&fam, &EvolutionSpec::new(0.0, t, 512).unwrap()).unwrap();
        // ∫₀ᵗ (1 + sin s) ds = t + 1 − cos t
        let integral = t + 1.0 - t.cos();
        let exact = expm_hermitian_i(&h0, -integral).unwrap();
        assert!(max_abs(&(&u - exact)) < 1e-6);
        assert!(is_unitary(&u, &Tolerances::default()));
    }

    #[test]
    fn short_evolution_is_identity() {
        let fam = linear_family();
        let u = time_ordered_evolve(&fam, &EvolutionSpec::new(0.0, 1e-14, 16).unwrap()).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn evolution_spec_validation() {
        assert!(EvolutionSpec::new(0.0, 0.0, 64).is_err());
        assert!(EvolutionSpec::new(0.0, 1.0, 8).is_err());
    }

    #[test]
    fn omega1_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(3, &mut rng);
        let fam = HamiltonianFamily::constant(h.clone(), "const");
        let o1 = magnus_omega1(&fam, 0.0, 0.6, 7).unwrap();
        assert!(max_abs(&(o1 + h.scale(0.6))) < 1e-14);

        let h0 = random_hermitian(3, &mut rng);
        let h0 = h0.unscale(max_abs(&h0));
        let h0c = h0.clone();
        let sine = HamiltonianFamily::new(3, "sin", move |_, t| h0c.scale(t.sin()));
        let o1 = magnus_omega1(&sine, 0.0, PI, 1024).unwrap();
        assert!(max_abs(&(o1 + h0.scale(2.0))) < 1e-6);

        let tiny = magnus_omega1(&fam, 0.0, 1e-15, 16).unwrap();
        assert!(max_abs(&tiny) < 1e-13);
    }

    #[test]
    fn omega2_vanishes_for_commuting_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fam = commuting_family(random_hermitian(3, &mut rng));
        let o2 = magnus_omega2(&fam, 0.0, 2.0, 256).unwrap();
        assert!(max_abs(&o2) < 1e-10);
        let tiny = magnus_omega2(&linear_family(), 0.0, 1e-12, 16).unwrap();
        assert!(max_abs(&tiny) < 1e-20);
    }

    #[test]
    fn omega2_linear_family_closed_form() {
        // [X + t₁Z, X + t₂Z] = (t₂ − t₁)[X, Z] and ∫₀ᵗ∫₀^{t₁}(t₂ − t₁) = −t³/6,
        // so Ω₂ = −(i/12) t³ [X, Z].
        let t = 1.0;
        let o2 = magnus_omega2(&linear_family(), 0.0, t, 1024).unwrap();
        let expected = commutator(&x(), &z()) * c(0.0, -t * t * t / 12.0);
        assert!(max_abs(&(o2 - expected)) < 1e-6);
    }

    #[test]
    fn truncated_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(2, &mut rng);
        let fam = HamiltonianFamily::constant(h.clone(), "const");
        let m1 = magnus_truncated(&fam, 0.0, 0.5, 1, 64).unwrap();
        assert_eq!(m1.order, 1);
        assert!(max_abs(&(m1.matrix + h.scale(0.5))) < 1e-14);

        let cf = commuting_family(h);
        let a = magnus_truncated(&cf, 0.0, 0.8, 1, 128).unwrap();
        let b = magnus_truncated(&cf, 0.0, 0.8, 2, 128).unwrap();
        assert!(max_abs(&(a.matrix - b.matrix)) < 1e-10);

        assert_eq!(
            magnus_truncated(&fam, 0.0, 0.5, 3, 64),
            Err(Error::UnsupportedOrder(3))
        );
    }

    fn truncation_errors(fam: &HamiltonianFamily, ts: &[f64], kappa: usize) -> Vec<f64> {
        ts.iter()
            .map(|&t| {
                let m = magnus_truncated(fam, 0.0, t, kappa, 2048).unwrap();
                let approx = expm_hermitian_i(&m.matrix, 1.0).unwrap();
                let exact =
                    time_ordered_evolve(fam, &EvolutionSpec::new(0.0, t, 4096).unwrap()).unwrap();
                op_distance(&approx, &exact)
            })
            .collect()
    }

    #[test]
    fn magnus_order_linear_family() {
        // For H = X + tZ the commutator vanishes on the diagonal, so Ω₂ is
        // O(t³) and the third-order term cancels at O(t⁴): the κ=1 error
        // falls like t³ and the κ=2 error like t⁵.
        let ts = [0.2, 0.1, 0.05, 0.025];
        let fam = linear_family();
        let s1 = log_log_slope(&ts, &truncation_errors(&fam, &ts, 1));
        let s2 = log_log_slope(&ts, &truncation_errors(&fam, &ts, 2));
        assert!((s1 - 3.0).abs() < 0.3, "kappa 1 slope {s1}");
        assert!((s2 - 5.0).abs() < 0.3, "kappa 2 slope {s2}");
    }

    #[test]
    fn magnus_order_window_scaled_drive() {
        // H(t) = X + sin(2πt/T) Z over one drive period: Ω_n = O(T^n), so
        // the truncation error after κ terms falls like T^{κ+1}.
        let ts = [0.2, 0.1, 0.05, 0.025];
        let errs = |kappa| -> Vec<f64> {
            ts.iter()
                .map(|&t| {
                    let (x, z) = (x(), z());
                    let fam = HamiltonianFamily::new(2, "window", move |_, s| {
                        &x + z.scale((2.0 * PI * s / t).sin())
                    });
                    truncation_errors(&fam, &[t], kappa)[0]
                })
                .collect()
        };
        let s1 = log_log_slope(&ts, &errs(1));
        let s2 = log_log_slope(&ts, &errs(2));
        assert!((s1 - 2.0).abs() < 0.3, "kappa 1 slope {s1}");
        assert!((s2 - 3.0).abs() < 0.3, "kappa 2 slope {s2}");
    }

    fn target(d: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_hermitian_with_norm(d, 0.8, &mut rng)
    }

    #[test]
    fn exact_synthetic_plan_reproduces_discretization_unitary() {
        let a = target(4, 10);
        let fam = HamiltonianFamily::constant(CMatrix::zeros(4, 4), "unused");
        let plan = design_sequence(&fam, &a, 0.25, 2, 0.0, 1).unwrap();
        assert_eq!(plan.residual, 0.0);
        let u = approx_discretization_unitary(&plan, 2).unwrap();
        let exact = expm_hermitian_i(&a, PI * 0.25).unwrap();
        assert!(max_abs(&(u - exact)) < 1e-8);
    }

    #[test]
    fn perturbed_plan_residual_bound() {
        let a = target(4, 11);
        let fam = HamiltonianFamily::constant(CMatrix::zeros(4, 4), "unused");
        let plan = design_sequence(&fam, &a, 0.25, 2, 1e-3, 2).unwrap();
        assert_eq!(plan.n_s(), 4);
        assert!(plan.residual > 0.0 && plan.residual <= 4e-3 + 1e-15);
        let defect = op_norm(&plan.defect(2).unwrap());
        assert!((defect - plan.residual).abs() < 1e-14);
    }

    #[test]
    fn design_is_deterministic() {
        let a = target(3, 12);
        let fam = HamiltonianFamily::constant(CMatrix::zeros(3, 3), "unused");
        let p1 = design_sequence(&fam, &a, 0.2, 2, 1e-2, 99).unwrap();
        let p2 = design_sequence(&fam, &a, 0.2, 2, 1e-2, 99).unwrap();
        assert_eq!(p1, p2);
        let p3 = design_sequence(&fam, &a, 0.2, 2, 1e-2, 100).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn design_rejects_large_spectrum() {
        let a = real_diag(&[1.5, 0.0]);
        let fam = HamiltonianFamily::constant(CMatrix::zeros(2, 2), "unused");
        assert!(matches!(
            design_sequence(&fam, &a, 0.2, 2, 0.0, 0),
            Err(Error::SpectrumOutOfRange { .. })
        ));
    }

    #[test]
    fn perturbed_plan_distance_is_linear_in_defect() {
        let a = target(4, 13);
        let fam = HamiltonianFamily::constant(CMatrix::zeros(4, 4), "unused");
        let exact = expm_hermitian_i(&a, PI * 0.25).unwrap();
        for &p in &[1e-4, 1e-3, 1e-2] {
            let plan = design_sequence(&fam, &a, 0.25, 2, p, 3).unwrap();
            let u = approx_discretization_unitary(&plan, 2).unwrap();
            let dist = op_distance(&u, &exact);
            // ‖e^{X+Δ} − e^{X}‖ ≤ ‖Δ‖ for Hermitian generators, plus BCH
            // reordering terms of size O(p · ‖πλA/n_s‖)
            assert!(
                dist <= 1.2 * plan.residual + 1e-12,
                "p {p}: {dist} vs {}",
                plan.residual
            );
        }
    }

    #[test]
    fn single_member_plan_matches_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h0 = random_hermitian(3, &mut rng);
        let fam = commuting_family(h0.scale(0.2));
        let spec = EvolutionSpec::new(0.0, 0.9, 512).unwrap();
        let a = real_diag(&[0.1, 0.2, 0.3]);
        let plan = SequencePlan::from_evolutions(&fam, &[spec], a, 0.25, 2).unwrap();
        let u = approx_discretization_unitary(&plan, 2).unwrap();
        let evolved = time_ordered_evolve(&fam, &spec).unwrap();
        assert!(max_abs(&(u - evolved)) < 1e-6);
    }

    #[test]
    fn drive_fit_reduces_residual() {
        // Family H_γ(t) = Z + γ X; the target is reachable exactly with one
        // member (γ = 0.5, t chosen to hit the scale).
        let (xm, zm) = (x(), z());
        let fam = HamiltonianFamily::new(2, "Z + γX", move |g, _| &zm + xm.scale(g));
        let lambda = 0.25;
        let a = (real_diag(&[1.0, -1.0]) + x().scale(0.5)).scale(-0.5);
        let opts = DesignOptions {
            n_s: 1,
            mode: DesignMode::DriveFit,
            n_steps: 32,
            max_sweeps: 400,
            initial: vec![(0.1, 0.1)],
        };
        let start = SequencePlan::from_evolutions(
            &fam,
            &[EvolutionSpec::new(0.1, 0.1, 32).unwrap()],
            a.clone(),
            lambda,
            2,
        )
        .unwrap();
        let plan = design_sequence_with(&fam, &a, lambda, 2, 0.0, 0, &opts).unwrap();
        assert_eq!(plan.mode, DesignMode::DriveFit);
        assert!(plan.residual < 1e-4, "residual {}", plan.residual);
        assert!(plan.residual < start.residual);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn approx_unitary_is_always_unitary(seed in any::<u64>(), p in 0.0f64..0.5) {
            let a = target(3, seed);
            let fam = HamiltonianFamily::constant(CMatrix::zeros(3, 3), "unused");
            let plan = design_sequence(&fam, &a, 0.3, 2, p, seed).unwrap();
            let u = approx_discretization_unitary(&plan, 2).unwrap();
            prop_assert!(is_unitary(&u, &Tolerances::default()));
        }

        #[test]
        fn exponentials_compose(seed in any::<u64>(), s1 in -2.0f64..2.0, s2 in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(5, &mut rng);
            let lhs = expm_hermitian_i(&h, s1).unwrap() * expm_hermitian_i(&h, s2).unwrap();
            let rhs = expm_hermitian_i(&h, s1 + s2).unwrap();
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-8);
            prop_assert!(is_unitary(&expm_hermitian_i(&h, s1).unwrap(), &Tolerances::default()));
        }

        #[test]
        fn eig_reconstruction_bound(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(6, &mut rng);
            let e = eig_hermitian(&h, &Tolerances::default()).unwrap();
            prop_assert!(max_abs(&(e.reconstruct() - &h)) <= 1e-9 * max_abs(&h));
        }
    }
}

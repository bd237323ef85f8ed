//! Periodic one-dimensional lattice: the driven Hamiltonian family an analog
//! device realizes and a target Hamiltonian with a linear potential and a
//! modified dispersion.
//!
//! Sites sit at `x_j = a·(j − (N−1)/2)`. The translation `T|j⟩ = |j+1⟩`
//! (periodic) equals `e^{−ip̂a}`, so the kinetic term
//! `−(1/2m)[(T − T†)/(2a)]²` has eigenvalues `sin²(p a)/(2 m a²)` on the
//! momenta `p_j = 2πj/(N a)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::magnus::HamiltonianFamily;
use crate::matrix::{eig_hermitian, hermitian_part, real_diag, CMatrix, CVector, Tolerances, C64};
use crate::user::{Observable, PureState};

/// Physical parameters of a lattice experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub mass: f64,
    pub spacing: f64,
    /// Drive frequency `ω` of `a·x̂·sin(ωt)`; used as the family's `γ`.
    pub drive_omega: f64,
    /// Coefficient of the target's linear potential `b·x̂`.
    pub slope: f64,
    /// Coefficients `c_j` of the dispersion correction `Σ_j c_j (sin(p̂a)/a)^j`.
    pub kinetic_mod: Vec<f64>,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            n_sites: 16,
            mass: 1.0,
            spacing: 1.0,
            drive_omega: 2.0 * PI,
            slope: 0.1,
            kinetic_mod: vec![0.0, 0.0, 0.05],
        }
    }
}

impl LatticeSpec {
    pub fn with_sites(n_sites: usize) -> Self {
        Self {
            n_sites,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidInput(format!(
                "a lattice needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("mass", self.mass)?;
        positive("spacing", self.spacing)?;
        let finite = std::iter::once(self.drive_omega)
            .chain(std::iter::once(self.slope))
            .chain(self.kinetic_mod.iter().copied())
            .all(f64::is_finite);
        if !finite {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

/// Cyclic shift `|j⟩ ↦ |j+1 mod N⟩`.
pub fn translation(n_sites: usize) -> CMatrix {
    let mut t = CMatrix::zeros(n_sites, n_sites);
    for j in 0..n_sites {
        t[((j + 1) % n_sites, j)] = C64::new(1.0, 0.0);
    }
    t
}

/// Centered site coordinates `a·(j − (N−1)/2)`; they sum to zero.
pub fn site_positions(n_sites: usize, spacing: f64) -> Vec<f64> {
    let center = (n_sites as f64 - 1.0) / 2.0;
    (0..n_sites)
        .map(|j| spacing * (j as f64 - center))
        .collect()
}

pub fn position(spec: &LatticeSpec) -> CMatrix {
    real_diag(&site_positions(spec.n_sites, spec.spacing))
}

/// `sin(p̂a)/a = i(T − T†)/(2a)`.
pub fn sin_momentum(spec: &LatticeSpec) -> CMatrix {
    let t = translation(spec.n_sites);
    let diff = &t - t.adjoint();
    hermitian_part(&diff.scale(1.0 / (2.0 * spec.spacing)).map(|z| z * C64::i()))
}

/// `−(1/2m)[(T − T†)/(2a)]²`.
pub fn kinetic(spec: &LatticeSpec) -> CMatrix {
    let t = translation(spec.n_sites);
    let d = (&t - t.adjoint()).scale(1.0 / (2.0 * spec.spacing));
    hermitian_part(&(&d * &d).scale(-1.0 / (2.0 * spec.mass)))
}

/// Analytic kinetic spectrum `sin²(p_j a)/(2 m a²)`, ascending.
pub fn kinetic_dispersion(spec: &LatticeSpec) -> Vec<f64> {
    let n = spec.n_sites as f64;
    let mut v: Vec<f64> = (0..spec.n_sites)
        .map(|j| {
            let pa = 2.0 * PI * j as f64 / n;
            pa.sin().powi(2) / (2.0 * spec.mass * spec.spacing * spec.spacing)
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `H_γ(t) = kinetic + a·x̂·sin(γt)`.
pub fn build_lattice_family(spec: &LatticeSpec) -> Result<HamiltonianFamily> {
    spec.validate()?;
    let kin = kinetic(spec);
    let drive = position(spec).scale(spec.spacing);
    Ok(HamiltonianFamily::new(
        spec.n_sites,
        format!("driven lattice N={}", spec.n_sites),
        move |gamma, t| &kin + drive.scale((gamma * t).sin()),
    ))
}

/// `kinetic + b·x̂ + Σ_j c_j (sin(p̂a)/a)^j`.
pub fn build_target_hamiltonian(spec: &LatticeSpec) -> Result<CMatrix> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut h = kinetic(spec) + position(spec).scale(spec.slope);
    let s = sin_momentum(spec);
    let mut power = CMatrix::identity(n, n);
    for &c in &spec.kinetic_mod {
        if c != 0.0 {
            h += power.scale(c);
        }
        power = &power * &s;
    }
    Ok(hermitian_part(&h))
}

/// `A = −H_t·t/π` rescaled into the unit spectral ball.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGenerator {
    pub a: CMatrix,
    /// Divisor applied to bring the spectrum into `[−1, 1]`; at least 1.
    pub rescale: f64,
    /// Evolution time actually represented: `e^{iπA} = e^{−iH_t·t_eff}`.
    pub t_eff: f64,
}

pub fn target_a_from_hamiltonian(h_t: &CMatrix, evolution_time: f64) -> Result<TargetGenerator> {
    let tol = Tolerances::default();
    if !evolution_time.is_finite() {
        return Err(Error::NonFinite);
    }
    let eig = eig_hermitian(h_t, &tol)?;
    let radius = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * evolution_time.abs() / PI;
    let rescale = radius.max(1.0);
    let a = hermitian_part(&h_t.scale(-evolution_time / (PI * rescale)));
    Ok(TargetGenerator {
        a,
        rescale,
        t_eff: evolution_time / rescale,
    })
}

/// Normalized `exp(−(x − x₀)²/(4σ²) + i k₀ x)` on the sites.
pub fn gaussian_wavepacket(
    spec: &LatticeSpec,
    center: f64,
    width: f64,
    momentum: f64,
) -> Result<PureState> {
    spec.validate()?;
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "width must be positive, got {width}"
        )));
    }
    let amps = site_positions(spec.n_sites, spec.spacing)
        .into_iter()
        .map(|x| {
            C64::from_polar(
                (-(x - center).powi(2) / (4.0 * width * width)).exp(),
                momentum * x,
            )
        })
        .collect::<Vec<_>>();
    PureState::normalized(CVector::from_vec(amps))
}

pub fn position_observable(spec: &LatticeSpec) -> Result<Observable> {
    spec.validate()?;
    Observable::new(position(spec), &Tolerances::default())
}

pub fn momentum_observable(spec: &LatticeSpec) -> Result<Observable> {
    spec.validate()?;
    Observable::new(sin_momentum(spec), &Tolerances::default())
}

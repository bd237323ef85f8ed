//! Brute-force reference implementations.
//!
//! Nothing outside this module (and the tests) imports it. The routines here
//! avoid the main code paths on purpose: no sampling, no sinc
//! reconstruction, Haar unitaries by Gram-Schmidt instead of QR, matrix
//! exponentials by Taylor series with scaling and squaring.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{eig_hermitian, op_norm, CMatrix, CVector, Tolerances, C64};
use crate::user::{Observable, PureState};

/// Main-path value checked against an oracle value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub main_value: f64,
    pub oracle_value: f64,
    pub abs_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}: main={:.12e} oracle={:.12e} err={:.3e} tol={:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.quantity,
            self.main_value,
            self.oracle_value,
            self.abs_err,
            self.tolerance
        )
    }
}

/// The tolerance is inclusive: `abs_err == tol` passes.
pub fn compare(quantity: &str, main: f64, oracle_value: f64, tol: f64) -> OracleReport {
    let abs_err = (main - oracle_value).abs();
    OracleReport {
        quantity: quantity.to_string(),
        main_value: main,
        oracle_value,
        abs_err,
        tolerance: tol,
        pass: abs_err <= tol,
    }
}

/// `⟨ψ|e^{−iπA} O e^{iπA}|ψ⟩` by direct diagonalization of `A`.
pub fn exact_intermediate_expectation(
    psi: &PureState,
    obs: &Observable,
    a: &CMatrix,
) -> Result<f64> {
    let tol = Tolerances::default();
    let eig = eig_hermitian(a, &tol)?;
    let norm = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if norm > 1.0 + tol.tol_eig {
        return Err(Error::SpectrumOutOfRange { norm });
    }
    let u = eig.apply_fn(|v| C64::from_polar(1.0, std::f64::consts::PI * v));
    let evolved = &u * psi.amplitudes();
    Ok(evolved.dotc(&(obs.matrix() * &evolved)).re)
}

/// `ψ† (U^η)† O U^η ψ` with `U^η = V diag(e^{iηφ}) V†` formed explicitly.
pub fn direct_power_expectation_from_parts(
    psi: &PureState,
    obs: &Observable,
    phases: &[f64],
    basis: &CMatrix,
    eta: f64,
) -> C64 {
    let d = phases.len();
    let mut diag = CMatrix::zeros(d, d);
    for (j, &p) in phases.iter().enumerate() {
        diag[(j, j)] = C64::from_polar(1.0, eta * p);
    }
    let power = basis * diag * basis.adjoint();
    let left = power.adjoint() * obs.matrix() * &power;
    let v = psi.amplitudes();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += v[i].conj() * left[(i, j)] * v[j];
        }
    }
    acc
}

/// Same as [`direct_power_expectation_from_parts`], for integer-valued `η`
/// given a unitary `U` (fractional `η` falls back to Taylor `log`-free
/// repeated products only when `η` is an integer).
pub fn direct_power_expectation(psi: &PureState, obs: &Observable, u: &CMatrix, eta: f64) -> C64 {
    if eta.fract() == 0.0 {
        let n = eta.abs() as usize;
        let base = if eta < 0.0 { u.adjoint() } else { u.clone() };
        let d = u.nrows();
        let mut power = CMatrix::identity(d, d);
        for _ in 0..n {
            power = &base * power;
        }
        let evolved = &power * psi.amplitudes();
        return evolved.dotc(&(obs.matrix() * &evolved));
    }
    // Fractional powers need the spectrum; diagonal matrices are the only
    // case where it can be read off without a decomposition.
    let d = u.nrows();
    let off: f64 = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| u[(i, j)].norm())
        .sum();
    assert!(
        off == 0.0,
        "fractional direct powers need a diagonal unitary"
    );
    let phases: Vec<f64> = (0..d).map(|j| u[(j, j)].arg()).collect();
    direct_power_expectation_from_parts(psi, obs, &phases, &CMatrix::identity(d, d), eta)
}

/// Minimum of `|a − b|` over all pairs whose difference exceeds `1e-10`.
pub fn pairwise_min_gap(values: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..values.len() {
        for j in 0..values.len() {
            if i != j {
                let g = (values[i] - values[j]).abs();
                if g > 1e-10 && g < best {
                    best = g;
                }
            }
        }
    }
    best
}

/// `Tr[ρ O]` as an explicit double loop.
pub fn naive_trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `exp(M)` by Taylor series with scaling and squaring.
pub fn expm_taylor(m: &CMatrix) -> CMatrix {
    let d = m.nrows();
    let norm: f64 = (0..d)
        .map(|i| (0..d).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m.scale(scale);
    let mut term = CMatrix::identity(d, d);
    let mut sum = CMatrix::identity(d, d);
    for k in 1..30 {
        term = &term * &a / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Haar unitary by modified Gram-Schmidt on complex Gaussian columns.
pub fn mc_haar_unitary(dim: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_by_gram_schmidt(dim, &mut rng)
}

pub fn haar_by_gram_schmidt(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut cols: Vec<CVector> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v = CVector::from_fn(dim, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        });
        for q in &cols {
            let c = q.dotc(&v);
            v -= q * c;
        }
        for q in &cols {
            let c = q.dotc(&v);
            v -= q * c;
        }
        let n = v.norm();
        cols.push(v.unscale(n));
    }
    CMatrix::from_columns(&cols)
}

/// The `d²` Weyl (shift-clock) unitaries `X^a Z^b`. An equal mixture of
/// them is the completely depolarizing channel.
pub fn weyl_unitaries(dim: usize) -> Vec<CMatrix> {
    let omega = 2.0 * std::f64::consts::PI / dim as f64;
    let mut out = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut m = CMatrix::zeros(dim, dim);
            for j in 0..dim {
                m[((j + a) % dim, j)] = C64::from_polar(1.0, omega * (b * j) as f64);
            }
            out.push(m);
        }
    }
    out
}

/// Operator-norm distance.
pub fn op_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    op_norm(&(a - b))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

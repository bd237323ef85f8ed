//! Dense complex-matrix substrate.
//!
//! Everything here works on small dense matrices (dimension up to a few
//! hundred). Exponentials of Hermitian generators always go through the
//! eigendecomposition; there is no Padé or Krylov path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Numerical tolerances shared by the whole crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub tol_eig: f64,
    pub tol_unitary: f64,
    pub tol_trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_eig: 1e-10,
            tol_unitary: 1e-9,
            tol_trace: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn new(tol_eig: f64, tol_unitary: f64, tol_trace: f64) -> Result<Self> {
        let tol = Self {
            tol_eig,
            tol_unitary,
            tol_trace,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_eig", self.tol_eig),
            ("tol_unitary", self.tol_unitary),
            ("tol_trace", self.tol_trace),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are ascending; column `j` of `vectors` is the eigenvector of
/// `values[j]`. Each vector has its first non-negligible component real and
/// positive, and vectors inside a degenerate cluster are a canonical
/// orthonormal basis of the cluster's eigenspace (see [`eig_hermitian`]).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(diag) V†` for a scalar function of the eigenvalues.
    pub fn apply_fn<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let d = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let fj = f(self.values[j]);
            scaled.column_mut(j).scale_mut_c(fj);
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|v| C64::new(v, 0.0))
    }

    pub fn spread(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

trait ScaleComplex {
    fn scale_mut_c(&mut self, s: C64);
}

impl<S> ScaleComplex for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, s: C64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

pub fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let d = u.nrows();
    max_abs(&(u * u.adjoint() - CMatrix::identity(d, d)))
}

pub fn check_hermitian(m: &CMatrix, tol: &Tolerances) -> Result<usize> {
    let d = check_square(m)?;
    let deviation = hermiticity_residual(m);
    if deviation > tol.tol_eig {
        return Err(Error::NotHermitian {
            deviation,
            tol: tol.tol_eig,
        });
    }
    Ok(d)
}

pub fn check_unitary(u: &CMatrix, tol: &Tolerances) -> Result<usize> {
    let d = check_square(u)?;
    let deviation = unitarity_residual(u);
    if deviation > tol.tol_unitary {
        return Err(Error::NotUnitary {
            deviation,
            tol: tol.tol_unitary,
        });
    }
    Ok(d)
}

pub fn is_unitary(u: &CMatrix, tol: &Tolerances) -> bool {
    u.nrows() == u.ncols() && unitarity_residual(u) <= tol.tol_unitary
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hermitian part `(M + M†)/2`; used to clean rounding asymmetry.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Eigendecomposition of a Hermitian matrix with a deterministic basis.
///
/// Eigenvalues closer than `tol_eig` form a cluster. The basis of each
/// cluster is obtained by projecting the standard basis vectors, in index
/// order, onto the cluster's eigenspace and Gram-Schmidt orthonormalizing
/// them; every vector then has its first non-negligible component made real
/// and positive.
pub fn eig_hermitian(h: &CMatrix, tol: &Tolerances) -> Result<HermitianEig> {
    let d = check_hermitian(h, tol)?;
    if d == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let sym = hermitian_part(h);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();

    let mut vectors = CMatrix::zeros(d, d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end] - values[end - 1] <= tol.tol_eig {
            end += 1;
        }
        let raw: Vec<CVector> = order[start..end]
            .iter()
            .map(|&j| eig.eigenvectors.column(j).into_owned())
            .collect();
        let basis = canonical_cluster_basis(&raw, d);
        for (offset, v) in basis.into_iter().enumerate() {
            vectors.set_column(start + offset, &v);
        }
        start = end;
    }

    Ok(HermitianEig { values, vectors })
}

fn canonical_cluster_basis(raw: &[CVector], d: usize) -> Vec<CVector> {
    let size = raw.len();
    let project = |v: &CVector| -> CVector {
        let mut out = CVector::zeros(d);
        for r in raw {
            let c = r.dotc(v);
            out += r * c;
        }
        out
    };
    let threshold = 1.0 / (2.0 * d as f64);
    let mut chosen: Vec<CVector> = Vec::with_capacity(size);
    for j in 0..d {
        if chosen.len() == size {
            break;
        }
        let mut e = CVector::zeros(d);
        e[j] = C64::new(1.0, 0.0);
        let mut v = project(&e);
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for q in &chosen {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let n2 = v.norm_squared();
        if n2 >= threshold {
            v /= C64::new(n2.sqrt(), 0.0);
            chosen.push(fix_phase(v));
        }
    }
    if chosen.len() < size {
        // Only reachable for pathological rounding; fall back to the raw basis.
        return raw.iter().cloned().map(fix_phase).collect();
    }
    chosen
}

fn fix_phase(mut v: CVector) -> CVector {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(pivot) = v.iter().find(|z| z.norm() > 1e-8 * max).copied() {
        let phase = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
    v
}

/// `exp(i * scale * H)` for Hermitian `H`.
pub fn expm_hermitian_i(h: &CMatrix, scale: f64) -> Result<CMatrix> {
    expm_hermitian_i_with(h, scale, &Tolerances::default())
}

pub fn expm_hermitian_i_with(h: &CMatrix, scale: f64, tol: &Tolerances) -> Result<CMatrix> {
    let eig = eig_hermitian(h, tol)?;
    Ok(eig.apply_fn(|v| C64::from_polar(1.0, scale * v)))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// diagonal of R made real positive.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = random_gaussian(dim, dim, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        q.column_mut(j).scale_mut_c(phase);
    }
    q
}

/// Complex standard Gaussian entries (`E|z|^2 = 1`).
pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Random Hermitian matrix (GUE-like), unnormalized.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = random_gaussian(dim, dim, rng);
    hermitian_part(&g)
}

/// Random Hermitian matrix rescaled to the given operator norm.
pub fn random_hermitian_with_norm<R: Rng + ?Sized>(dim: usize, norm: f64, rng: &mut R) -> CMatrix {
    let h = random_hermitian(dim, rng);
    let n = op_norm(&h);
    if n == 0.0 {
        return h;
    }
    h.scale(norm / n)
}

/// Hermitian matrix `V diag(values) V†` with a Haar-random eigenbasis.
pub fn random_hermitian_with_spectrum<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> CMatrix {
    let v = haar_unitary(values.len(), rng);
    let eig = HermitianEig {
        values: values.to_vec(),
        vectors: v,
    };
    hermitian_part(&eig.reconstruct())
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

//! Dense Hermitian linear algebra for small quantum systems.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for states, POVM elements and unitaries.
pub type CMatrix = DMatrix<Complex64>;

/// Default eigenvalue cutoff for the positive eigenspace.
pub const DEFAULT_EIG_TOL: f64 = 1e-10;

const EIG_MAX_ITER: usize = 10_000;

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Rebuilds `V diag(values) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.vectors.nrows();
        let mut out = CMatrix::zeros(d, d);
        for (k, &lam) in self.values.iter().enumerate() {
            let v = self.vectors.column(k);
            out += (&v * v.adjoint()) * Complex64::new(lam, 0.0);
        }
        out
    }
}

/// `(m + m†) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// True when every entry has an exactly zero imaginary part.
pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Hermitian eigendecomposition. The input is symmetrized first; matrices
/// with exactly real entries take the real symmetric path.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let d = m.nrows();
    let sym = symmetrize(m);
    let (values, vectors) = if is_real(&sym) {
        let real = sym.map(|z| z.re);
        let eig = SymmetricEigen::try_new(real, f64::EPSILON, EIG_MAX_ITER)
            .ok_or(Error::ConvergenceFailure { dim: d })?;
        (
            eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER)
            .ok_or(Error::ConvergenceFailure { dim: d })?;
        (
            eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
            eig.eigenvectors,
        )
    };

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let mut sorted_vectors = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }
    Ok(HermitianEigen {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// Projector onto the span of eigenvectors with eigenvalue strictly above `tol`.
pub fn positive_eigenprojector(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(m)?;
    let d = m.nrows();
    let mut proj = CMatrix::zeros(d, d);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > tol {
            let v = eig.vectors.column(k);
            proj += &v * v.adjoint();
        }
    }
    Ok(proj)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eig(m)?.values.iter().map(|v| v.abs()).sum())
}

use num_complex::Complex64;

use super::linalg::{hermitian_deviation, hermitian_eig, kron, CMatrix};
use crate::error::{Error, Result};

/// Tolerance for the Hermitian, trace and PSD checks.
pub const STATE_TOL: f64 = 1e-10;

/// Largest Hilbert-space dimension any construction may produce (2^12).
pub const DEFAULT_DIM_CAP: usize = 1 << 12;

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates `m` as a density matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        validate_density(m)
    }

    /// Wraps a matrix that is a density matrix by construction.
    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        DensityMatrix { mat }
    }

    /// The maximally mixed state on `dim` dimensions.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            mat: CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// `|k><k|` in dimension `dim`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut mat = CMatrix::zeros(dim, dim);
        mat[(k, k)] = Complex64::new(1.0, 0.0);
        DensityMatrix { mat }
    }

    /// The projector onto a normalized pure state.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Self::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }
}

/// Checks the density-matrix invariants, naming the first violation.
pub fn validate_density(m: CMatrix) -> Result<DensityMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let dev = hermitian_deviation(&m);
    if dev > STATE_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let trace: Complex64 = m.diagonal().iter().sum();
    let tdev = (trace - Complex64::new(1.0, 0.0)).norm();
    if tdev > STATE_TOL {
        return Err(Error::TraceNotOne { deviation: tdev });
    }
    let min = hermitian_eig(&m)?.values.last().copied().unwrap_or(0.0);
    if min < -STATE_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(DensityMatrix { mat: m })
}

/// `d^n`, or `DimensionOverflow` past `cap`.
pub(crate) fn checked_power_dim(d: usize, n: usize, cap: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.checked_mul(d).filter(|&x| x <= cap).ok_or(Error::DimensionOverflow {
            dim: d.saturating_pow(n as u32),
            cap,
        })?;
    }
    Ok(dim)
}

/// `rho^{⊗n}` under the default dimension cap.
pub fn tensor_power(rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    tensor_power_capped(rho, n, DEFAULT_DIM_CAP)
}

pub fn tensor_power_capped(rho: &DensityMatrix, n: usize, cap: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("tensor power needs n >= 1".into()));
    }
    checked_power_dim(rho.dim(), n, cap)?;
    let mut acc = rho.mat.clone();
    for _ in 1..n {
        acc = kron(&acc, &rho.mat);
    }
    Ok(DensityMatrix { mat: acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::max_abs;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn accepts_maximally_mixed_and_pure() {
        let mm = CMatrix::identity(2, 2) * c(0.5);
        assert!(DensityMatrix::new(mm).is_ok());
        let zero = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert!(DensityMatrix::new(zero).is_ok());
    }

    #[test]
    fn rejects_each_violation() {
        let wrong_trace = CMatrix::identity(2, 2) * c(0.6);
        assert!(matches!(
            DensityMatrix::new(wrong_trace),
            Err(Error::TraceNotOne { .. })
        ));
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.3), c(0.0), c(0.5)]);
        assert!(matches!(
            DensityMatrix::new(not_herm),
            Err(Error::NotHermitian { .. })
        ));
        let not_psd = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(matches!(DensityMatrix::new(not_psd), Err(Error::NotPsd { .. })));
        assert!(matches!(
            DensityMatrix::new(CMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn tensor_power_examples() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert_eq!(tensor_power(&rho, 1).unwrap(), rho);
        let two = tensor_power(&rho, 2).unwrap();
        assert!(max_abs(&(two.matrix() - CMatrix::identity(4, 4) * c(0.25))) < 1e-15);

        let zero = DensityMatrix::basis_state(2, 0);
        let three = tensor_power(&zero, 3).unwrap();
        assert_eq!(three.dim(), 8);
        assert!(max_abs(&(three.matrix() - DensityMatrix::basis_state(8, 0).matrix())) < 1e-15);
    }

    #[test]
    fn tensor_power_respects_cap() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            tensor_power(&rho, 13),
            Err(Error::DimensionOverflow { cap: 4096, .. })
        ));
        assert!(tensor_power_capped(&rho, 3, 8).is_ok());
        assert!(tensor_power_capped(&rho, 4, 8).is_err());
    }
}

use num_complex::Complex64;

use super::{argmax_with_tiebreak, expected_log_increment_from_probs};
use crate::error::{Error, Result};
use crate::quantum::linalg::{hermitian_eig, CMatrix, DEFAULT_EIG_TOL};
use crate::quantum::{tensor_power, DensityMatrix, Povm};

pub const DEFAULT_LAMBDA_GRID: usize = 99;

/// Inputs of a Helstrom measurement between two single-copy estimates.
#[derive(Debug, Clone)]
pub struct HelstromSpec {
    pub rho0_hat: DensityMatrix,
    pub rho1_hat: DensityMatrix,
    pub n_joint: usize,
    pub lambda: f64,
}

impl HelstromSpec {
    pub fn new(
        rho0_hat: DensityMatrix,
        rho1_hat: DensityMatrix,
        n_joint: usize,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sensitivity lambda must lie in (0,1), got {lambda}"
            )));
        }
        if n_joint == 0 {
            return Err(Error::InvalidParameter("n_joint must be >= 1".into()));
        }
        if rho0_hat.dim() != rho1_hat.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho0_hat.dim(),
                got: rho1_hat.dim(),
            });
        }
        Ok(HelstromSpec {
            rho0_hat,
            rho1_hat,
            n_joint,
            lambda,
        })
    }
}

/// The `n`-copy states of a Helstrom design, reused across many `λ`.
#[derive(Debug, Clone)]
pub struct HelstromPair {
    null_joint: CMatrix,
    alt_joint: CMatrix,
}

/// Outcome statistics of one Helstrom measurement `{M₀, I − M₀}`.
#[derive(Debug, Clone)]
pub struct HelstromSplit {
    /// `M₀`, the projector onto the positive eigenspace.
    pub accept_projector: CMatrix,
    /// `[Tr(ρ₀^{⊗n} M₀), Tr(ρ₀^{⊗n} M₁)]`.
    pub null_probs: [f64; 2],
    /// `[Tr(ρ₁^{⊗n} M₀), Tr(ρ₁^{⊗n} M₁)]`.
    pub alt_probs: [f64; 2],
}

impl HelstromPair {
    pub fn new(rho0: &DensityMatrix, rho1: &DensityMatrix, n_joint: usize) -> Result<Self> {
        Ok(HelstromPair {
            null_joint: tensor_power(rho0, n_joint)?.into_matrix(),
            alt_joint: tensor_power(rho1, n_joint)?.into_matrix(),
        })
    }

    pub fn dim(&self) -> usize {
        self.null_joint.nrows()
    }

    /// Eigen-decomposes `(1−λ)A − λB` and reads both outcome distributions
    /// off the eigenbasis, so neither column sum is obtained by subtraction.
    pub fn split(&self, lambda: f64) -> Result<HelstromSplit> {
        let weighted = &self.null_joint * Complex64::new(1.0 - lambda, 0.0)
            - &self.alt_joint * Complex64::new(lambda, 0.0);
        let eig = hermitian_eig(&weighted)?;
        let d = self.dim();
        let mut proj = CMatrix::zeros(d, d);
        let mut null_probs = [0.0; 2];
        let mut alt_probs = [0.0; 2];
        for (k, &val) in eig.values.iter().enumerate() {
            let v = eig.vectors.column(k);
            let a = (v.adjoint() * &self.null_joint * v)[(0, 0)].re;
            let b = (v.adjoint() * &self.alt_joint * v)[(0, 0)].re;
            let slot = if val > DEFAULT_EIG_TOL {
                proj += &v * v.adjoint();
                0
            } else {
                1
            };
            null_probs[slot] += a;
            alt_probs[slot] += b;
        }
        for p in null_probs.iter_mut().chain(alt_probs.iter_mut()) {
            *p = p.clamp(0.0, 1.0);
        }
        Ok(HelstromSplit {
            accept_projector: proj,
            null_probs,
            alt_probs,
        })
    }
}

impl HelstromSplit {
    /// Binary POVM labeled `0` (accept the null) and `1` (reject).
    pub fn to_povm(&self) -> Povm {
        let d = self.accept_projector.nrows();
        let reject = CMatrix::identity(d, d) - &self.accept_projector;
        Povm::from_trusted(
            vec!["0".into(), "1".into()],
            vec![self.accept_projector.clone(), reject],
        )
    }
}

/// Binary Helstrom POVM `{M₀, I − M₀}` on `n_joint` copies.
pub fn helstrom_povm(spec: &HelstromSpec) -> Result<Povm> {
    let pair = HelstromPair::new(&spec.rho0_hat, &spec.rho1_hat, spec.n_joint)?;
    Ok(pair.split(spec.lambda)?.to_povm())
}

/// `{k / (grid_size + 1)}` for `k = 1..=grid_size`; endpoints excluded.
pub fn lambda_grid(grid_size: usize) -> Vec<f64> {
    (1..=grid_size)
        .map(|k| k as f64 / (grid_size + 1) as f64)
        .collect()
}

/// Tie key on the `λ` grid: distance to ½ first, then the smaller `λ`.
pub(crate) fn lambda_tie_key(grid_size: usize) -> impl Fn(usize) -> (usize, usize) {
    let denom = grid_size + 1;
    move |i: usize| {
        let k = i + 1;
        ((2 * k).abs_diff(denom), k)
    }
}

/// Grid search for the `λ` maximizing the expected log increment under
/// `rho1_hat`; returns `(λ, objective)`.
pub fn optimize_lambda_scored(
    rho0_hat: &DensityMatrix,
    rho1_hat: &DensityMatrix,
    n_joint: usize,
    grid_size: usize,
) -> Result<(f64, f64)> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter("lambda grid needs >= 2 points".into()));
    }
    let pair = HelstromPair::new(rho0_hat, rho1_hat, n_joint)?;
    let grid = lambda_grid(grid_size);
    let scores = grid
        .iter()
        .map(|&lam| {
            let s = pair.split(lam)?;
            Ok(expected_log_increment_from_probs(&s.alt_probs, &s.null_probs))
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = argmax_with_tiebreak(&scores, lambda_tie_key(grid_size));
    Ok((grid[best], scores[best]))
}

pub fn optimize_lambda(
    rho0_hat: &DensityMatrix,
    rho1_hat: &DensityMatrix,
    n_joint: usize,
    grid_size: usize,
) -> Result<f64> {
    Ok(optimize_lambda_scored(rho0_hat, rho1_hat, n_joint, grid_size)?.0)
}

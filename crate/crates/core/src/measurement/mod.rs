//! Discriminating measurements and the expected-log-increment objective used
//! to tune them.
//!
//! Two families are provided: the binary Helstrom measurement built from the
//! positive eigenspace of `(1-λ)ρ₀^{⊗n} − λρ₁^{⊗n}`, and a shallow variational
//! circuit (one shared `R_Y(θ)` layer followed by a CNOT ladder) read out in
//! the computational basis.

mod helstrom;
mod variational;

pub use helstrom::{
    helstrom_povm, optimize_lambda, optimize_lambda_scored, lambda_grid, HelstromPair,
    HelstromSpec, HelstromSplit, DEFAULT_LAMBDA_GRID,
};
pub(crate) use helstrom::lambda_tie_key;
pub use variational::{
    optimize_theta, optimize_theta_scored, theta_grid, variational_povm,
    variational_product_probabilities, variational_unitary, VariationalSpec, DEFAULT_THETA_GRID,
};

use crate::error::{Error, Result};
use crate::family::P_FLOOR;
use crate::quantum::{born_probabilities, tensor_power, DensityMatrix, Povm};

/// Objective values closer than this (relative to the best) count as ties.
pub(crate) const TIE_TOL: f64 = 1e-12;

/// `Σ_x p1(x) [ln p1(x) − ln p0(x)]`, both probabilities floored at
/// [`P_FLOOR`]; outcomes with `p1(x) = 0` contribute nothing.
pub fn expected_log_increment_from_probs(p1: &[f64], p0: &[f64]) -> f64 {
    p1.iter()
        .zip(p0)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a.max(P_FLOOR).ln() - b.max(P_FLOOR).ln()))
        .sum()
}

/// Expected one-round log increment of the split likelihood ratio when the
/// state is `rho1_hat` and the round measures `n_joint` copies with `povm`.
pub fn expected_log_increment(
    rho1_hat: &DensityMatrix,
    rho0_hat: &DensityMatrix,
    povm: &Povm,
    n_joint: usize,
) -> Result<f64> {
    let expected = 1usize << n_joint;
    if povm.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: povm.dim(),
        });
    }
    let p1 = clamp(born_probabilities(tensor_power(rho1_hat, n_joint)?.matrix(), povm)?);
    let p0 = clamp(born_probabilities(tensor_power(rho0_hat, n_joint)?.matrix(), povm)?);
    Ok(expected_log_increment_from_probs(&p1, &p0))
}

fn clamp(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|p| p.clamp(0.0, 1.0)).collect()
}

/// Index of the maximum; candidates within the tie tolerance of the maximum
/// are resolved by `prefer` (the smaller key wins).
pub(crate) fn argmax_with_tiebreak<K: PartialOrd>(values: &[f64], key: impl Fn(usize) -> K) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    let mut chosen: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v >= best - tol {
            chosen = match chosen {
                Some(c) if key(c) <= key(i) => Some(c),
                _ => Some(i),
            };
        }
    }
    chosen.unwrap_or(0)
}

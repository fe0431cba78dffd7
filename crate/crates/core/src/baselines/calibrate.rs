use std::collections::HashMap;

use crate::engine::TestSetup;
use crate::error::{Error, Result};
use crate::family::{build_grid, state_from_angle, FamilyConfig, P_FLOOR};
use crate::measurement::{
    argmax_with_tiebreak, lambda_grid, lambda_tie_key, theta_grid,
    variational_product_probabilities, HelstromPair, DEFAULT_LAMBDA_GRID, DEFAULT_THETA_GRID,
};
use crate::quantum::{DensityMatrix, Povm};

const BISECTION_STEPS: usize = 200;

/// `P[Bin(b, p) ≥ k]`.
pub fn binomial_upper_tail(b: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > b {
        return 0.0;
    }
    let q = 1.0 - p;
    let mut coef = 1.0f64; // C(b, j)
    let mut total = 0.0;
    for j in 0..=b {
        if j >= k {
            total += coef * p.powi(j as i32) * q.powi((b - j) as i32);
        }
        coef = coef * (b - j) as f64 / (j + 1) as f64;
    }
    total.min(1.0)
}

/// Votes needed to reject: a strict majority, `⌈(b+1)/2⌉`.
pub fn majority_threshold(b: usize) -> usize {
    b / 2 + 1
}

/// Rejects on a strict majority of ones; even splits accept.
pub fn majority_vote(votes: &[bool]) -> bool {
    votes.iter().filter(|&&v| v).count() >= majority_threshold(votes.len())
}

/// Largest per-block level `p` with `P[Bin(b,p) ≥ ⌈(b+1)/2⌉] ≤ eps0`.
pub fn block_level(b: usize, eps0: f64) -> f64 {
    if b <= 1 {
        return eps0;
    }
    let k = majority_threshold(b);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binomial_upper_tail(b, k, mid) <= eps0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Calibrated Helstrom test between a simple null and an estimated
/// alternative.
#[derive(Debug, Clone)]
pub enum LhtCalibration {
    Feasible {
        lambda: f64,
        size: f64,
        power: f64,
        povm: Povm,
    },
    Infeasible,
}

fn calibrate_lht_full(
    null_state: &DensityMatrix,
    alt_state: &DensityMatrix,
    n_joint: usize,
    level: f64,
    grid_size: usize,
) -> Result<LhtCalibration> {
    let pair = HelstromPair::new(null_state, alt_state, n_joint)?;
    let grid = lambda_grid(grid_size);
    let mut powers = vec![f64::NEG_INFINITY; grid.len()];
    let mut splits = Vec::with_capacity(grid.len());
    for (i, &lam) in grid.iter().enumerate() {
        let s = pair.split(lam)?;
        if s.null_probs[1] <= level {
            powers[i] = s.alt_probs[1];
        }
        splits.push(s);
    }
    if powers.iter().all(|p| *p == f64::NEG_INFINITY) {
        return Ok(LhtCalibration::Infeasible);
    }
    let best = argmax_with_tiebreak(&powers, lambda_tie_key(grid_size));
    let s = &splits[best];
    Ok(LhtCalibration::Feasible {
        lambda: grid[best],
        size: s.null_probs[1],
        power: s.alt_probs[1],
        povm: s.to_povm(),
    })
}

/// The `λ` maximizing exact power `Tr(ρ̂₁^{⊗n} M₁)` subject to exact size
/// `Tr(ρ₀^{⊗n} M₁) ≤ eps0`.
pub fn calibrate_lht_lambda(
    null_state: &DensityMatrix,
    alt_state: &DensityMatrix,
    n_joint: usize,
    eps0: f64,
    grid_size: usize,
) -> Result<f64> {
    match calibrate_lht_full(null_state, alt_state, n_joint, eps0, grid_size)? {
        LhtCalibration::Feasible { lambda, .. } => Ok(lambda),
        LhtCalibration::Infeasible => Err(Error::InfeasibleCalibration { eps0 }),
    }
}

/// Calibrated variational GLR test.
#[derive(Debug, Clone, PartialEq)]
pub struct LvtCalibration {
    pub theta: f64,
    /// `Λ(x)` for every outcome.
    pub glr: Vec<f64>,
    /// Reject iff `Λ(x) ≥ threshold`; `+∞` when no threshold meets the level.
    pub threshold: f64,
    pub size: f64,
    pub power: f64,
}

impl LvtCalibration {
    pub fn rejects(&self, outcome: usize) -> bool {
        self.glr[outcome] >= self.threshold
    }

    pub fn is_feasible(&self) -> bool {
        self.threshold.is_finite()
    }
}

/// GLR calibration at one `θ`: thresholds are the realized GLR values and
/// the smallest one whose worst-case size over `null_probs` is within
/// `level` wins.
fn calibrate_at_theta(alt_probs: &[f64], null_probs: &[Vec<f64>], level: f64) -> (Vec<f64>, f64, f64, f64) {
    let glr: Vec<f64> = (0..alt_probs.len())
        .map(|x| {
            let denom = null_probs.iter().map(|q| q[x]).fold(0.0, f64::max);
            alt_probs[x] / denom.max(P_FLOOR)
        })
        .collect();
    let mut thresholds = glr.clone();
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();
    for &tau in &thresholds {
        let size = null_probs
            .iter()
            .map(|q| (0..q.len()).filter(|&x| glr[x] >= tau).map(|x| q[x]).sum::<f64>())
            .fold(0.0, f64::max);
        if size <= level {
            let power = (0..alt_probs.len()).filter(|&x| glr[x] >= tau).map(|x| alt_probs[x]).sum();
            return (glr, tau, size, power);
        }
    }
    (glr, f64::INFINITY, 0.0, 0.0)
}

/// Picks `θ` on the grid maximizing exact power at the calibrated threshold
/// when the state is `ρ(alt_deg)`; ties go to the smaller `θ`.
pub fn calibrate_lvt(
    cfg: &FamilyConfig,
    null_angles: &[f64],
    alt_deg: f64,
    n_joint: usize,
    level: f64,
    grid_size: usize,
) -> Result<LvtCalibration> {
    if null_angles.is_empty() {
        return Err(Error::InvalidParameter("null grid is empty".into()));
    }
    let alt = state_from_angle(cfg, alt_deg)?;
    let nulls = null_angles
        .iter()
        .map(|&w| state_from_angle(cfg, w))
        .collect::<Result<Vec<_>>>()?;
    let grid = theta_grid(grid_size);
    let mut candidates = Vec::with_capacity(grid.len());
    for &th in &grid {
        let p1 = variational_product_probabilities(th, &alt, n_joint)?;
        let p0 = nulls
            .iter()
            .map(|s| variational_product_probabilities(th, s, n_joint))
            .collect::<Result<Vec<_>>>()?;
        candidates.push(calibrate_at_theta(&p1, &p0, level));
    }
    let powers: Vec<f64> = candidates.iter().map(|c| c.3).collect();
    let best = argmax_with_tiebreak(&powers, |i| i);
    let (glr, threshold, size, power) = candidates.swap_remove(best);
    Ok(LvtCalibration {
        theta: grid[best],
        glr,
        threshold,
        size,
        power,
    })
}

/// Memoizes calibrations by estimated angle and level; estimates live on a
/// finite grid, so runs in a sweep share most of them.
#[derive(Debug, Default)]
pub struct Calibrator {
    pub lambda_grid: Option<usize>,
    pub theta_grid: Option<usize>,
    lht: HashMap<(u64, u64, usize, u64), LhtCalibration>,
    lvt: HashMap<(u64, usize, u64), LvtCalibration>,
    null_angles: Option<Vec<f64>>,
}

impl Calibrator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lht(
        &mut self,
        cfg: &FamilyConfig,
        omega0: f64,
        omega1: f64,
        n_joint: usize,
        level: f64,
    ) -> Result<LhtCalibration> {
        let key = (omega0.to_bits(), omega1.to_bits(), n_joint, level.to_bits());
        if let Some(c) = self.lht.get(&key) {
            return Ok(c.clone());
        }
        let grid = self.lambda_grid.unwrap_or(DEFAULT_LAMBDA_GRID);
        let c = calibrate_lht_full(
            &state_from_angle(cfg, omega0)?,
            &state_from_angle(cfg, omega1)?,
            n_joint,
            level,
            grid,
        )?;
        self.lht.insert(key, c.clone());
        Ok(c)
    }

    /// Assumes one `setup` per calibrator (the null grid is built once).
    pub fn lvt(&mut self, setup: &TestSetup, omega1: f64, n_joint: usize, level: f64) -> Result<LvtCalibration> {
        let key = (omega1.to_bits(), n_joint, level.to_bits());
        if let Some(c) = self.lvt.get(&key) {
            return Ok(c.clone());
        }
        if self.null_angles.is_none() {
            self.null_angles = Some(build_grid(&setup.null_set, setup.resolution_deg)?.angles().to_vec());
        }
        let grid = self.theta_grid.unwrap_or(DEFAULT_THETA_GRID);
        let c = calibrate_lvt(
            &setup.family,
            self.null_angles.as_ref().unwrap(),
            omega1,
            n_joint,
            level,
            grid,
        )?;
        self.lvt.insert(key, c.clone());
        Ok(c)
    }
}

//! Fixed-copy reference tests. Each spends `m` copies on computational-basis
//! estimation of the alternative angle, then `b` joint measurements on four
//! copies each whose binary decisions are combined by majority vote.

mod calibrate;

pub use calibrate::{
    binomial_upper_tail, block_level, calibrate_lht_lambda, calibrate_lvt, majority_threshold,
    majority_vote,
    Calibrator, LhtCalibration, LvtCalibration,
};

use rand::Rng;

use crate::engine::TestSetup;
use crate::error::{Error, Result};
use crate::family::{build_grid, FamilyConfig, HypothesisSet, P_FLOOR};
use crate::quantum::povm::sample_index;
use crate::quantum::{born_probabilities, tensor_power, DensityMatrix};

/// Copy allocation of a fixed-copy test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedTestConfig {
    pub total_budget: usize,
    pub estimation_copies: usize,
    pub joint_copies: usize,
    pub blocks: usize,
    pub eps0: f64,
}

impl FixedTestConfig {
    /// LHT/LVT layout: one joint measurement, everything else estimates.
    pub fn single(n: usize, joint_copies: usize, eps0: f64) -> Result<Self> {
        let cfg = FixedTestConfig {
            total_budget: n,
            estimation_copies: n.checked_sub(joint_copies).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "budget {n} is smaller than the {joint_copies} joint copies"
                ))
            })?,
            joint_copies,
            blocks: 1,
            eps0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// bLHT/bLVT layout: `b = ⌊n/10⌋` joint measurements, `m = n − b·joint`.
    pub fn blocked(n: usize, joint_copies: usize, eps0: f64) -> Result<Self> {
        Self::with_block_size(n, joint_copies, 10, eps0)
    }

    /// `b = ⌊n/block_size⌋` joint measurements, `m = n − b·joint`.
    pub fn with_block_size(n: usize, joint_copies: usize, block_size: usize, eps0: f64) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidParameter("block size must be >= 1".into()));
        }
        let blocks = n / block_size;
        if blocks == 0 {
            return Err(Error::InvalidParameter(format!(
                "block tests need a budget of at least {block_size} copies, got {n}"
            )));
        }
        let joint_total = blocks.checked_mul(joint_copies).filter(|&j| j <= n).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{blocks} blocks of {joint_copies} copies exceed the budget {n}"
            ))
        })?;
        let cfg = FixedTestConfig {
            total_budget: n,
            estimation_copies: n - joint_total,
            joint_copies,
            blocks,
            eps0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Measurement rounds: one per estimation copy plus one per block.
    pub fn rounds(&self) -> usize {
        self.estimation_copies + self.blocks
    }

    pub fn validate(&self) -> Result<()> {
        if self.joint_copies == 0 || self.blocks == 0 {
            return Err(Error::InvalidParameter("need joint_copies >= 1 and blocks >= 1".into()));
        }
        if self.estimation_copies + self.blocks * self.joint_copies != self.total_budget {
            return Err(Error::InvalidParameter(format!(
                "{} estimation copies + {} x {} joint copies != budget {}",
                self.estimation_copies, self.blocks, self.joint_copies, self.total_budget
            )));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::InvalidParameter(format!("eps0 {} outside (0,1)", self.eps0)));
        }
        Ok(())
    }
}

/// Result of one fixed-copy test.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOutcome {
    pub reject: bool,
    pub omega1_hat: f64,
    pub votes: Vec<bool>,
}

/// Grid MLE over `alt_set` from computational-basis counts; ties go to the
/// smallest angle, so an empty sample returns the first grid angle.
pub fn fit_alternative_from_counts(
    cfg: &FamilyConfig,
    alt_set: &HypothesisSet,
    resolution_deg: f64,
    zeros: usize,
    ones: usize,
) -> Result<f64> {
    let grid = build_grid(alt_set, resolution_deg)?;
    let mut best = (f64::NEG_INFINITY, grid.angles()[0]);
    for &w in grid.angles() {
        let (_, z) = cfg.bloch(w);
        let p0 = (0.5 * (1.0 + z)).max(P_FLOOR);
        let p1 = (0.5 * (1.0 - z)).max(P_FLOOR);
        let ll = zeros as f64 * p0.ln() + ones as f64 * p1.ln();
        if ll > best.0 {
            best = (ll, w);
        }
    }
    Ok(best.1)
}

/// Phase one: `m` single-copy computational-basis measurements of `truth`.
fn estimate<R: Rng + ?Sized>(
    setup: &TestSetup,
    truth: &DensityMatrix,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    let p = [truth.matrix()[(0, 0)].re, truth.matrix()[(1, 1)].re];
    let ones = (0..m).filter(|_| sample_index(&p, rng) == 1).count();
    fit_alternative_from_counts(&setup.family, &setup.alt_set, setup.resolution_deg, m - ones, ones)
}

fn check_truth(truth: &DensityMatrix) -> Result<()> {
    if truth.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: truth.dim(),
        });
    }
    Ok(())
}

/// bLHT; with `blocks = 1` this is LHT.
pub fn run_blht<R: Rng + ?Sized>(
    setup: &TestSetup,
    test: &FixedTestConfig,
    truth: &DensityMatrix,
    calibrator: &mut Calibrator,
    rng: &mut R,
) -> Result<FixedOutcome> {
    test.validate()?;
    check_truth(truth)?;
    let omega0 = setup.null_set.as_simple().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "the Helstrom baselines need a simple null, got {}",
            setup.null_set
        ))
    })?;
    let omega1_hat = estimate(setup, truth, test.estimation_copies, rng)?;
    let level = block_level(test.blocks, test.eps0);
    let cal = calibrator.lht(&setup.family, omega0, omega1_hat, test.joint_copies, level)?;
    let votes = match cal {
        LhtCalibration::Infeasible => vec![false; test.blocks],
        LhtCalibration::Feasible { ref povm, .. } => {
            let joint = tensor_power(truth, test.joint_copies)?;
            let probs = born_probabilities(joint.matrix(), povm)?;
            (0..test.blocks).map(|_| sample_index(&probs, rng) == 1).collect()
        }
    };
    Ok(FixedOutcome {
        reject: majority_vote(&votes),
        omega1_hat,
        votes,
    })
}

pub fn run_lht<R: Rng + ?Sized>(
    setup: &TestSetup,
    test: &FixedTestConfig,
    truth: &DensityMatrix,
    calibrator: &mut Calibrator,
    rng: &mut R,
) -> Result<FixedOutcome> {
    if test.blocks != 1 {
        return Err(Error::InvalidParameter("LHT uses a single joint measurement".into()));
    }
    run_blht(setup, test, truth, calibrator, rng)
}

/// bLVT; with `blocks = 1` this is LVT.
pub fn run_blvt<R: Rng + ?Sized>(
    setup: &TestSetup,
    test: &FixedTestConfig,
    truth: &DensityMatrix,
    calibrator: &mut Calibrator,
    rng: &mut R,
) -> Result<FixedOutcome> {
    test.validate()?;
    check_truth(truth)?;
    let omega1_hat = estimate(setup, truth, test.estimation_copies, rng)?;
    let level = block_level(test.blocks, test.eps0);
    let cal = calibrator.lvt(setup, omega1_hat, test.joint_copies, level)?;
    let probs = crate::measurement::variational_product_probabilities(cal.theta, truth, test.joint_copies)?;
    let votes: Vec<bool> = (0..test.blocks)
        .map(|_| cal.rejects(sample_index(&probs, rng)))
        .collect();
    Ok(FixedOutcome {
        reject: majority_vote(&votes),
        omega1_hat,
        votes,
    })
}

pub fn run_lvt<R: Rng + ?Sized>(
    setup: &TestSetup,
    test: &FixedTestConfig,
    truth: &DensityMatrix,
    calibrator: &mut Calibrator,
    rng: &mut R,
) -> Result<FixedOutcome> {
    if test.blocks != 1 {
        return Err(Error::InvalidParameter("LVT uses a single joint measurement".into()));
    }
    run_blvt(setup, test, truth, calibrator, rng)
}

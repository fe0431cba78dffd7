use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::slr::{PovmDescriptor, SlrState};
use crate::error::{Error, Result};
use crate::family::FamilyConfig;
use crate::measurement::{
    optimize_lambda, optimize_theta, HelstromPair, DEFAULT_LAMBDA_GRID, DEFAULT_THETA_GRID,
};
use crate::quantum::Povm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Alht,
    AlhtPlus,
    Alvt,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Alht => "aLHT",
            PolicyKind::AlhtPlus => "aLHT+",
            PolicyKind::Alvt => "aLVT",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "aLHT" => Ok(PolicyKind::Alht),
            "aLHT+" => Ok(PolicyKind::AlhtPlus),
            "aLVT" => Ok(PolicyKind::Alvt),
            other => Err(Error::InvalidParameter(format!("unknown sequential policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationPovm {
    Computational,
    Sic,
}

impl EstimationPovm {
    pub fn descriptor(self) -> PovmDescriptor {
        match self {
            EstimationPovm::Computational => PovmDescriptor::Computational { n_qubits: 1 },
            EstimationPovm::Sic => PovmDescriptor::Sic,
        }
    }
}

impl FromStr for EstimationPovm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "computational" => Ok(EstimationPovm::Computational),
            "sic" => Ok(EstimationPovm::Sic),
            other => Err(Error::InvalidParameter(format!(
                "estimation POVM must be `computational` or `sic`, got `{other}`"
            ))),
        }
    }
}

/// How the Helstrom sensitivity is chosen at each joint round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// Fresh draw from `U(0,1)` per block.
    Uniform,
    /// Grid maximizer of the expected log increment.
    Optimized,
    Fixed(f64),
}

/// Block measurement policy: `n_ic` single-copy estimation rounds followed by
/// one joint round on `n_joint` copies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub n_ic: usize,
    pub n_joint: usize,
    pub estimation_povm: EstimationPovm,
    pub initial_alt_deg: Option<f64>,
    pub lambda_mode: LambdaMode,
    pub lambda_grid: usize,
    pub theta_grid: usize,
}

impl PolicyConfig {
    /// The block shape used in the experiments: six computational-basis
    /// rounds and one four-copy joint round.
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            n_ic: 6,
            n_joint: 4,
            estimation_povm: EstimationPovm::Computational,
            initial_alt_deg: None,
            lambda_mode: match kind {
                PolicyKind::Alht => LambdaMode::Uniform,
                _ => LambdaMode::Optimized,
            },
            lambda_grid: DEFAULT_LAMBDA_GRID,
            theta_grid: DEFAULT_THETA_GRID,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_joint == 0 {
            return Err(Error::InvalidParameter("n_joint must be >= 1".into()));
        }
        if let LambdaMode::Fixed(l) = self.lambda_mode {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::InvalidParameter(format!("fixed lambda {l} outside (0,1)")));
            }
        }
        if self.lambda_grid < 2 || self.theta_grid < 2 {
            return Err(Error::InvalidParameter("optimizer grids need >= 2 points".into()));
        }
        Ok(())
    }

    /// Whether the joint measurement depends on the history only.
    pub fn is_deterministic(&self) -> bool {
        self.kind == PolicyKind::Alvt || self.lambda_mode != LambdaMode::Uniform
    }

    pub fn block_len(&self) -> usize {
        self.n_ic + 1
    }

    /// Copies consumed by the round after `rounds_done` rounds.
    pub fn copies_for_round(&self, rounds_done: usize) -> usize {
        if rounds_done % self.block_len() < self.n_ic {
            1
        } else {
            self.n_joint
        }
    }
}

/// `(r_z, r_x, null, alt, n_joint, grid, kind)` as raw bits.
type OptKey = (u64, u64, u64, u64, usize, usize, u8);

const OPT_CACHE_CAP: usize = 1 << 16;

thread_local! {
    // Optimized λ and θ depend only on the estimate pair, which mostly lives
    // on the MLE grids, so runs revisit the same keys constantly.
    static OPT_CACHE: RefCell<HashMap<OptKey, f64>> = RefCell::new(HashMap::new());
}

fn cached_optimum(key: OptKey, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
    if let Some(v) = OPT_CACHE.with(|c| c.borrow().get(&key).copied()) {
        return Ok(v);
    }
    let v = compute()?;
    OPT_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= OPT_CACHE_CAP {
            c.clear();
        }
        c.insert(key, v);
    });
    Ok(v)
}

/// A measurement chosen for the next round.
#[derive(Debug, Clone)]
pub struct Emission {
    pub descriptor: PovmDescriptor,
    pub povm: Povm,
    pub copies: usize,
}

/// Chooses the next round's POVM from the history held in `state`.
///
/// The joint round uses the refined null MLE and the grid alternative MLE as
/// of the last completed round. Only the `Uniform` mode consumes randomness.
pub fn next_measurement<R: Rng + ?Sized>(
    policy: &PolicyConfig,
    state: &SlrState,
    cfg: &FamilyConfig,
    rng: &mut R,
) -> Result<Emission> {
    let copies = policy.copies_for_round(state.rounds().len());
    let in_ic_phase = state.rounds().len() % policy.block_len() < policy.n_ic;
    if in_ic_phase {
        let descriptor = policy.estimation_povm.descriptor();
        let povm = descriptor.build(cfg)?;
        return Ok(Emission {
            descriptor,
            povm,
            copies,
        });
    }
    let (null_deg, rho0) = state.null_estimate(cfg)?;
    let (alt_deg, rho1) = state.alt_estimate(cfg)?;
    let n = policy.n_joint;
    let key = |grid: usize, tag: u8| -> OptKey {
        (cfg.r_z.to_bits(), cfg.r_x.to_bits(), null_deg.to_bits(), alt_deg.to_bits(), n, grid, tag)
    };
    match policy.kind {
        PolicyKind::Alht | PolicyKind::AlhtPlus => {
            let lambda = match policy.lambda_mode {
                LambdaMode::Fixed(l) => l,
                LambdaMode::Uniform => loop {
                    let l: f64 = rng.gen();
                    if l > 0.0 {
                        break l;
                    }
                },
                LambdaMode::Optimized => cached_optimum(key(policy.lambda_grid, 0), || {
                    optimize_lambda(&rho0, &rho1, n, policy.lambda_grid)
                })?,
            };
            let pair = HelstromPair::new(&rho0, &rho1, n)?;
            let povm = pair.split(lambda)?.to_povm();
            Ok(Emission {
                descriptor: PovmDescriptor::Helstrom {
                    null_deg,
                    alt_deg,
                    n_joint: n,
                    lambda,
                },
                povm,
                copies,
            })
        }
        PolicyKind::Alvt => {
            let theta = cached_optimum(key(policy.theta_grid, 1), || {
                optimize_theta(&rho0, &rho1, n, policy.theta_grid)
            })?;
            let descriptor = PovmDescriptor::Variational { theta, n_joint: n };
            let povm = descriptor.build(cfg)?;
            Ok(Emission {
                descriptor,
                povm,
                copies,
            })
        }
    }
}

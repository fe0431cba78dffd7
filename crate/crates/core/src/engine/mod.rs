//! The sequential test: split likelihood ratio bookkeeping, threshold
//! decisions and the block measurement policies.

mod policy;
mod slr;

pub use policy::{next_measurement, Emission, EstimationPovm, LambdaMode, PolicyConfig, PolicyKind};
pub use slr::{slr_update, PovmDescriptor, RoundRecord, SlrState, SlrValues};

use rand::Rng;

use crate::error::{Error, Result};
use crate::family::{FamilyConfig, HypothesisSet, DEFAULT_RESOLUTION_DEG};
use crate::quantum::povm::sample_index;
use crate::quantum::{born_probabilities, tensor_power, DensityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepDecision {
    Continue,
    RejectNull,
    AcceptNull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    Accept,
    BudgetExhausted,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Reject => "reject",
            Decision::Accept => "accept",
            Decision::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// `ln(1/ε)`, the crossing level for a log ratio.
pub fn log_threshold(eps: f64) -> f64 {
    (1.0 / eps).ln()
}

/// Reject iff `ln Λ ≥ ln(1/ε₀)`.
pub fn one_sided_decision(log_slr: f64, eps0: f64) -> StepDecision {
    if log_slr >= log_threshold(eps0) {
        StepDecision::RejectNull
    } else {
        StepDecision::Continue
    }
}

/// Rejects when `Λ₀ ≥ 1/ε₀`, accepts when `Λ₁ ≥ 1/ε₁`. Both at once is
/// reported as an error instead of being resolved.
pub fn two_sided_decision(log_slr0: f64, log_slr1: f64, eps0: f64, eps1: f64) -> Result<StepDecision> {
    let reject = log_slr0 >= log_threshold(eps0);
    let accept = log_slr1 >= log_threshold(eps1);
    match (reject, accept) {
        (true, true) => Err(Error::InvariantViolation { log_slr0, log_slr1 }),
        (true, false) => Ok(StepDecision::RejectNull),
        (false, true) => Ok(StepDecision::AcceptNull),
        (false, false) => Ok(StepDecision::Continue),
    }
}

/// The testing problem shared by every run: family and hypothesis sets.
#[derive(Debug, Clone)]
pub struct TestSetup {
    pub family: FamilyConfig,
    pub null_set: HypothesisSet,
    pub alt_set: HypothesisSet,
    pub resolution_deg: f64,
}

impl TestSetup {
    pub fn new(family: FamilyConfig, null_set: HypothesisSet, alt_set: HypothesisSet) -> Result<Self> {
        if !null_set.is_disjoint_from(&alt_set) {
            return Err(Error::InvalidHypothesisSet(format!(
                "null {null_set} and alternative {alt_set} overlap"
            )));
        }
        Ok(TestSetup {
            family,
            null_set,
            alt_set,
            resolution_deg: DEFAULT_RESOLUTION_DEG,
        })
    }
}

/// Error levels; `eps1 = None` runs the power-one (one-sided) test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levels {
    pub eps0: f64,
    pub eps1: Option<f64>,
}

impl Levels {
    pub fn one_sided(eps0: f64) -> Self {
        Levels { eps0, eps1: None }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |e: f64| e > 0.0 && e < 1.0;
        if !ok(self.eps0) || !self.eps1.map_or(true, ok) {
            return Err(Error::InvalidParameter(format!(
                "error levels must lie in (0,1), got {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// A round together with the ratios observed after it.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub record: RoundRecord,
    pub values: SlrValues,
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub decision: Decision,
    pub copies_used: usize,
    pub rounds_used: usize,
    pub final_slr: SlrValues,
    pub trace: Option<Vec<TraceRow>>,
}

/// Runs one sequential test against copies of `truth` until a threshold is
/// crossed or the next round would exceed `budget` copies.
pub fn run_sequential_test<R: Rng + ?Sized>(
    setup: &TestSetup,
    policy: &PolicyConfig,
    truth: &DensityMatrix,
    levels: Levels,
    budget: usize,
    rng: &mut R,
    keep_trace: bool,
) -> Result<TestOutcome> {
    policy.validate()?;
    levels.validate()?;
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be >= 1".into()));
    }
    if truth.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: truth.dim(),
        });
    }
    let cfg = &setup.family;
    let mut state = SlrState::new(
        &setup.null_set,
        &setup.alt_set,
        setup.resolution_deg,
        policy.initial_alt_deg,
        levels.eps1.is_some(),
    )?;
    let mut truth_powers: Vec<Option<DensityMatrix>> = Vec::new();
    let mut trace = keep_trace.then(Vec::new);
    let mut copies_used = 0;
    let mut values = state.current(cfg)?;
    let decision = loop {
        let copies = policy.copies_for_round(state.rounds().len());
        if copies_used + copies > budget {
            break Decision::BudgetExhausted;
        }
        let emission = next_measurement(policy, &state, cfg, rng)?;
        if truth_powers.len() < copies {
            truth_powers.resize(copies, None);
        }
        let joint = match &truth_powers[copies - 1] {
            Some(p) => p,
            None => {
                truth_powers[copies - 1] = Some(tensor_power(truth, copies)?);
                truth_powers[copies - 1].as_ref().unwrap()
            }
        };
        let probs = born_probabilities(joint.matrix(), &emission.povm)?;
        let outcome = sample_index(&probs, rng);
        let round = state.freeze_round(cfg, emission.descriptor, &emission.povm, outcome)?;
        let kept = trace.as_ref().map(|_| round.clone());
        values = state.apply(cfg, round, &emission.povm)?;
        copies_used += copies;
        if let (Some(t), Some(record)) = (trace.as_mut(), kept) {
            t.push(TraceRow { record, values });
        }
        let step = match (levels.eps1, values.log_slr_reverse) {
            (Some(eps1), Some(rev)) => two_sided_decision(values.log_slr, rev, levels.eps0, eps1)?,
            _ => one_sided_decision(values.log_slr, levels.eps0),
        };
        match step {
            StepDecision::RejectNull => break Decision::Reject,
            StepDecision::AcceptNull => break Decision::Accept,
            StepDecision::Continue => {}
        }
    };
    Ok(TestOutcome {
        decision,
        copies_used,
        rounds_used: state.rounds().len(),
        final_slr: values,
        trace,
    })
}

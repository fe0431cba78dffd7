use std::fmt;

use crate::error::{Error, Result};
use crate::family::{build_grid, FamilyConfig, HypothesisSet, Observation, ParamGrid};
use crate::family::{state_from_angle, P_FLOOR};
use crate::measurement::{helstrom_povm, variational_povm, HelstromSpec, VariationalSpec};
use crate::quantum::linalg::trace_product;
use crate::quantum::{computational_basis_povm, sic_povm_qubit, tensor_power, DensityMatrix, Povm};

/// Enough information to rebuild the POVM used in a round.
#[derive(Debug, Clone, PartialEq)]
pub enum PovmDescriptor {
    Computational { n_qubits: usize },
    Sic,
    /// Helstrom POVM between `ρ(null_deg)` and `ρ(alt_deg)`.
    Helstrom {
        null_deg: f64,
        alt_deg: f64,
        n_joint: usize,
        lambda: f64,
    },
    Variational { theta: f64, n_joint: usize },
}

impl PovmDescriptor {
    pub fn copies(&self) -> usize {
        match *self {
            PovmDescriptor::Computational { n_qubits } => n_qubits,
            PovmDescriptor::Sic => 1,
            PovmDescriptor::Helstrom { n_joint, .. } => n_joint,
            PovmDescriptor::Variational { n_joint, .. } => n_joint,
        }
    }

    pub fn build(&self, cfg: &FamilyConfig) -> Result<Povm> {
        match *self {
            PovmDescriptor::Computational { n_qubits } => computational_basis_povm(n_qubits),
            PovmDescriptor::Sic => Ok(sic_povm_qubit()),
            PovmDescriptor::Helstrom {
                null_deg,
                alt_deg,
                n_joint,
                lambda,
            } => helstrom_povm(&HelstromSpec::new(
                state_from_angle(cfg, null_deg)?,
                state_from_angle(cfg, alt_deg)?,
                n_joint,
                lambda,
            )?),
            PovmDescriptor::Variational { theta, n_joint } => {
                variational_povm(&VariationalSpec::new(theta, n_joint)?)
            }
        }
    }
}

impl fmt::Display for PovmDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PovmDescriptor::Computational { n_qubits } => write!(f, "computational(n={n_qubits})"),
            PovmDescriptor::Sic => write!(f, "sic"),
            PovmDescriptor::Helstrom {
                null_deg,
                alt_deg,
                n_joint,
                lambda,
            } => write!(
                f,
                "helstrom(w0={null_deg},w1={alt_deg},n={n_joint},lambda={lambda})"
            ),
            PovmDescriptor::Variational { theta, n_joint } => {
                write!(f, "variational(theta={theta},n={n_joint})")
            }
        }
    }
}

/// One executed round of a sequential test.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub povm: PovmDescriptor,
    pub copies: usize,
    pub outcome: usize,
    pub label: String,
    /// `ln Tr((ρ̂₁^{t−1})^{⊗n} M_x)`, frozen when the round was executed.
    pub log_numerator_term: f64,
    /// `ln Tr((ρ̂₀^{t−1})^{⊗n} M_x)`, the numerator of the reversed process.
    pub log_reverse_numerator_term: f64,
}

/// Log split likelihood ratios after a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlrValues {
    /// `ln Λ₀`, evidence against the null.
    pub log_slr: f64,
    /// `ln Λ₁`, evidence against the alternative; tracked in two-sided mode.
    pub log_slr_reverse: Option<f64>,
}

/// Incremental bookkeeping for the split likelihood ratio.
#[derive(Debug, Clone)]
pub struct SlrState {
    rounds: Vec<RoundRecord>,
    null_grid: ParamGrid,
    alt_grid: ParamGrid,
    frozen_log_numerator: f64,
    frozen_log_reverse_numerator: f64,
    initial_null_deg: f64,
    initial_alt_deg: f64,
    two_sided: bool,
}

/// `ln max(Tr(σ^{⊗n} M), floor)`.
pub(crate) fn floored_log_prob(sigma: &DensityMatrix, copies: usize, element: &crate::quantum::CMatrix) -> Result<f64> {
    let joint = tensor_power(sigma, copies)?;
    Ok(trace_product(joint.matrix(), element).re.max(P_FLOOR).ln())
}

impl SlrState {
    /// Fresh state. `initial_alt_deg` overrides the no-data alternative
    /// estimate (default: midpoint of the largest alternative piece).
    pub fn new(
        null_set: &HypothesisSet,
        alt_set: &HypothesisSet,
        resolution_deg: f64,
        initial_alt_deg: Option<f64>,
        two_sided: bool,
    ) -> Result<Self> {
        if !null_set.is_disjoint_from(alt_set) {
            return Err(Error::InvalidHypothesisSet(format!(
                "null {null_set} and alternative {alt_set} overlap"
            )));
        }
        let initial_alt_deg = initial_alt_deg.unwrap_or_else(|| alt_set.default_angle());
        if !alt_set.contains(initial_alt_deg) {
            return Err(Error::InvalidParameter(format!(
                "initial alternative angle {initial_alt_deg} lies outside {alt_set}"
            )));
        }
        Ok(SlrState {
            rounds: Vec::new(),
            null_grid: build_grid(null_set, resolution_deg)?,
            alt_grid: build_grid(alt_set, resolution_deg)?,
            frozen_log_numerator: 0.0,
            frozen_log_reverse_numerator: 0.0,
            initial_null_deg: null_set.default_angle(),
            initial_alt_deg,
            two_sided,
        })
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn null_grid(&self) -> &ParamGrid {
        &self.null_grid
    }

    pub fn alt_grid(&self) -> &ParamGrid {
        &self.alt_grid
    }

    pub fn is_two_sided(&self) -> bool {
        self.two_sided
    }

    pub fn frozen_log_numerator(&self) -> f64 {
        self.frozen_log_numerator
    }

    pub fn copies_used(&self) -> usize {
        self.rounds.iter().map(|r| r.copies).sum()
    }

    /// Predictable alternative estimate `ρ̂₁^{t}` (grid MLE over the rounds so
    /// far, or the initial angle before any data).
    pub fn alt_estimate(&self, cfg: &FamilyConfig) -> Result<(f64, DensityMatrix)> {
        if self.rounds.is_empty() {
            return Ok((self.initial_alt_deg, state_from_angle(cfg, self.initial_alt_deg)?));
        }
        let m = self.alt_grid.mle(cfg, false)?;
        Ok((m.omega_deg, m.rho))
    }

    /// Predictable null estimate on the grid, used by the reversed process.
    pub fn null_grid_estimate(&self, cfg: &FamilyConfig) -> Result<(f64, DensityMatrix)> {
        if self.rounds.is_empty() {
            return Ok((self.initial_null_deg, state_from_angle(cfg, self.initial_null_deg)?));
        }
        let m = self.null_grid.mle(cfg, false)?;
        Ok((m.omega_deg, m.rho))
    }

    /// Refined null MLE over all rounds so far.
    pub fn null_estimate(&self, cfg: &FamilyConfig) -> Result<(f64, DensityMatrix)> {
        if self.rounds.is_empty() {
            return Ok((self.initial_null_deg, state_from_angle(cfg, self.initial_null_deg)?));
        }
        let m = self.null_grid.mle(cfg, true)?;
        Ok((m.omega_deg, m.rho))
    }

    fn check(&self, povm: &Povm, copies: usize, outcome: usize) -> Result<()> {
        if copies == 0 || povm.dim() != 1usize << copies {
            return Err(Error::InconsistentTranscript(format!(
                "a {}-dimensional POVM cannot act on {copies} copies",
                povm.dim()
            )));
        }
        if outcome >= povm.len() {
            return Err(Error::InconsistentTranscript(format!(
                "outcome {outcome} out of range for a {}-outcome POVM",
                povm.len()
            )));
        }
        Ok(())
    }

    /// Builds the record for an observed round, freezing its numerator terms
    /// with the estimates fitted on the earlier rounds only.
    pub fn freeze_round(
        &self,
        cfg: &FamilyConfig,
        descriptor: PovmDescriptor,
        povm: &Povm,
        outcome: usize,
    ) -> Result<RoundRecord> {
        let copies = descriptor.copies();
        self.check(povm, copies, outcome)?;
        let element = povm.element(outcome);
        let (_, alt) = self.alt_estimate(cfg)?;
        let log_numerator_term = floored_log_prob(&alt, copies, element)?;
        let log_reverse_numerator_term = if self.two_sided {
            let (_, null) = self.null_grid_estimate(cfg)?;
            floored_log_prob(&null, copies, element)?
        } else {
            0.0
        };
        Ok(RoundRecord {
            label: povm.label(outcome).to_string(),
            povm: descriptor,
            copies,
            outcome,
            log_numerator_term,
            log_reverse_numerator_term,
        })
    }

    /// Folds a frozen round into the state and returns the updated ratios.
    pub fn apply(&mut self, cfg: &FamilyConfig, round: RoundRecord, povm: &Povm) -> Result<SlrValues> {
        self.check(povm, round.copies, round.outcome)?;
        if round.log_numerator_term > 1e-12 {
            return Err(Error::InconsistentTranscript(format!(
                "numerator term {} is not the log of a probability",
                round.log_numerator_term
            )));
        }
        let obs = Observation::new(povm, round.outcome, round.copies)?;
        self.frozen_log_numerator += round.log_numerator_term;
        self.frozen_log_reverse_numerator += round.log_reverse_numerator_term;
        self.null_grid.push_observation(cfg, obs.clone());
        self.alt_grid.push_observation(cfg, obs);
        self.rounds.push(round);
        self.current(cfg)
    }

    /// Ratios for the rounds recorded so far (both zero before any data).
    pub fn current(&self, cfg: &FamilyConfig) -> Result<SlrValues> {
        if self.rounds.is_empty() {
            return Ok(SlrValues {
                log_slr: 0.0,
                log_slr_reverse: self.two_sided.then_some(0.0),
            });
        }
        let denom = self.null_grid.mle(cfg, true)?.loglik;
        let log_slr_reverse = if self.two_sided {
            Some(self.frozen_log_reverse_numerator - self.alt_grid.mle(cfg, true)?.loglik)
        } else {
            None
        };
        Ok(SlrValues {
            log_slr: self.frozen_log_numerator - denom,
            log_slr_reverse,
        })
    }
}

/// Pure form of [`SlrState::apply`]: rebuilds the round's POVM from its
/// descriptor and returns the updated copy of the state.
pub fn slr_update(state: &SlrState, round: RoundRecord, cfg: &FamilyConfig) -> Result<(SlrState, SlrValues)> {
    let povm = round.povm.build(cfg)?;
    let mut next = state.clone();
    let values = next.apply(cfg, round, &povm)?;
    Ok((next, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets() -> (HypothesisSet, HypothesisSet) {
        ("{45}".parse().unwrap(), "(45,180]".parse().unwrap())
    }

    #[test]
    fn single_round_arithmetic() {
        let cfg = FamilyConfig::pure();
        let (null, alt) = sets();
        let state = SlrState::new(&null, &alt, 0.5, None, false).unwrap();
        let round = RoundRecord {
            povm: PovmDescriptor::Computational { n_qubits: 1 },
            copies: 1,
            outcome: 1,
            label: "1".into(),
            log_numerator_term: 0.9f64.ln(),
            log_reverse_numerator_term: 0.0,
        };
        let (next, v) = slr_update(&state, round, &cfg).unwrap();
        let p_null = 0.5 * (1.0 - 45f64.to_radians().cos());
        assert!((v.log_slr - (0.9f64.ln() - p_null.ln())).abs() < 1e-12);
        assert_eq!(next.rounds().len(), 1);
        assert_eq!(state.rounds().len(), 0);
    }

    #[test]
    fn numerator_uses_only_earlier_rounds() {
        let cfg = FamilyConfig::new(0.9, 0.9).unwrap();
        let (null, alt) = sets();
        let mut state = SlrState::new(&null, &alt, 0.5, None, false).unwrap();
        let povm = computational_basis_povm(1).unwrap();
        let d = PovmDescriptor::Computational { n_qubits: 1 };
        let r1 = state.freeze_round(&cfg, d.clone(), &povm, 1).unwrap();
        // first round uses the midpoint of (45,180]
        let mid = state_from_angle(&cfg, 112.5).unwrap();
        assert!((r1.log_numerator_term - mid.matrix()[(1, 1)].re.ln()).abs() < 1e-14);
        state.apply(&cfg, r1, &povm).unwrap();
        let r2 = state.freeze_round(&cfg, d, &povm, 0).unwrap();
        let fit = state.alt_grid().mle(&cfg, false).unwrap();
        assert_eq!(fit.omega_deg, 180.0);
        assert!((r2.log_numerator_term - fit.rho.matrix()[(0, 0)].re.ln()).abs() < 1e-14);
    }

    #[test]
    fn identical_numerator_and_denominator_give_zero() {
        let cfg = FamilyConfig::pure();
        let (null, alt) = sets();
        let mut state = SlrState::new(&null, &alt, 0.5, None, false).unwrap();
        let povm = computational_basis_povm(1).unwrap();
        let rho0 = state_from_angle(&cfg, 45.0).unwrap();
        let mut v = SlrValues { log_slr: f64::NAN, log_slr_reverse: None };
        for &x in &[0usize, 1, 0, 0] {
            let round = RoundRecord {
                povm: PovmDescriptor::Computational { n_qubits: 1 },
                copies: 1,
                outcome: x,
                label: x.to_string(),
                log_numerator_term: rho0.matrix()[(x, x)].re.ln(),
                log_reverse_numerator_term: 0.0,
            };
            v = state.apply(&cfg, round, &povm).unwrap();
        }
        assert!(v.log_slr.abs() < 1e-12);
    }

    #[test]
    fn inconsistent_rounds_are_rejected() {
        let cfg = FamilyConfig::pure();
        let (null, alt) = sets();
        let mut state = SlrState::new(&null, &alt, 0.5, None, false).unwrap();
        let povm = computational_basis_povm(2).unwrap();
        let bad = RoundRecord {
            povm: PovmDescriptor::Computational { n_qubits: 2 },
            copies: 1,
            outcome: 0,
            label: "00".into(),
            log_numerator_term: 0.0,
            log_reverse_numerator_term: 0.0,
        };
        assert!(matches!(
            state.apply(&cfg, bad, &povm),
            Err(Error::InconsistentTranscript(_))
        ));
        assert!(matches!(
            state.freeze_round(&cfg, PovmDescriptor::Computational { n_qubits: 2 }, &povm, 7),
            Err(Error::InconsistentTranscript(_))
        ));
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let null: HypothesisSet = "{90}".parse().unwrap();
        let alt: HypothesisSet = "(45,180]".parse().unwrap();
        assert!(SlrState::new(&null, &alt, 0.5, None, false).is_err());
    }

    #[test]
    fn descriptors_rebuild_their_povms() {
        let cfg = FamilyConfig::pure();
        let h = PovmDescriptor::Helstrom {
            null_deg: 45.0,
            alt_deg: 90.0,
            n_joint: 2,
            lambda: 0.3,
        };
        assert_eq!(h.copies(), 2);
        assert_eq!(h.build(&cfg).unwrap().dim(), 4);
        let v = PovmDescriptor::Variational { theta: 1.0, n_joint: 3 };
        assert_eq!(v.build(&cfg).unwrap().len(), 8);
        assert_eq!(PovmDescriptor::Sic.build(&cfg).unwrap().len(), 4);
        assert_eq!(h.to_string(), "helstrom(w0=45,w1=90,n=2,lambda=0.3)");
    }
}

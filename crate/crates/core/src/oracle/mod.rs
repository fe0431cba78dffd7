//! Brute-force checks that share as little code with the engine as
//! possible: exact transcript enumeration, e-process expectations, Helstrom
//! bounds and from-scratch SLR recomputation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{next_measurement, LambdaMode, PolicyConfig, RoundRecord, SlrState, TestSetup};
use crate::error::{Error, Result};
use crate::family::{build_grid, FamilyConfig, HypothesisSet, Piece, P_FLOOR};
use num_complex::Complex64;

use crate::quantum::{trace_norm, CMatrix, DensityMatrix, Povm};

mod suite;

pub use suite::{
    check_eprocess, check_helstrom, count_simultaneous_crossings, max_recompute_discrepancy,
    run_verification_suite, CheckResult,
};

/// Enumeration is exponential in the horizon.
pub const MAX_HORIZON: usize = 3;

const TERNARY_STEPS: usize = 200;

/// One complete outcome sequence and its probability under the truth.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
    pub probability: f64,
    /// Engine `ln Λ` after each round.
    pub log_slr: Vec<f64>,
}

/// `E[Λ̄ᵗ]` with the truth in the denominator, and `E[Λᵗ]` with the refined
/// null MLE in the denominator, for `t = 1..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct EprocessReport {
    pub true_denominator: Vec<f64>,
    pub mle_denominator: Vec<f64>,
}

fn real_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn joint_state(rho: &CMatrix, copies: usize) -> CMatrix {
    (1..copies).fold(rho.clone(), |acc, _| acc.kronecker(rho))
}

fn for_enumeration(policy: &PolicyConfig) -> PolicyConfig {
    let mut p = policy.clone();
    if p.lambda_mode == LambdaMode::Uniform {
        p.lambda_mode = LambdaMode::Fixed(0.5);
    }
    p
}

/// All outcome sequences of length `horizon` under `truth`. A uniform-λ
/// policy is enumerated with `λ = ½`.
pub fn enumerate_transcripts(
    setup: &TestSetup,
    policy: &PolicyConfig,
    truth: &DensityMatrix,
    horizon: usize,
) -> Result<Vec<Transcript>> {
    if horizon > MAX_HORIZON {
        return Err(Error::HorizonTooLarge {
            horizon,
            cap: MAX_HORIZON,
        });
    }
    let policy = for_enumeration(policy);
    policy.validate()?;
    let state = SlrState::new(
        &setup.null_set,
        &setup.alt_set,
        setup.resolution_deg,
        policy.initial_alt_deg,
        false,
    )?;
    let mut out = Vec::new();
    extend(setup, &policy, truth.matrix(), state, 1.0, Vec::new(), horizon, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    setup: &TestSetup,
    policy: &PolicyConfig,
    truth: &CMatrix,
    state: SlrState,
    probability: f64,
    log_slr: Vec<f64>,
    remaining: usize,
    out: &mut Vec<Transcript>,
) -> Result<()> {
    if remaining == 0 {
        out.push(Transcript {
            rounds: state.rounds().to_vec(),
            probability,
            log_slr,
        });
        return Ok(());
    }
    let cfg = &setup.family;
    // The policy never draws from the stream here; it only needs one.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let emission = next_measurement(policy, &state, cfg, &mut rng)?;
    let joint = joint_state(truth, emission.copies);
    for x in 0..emission.povm.len() {
        let p = real_trace_product(&joint, emission.povm.element(x)).max(0.0);
        let mut next = state.clone();
        let round = next.freeze_round(cfg, emission.descriptor.clone(), &emission.povm, x)?;
        let values = next.apply(cfg, round, &emission.povm)?;
        let mut slr = log_slr.clone();
        slr.push(values.log_slr);
        extend(setup, policy, truth, next, probability * p, slr, remaining - 1, out)?;
    }
    Ok(())
}

/// Exact expectations of the e-process and of the engine's SLR under a
/// truth in the null set. Zero-probability transcripts contribute nothing.
pub fn eprocess_expectation(
    setup: &TestSetup,
    policy: &PolicyConfig,
    truth: &DensityMatrix,
    horizon: usize,
) -> Result<EprocessReport> {
    let transcripts = enumerate_transcripts(setup, policy, truth, horizon)?;
    let cfg = &setup.family;
    let mut report = EprocessReport {
        true_denominator: vec![0.0; horizon],
        mle_denominator: vec![0.0; horizon],
    };
    for tr in &transcripts {
        if tr.probability == 0.0 {
            continue;
        }
        let mut log_bar = 0.0;
        for (t, r) in tr.rounds.iter().enumerate() {
            let povm = r.povm.build(cfg)?;
            let p = real_trace_product(&joint_state(truth.matrix(), r.copies), povm.element(r.outcome));
            log_bar += r.log_numerator_term - p.max(P_FLOOR).ln();
            // Continuations of a prefix have conditional probabilities summing
            // to one, so full transcripts weight each prefix correctly.
            report.true_denominator[t] += tr.probability * log_bar.exp();
            report.mle_denominator[t] += tr.probability * tr.log_slr[t].exp();
        }
    }
    Ok(report)
}

fn log_likelihood(cfg: &FamilyConfig, rounds: &[(Povm, usize, usize)], omega_deg: f64) -> f64 {
    let rho = cfg.matrix_at(omega_deg);
    rounds
        .iter()
        .map(|(povm, copies, x)| {
            real_trace_product(&joint_state(&rho, *copies), povm.element(*x))
                .max(P_FLOOR)
                .ln()
        })
        .sum()
}

fn grid_argmax(cfg: &FamilyConfig, rounds: &[(Povm, usize, usize)], angles: &[f64]) -> (f64, f64) {
    let mut best = (angles[0], f64::NEG_INFINITY);
    for &w in angles {
        let ll = log_likelihood(cfg, rounds, w);
        if ll > best.1 + 1e-12 {
            best = (w, ll);
        }
    }
    best
}

/// Ternary search for the supremum of the likelihood on the piece of `set`
/// containing `w`, within one resolution step of it.
fn refined_sup(
    cfg: &FamilyConfig,
    rounds: &[(Povm, usize, usize)],
    set: &HypothesisSet,
    w: f64,
    grid_ll: f64,
    resolution_deg: f64,
) -> f64 {
    let piece = set.pieces().iter().find_map(|p| match *p {
        Piece::Interval { lo, hi, .. } if w >= lo && w <= hi => Some((lo, hi)),
        _ => None,
    });
    let Some((lo, hi)) = piece else {
        return grid_ll;
    };
    let (mut a, mut b) = ((w - resolution_deg).max(lo), (w + resolution_deg).min(hi));
    if b <= a {
        return grid_ll;
    }
    let f = |x: f64| log_likelihood(cfg, rounds, x);
    for _ in 0..TERNARY_STEPS {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    grid_ll.max(f(0.5 * (a + b)))
}

/// `ln Λ` of a transcript computed from scratch: the alternative grid MLE is
/// refit on every prefix for the numerator, the null supremum on the full
/// transcript for the denominator.
pub fn recompute_slr(
    transcript: &[RoundRecord],
    family: &FamilyConfig,
    null_set: &HypothesisSet,
    alt_set: &HypothesisSet,
    resolution_deg: f64,
    initial_alt_deg: Option<f64>,
) -> Result<f64> {
    if transcript.is_empty() {
        return Ok(0.0);
    }
    let rounds = transcript
        .iter()
        .map(|r| Ok((r.povm.build(family)?, r.copies, r.outcome)))
        .collect::<Result<Vec<_>>>()?;
    let alt_angles = build_grid(alt_set, resolution_deg)?.angles().to_vec();
    let null_angles = build_grid(null_set, resolution_deg)?.angles().to_vec();
    let mut numerator = 0.0;
    for (t, (povm, copies, x)) in rounds.iter().enumerate() {
        let w1 = if t == 0 {
            initial_alt_deg.unwrap_or_else(|| alt_set.default_angle())
        } else {
            grid_argmax(family, &rounds[..t], &alt_angles).0
        };
        let rho1 = family.matrix_at(w1);
        numerator += real_trace_product(&joint_state(&rho1, *copies), povm.element(*x))
            .max(P_FLOOR)
            .ln();
    }
    let (w0, ll0) = grid_argmax(family, &rounds, &null_angles);
    let denominator = refined_sup(family, &rounds, null_set, w0, ll0, resolution_deg);
    Ok(numerator - denominator)
}

/// `½(1 − ‖(1−λ)ρ₀^{⊗n} − λρ₁^{⊗n}‖₁)`, the least weighted error
/// `(1−λ)P₀(reject) + λP₁(accept)` over all binary POVMs.
pub fn helstrom_bound(rho0: &DensityMatrix, rho1: &DensityMatrix, lambda: f64, n: usize) -> Result<f64> {
    if rho0.dim() != rho1.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            got: rho1.dim(),
        });
    }
    let a = joint_state(rho0.matrix(), n);
    let b = joint_state(rho1.matrix(), n);
    let diff = a * Complex64::new(1.0 - lambda, 0.0) - b * Complex64::new(lambda, 0.0);
    Ok(0.5 * (1.0 - trace_norm(&diff)?))
}

/// Weighted error of a binary POVM whose outcome 0 accepts the null.
pub fn weighted_error(povm: &Povm, rho0: &DensityMatrix, rho1: &DensityMatrix, lambda: f64, n: usize) -> Result<f64> {
    if povm.len() != 2 {
        return Err(Error::InvalidPovm(format!("expected a binary POVM, got {} outcomes", povm.len())));
    }
    let a = joint_state(rho0.matrix(), n);
    let b = joint_state(rho1.matrix(), n);
    if povm.dim() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: povm.dim(),
        });
    }
    Ok((1.0 - lambda) * real_trace_product(&a, povm.element(1)) + lambda * real_trace_product(&b, povm.element(0)))
}

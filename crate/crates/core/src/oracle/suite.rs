use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{enumerate_transcripts, eprocess_expectation, helstrom_bound, recompute_slr, weighted_error};
use crate::engine::{run_sequential_test, Levels, PolicyConfig, PolicyKind, TestSetup};
use crate::error::{Error, Result};
use crate::family::{state_from_angle, FamilyConfig};
use crate::measurement::{helstrom_povm, HelstromSpec};
use crate::quantum::{CMatrix, DensityMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Qubit state with Bloch vector drawn uniformly from the unit ball.
pub(crate) fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let r: f64 = rng.gen::<f64>().cbrt();
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    let (x, y, z) = (r * s * phi.cos(), r * s * phi.sin(), r * z);
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5 * (1.0 + z), 0.0),
            Complex64::new(0.5 * x, -0.5 * y),
            Complex64::new(0.5 * x, 0.5 * y),
            Complex64::new(0.5 * (1.0 - z), 0.0),
        ],
    );
    DensityMatrix::new(m).expect("Bloch ball states are valid")
}

fn small_block(kind: PolicyKind) -> PolicyConfig {
    let mut p = PolicyConfig::new(kind);
    p.n_ic = 1;
    p
}

/// Enumeration and e-process identities at horizon 3 for every policy.
pub fn check_eprocess(horizon: usize) -> Result<Vec<CheckResult>> {
    let setup = TestSetup::new(
        FamilyConfig::new(0.99, 0.99)?,
        "{45}".parse()?,
        "(45,180]".parse()?,
    )?;
    let truth = state_from_angle(&setup.family, 45.0)?;
    let mut out = Vec::new();
    for kind in [PolicyKind::Alht, PolicyKind::AlhtPlus, PolicyKind::Alvt] {
        let policy = small_block(kind);
        let transcripts = enumerate_transcripts(&setup, &policy, &truth, horizon)?;
        let total: f64 = transcripts.iter().map(|t| t.probability).sum();
        out.push(CheckResult::new(
            &format!("enumeration {kind}"),
            (total - 1.0).abs() <= 1e-9,
            format!("{} transcripts, probability sum {total:.15}", transcripts.len()),
        ));
        let rep = eprocess_expectation(&setup, &policy, &truth, horizon)?;
        let worst = rep.true_denominator.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        out.push(CheckResult::new(
            &format!("e-process identity {kind}"),
            worst <= 1e-9,
            format!("E[bar Lambda^t] = {:?}, max |E - 1| = {worst:.3e}", rep.true_denominator),
        ));
        let top = rep.mle_denominator.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(CheckResult::new(
            &format!("SLR domination {kind}"),
            top <= 1.0 + 1e-9,
            format!("E[Lambda^t] = {:?}", rep.mle_denominator),
        ));
    }
    Ok(out)
}

/// Constructed Helstrom POVMs achieve the trace-norm bound.
pub fn check_helstrom(pairs: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let rho0 = random_qubit(&mut rng);
        let rho1 = random_qubit(&mut rng);
        for k in 1..=9 {
            let lambda = k as f64 / 10.0;
            let povm = helstrom_povm(&HelstromSpec::new(rho0.clone(), rho1.clone(), 1, lambda)?)?;
            let achieved = weighted_error(&povm, &rho0, &rho1, lambda, 1)?;
            worst = worst.max((achieved - helstrom_bound(&rho0, &rho1, lambda, 1)?).abs());
        }
    }
    let zero = DensityMatrix::basis_state(2, 0);
    let plus = state_from_angle(&FamilyConfig::pure(), 90.0)?;
    let spot = helstrom_bound(&zero, &plus, 0.5, 1)?;
    Ok(vec![
        CheckResult::new(
            "Helstrom optimality",
            worst <= 1e-9,
            format!("{pairs} pairs x 9 lambdas, max |achieved - bound| = {worst:.3e}"),
        ),
        CheckResult::new(
            "Helstrom spot value",
            (spot - 0.14645).abs() <= 1e-5,
            format!("|0>, |+>, lambda 1/2: {spot:.8}"),
        ),
    ])
}

fn oracle_setups() -> Result<Vec<TestSetup>> {
    Ok(vec![
        TestSetup::new(FamilyConfig::new(0.99, 0.99)?, "{45}".parse()?, "(45,180]".parse()?)?,
        TestSetup::new(FamilyConfig::new(0.9, 0.8)?, "[0,40]".parse()?, "(60,180]".parse()?)?,
        TestSetup::new(
            FamilyConfig::new(0.99, 0.99)?,
            "{45,135}".parse()?,
            "(45,135) U (135,180)".parse()?,
        )?,
    ])
}

/// Engine `ln Λ` against [`recompute_slr`] on random five-round transcripts;
/// returns the largest discrepancy.
pub fn max_recompute_discrepancy(transcripts: usize, seed: u64) -> Result<f64> {
    let setups = oracle_setups()?;
    let kinds = [PolicyKind::Alht, PolicyKind::AlhtPlus, PolicyKind::Alvt];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..transcripts {
        let setup = &setups[i % setups.len()];
        let mut policy = PolicyConfig::new(kinds[(i / setups.len()) % kinds.len()]);
        // Two estimation rounds per block puts a joint round inside five rounds.
        policy.n_ic = 2;
        let truth = state_from_angle(&setup.family, rng.gen_range(0.0..180.0))?;
        let mut run_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let out = run_sequential_test(setup, &policy, &truth, Levels::one_sided(1e-300), 11, &mut run_rng, true)?;
        let trace = out.trace.unwrap_or_default();
        let rounds: Vec<_> = trace.iter().take(5).map(|r| r.record.clone()).collect();
        if rounds.len() < 5 {
            return Err(Error::InconsistentTranscript(format!("run {i} stopped after {} rounds", rounds.len())));
        }
        let oracle = recompute_slr(
            &rounds,
            &setup.family,
            &setup.null_set,
            &setup.alt_set,
            setup.resolution_deg,
            policy.initial_alt_deg,
        )?;
        worst = worst.max((oracle - trace[4].values.log_slr).abs());
    }
    Ok(worst)
}

/// Two-sided runs with random truths; counts simultaneous crossings.
pub fn count_simultaneous_crossings(runs: usize, seed: u64) -> Result<usize> {
    let setups = [
        TestSetup::new(FamilyConfig::new(0.99, 0.99)?, "{45}".parse()?, "(90,180]".parse()?)?,
        TestSetup::new(FamilyConfig::new(0.9, 0.9)?, "[0,40]".parse()?, "(60,180]".parse()?)?,
    ];
    let kinds = [PolicyKind::Alht, PolicyKind::AlhtPlus, PolicyKind::Alvt];
    let levels = Levels {
        eps0: 0.05,
        eps1: Some(0.05),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for i in 0..runs {
        let setup = &setups[i % setups.len()];
        let policy = PolicyConfig::new(kinds[(i / setups.len()) % kinds.len()]);
        let truth = state_from_angle(&setup.family, rng.gen_range(0.0..180.0))?;
        let mut run_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        match run_sequential_test(setup, &policy, &truth, levels, 60, &mut run_rng, false) {
            Ok(_) => {}
            Err(Error::InvariantViolation { .. }) => violations += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(violations)
}

/// The full oracle report printed by `verify`.
pub fn run_verification_suite(two_sided_runs: usize) -> Result<Vec<CheckResult>> {
    let mut out = check_eprocess(super::MAX_HORIZON)?;
    out.extend(check_helstrom(100, 1)?);
    let worst = max_recompute_discrepancy(100, 2)?;
    out.push(CheckResult::new(
        "SLR recomputation",
        worst <= 1e-9,
        format!("100 five-round transcripts, max |engine - oracle| = {worst:.3e}"),
    ));
    let v = count_simultaneous_crossings(two_sided_runs, 3)?;
    out.push(CheckResult::new(
        "no simultaneous crossing",
        v == 0,
        format!("{two_sided_runs} two-sided runs, {v} simultaneous crossings"),
    ));
    Ok(out)
}

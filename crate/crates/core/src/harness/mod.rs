//! Seeded Monte Carlo sweeps over methods and copy budgets, and the text
//! formats they read and write.

mod config;
mod output;

pub use config::{ExperimentConfig, Method};
pub use output::{emit_results, format_g6, format_results, parse_results, RESULTS_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{block_level, run_blht, run_blvt, Calibrator, FixedOutcome, LhtCalibration};
use crate::engine::{run_sequential_test, Levels, PolicyConfig, TestOutcome, TestSetup};
use crate::error::{Error, Result};
use crate::family::state_from_angle;
use crate::measurement::{optimize_lambda_scored, optimize_theta_scored};
use crate::quantum::DensityMatrix;

/// Aggregate over the runs of one (method, budget) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub budget: usize,
    pub power: f64,
    pub avg_copies: f64,
    pub std_copies: f64,
    pub avg_rounds: f64,
    pub runs: usize,
    pub master_seed: u64,
}

/// Per-run stream keyed by the master seed, the method's stable id, the
/// budget value and the run index, so adding a method or a budget leaves
/// the other cells unchanged.
pub fn run_rng(master_seed: u64, method: Method, budget: usize, run: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&method.id().to_le_bytes());
    key[16..24].copy_from_slice(&(budget as u64).to_le_bytes());
    key[24..].copy_from_slice(&(run as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Fixed problem data shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub setup: TestSetup,
    pub truth: DensityMatrix,
}

impl ExperimentConfig {
    pub fn prepare(&self) -> Result<Prepared> {
        let mut setup = TestSetup::new(self.family, self.null_set.clone(), self.alt_set.clone())?;
        setup.resolution_deg = self.resolution_deg;
        let truth = state_from_angle(&self.family, self.truth_deg)?;
        Ok(Prepared { setup, truth })
    }

    pub fn policy(&self, kind: crate::engine::PolicyKind) -> PolicyConfig {
        let mut p = PolicyConfig::new(kind);
        p.n_ic = self.n_ic;
        p.n_joint = self.n_joint;
        p.estimation_povm = self.estimation_povm;
        p.lambda_grid = self.lambda_grid;
        p.theta_grid = self.theta_grid;
        p
    }

    pub fn levels(&self) -> Levels {
        Levels {
            eps0: self.eps0,
            eps1: self.eps1,
        }
    }

    fn calibrator(&self) -> Calibrator {
        let mut c = Calibrator::new();
        c.lambda_grid = Some(self.lambda_grid);
        c.theta_grid = Some(self.theta_grid);
        c
    }
}

/// Result of a single run of any method.
#[derive(Debug, Clone)]
pub enum RunOutcome {
    Sequential(TestOutcome),
    Fixed { layout: crate::baselines::FixedTestConfig, outcome: FixedOutcome },
}

impl RunOutcome {
    pub fn rejected(&self) -> bool {
        match self {
            RunOutcome::Sequential(o) => o.decision == crate::engine::Decision::Reject,
            RunOutcome::Fixed { outcome, .. } => outcome.reject,
        }
    }

    pub fn copies(&self) -> usize {
        match self {
            RunOutcome::Sequential(o) => o.copies_used,
            RunOutcome::Fixed { layout, .. } => layout.total_budget,
        }
    }

    pub fn rounds(&self) -> usize {
        match self {
            RunOutcome::Sequential(o) => o.rounds_used,
            RunOutcome::Fixed { layout, .. } => layout.rounds(),
        }
    }
}

fn run_once(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    method: Method,
    budget: usize,
    rng: &mut ChaCha8Rng,
    calibrator: &mut Calibrator,
    keep_trace: bool,
) -> Result<RunOutcome> {
    match method {
        Method::Sequential(kind) => {
            let policy = cfg.policy(kind);
            run_sequential_test(&prep.setup, &policy, &prep.truth, cfg.levels(), budget, rng, keep_trace)
                .map(RunOutcome::Sequential)
        }
        _ => {
            let layout = cfg.fixed_layout(method, budget).unwrap()?;
            let outcome = match method {
                Method::Lht | Method::Blht => run_blht(&prep.setup, &layout, &prep.truth, calibrator, rng)?,
                _ => run_blvt(&prep.setup, &layout, &prep.truth, calibrator, rng)?,
            };
            Ok(RunOutcome::Fixed { layout, outcome })
        }
    }
}

/// One seeded run, reproducing run `run` of a sweep cell.
pub fn run_single(
    cfg: &ExperimentConfig,
    method: Method,
    budget: usize,
    master_seed: u64,
    run: usize,
    keep_trace: bool,
) -> Result<RunOutcome> {
    let prep = cfg.prepare()?;
    let mut rng = run_rng(master_seed, method, budget, run);
    run_once(cfg, &prep, method, budget, &mut rng, &mut cfg.calibrator(), keep_trace)
}

fn aggregate(method: Method, budget: usize, cfg: &ExperimentConfig, outcomes: &[(bool, usize, usize)]) -> ResultRow {
    let n = outcomes.len() as f64;
    let power = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let avg_copies = outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / n;
    let var = outcomes.iter().map(|o| (o.1 as f64 - avg_copies).powi(2)).sum::<f64>() / n;
    let avg_rounds = outcomes.iter().map(|o| o.2 as f64).sum::<f64>() / n;
    ResultRow {
        method: method.name().to_string(),
        budget,
        power,
        avg_copies,
        std_copies: var.sqrt(),
        avg_rounds,
        runs: outcomes.len(),
        master_seed: cfg.master_seed,
    }
}

/// Runs every (method, budget) cell. Runs may execute in parallel; each
/// uses its own stream and results are folded in run order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let prep = cfg.prepare()?;
    let mut rows = Vec::with_capacity(cfg.methods.len() * cfg.budgets.len());
    for &method in &cfg.methods {
        for &budget in &cfg.budgets {
            let outcomes = (0..cfg.runs)
                .into_par_iter()
                .map_init(
                    || cfg.calibrator(),
                    |cal, run| {
                        let mut rng = run_rng(cfg.master_seed, method, budget, run);
                        let o = run_once(cfg, &prep, method, budget, &mut rng, cal, false)?;
                        Ok((o.rejected(), o.copies(), o.rounds()))
                    },
                )
                .collect::<Result<Vec<_>>>()?;
            rows.push(aggregate(method, budget, cfg, &outcomes));
        }
    }
    Ok(rows)
}

/// Calibration of every configured method when the alternative estimate
/// equals the truth, one line per (method, budget) where it varies.
pub fn calibration_report(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let prep = cfg.prepare()?;
    let fam = &cfg.family;
    let w1 = cfg.truth_deg;
    let mut cal = cfg.calibrator();
    let mut lines = Vec::new();
    for &method in &cfg.methods {
        match method {
            Method::Sequential(kind) => {
                let w0 = cfg.null_set.default_angle();
                let rho0 = state_from_angle(fam, w0)?;
                let rho1 = state_from_angle(fam, w1)?;
                let line = match kind {
                    crate::engine::PolicyKind::Alvt => {
                        let (theta, score) = optimize_theta_scored(&rho0, &rho1, cfg.n_joint, cfg.theta_grid)?;
                        format!("{method}: w0={w0} w1={w1} theta={} score={}", format_g6(theta), format_g6(score))
                    }
                    crate::engine::PolicyKind::Alht => {
                        format!("{method}: w0={w0} w1={w1} lambda=uniform(0,1)")
                    }
                    crate::engine::PolicyKind::AlhtPlus => {
                        let (lambda, score) = optimize_lambda_scored(&rho0, &rho1, cfg.n_joint, cfg.lambda_grid)?;
                        format!("{method}: w0={w0} w1={w1} lambda={} score={}", format_g6(lambda), format_g6(score))
                    }
                };
                lines.push(line);
            }
            _ => {
                for &n in &cfg.budgets {
                    let layout = cfg.fixed_layout(method, n).unwrap()?;
                    let level = block_level(layout.blocks, layout.eps0);
                    let head = format!(
                        "{method} n={n}: m={} b={} level={}",
                        layout.estimation_copies,
                        layout.blocks,
                        format_g6(level)
                    );
                    let tail = if method.needs_simple_null() {
                        let w0 = cfg.null_set.as_simple().ok_or_else(|| Error::Config {
                            field: "methods".into(),
                            message: format!("`{method}` needs a single-point null"),
                        })?;
                        match cal.lht(fam, w0, w1, cfg.n_joint, level)? {
                            LhtCalibration::Feasible { lambda, size, power, .. } => format!(
                                "lambda={} size={} power={}",
                                format_g6(lambda),
                                format_g6(size),
                                format_g6(power)
                            ),
                            LhtCalibration::Infeasible => "infeasible (always accept)".to_string(),
                        }
                    } else {
                        let c = cal.lvt(&prep.setup, w1, cfg.n_joint, level)?;
                        format!(
                            "theta={} threshold={} size={} power={}",
                            format_g6(c.theta),
                            format_g6(c.threshold),
                            format_g6(c.size),
                            format_g6(c.power)
                        )
                    };
                    lines.push(format!("{head} {tail}"));
                }
            }
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests;

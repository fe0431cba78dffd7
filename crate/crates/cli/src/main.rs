use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qsut_core::harness::{
    calibration_report, emit_results, format_g6, run_single, run_sweep, ExperimentConfig, Method, RunOutcome,
};
use qsut_core::oracle::run_verification_suite;

#[derive(Parser)]
#[command(name = "qsut", version, about = "Sequential universal tests for composite quantum hypotheses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, budget) cell of a config and write a CSV table.
    Sweep {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the brute-force oracle checks.
    Verify {
        /// Randomized two-sided runs checked for simultaneous crossings.
        #[arg(long, default_value_t = 10_000)]
        two_sided_runs: usize,
    },
    /// Print calibrated sensitivities, angles and thresholds at the truth.
    Calibrate { config: PathBuf },
    /// Run one seeded test; reproduces run `--run` of the matching sweep cell.
    Single {
        config: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        run: usize,
        /// Print every round.
        #[arg(long)]
        trace: bool,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))
}

fn sweep(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let mut cfg = load(&config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let rows = run_sweep(&cfg)?;
    emit_results(&rows, &out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn verify(two_sided_runs: usize) -> Result<bool> {
    let report = run_verification_suite(two_sided_runs)?;
    let mut ok = true;
    for c in &report {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn single(config: PathBuf, method: &str, budget: usize, seed: Option<u64>, run: usize, trace: bool) -> Result<()> {
    let cfg = load(&config)?;
    let method: Method = method.parse()?;
    let seed = seed.unwrap_or(cfg.master_seed);
    let outcome = run_single(&cfg, method, budget, seed, run, trace)?;
    match &outcome {
        RunOutcome::Sequential(o) => {
            if let Some(rows) = &o.trace {
                println!("round,povm,copies,outcome,log_numerator_term,log_slr,log_slr_reverse");
                for (i, r) in rows.iter().enumerate() {
                    println!(
                        "{},{},{},{},{},{},{}",
                        i + 1,
                        r.record.povm,
                        r.record.copies,
                        r.record.label,
                        format_g6(r.record.log_numerator_term),
                        format_g6(r.values.log_slr),
                        r.values.log_slr_reverse.map_or("".into(), format_g6)
                    );
                }
            }
            println!(
                "{method} budget={budget} seed={seed} run={run}: decision={} copies={} rounds={} log_slr={}",
                o.decision.as_str(),
                o.copies_used,
                o.rounds_used,
                format_g6(o.final_slr.log_slr)
            );
        }
        RunOutcome::Fixed { layout, outcome: f } => {
            if trace {
                let votes: Vec<&str> = f.votes.iter().map(|&v| if v { "1" } else { "0" }).collect();
                println!("estimation_copies={} omega1_hat={}", layout.estimation_copies, f.omega1_hat);
                println!("block_votes={}", votes.join(""));
            }
            println!(
                "{method} budget={budget} seed={seed} run={run}: decision={} copies={} rounds={}",
                if f.reject { "reject" } else { "accept" },
                layout.total_budget,
                layout.rounds()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep { config, out, seed } => sweep(config, out, seed).map(|_| true),
        Command::Verify { two_sided_runs } => verify(two_sided_runs),
        Command::Calibrate { config } => load(&config).and_then(|cfg| {
            for line in calibration_report(&cfg)? {
                println!("{line}");
            }
            Ok(true)
        }),
        Command::Single {
            config,
            method,
            budget,
            seed,
            run,
            trace,
        } => single(config, &method, budget, seed, run, trace).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

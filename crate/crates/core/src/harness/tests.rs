use super::*;
use proptest::prelude::*;

const SIMPLE: &str = "\
# simple null, one-sided
r_z = 0.99
r_x = 0.99
null = {45}
alt = (45,180]
truth = 90
methods = aLHT, LHT, bLHT
budgets = 10, 20, 30
runs = 12
master_seed = 7
";

fn cfg(text: &str) -> ExperimentConfig {
    text.parse().unwrap()
}

fn with(text: &str, key: &str, value: &str) -> String {
    text.lines()
        .map(|l| if l.starts_with(key) { format!("{key} = {value}") } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn g6_matches_printf() {
    let cases = [
        (0.925, "0.925"),
        (15.855, "15.855"),
        (1234567.0, "1.23457e+06"),
        (0.0001, "0.0001"),
        (0.00001234567, "1.23457e-05"),
        (999999.5, "1e+06"),
        (100.0, "100"),
        (0.1 + 0.2, "0.3"),
        (-2.5e-7, "-2.5e-07"),
        (123456.4, "123456"),
        (1.0 / 3.0, "0.333333"),
        (196.3, "196.3"),
        (0.0, "0"),
    ];
    for (x, want) in cases {
        assert_eq!(format_g6(x), want, "{x}");
    }
}

#[test]
fn minimal_config_parses_with_defaults() {
    let c = cfg(SIMPLE);
    assert_eq!(c.budgets, vec![10, 20, 30]);
    assert_eq!(c.methods, vec![Method::Sequential(crate::engine::PolicyKind::Alht), Method::Lht, Method::Blht]);
    assert_eq!(c.eps0, 0.05);
    assert_eq!(c.eps1, None);
    assert_eq!((c.n_ic, c.n_joint, c.block_size), (6, 4, 10));
    assert_eq!(c.resolution_deg, 0.5);
    let d = cfg(&SIMPLE.replace("runs = 12\n", ""));
    assert_eq!(d.runs, 200);
}

#[test]
fn config_errors() {
    let err = |t: &str| t.parse::<ExperimentConfig>().unwrap_err();
    assert!(matches!(err(&with(SIMPLE, "alt", "[40,180]")), Error::Config { field, .. } if field == "alt"));
    assert!(matches!(err(&with(SIMPLE, "budgets", "10, 30, 20")), Error::Config { field, .. } if field == "budgets"));
    assert!(matches!(err(&with(SIMPLE, "budgets", "5, 30")), Error::Config { field, .. } if field == "budgets"));
    assert!(matches!(err(&format!("{SIMPLE}colour = red\n")), Error::Parse { line: 11, .. }));
    assert!(matches!(err(&format!("{SIMPLE}runs = 3\n")), Error::Parse { line: 11, .. }));
    assert!(matches!(err(&format!("{SIMPLE}just words\n")), Error::Parse { line: 11, .. }));
    assert!(matches!(err(&with(SIMPLE, "runs", "lots")), Error::Parse { line: 9, .. }));
    assert!(matches!(err(&with(SIMPLE, "methods", "aLHT, XYZ")), Error::Parse { .. }));
    assert!(matches!(err(&with(SIMPLE, "runs", "0")), Error::Config { field, .. } if field == "runs"));
    assert!(matches!(err(&with(&with(SIMPLE, "null", "{45,135}"), "alt", "(45,135)")), Error::Config { field, .. } if field == "methods"));
    assert!(matches!(err(&with(SIMPLE, "r_x", "1.2")), Error::Config { .. }));
    assert!(matches!(err(&SIMPLE.replace("master_seed = 7\n", "")), Error::Config { field, .. } if field == "master_seed"));
}

#[test]
fn fixed_methods_spend_the_budget() {
    let rows = run_sweep(&cfg(SIMPLE)).unwrap();
    assert_eq!(rows.len(), 9);
    for r in rows.iter().filter(|r| r.method != "aLHT") {
        assert_eq!(r.avg_copies, r.budget as f64);
        assert_eq!(r.std_copies, 0.0);
    }
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.power));
        assert!(r.avg_copies <= r.budget as f64);
        assert_eq!(r.runs, 12);
        assert_eq!(r.master_seed, 7);
    }
}

#[test]
fn round_one_rejection() {
    // The null state |0⟩ gives outcome 1 probability zero, so the first
    // observation of the truth |1⟩ crosses any threshold.
    let text = "r_z = 1\nr_x = 1\nnull = {0}\nalt = (0,180]\ntruth = 180\nmethods = aLHT+\nbudgets = 50\nruns = 1\nmaster_seed = 3\n";
    let rows = run_sweep(&cfg(text)).unwrap();
    assert_eq!(rows[0].power, 1.0);
    assert_eq!(rows[0].avg_copies, 1.0);
    assert_eq!(rows[0].avg_rounds, 1.0);
}

#[test]
fn sweeps_are_deterministic_and_cells_independent() {
    let a = format_results(&run_sweep(&cfg(SIMPLE)).unwrap());
    let b = format_results(&run_sweep(&cfg(SIMPLE)).unwrap());
    assert_eq!(a, b);
    let more = run_sweep(&cfg(&with(SIMPLE, "methods", "aLVT, aLHT, LHT, bLHT"))).unwrap();
    let base = run_sweep(&cfg(SIMPLE)).unwrap();
    for r in &base {
        assert!(more.contains(r), "{r:?}");
    }
}

#[test]
fn single_reproduces_the_first_run_of_a_cell() {
    let c = cfg(&with(SIMPLE, "runs", "1"));
    for m in c.methods.clone() {
        let row = run_sweep(&ExperimentConfig { methods: vec![m], budgets: vec![20], ..c.clone() }).unwrap();
        let one = run_single(&c, m, 20, c.master_seed, 0, true).unwrap();
        assert_eq!(row[0].power, if one.rejected() { 1.0 } else { 0.0 });
        assert_eq!(row[0].avg_copies, one.copies() as f64);
    }
}

#[test]
fn emitted_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_results(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{RESULTS_HEADER}\n"));
    let row = ResultRow {
        method: "aLHT+".into(),
        budget: 40,
        power: 0.925,
        avg_copies: 15.855,
        std_copies: 2.0 / 3.0,
        avg_rounds: 7.5,
        runs: 200,
        master_seed: 1,
    };
    emit_results(std::slice::from_ref(&row), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().nth(1).unwrap(), "aLHT+,40,0.925,15.855,0.666667,7.5,200,1");
    let back = parse_results(&text).unwrap();
    assert_eq!(back.len(), 1);
    assert!((back[0].std_copies - row.std_copies).abs() < 1e-6);
}

#[test]
fn calibration_report_lines() {
    let lines = calibration_report(&cfg(SIMPLE)).unwrap();
    assert_eq!(lines.len(), 1 + 3 + 3);
    assert!(lines[0].starts_with("aLHT: "));
    assert!(lines[1].starts_with("LHT n=10: m=6 b=1 level=0.05 lambda="));
}

proptest! {
    #[test]
    fn g6_round_trips_within_six_digits(x in -1e9f64..1e9) {
        let back: f64 = format_g6(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs().max(1e-300));
    }

    #[test]
    fn seeds_differ_across_cells(master in any::<u64>(), run in 0usize..1000) {
        use rand::RngCore;
        let a = run_rng(master, Method::Lht, 20, run).next_u64();
        let b = run_rng(master, Method::Blht, 20, run).next_u64();
        let c = run_rng(master, Method::Lht, 30, run).next_u64();
        let d = run_rng(master, Method::Lht, 20, run + 1).next_u64();
        prop_assert!(a != b && a != c && a != d);
    }
}

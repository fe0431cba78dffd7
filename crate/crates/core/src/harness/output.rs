use std::path::Path;

use super::ResultRow;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str = "method,budget,power,avg_copies,std_copies,avg_rounds,runs,master_seed";

/// C's `%g` with six significant digits.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round to six significant digits first so the exponent reflects any carry.
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn format_results(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.budget,
            format_g6(r.power),
            format_g6(r.avg_copies),
            format_g6(r.std_copies),
            format_g6(r.avg_rounds),
            r.runs,
            r.master_seed
        ));
    }
    out
}

pub fn emit_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_results(rows))?;
    Ok(())
}

/// Reads a table written by [`format_results`].
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{RESULTS_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let bad = |what: &str| Error::Parse {
                line,
                message: format!("bad {what} in `{l}`"),
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(bad("field count"));
            }
            Ok(ResultRow {
                method: f[0].to_string(),
                budget: f[1].parse().map_err(|_| bad("budget"))?,
                power: f[2].parse().map_err(|_| bad("power"))?,
                avg_copies: f[3].parse().map_err(|_| bad("avg_copies"))?,
                std_copies: f[4].parse().map_err(|_| bad("std_copies"))?,
                avg_rounds: f[5].parse().map_err(|_| bad("avg_rounds"))?,
                runs: f[6].parse().map_err(|_| bad("runs"))?,
                master_seed: f[7].parse().map_err(|_| bad("master_seed"))?,
            })
        })
        .collect()
}

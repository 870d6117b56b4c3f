//! CSV report emission: fixed columns, 17-significant-digit floats for exact
//! round-trips, byte-identical output for identical inputs.

use std::io::Write;

use anyhow::Result;

use crate::scenario::{Check, Row};

/// Column list, documented in the leading comment line of every report.
pub const COLUMNS: &[&str] = &[
    "scenario",
    "tolerance",
    "t_avg",
    "delta",
    "n_cells",
    "n_occupied",
    "d_min",
    "k_term",
    "f_term",
    "beta_sq_sum",
    "r_cross_term",
    "total",
    "sigma_sq",
    "lemma1_lhs",
    "lemma1_rhs",
    "lemma2_lhs",
    "lemma2_rhs",
    "lemma3_lhs",
    "lemma3_rhs",
    "povm_lhs",
    "povm_rhs",
    "toy_closed",
    "toy_envelope",
    "short_sigma_inf",
    "short_bound",
    "d_eff",
    "dephasing_hs",
    "pass_main",
    "pass_lemma1",
    "pass_lemma2",
    "pass_lemma3",
    "pass_povm",
    "pass_toy",
    "pass_short",
    "pass_all",
];

/// 17 significant digits: enough to reproduce any f64 bit pattern on parse.
fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    fmt_float(v.unwrap_or(f64::NAN))
}

fn fmt_flag(pass: Option<bool>) -> String {
    match pass {
        Some(true) => "1".to_string(),
        Some(false) => "0".to_string(),
        None => "na".to_string(),
    }
}

fn check_cells(c: &Check) -> [String; 2] {
    [fmt_opt(c.lhs), fmt_opt(c.rhs)]
}

/// Write the full report: a `#` comment header naming every column, then one
/// CSV line per row.
pub fn write_csv<W: Write>(mut out: W, rows: &[Row]) -> Result<()> {
    writeln!(out, "# {}", COLUMNS.join(","))?;
    for row in rows {
        let mut cells: Vec<String> = vec![row.scenario.clone()];
        for v in [
            row.tolerance,
            row.t_avg,
            row.delta,
            row.n_cells as f64,
            row.n_occupied as f64,
            row.d_min,
            row.k_term,
            row.f_term,
            row.beta_sq_sum,
            row.r_cross_term,
            row.total,
            row.sigma_sq,
        ] {
            cells.push(fmt_float(v));
        }
        cells.extend(check_cells(&row.lemma1));
        cells.extend(check_cells(&row.lemma2));
        cells.extend(check_cells(&row.lemma3));
        cells.extend(check_cells(&row.povm));
        cells.push(fmt_opt(row.toy_closed));
        cells.push(fmt_opt(row.toy_envelope));
        cells.push(fmt_opt(row.short_sigma_inf));
        cells.push(fmt_opt(row.short_bound));
        cells.push(fmt_opt(row.d_eff));
        cells.push(fmt_opt(row.dephasing_hs));
        for flag in [
            row.main.pass,
            row.lemma1.pass,
            row.lemma2.pass,
            row.lemma3.pass,
            row.povm.pass,
            row.toy.pass,
            row.short.pass,
        ] {
            cells.push(fmt_flag(flag));
        }
        cells.push(fmt_flag(Some(row.pass_all())));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Render the report to a string (used for byte-identity checks).
pub fn to_csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Human-oriented console summary of one row's checks.
pub fn console_lines(row: &Row) -> Vec<String> {
    let mut lines = Vec::new();
    let head = format!("[{} | T={}]", row.scenario, row.t_avg);
    let mut one = |name: &str, c: &Check| {
        if let (Some(lhs), Some(rhs), Some(pass)) = (c.lhs, c.rhs, c.pass) {
            lines.push(format!(
                "{head} {name}: lhs = {lhs:.6e} vs rhs = {rhs:.6e}  {}",
                if pass { "PASS" } else { "FAIL" }
            ));
        }
    };
    one("main bound   ", &row.main);
    one("coherence est", &row.lemma1);
    one("dephased est ", &row.lemma2);
    one("cross est    ", &row.lemma3);
    one("povm equil   ", &row.povm);
    one("toy closed   ", &row.toy);
    one("finite-dim   ", &row.short);
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for &v in &[
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            1.2345678901234567e-300,
            -7.0,
        ] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn header_matches_row_arity() {
        let row = Row {
            scenario: "x".into(),
            ..Row::default()
        };
        let text = to_csv_string(&[row]);
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        let body = lines.next().unwrap();
        assert_eq!(
            header.trim_start_matches("# ").split(',').count(),
            body.split(',').count()
        );
        assert_eq!(COLUMNS.len(), body.split(',').count());
    }
}

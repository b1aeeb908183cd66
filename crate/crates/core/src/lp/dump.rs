//! CPLEX-style `.lp` text output for debugging clearing problems.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::LinearProgram;

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect()
}

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn linear_expr(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    let mut first = true;
    for (name, c) in terms {
        if c == 0.0 {
            continue;
        }
        let sign = if c < 0.0 { "-" } else { "+" };
        if first && c >= 0.0 {
            let _ = write!(out, " {} {}", number(c), name);
        } else {
            let _ = write!(out, " {} {} {}", sign, number(c.abs()), name);
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

/// Writes the program in LP format. Ranged rows are split into a `_lo` and
/// `_hi` pair.
pub fn write_lp_format<W: Write>(lp: &LinearProgram, mut w: W) -> io::Result<()> {
    let names: Vec<String> = lp.vars.iter().map(|v| sanitize(&v.name)).collect();
    let mut out = String::new();

    out.push_str("Minimize\n obj:");
    linear_expr(
        &mut out,
        lp.vars.iter().zip(&names).map(|(v, n)| (n.clone(), v.cost)),
    );
    out.push_str("\nSubject To\n");

    for r in &lp.rows {
        let name = sanitize(&r.name);
        let mut expr = String::new();
        linear_expr(
            &mut expr,
            r.coeffs.iter().map(|&(v, c)| (names[v.0].clone(), c)),
        );
        if r.lower == r.upper {
            let _ = writeln!(out, " {name}:{expr} = {}", number(r.upper));
        } else {
            if r.lower.is_finite() {
                let _ = writeln!(out, " {name}_lo:{expr} >= {}", number(r.lower));
            }
            if r.upper.is_finite() {
                let _ = writeln!(out, " {name}_hi:{expr} <= {}", number(r.upper));
            }
        }
    }

    out.push_str("Bounds\n");
    for (v, n) in lp.vars.iter().zip(&names) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {n} free");
            }
            _ if v.lower == v.upper => {
                let _ = writeln!(out, " {n} = {}", number(v.lower));
            }
            _ => {
                let _ = writeln!(out, " {} <= {n} <= {}", number(v.lower), number(v.upper));
            }
        }
    }
    out.push_str("End\n");
    w.write_all(out.as_bytes())
}

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{LinearProgram, Sense};

pub(crate) fn write_mps(program: &LinearProgram, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n N  COST\n");
    for (i, row) in program.rows.iter().enumerate() {
        let tag = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {tag}  R{i}");
    }
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); program.num_vars()];
    for (i, row) in program.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            by_col[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in by_col.iter().enumerate() {
        let c = program.objective[j];
        if c != 0.0 || entries.is_empty() {
            let _ = writeln!(out, "    X{j:<8} COST      {c}");
        }
        for &(i, a) in entries {
            let row = format!("R{i}");
            let _ = writeln!(out, "    X{j:<8} {row:<8}  {a}");
        }
    }
    out.push_str("RHS\n");
    for (i, row) in program.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            let r = format!("R{i}");
            let _ = writeln!(out, "    RHS       {r:<8}  {}", row.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..program.num_vars() {
        let (lo, up) = (program.lower[j], program.upper[j]);
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND       X{j}");
            }
            _ if lo == up => {
                let _ = writeln!(out, " FX BND       X{j:<8}  {lo}");
            }
            (lo_f, up_f) => {
                if !lo_f {
                    let _ = writeln!(out, " MI BND       X{j}");
                } else if lo != 0.0 {
                    let _ = writeln!(out, " LO BND       X{j:<8}  {lo}");
                }
                if up_f {
                    let _ = writeln!(out, " UP BND       X{j:<8}  {up}");
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

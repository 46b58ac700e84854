//! Fixed-column MPS export for cross-checking programs with external tools.

use std::io::{self, Write};

use crate::{LinearProgram, Relation};

/// Writes `lp` in fixed-format MPS. Column and row names are replaced by
/// `C<index>` / `R<index>` so they always fit the 8-character fields.
pub fn write_mps<W: Write>(lp: &LinearProgram, name: &str, mut w: W) -> io::Result<()> {
    writeln!(w, "NAME          {name}")?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N  COST")?;
    for (i, c) in lp.constraints().iter().enumerate() {
        let kind = match c.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        writeln!(w, " {kind}  R{i}")?;
    }
    // Column-major view of the rows.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_variables()];
    for (i, c) in lp.constraints().iter().enumerate() {
        for &(j, a) in &c.coeffs {
            cols[j.0].push((i, a));
        }
    }
    writeln!(w, "COLUMNS")?;
    for (j, col) in cols.iter().enumerate() {
        let cj = lp.objective()[j];
        if cj != 0.0 {
            writeln!(w, "    {:<8}  {:<8}  {:>12}", format!("C{j}"), "COST", fmt_num(cj))?;
        }
        for &(i, a) in col {
            writeln!(
                w,
                "    {:<8}  {:<8}  {:>12}",
                format!("C{j}"),
                format!("R{i}"),
                fmt_num(a)
            )?;
        }
        if cj == 0.0 && col.is_empty() {
            writeln!(w, "    {:<8}  {:<8}  {:>12}", format!("C{j}"), "COST", "0")?;
        }
    }
    writeln!(w, "RHS")?;
    for (i, c) in lp.constraints().iter().enumerate() {
        if c.rhs != 0.0 {
            writeln!(w, "    {:<8}  {:<8}  {:>12}", "RHS", format!("R{i}"), fmt_num(c.rhs))?;
        }
    }
    writeln!(w, "BOUNDS")?;
    for (j, v) in lp.variables().iter().enumerate() {
        let name = format!("C{j}");
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => {
                writeln!(w, " FX BND       {:<8}  {:>12}", name, fmt_num(v.lower))?;
            }
            (lo_fin, up_fin) => {
                if !lo_fin {
                    writeln!(w, " MI BND       {name}")?;
                } else if v.lower != 0.0 {
                    writeln!(w, " LO BND       {:<8}  {:>12}", name, fmt_num(v.lower))?;
                }
                if up_fin {
                    writeln!(w, " UP BND       {:<8}  {:>12}", name, fmt_num(v.upper))?;
                }
            }
        }
    }
    writeln!(w, "ENDATA")?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        s
    } else {
        format!("{v:.6e}")
    }
}

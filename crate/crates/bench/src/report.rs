use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use reginit::lbfgs::MemorySize;

use crate::error::{BenchError, BenchResult};
use crate::experiment::ReportRow;

pub const CSV_HEADER: [&str; 10] =
    ["strategy", "ell", "alpha", "iter", "feval", "avg_ls", "reduction", "time_s", "converged_by", "rel_err"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

fn ell_token(ell: MemorySize) -> String {
    ell.to_string()
}

fn count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v:.1}")
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> BenchResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            ell_token(r.ell),
            r.alpha.to_string(),
            r.iterations.to_string(),
            r.fevals.to_string(),
            r.avg_ls.to_string(),
            r.reduction.to_string(),
            r.wall_time_s.to_string(),
            r.converged_by.clone(),
            r.rel_error.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(rows: &[ReportRow], mut out: W) -> BenchResult<()> {
    let mut cells: Vec<[String; 10]> = vec![CSV_HEADER.map(String::from)];
    for r in rows {
        cells.push([
            r.strategy.clone(),
            ell_token(r.ell),
            format!("{:e}", r.alpha),
            count(r.iterations),
            count(r.fevals),
            format!("{:.3}", r.avg_ls),
            format!("{:.2e}", r.reduction),
            format!("{:.3}", r.wall_time_s),
            r.converged_by.clone(),
            r.rel_error.map(|e| format!("{e:.2e}")).unwrap_or_else(|| "-".into()),
        ]);
    }
    let mut widths = [0usize; 10];
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 || i == 8 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end())?;
    }
    Ok(())
}

/// Writes `rows` to `path`, or to stdout when `path` is `None`.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat, path: Option<&Path>) -> BenchResult<()> {
    if rows.is_empty() {
        return Err(BenchError::config("rows", "nothing to report"));
    }
    match path {
        Some(p) => {
            let f = io::BufWriter::new(File::create(p)?);
            match format {
                ReportFormat::Csv => write_csv(rows, f),
                ReportFormat::Table => write_table(rows, f),
            }
        }
        None => {
            let stdout = io::stdout().lock();
            match format {
                ReportFormat::Csv => write_csv(rows, stdout),
                ReportFormat::Table => write_table(rows, stdout),
            }
        }
    }
}

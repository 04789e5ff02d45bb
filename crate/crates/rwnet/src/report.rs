//! CSV output for training reports and trial tables.

use std::fs::File;
use std::path::Path;

use rwnet_core::trainer::TrainReport;

use crate::error::{Error, Result};

/// Header for a report with `h` hidden layers.
pub fn header(h: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["items", "err_total", "iter_total", "iter_per_err_batch", "acc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=h).map(|l| format!("alpha_{l}")));
    cols.push("zero_err".into());
    cols
}

/// One record per report row, matching [`header`].
pub fn records(report: &TrainReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            let mut rec = vec![
                r.items.to_string(),
                r.err_total.to_string(),
                r.iter_total.to_string(),
                r.iter_per_err_batch.to_string(),
                r.acc.to_string(),
            ];
            rec.extend(r.alpha.iter().map(|a| a.to_string()));
            rec.push(r.zero_err.to_string());
            rec
        })
        .collect()
}

pub fn write_report<W: std::io::Write>(out: W, report: &TrainReport) -> Result<()> {
    let h = report.rows.first().map_or(0, |r| r.alpha.len());
    write_table(out, &header(h), &records(report))
}

pub fn write_table<W: std::io::Write, H: AsRef<str>>(out: W, header: &[H], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn save_report(path: &Path, report: &TrainReport) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(file, report)
}

/// Writes a header and rows to `path`.
pub fn save_table<H: AsRef<str>>(path: &Path, header: &[H], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(file, header, rows)
}

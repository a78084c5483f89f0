//! Plain-text writers. Floats use fixed precision so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use macol_core::analytic::CdfCurve;
use serde::Serialize;

use crate::CliError;

pub fn fixed(v: f64, digits: usize) -> String {
    // Avoid "-0.000000" for tiny negatives.
    let s = format!("{v:.digits$}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `l_m,cdf` table shared by analytic and empirical curves.
pub fn write_cdf(path: &Path, curve: &CdfCurve) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = curve
        .grid
        .iter()
        .zip(&curve.values)
        .map(|(l, c)| vec![fixed(*l, 4), fixed(*c, 6)])
        .collect();
    write_csv(path, &["l_m", "cdf"], &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

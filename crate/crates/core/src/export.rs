//! CSV readers and writers for curves, densities and samples.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::density::ScoreDensity;
use crate::dgp::{Clarity, LabeledScoreSet};
use crate::error::{invalid, Result};
use crate::roc::RocCurve;

/// Rows of `fpr,tpr,theta,branch`.
pub fn write_roc_csv<W: Write>(w: W, roc: &RocCurve) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fpr", "tpr", "theta", "branch"])?;
    for p in &roc.points {
        out.write_record([p.fpr.to_string(), p.tpr.to_string(), p.theta.to_string(), p.branch.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of `s,pdf,cdf` on an `n`-point grid over the support.
pub fn write_density_csv<W: Write>(w: W, d: &ScoreDensity, n: usize) -> Result<()> {
    let rows: Vec<Vec<f64>> = d.grid(n).into_iter().map(|(s, p, c)| vec![s, p, c]).collect();
    write_columns(w, &["s", "pdf", "cdf"], &rows)
}

/// Numeric table with a header row.
pub fn write_columns<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(invalid(format!("row has {} columns, header has {}", r.len(), header.len())));
        }
        out.write_record(r.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of `score,label,clarity`; clarity is `e`, `d` or empty.
pub fn write_samples_csv<W: Write>(w: W, set: &LabeledScoreSet) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["score", "label", "clarity"])?;
    for i in 0..set.len() {
        let clarity = match set.clarity.as_ref().map(|c| c[i]) {
            Some(Clarity::Clear) => "e",
            Some(Clarity::Turbid) => "d",
            None => "",
        };
        out.write_record([set.scores[i].to_string(), set.labels[i].to_string(), clarity.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct SampleRow {
    score: f64,
    label: u8,
}

/// Reads `score,label` rows (extra columns ignored).
pub fn read_samples_csv<R: Read>(r: R) -> Result<LabeledScoreSet> {
    let mut rdr = csv::Reader::from_reader(r);
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: SampleRow = row?;
        if row.label > 1 || !row.score.is_finite() {
            return Err(invalid(format!("bad sample row: score {}, label {}", row.score, row.label)));
        }
        scores.push(row.score);
        labels.push(row.label);
    }
    Ok(LabeledScoreSet { scores, labels, clarity: None, rng_seed: 0 })
}

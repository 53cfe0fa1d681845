//! Output directory handling and the invariant checks that decide the
//! exit status.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use turbidity::export::{write_columns, write_roc_csv};
use turbidity::numerics::integrate;
use turbidity::{RocCurve, ScoreDensity};

use crate::svg::{self, Plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

/// Tolerance for a density integrating to one.
const MASS_TOL: f64 = 1e-4;

pub struct Outputs {
    dir: PathBuf,
    format: Format,
    violations: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), format, violations: Vec::new() })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    /// Writes `name` through a buffered writer.
    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("while writing {}", path.display()))?;
        w.flush().with_context(|| format!("while writing {}", path.display()))?;
        Ok(path)
    }

    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(what());
        }
    }

    /// The density must integrate to one over its support.
    pub fn check_density(&mut self, name: &str, d: &ScoreDensity) {
        let sup = d.support();
        let mut cuts = vec![sup.lo];
        cuts.extend(d.breakpoints().iter().copied().filter(|b| *b > sup.lo && *b < sup.hi));
        cuts.push(sup.hi);
        let mass: f64 = cuts.windows(2).map(|w| integrate(|s| d.pdf(s), w[0], w[1], 1e-10)).sum();
        self.check((mass - 1.0).abs() <= MASS_TOL, || format!("{name}: density integrates to {mass}"));
    }

    /// Points inside the unit square, pinned at both corners.
    pub fn check_roc(&mut self, name: &str, roc: &RocCurve) {
        let inside = roc.points.iter().all(|p| (0.0..=1.0).contains(&p.fpr) && (0.0..=1.0).contains(&p.tpr));
        self.check(inside, || format!("{name}: ROC point outside the unit square"));
        let (first, last) = (roc.points.first(), roc.points.last());
        let pinned = first.is_some_and(|p| p.fpr == 0.0 && p.tpr == 0.0) && last.is_some_and(|p| p.fpr == 1.0 && p.tpr == 1.0);
        self.check(pinned, || format!("{name}: ROC does not run from (0,0) to (1,1)"));
    }

    /// Emits ROC curves as `stem.csv` (first curve only) or one `stem.svg`
    /// plot, after checking each.
    pub fn rocs(&mut self, stem: &str, title: &str, curves: &[(&str, &RocCurve)]) -> Result<PathBuf> {
        for (name, roc) in curves {
            self.check_roc(&format!("{stem}/{name}"), roc);
        }
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), |w| Ok(write_roc_csv(w, curves[0].1)?)),
            Format::Svg => {
                let series = curves
                    .iter()
                    .map(|(name, roc)| Series {
                        name: format!("{name} (AUC {:.3})", roc.auc),
                        points: roc.points.iter().map(|p| (p.fpr, p.tpr)).collect(),
                    })
                    .collect();
                let text = svg::render(&Plot::roc(title, series));
                self.write(&format!("{stem}.svg"), |w| Ok(w.write_all(text.as_bytes())?))
            }
        }
    }

    /// Emits a table whose first column is the abscissa, as `stem.csv` or
    /// as one series per remaining column in `stem.svg`.
    pub fn curves(&mut self, stem: &str, title: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), |w| Ok(write_columns(w, header, rows)?)),
            Format::Svg => {
                let series = (1..header.len())
                    .map(|j| Series { name: header[j].to_string(), points: rows.iter().map(|r| (r[0], r[j])).collect() })
                    .collect();
                let plot = Plot {
                    title: title.into(),
                    x_label: header[0].into(),
                    y_label: String::new(),
                    series,
                    diagonal: false,
                    x_range: None,
                    y_range: None,
                };
                let text = svg::render(&plot);
                self.write(&format!("{stem}.svg"), |w| Ok(w.write_all(text.as_bytes())?))
            }
        }
    }
}

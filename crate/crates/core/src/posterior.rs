//! Possibly nonmonotonic class posteriors over the score axis.

use std::fmt;
use std::sync::Arc;

use crate::density::{Func, Interval, ScoreDensity};
use crate::error::{invalid, Result};
use crate::numerics::{bisect_predicate, golden_max, linspace, ROOT_TOL};

/// Grid size used to discover extrema and level crossings.
pub const DISCOVERY_GRID: usize = 4097;

/// Points closer than this are treated as one preimage or crossing.
pub const MERGE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// A map from score to posterior probability, with the ordered preimages
/// that split the support into monotone segments.
#[derive(Clone)]
pub struct PosteriorCurve {
    eval: Func,
    extremum_preimages: Vec<f64>,
    monotone: bool,
    support: Interval,
}

impl fmt::Debug for PosteriorCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PosteriorCurve")
            .field("support", &self.support)
            .field("extremum_preimages", &self.extremum_preimages)
            .field("monotone", &self.monotone)
            .finish_non_exhaustive()
    }
}

impl PosteriorCurve {
    /// Builds a curve from known segment endpoints. Interior preimages are
    /// given without the support ends, which are added here.
    pub fn with_preimages<F>(support: Interval, eval: F, interior: &[f64]) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut pre = vec![support.lo];
        pre.extend(interior.iter().copied());
        pre.push(support.hi);
        if pre.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("extremum preimages must be strictly increasing inside the support"));
        }
        Ok(Self::assemble(support, Arc::new(eval), pre))
    }

    /// A curve known to be monotone over the whole support.
    pub fn monotone<F>(support: Interval, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::assemble(support, Arc::new(eval), vec![support.lo, support.hi])
    }

    /// Locates extrema numerically: direction changes on a 4097-point grid
    /// (plus `hints`), refined by golden-section search. Hints are kept as
    /// segment endpoints since jumps and kinks live there. Approximate.
    pub fn discover<F>(support: Interval, eval: F, hints: &[f64]) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let eval: Func = Arc::new(eval);
        let hints: Vec<f64> = hints.iter().copied().filter(|h| *h > support.lo && *h < support.hi).collect();
        let grid = discovery_grid(support, &hints);
        let values: Vec<f64> = grid.iter().map(|s| eval(*s)).collect();

        let mut pre = vec![support.lo, support.hi];
        pre.extend(hints.iter().copied());
        let mut last_sign = 0.0;
        let mut last_turn_idx: usize = 0;
        for i in 1..grid.len() {
            let diff = values[i] - values[i - 1];
            if diff == 0.0 {
                continue;
            }
            let sign = diff.signum();
            if last_sign != 0.0 && sign != last_sign {
                // The extremum sits at grid[last_turn_idx] within the
                // neighbouring cells.
                let k = last_turn_idx;
                let lo = grid[k.saturating_sub(1)];
                let hi = grid[(k + 1).min(grid.len() - 1)];
                let near_hint = hints.iter().find(|h| **h >= lo && **h <= hi);
                let x = match near_hint {
                    Some(h) => *h,
                    None => {
                        let e = eval.clone();
                        if last_sign > 0.0 {
                            golden_max(move |s| e(s), lo, hi, 1e-10)
                        } else {
                            golden_max(move |s| -e(s), lo, hi, 1e-10)
                        }
                    }
                };
                pre.push(x);
            }
            last_sign = sign;
            last_turn_idx = i;
        }
        pre.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(pre.len());
        for x in pre {
            match merged.last() {
                Some(prev) if x - prev <= 1e-9 => {}
                _ => merged.push(x),
            }
        }
        // Keep the support ends exact.
        if let Some(last) = merged.last_mut() {
            *last = support.hi;
        }
        merged[0] = support.lo;
        Self::assemble(support, eval, merged)
    }

    /// Bayes posterior of class 1 from two class-conditional densities.
    ///
    /// Where both densities vanish the ratio is taken in log space; if that
    /// is undefined too, the prior is returned.
    pub fn from_densities(d0: &ScoreDensity, d1: &ScoreDensity, prior_mal: f64) -> Self {
        let support = d0.support().union(&d1.support());
        let (a, b) = (d0.clone(), d1.clone());
        let eval = move |s: f64| bayes_posterior(&a, &b, prior_mal, s);
        let mut hints: Vec<f64> = d0.breakpoints().to_vec();
        hints.extend_from_slice(d1.breakpoints());
        for d in [d0, d1] {
            hints.push(d.support().lo);
            hints.push(d.support().hi);
        }
        Self::discover(support, eval, &hints)
    }

    /// Piecewise-linear curve through tabulated `(s, posterior)` rows.
    pub fn tabulated(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 2 || rows.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid("tabulated posterior needs at least two strictly increasing abscissae"));
        }
        let support = Interval::new(rows[0].0, rows[rows.len() - 1].0)?;
        let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let table = Arc::new(rows);
        let t = table.clone();
        let eval = move |s: f64| {
            let k = t.partition_point(|r| r.0 <= s);
            if k == 0 {
                return t[0].1;
            }
            if k >= t.len() {
                return t[t.len() - 1].1;
            }
            let (x0, y0) = t[k - 1];
            let (x1, y1) = t[k];
            y0 + (y1 - y0) * (s - x0) / (x1 - x0)
        };
        // Turning points of a piecewise-linear curve are at its nodes.
        let mut pre = vec![support.lo];
        let mut last_sign = 0.0;
        for i in 1..table.len() {
            let d = table[i].1 - table[i - 1].1;
            if d == 0.0 {
                continue;
            }
            if last_sign != 0.0 && d.signum() != last_sign {
                let x = xs[i - 1];
                if x > *pre.last().unwrap() && x < support.hi {
                    pre.push(x);
                }
            }
            last_sign = d.signum();
        }
        pre.push(support.hi);
        Ok(Self::assemble(support, Arc::new(eval), pre))
    }

    fn assemble(support: Interval, eval: Func, pre: Vec<f64>) -> Self {
        let mut curve = Self { eval, extremum_preimages: pre, monotone: false, support };
        curve.monotone = curve.check_monotone();
        curve
    }

    fn check_monotone(&self) -> bool {
        let dirs: Vec<Direction> = self.segments().map(|(a, b)| self.direction(a, b)).collect();
        if dirs.windows(2).any(|w| w[0] != w[1]) {
            return false;
        }
        let up = dirs[0] == Direction::Increasing;
        // One-sided limits must also line up across interior preimages.
        self.extremum_preimages[1..self.extremum_preimages.len() - 1].iter().all(|&x| {
            let left = self.eval(x - edge_offset(x));
            let right = self.eval(x + edge_offset(x));
            if up {
                right >= left
            } else {
                right <= left
            }
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.eval)(s)
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn extremum_preimages(&self) -> &[f64] {
        &self.extremum_preimages
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Consecutive preimage pairs.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.extremum_preimages.windows(2).map(|w| (w[0], w[1]))
    }

    /// Right limit at `a` and left limit at `b`.
    pub fn segment_limits(&self, a: f64, b: f64) -> (f64, f64) {
        let eps = edge_offset(a).max(edge_offset(b)).min((b - a) * 1e-3);
        (self.eval(a + eps), self.eval(b - eps))
    }

    pub fn direction(&self, a: f64, b: f64) -> Direction {
        let (pa, pb) = self.segment_limits(a, b);
        if pb >= pa {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }

    /// Posterior values at both one-sided limits of every preimage.
    pub fn extremum_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (a, b) in self.segments() {
            let (pa, pb) = self.segment_limits(a, b);
            out.push(pa);
            out.push(pb);
        }
        out
    }

    /// Sorted scores where the curve crosses `level`, with `>= level`
    /// counting as above. Crossings closer than [`MERGE_TOL`] are merged.
    pub fn crossings(&self, level: f64) -> Vec<f64> {
        let mut hints: Vec<f64> = self.extremum_preimages.clone();
        hints.retain(|h| *h > self.support.lo && *h < self.support.hi);
        let grid = discovery_grid(self.support, &hints);
        let above: Vec<bool> = grid.iter().map(|s| self.eval(*s) >= level).collect();
        let mut out: Vec<f64> = Vec::new();
        for i in 1..grid.len() {
            if above[i] != above[i - 1] {
                let x = bisect_predicate(|s| self.eval(s) >= level, grid[i - 1], grid[i], ROOT_TOL);
                match out.last() {
                    Some(prev) if x - prev < MERGE_TOL => {
                        out.pop();
                    }
                    _ => out.push(x),
                }
            }
        }
        out
    }
}

pub(crate) fn bayes_posterior(d0: &ScoreDensity, d1: &ScoreDensity, prior_mal: f64, s: f64) -> f64 {
    let w1 = d1.pdf(s) * prior_mal;
    let w0 = d0.pdf(s) * (1.0 - prior_mal);
    let total = w0 + w1;
    if total > 0.0 && total.is_finite() {
        return w1 / total;
    }
    let l1 = d1.ln_pdf(s) + prior_mal.ln();
    let l0 = d0.ln_pdf(s) + (1.0 - prior_mal).ln();
    if l0.is_finite() || l1.is_finite() {
        1.0 / (1.0 + (l0 - l1).exp())
    } else {
        prior_mal
    }
}

fn edge_offset(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

fn discovery_grid(support: Interval, hints: &[f64]) -> Vec<f64> {
    let mut grid = linspace(support.lo, support.hi, DISCOVERY_GRID);
    grid.extend(hints.iter().copied().filter(|h| *h > support.lo && *h < support.hi));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

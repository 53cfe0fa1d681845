//! One-dimensional score densities with evaluable PDF and CDF.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{integrate, linspace, QUAD_TOL};

pub(crate) type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed score interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(invalid(format!("interval [{lo}, {hi}] must be finite with lo < hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }

    pub fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.lo, self.hi)
    }

    pub fn union(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    Analytic,
    QuadratureBacked,
    KdeMixture,
    PiecewiseMixture,
}

/// An evaluable probability density on a bounded support.
///
/// Cheap to clone; the evaluation closures are shared. `breakpoints` lists
/// interior points where the PDF may jump or kink, so integrators and
/// extremum searches can split there.
#[derive(Clone)]
pub struct ScoreDensity {
    kind: DensityKind,
    support: Interval,
    breakpoints: Vec<f64>,
    pdf: Func,
    cdf: Func,
    ln_pdf: Option<Func>,
}

impl fmt::Debug for ScoreDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreDensity")
            .field("kind", &self.kind)
            .field("support", &self.support)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

/// Memoized cumulative integral on a fixed node grid.
struct CumulativeTable {
    pdf: Func,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl CumulativeTable {
    fn build(pdf: Func, support: Interval, breakpoints: &[f64], intervals: usize) -> Self {
        let mut nodes = linspace(support.lo, support.hi, intervals + 1);
        nodes.extend(breakpoints.iter().copied().filter(|b| *b > support.lo && *b < support.hi));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let per_piece = QUAD_TOL * 0.01;
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            acc += integrate(|s| pdf(s), w[0], w[1], per_piece);
            cumulative.push(acc);
        }
        Self { pdf, nodes, cumulative, total: acc }
    }

    /// Unnormalized integral from the support start to `s`.
    fn partial(&self, s: f64) -> f64 {
        let first = self.nodes[0];
        let last = *self.nodes.last().unwrap();
        if s <= first {
            return 0.0;
        }
        if s >= last {
            return self.total;
        }
        let k = self.nodes.partition_point(|n| *n <= s) - 1;
        let pdf = &self.pdf;
        self.cumulative[k] + integrate(|x| pdf(x), self.nodes[k], s, QUAD_TOL * 0.01)
    }
}

impl ScoreDensity {
    /// A density given by closed-form PDF and CDF closures.
    pub fn analytic<P, C>(support: Interval, pdf: P, cdf: C) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_parts(DensityKind::Analytic, support, Vec::new(), Arc::new(pdf), Arc::new(cdf), None)
    }

    pub(crate) fn from_parts(
        kind: DensityKind,
        support: Interval,
        mut breakpoints: Vec<f64>,
        pdf: Func,
        cdf: Func,
        ln_pdf: Option<Func>,
    ) -> Self {
        breakpoints.retain(|b| *b > support.lo && *b < support.hi);
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Self { kind, support, breakpoints, pdf, cdf, ln_pdf }
    }

    /// Normalizes a nonnegative function on `support` by adaptive quadrature.
    ///
    /// Returns the density and the mass of `f` before normalization. The CDF
    /// is served from cumulative integrals memoized on a 256-interval grid
    /// refined at `breakpoints`.
    pub fn from_unnormalized<F>(
        kind: DensityKind,
        support: Interval,
        breakpoints: Vec<f64>,
        f: F,
    ) -> Result<(Self, f64)>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let raw: Func = Arc::new(move |s| if support.contains(s) { f(s) } else { 0.0 });
        let table = Arc::new(CumulativeTable::build(raw.clone(), support, &breakpoints, 256));
        let mass = table.total;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid(format!("density mass {mass} is not positive")));
        }
        let pdf: Func = Arc::new(move |s| raw(s) / mass);
        let t = table.clone();
        let cdf: Func = Arc::new(move |s| (t.partial(s) / t.total).clamp(0.0, 1.0));
        Ok((Self::from_parts(kind, support, breakpoints, pdf, cdf, None), mass))
    }

    /// Weighted mixture of densities. Weights must be nonnegative and are
    /// renormalized to sum to one.
    pub fn mixture(kind: DensityKind, components: Vec<(f64, ScoreDensity)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.is_empty() || components.iter().any(|(w, _)| *w < 0.0 || !w.is_finite()) || total <= 0.0 {
            return Err(invalid("mixture weights must be nonnegative with positive sum"));
        }
        let parts: Vec<(f64, ScoreDensity)> =
            components.into_iter().filter(|(w, _)| *w > 0.0).map(|(w, d)| (w / total, d)).collect();
        let support = parts.iter().skip(1).fold(parts[0].1.support, |acc, (_, d)| acc.union(&d.support));
        let mut breakpoints = Vec::new();
        for (_, d) in &parts {
            breakpoints.extend_from_slice(&d.breakpoints);
            breakpoints.push(d.support.lo);
            breakpoints.push(d.support.hi);
        }
        let parts = Arc::new(parts);
        let p = parts.clone();
        let pdf: Func = Arc::new(move |s| p.iter().map(|(w, d)| w * d.pdf(s)).sum());
        let c = parts.clone();
        let cdf: Func = Arc::new(move |s| c.iter().map(|(w, d)| w * d.cdf(s)).sum::<f64>().clamp(0.0, 1.0));
        Ok(Self::from_parts(kind, support, breakpoints, pdf, cdf, None))
    }

    /// Restriction to `[lo, hi)` (closed at `hi` when `hi` is the support
    /// end), renormalized. Returns the restricted density and the mass of
    /// the original density on that range.
    pub fn truncated(&self, lo: f64, hi: f64) -> Result<(Self, f64)> {
        let lo = self.support.clamp(lo);
        let hi = self.support.clamp(hi);
        let range = Interval::new(lo, hi)?;
        let base_lo = self.cdf(lo);
        let mass = self.cdf(hi) - base_lo;
        if mass <= 0.0 {
            return Err(invalid(format!("no probability mass on [{lo}, {hi})")));
        }
        let closed_hi = hi >= self.support.hi;
        let inside = move |s: f64| s >= lo && (s < hi || (closed_hi && s == hi));
        let b = self.clone();
        let pdf: Func = Arc::new(move |s| if inside(s) { b.pdf(s) / mass } else { 0.0 });
        let b = self.clone();
        let cdf: Func = Arc::new(move |s| {
            if s <= lo {
                0.0
            } else if s >= hi {
                1.0
            } else {
                ((b.cdf(s) - base_lo) / mass).clamp(0.0, 1.0)
            }
        });
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.push(lo);
        breakpoints.push(hi);
        Ok((Self::from_parts(DensityKind::PiecewiseMixture, range, breakpoints, pdf, cdf, None), mass))
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pdf(&self, s: f64) -> f64 {
        if self.support.contains(s) {
            (self.pdf)(s)
        } else {
            0.0
        }
    }

    /// Log-density; exact in the far tails for KDE-backed densities.
    pub fn ln_pdf(&self, s: f64) -> f64 {
        match (&self.ln_pdf, self.support.contains(s)) {
            (_, false) => f64::NEG_INFINITY,
            (Some(f), true) => f(s),
            (None, true) => (self.pdf)(s).ln(),
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if s <= self.support.lo {
            0.0
        } else if s >= self.support.hi {
            1.0
        } else {
            (self.cdf)(s)
        }
    }

    /// Shareable CDF closure.
    pub fn cdf_fn(&self) -> impl Fn(f64) -> f64 + Send + Sync + Clone + 'static {
        let d = self.clone();
        move |s| d.cdf(s)
    }

    /// `∫ pdf` over the support by adaptive quadrature split at breakpoints.
    pub fn total_mass(&self) -> f64 {
        let mut edges = vec![self.support.lo];
        edges.extend_from_slice(&self.breakpoints);
        edges.push(self.support.hi);
        edges.windows(2).map(|w| integrate(|s| self.pdf(s), w[0], w[1], QUAD_TOL)).sum()
    }

    /// `n` rows of `(s, pdf, cdf)` evenly spaced over the support.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64, f64)> {
        linspace(self.support.lo, self.support.hi, n)
            .into_iter()
            .map(|s| (s, self.pdf(s), self.cdf(s)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangle() -> ScoreDensity {
        let support = Interval::new(0.0, 2.0).unwrap();
        ScoreDensity::from_unnormalized(DensityKind::QuadratureBacked, support, vec![1.0], |s| {
            if s < 1.0 {
                s
            } else {
                2.0 - s
            }
        })
        .unwrap()
        .0
    }

    #[test]
    fn rejects_degenerate_interval() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn quadrature_backed_cdf_matches_closed_form() {
        let d = triangle();
        assert_abs_diff_eq!(d.cdf(0.5), 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(d.cdf(1.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.cdf(1.5), 0.875, epsilon = 1e-12);
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-10);
        assert_eq!(d.pdf(-0.1), 0.0);
        assert_eq!(d.pdf(2.5), 0.0);
    }

    #[test]
    fn zero_mass_is_rejected() {
        let support = Interval::new(0.0, 1.0).unwrap();
        assert!(ScoreDensity::from_unnormalized(DensityKind::QuadratureBacked, support, vec![], |_| 0.0).is_err());
    }

    #[test]
    fn truncation_renormalizes() {
        let d = triangle();
        let (lower, mass) = d.truncated(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(mass, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lower.pdf(0.5), 1.0, epsilon = 1e-12);
        assert_eq!(lower.pdf(1.0), 0.0);
        assert_abs_diff_eq!(lower.cdf(0.5), 0.25, epsilon = 1e-12);
        let (upper, _) = d.truncated(1.0, 2.0).unwrap();
        assert!(upper.pdf(2.0) == 0.0 && upper.pdf(1.0) > 0.0);
    }

    #[test]
    fn mixture_weights_normalize() {
        let d = triangle();
        let (lower, _) = d.truncated(0.0, 1.0).unwrap();
        let (upper, _) = d.truncated(1.0, 2.0).unwrap();
        let m = ScoreDensity::mixture(DensityKind::PiecewiseMixture, vec![(1.0, lower), (1.0, upper)]).unwrap();
        for s in [0.1, 0.7, 1.3, 1.9] {
            assert_abs_diff_eq!(m.pdf(s), d.pdf(s), epsilon = 1e-12);
            assert_abs_diff_eq!(m.cdf(s), d.cdf(s), epsilon = 1e-12);
        }
        assert!(ScoreDensity::mixture(DensityKind::PiecewiseMixture, vec![]).is_err());
    }
}

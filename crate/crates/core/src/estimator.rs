//! Data-driven estimation: Gaussian KDE conditionals, crossover finding,
//! empirical repair and multiclass score unfolding.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, Func, Interval, ScoreDensity};
use crate::error::{invalid, Error, Result};
use crate::mitigation::{repair_posterior, MitigationArtifact};
use crate::numerics::{bisect_predicate, brent, linspace, normal_cdf, quantile_sorted, ROOT_TOL};

/// Above this many centers the KDE is evaluated from binned weights.
pub const NAIVE_LIMIT: usize = 5000;
pub const KDE_BINS: usize = 4096;
/// Kernel evaluations stop this many bandwidths from the query point in
/// binned mode; the neglected Gaussian mass is below 1e-15.
pub const KDE_WINDOW: f64 = 8.0;
/// Grid used to bracket density crossings.
pub const CROSSOVER_GRID: usize = 20_001;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian kernel density estimate with uniform weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeEstimate {
    pub centers: Vec<f64>,
    pub bandwidth: f64,
    pub kernel: String,
}

impl KdeEstimate {
    pub fn new(samples: &[f64], bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if samples.is_empty() {
            return Err(invalid("KDE needs at least one center"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid("KDE centers must be finite"));
        }
        let mut centers = samples.to_vec();
        centers.sort_by(f64::total_cmp);
        Ok(Self { centers, bandwidth, kernel: "standard-normal".into() })
    }

    /// Default support: the data range padded by ten bandwidths.
    pub fn default_support(&self) -> Interval {
        let pad = 10.0 * self.bandwidth;
        Interval { lo: self.centers[0] - pad, hi: self.centers[self.centers.len() - 1] + pad }
    }

    pub fn density(&self) -> ScoreDensity {
        self.density_on(self.default_support())
    }

    /// The estimate as a density on `support`.
    pub fn density_on(&self, support: Interval) -> ScoreDensity {
        let model: Arc<dyn KernelSum> = if self.centers.len() <= NAIVE_LIMIT {
            Arc::new(Naive { centers: self.centers.clone(), b: self.bandwidth })
        } else {
            Arc::new(Binned::new(&self.centers, self.bandwidth))
        };
        let (m1, m2, m3) = (model.clone(), model.clone(), model);
        let pdf: Func = Arc::new(move |s| m1.pdf(s));
        let cdf: Func = Arc::new(move |s| m2.cdf(s));
        let ln_pdf: Func = Arc::new(move |s| m3.ln_pdf(s));
        ScoreDensity::from_parts(DensityKind::KdeMixture, support, Vec::new(), pdf, cdf, Some(ln_pdf))
    }
}

trait KernelSum: Send + Sync {
    fn pdf(&self, s: f64) -> f64;
    fn cdf(&self, s: f64) -> f64;
    fn ln_pdf(&self, s: f64) -> f64;
}

struct Naive {
    centers: Vec<f64>,
    b: f64,
}

impl KernelSum for Naive {
    fn pdf(&self, s: f64) -> f64 {
        let sum: f64 = self.centers.iter().map(|c| (-0.5 * ((s - c) / self.b).powi(2)).exp()).sum();
        sum * INV_SQRT_2PI / (self.b * self.centers.len() as f64)
    }

    fn cdf(&self, s: f64) -> f64 {
        let sum: f64 = self.centers.iter().map(|c| normal_cdf((s - c) / self.b)).sum();
        sum / self.centers.len() as f64
    }

    fn ln_pdf(&self, s: f64) -> f64 {
        let w = 1.0 / self.centers.len() as f64;
        ln_kernel_sum(self.centers.iter().map(|c| (*c, w)), s, self.b)
    }
}

/// Linear binning onto a regular grid spanning the data.
struct Binned {
    lo: f64,
    step: f64,
    weights: Vec<f64>,
    /// `prefix[j]` is the total weight of bins `< j`.
    prefix: Vec<f64>,
    b: f64,
}

impl Binned {
    fn new(centers: &[f64], b: f64) -> Self {
        let (lo, hi) = (centers[0], centers[centers.len() - 1]);
        let step = if hi > lo { (hi - lo) / (KDE_BINS - 1) as f64 } else { 1.0 };
        let mut weights = vec![0.0; KDE_BINS];
        let w = 1.0 / centers.len() as f64;
        for &c in centers {
            let x = (c - lo) / step;
            let j = (x.floor() as usize).min(KDE_BINS - 2);
            let frac = x - j as f64;
            weights[j] += w * (1.0 - frac);
            weights[j + 1] += w * frac;
        }
        let mut prefix = Vec::with_capacity(KDE_BINS + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for w in &weights {
            acc += w;
            prefix.push(acc);
        }
        Self { lo, step, weights, prefix, b }
    }

    fn node(&self, j: usize) -> f64 {
        self.lo + self.step * j as f64
    }

    /// Bin index range within the kernel window around `s`.
    fn window(&self, s: f64) -> (usize, usize) {
        let reach = KDE_WINDOW * self.b;
        let a = ((s - reach - self.lo) / self.step).ceil().max(0.0);
        let z = ((s + reach - self.lo) / self.step).floor().min((KDE_BINS - 1) as f64);
        if z < a {
            // Window misses the grid entirely.
            return if s < self.lo { (0, 0) } else { (KDE_BINS, KDE_BINS) };
        }
        (a as usize, z as usize + 1)
    }
}

impl KernelSum for Binned {
    fn pdf(&self, s: f64) -> f64 {
        let (a, z) = self.window(s);
        let sum: f64 = (a..z).map(|j| self.weights[j] * (-0.5 * ((s - self.node(j)) / self.b).powi(2)).exp()).sum();
        sum * INV_SQRT_2PI / self.b
    }

    fn cdf(&self, s: f64) -> f64 {
        let (a, z) = self.window(s);
        // Bins left of the window count fully; bins right of it not at all.
        let inside: f64 = (a..z).map(|j| self.weights[j] * normal_cdf((s - self.node(j)) / self.b)).sum();
        (self.prefix[a] + inside).clamp(0.0, 1.0)
    }

    fn ln_pdf(&self, s: f64) -> f64 {
        ln_kernel_sum(
            self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(j, w)| (self.node(j), *w)),
            s,
            self.b,
        )
    }
}

/// `ln Σ w·φ((s − c)/b)/b` without underflow.
fn ln_kernel_sum(terms: impl Iterator<Item = (f64, f64)>, s: f64, b: f64) -> f64 {
    let logs: Vec<f64> = terms.map(|(c, w)| w.ln() - 0.5 * ((s - c) / b).powi(2)).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    m + sum.ln() - b.ln() - 0.5 * (2.0 * PI).ln()
}

/// Silverman's rule of thumb, `0.9·min(sd, IQR/1.34)·n^(−1/5)`.
///
/// The IQR uses linearly interpolated quantiles. When the IQR is zero but
/// the standard deviation is not, the standard deviation alone is used.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(invalid(format!("bandwidth needs at least two samples, got {n}")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::ZeroSpread);
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// KDE of `samples` with bandwidth `bandwidth` on its default support.
pub fn kde_density(samples: &[f64], bandwidth: f64) -> Result<ScoreDensity> {
    Ok(KdeEstimate::new(samples, bandwidth)?.density())
}

/// Score where `d`'s CDF reaches `q`.
fn density_quantile(d: &ScoreDensity, q: f64) -> f64 {
    let sup = d.support();
    bisect_predicate(|s| d.cdf(s) >= q, sup.lo, sup.hi, 1e-9)
}

/// Union of both densities' 0.1%–99.9% quantile ranges.
pub fn default_search(d0: &ScoreDensity, d1: &ScoreDensity) -> Interval {
    let lo = density_quantile(d0, 0.001).min(density_quantile(d1, 0.001));
    let hi = density_quantile(d0, 0.999).max(density_quantile(d1, 0.999));
    Interval { lo, hi }
}

/// Sorted sign changes of `p₀ − p₁` inside `search`, located by Brent's
/// method between bracketing grid points. A jump that swaps dominance is
/// reported at the jump.
pub fn find_crossovers(d0: &ScoreDensity, d1: &ScoreDensity, search: Interval) -> Vec<f64> {
    let diff = |s: f64| d0.pdf(s) - d1.pdf(s);
    let grid = linspace(search.lo, search.hi, CROSSOVER_GRID);
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for s in grid {
        let v = diff(s);
        if v == 0.0 {
            // Exact zero on the grid: keep it if the sign actually flips
            // across it; that is decided when the next nonzero arrives.
            continue;
        }
        if let Some((s_prev, v_prev)) = last {
            if v_prev.signum() != v.signum() {
                let root = brent(diff, s_prev, s, ROOT_TOL)
                    .unwrap_or_else(|_| bisect_predicate(|x| diff(x).signum() == v.signum(), s_prev, s, ROOT_TOL));
                out.push(root);
            }
        }
        last = Some((s, v));
    }
    out
}

/// Repaired decision rule estimated from labeled scores: Silverman KDEs
/// per class on a shared support, then the Bayes posterior at `prior_mal`.
pub fn empirical_repair(
    scores0: &[f64],
    scores1: &[f64],
    prior_mal: f64,
    reference_threshold: f64,
) -> Result<MitigationArtifact> {
    if scores0.is_empty() || scores1.is_empty() {
        return Err(Error::InsufficientLabels("both classes need scores".into()));
    }
    let k0 = KdeEstimate::new(scores0, silverman_bandwidth(scores0)?)?;
    let k1 = KdeEstimate::new(scores1, silverman_bandwidth(scores1)?)?;
    let mut support = k0.default_support().union(&k1.default_support());
    support.lo = support.lo.min(reference_threshold);
    support.hi = support.hi.max(reference_threshold);
    repair_posterior(&k0.density_on(support), &k1.density_on(support), prior_mal, reference_threshold)
}

/// Per-class preactivations of a multiclass model, one row per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticlassScores {
    rows: Vec<Vec<f64>>,
    target_class: usize,
}

impl MulticlassScores {
    pub fn new(rows: Vec<Vec<f64>>, target_class: usize) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(invalid("all rows need the same number of classes"));
        }
        if !rows.is_empty() && k < 2 {
            return Err(invalid("need at least two classes"));
        }
        if !rows.is_empty() && target_class >= k {
            return Err(invalid(format!("target class {target_class} out of range for {k} classes")));
        }
        Ok(Self { rows, target_class })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }
}

/// Binary score per row: half the margin of the target preactivation over
/// the strongest competitor.
pub fn unfold_scores(m: &MulticlassScores) -> Vec<f64> {
    let t = m.target_class;
    m.rows
        .iter()
        .map(|r| {
            let rival = r.iter().enumerate().filter(|(j, _)| *j != t).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            0.5 * (r[t] - rival)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_center_is_standard_normal() {
        let d = kde_density(&[0.0], 1.0).unwrap();
        assert_abs_diff_eq!(d.pdf(0.0), INV_SQRT_2PI, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf(0.0), 0.5, epsilon = 1e-15);
        assert_eq!(d.kind(), DensityKind::KdeMixture);
    }

    #[test]
    fn bandwidth_errors() {
        assert!(matches!(silverman_bandwidth(&[2.0, 2.0]), Err(Error::ZeroSpread)));
        assert!(silverman_bandwidth(&[1.0]).is_err());
        assert!(kde_density(&[0.0], 0.0).is_err());
        assert!(kde_density(&[], 1.0).is_err());
    }

    #[test]
    fn zero_iqr_falls_back_to_sd() {
        let xs = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0];
        let mean: f64 = 10.0 / 8.0;
        let sd = ((7.0 * mean * mean + (10.0 - mean).powi(2)) / 7.0f64).sqrt();
        assert_abs_diff_eq!(silverman_bandwidth(&xs).unwrap(), 0.9 * sd * 8f64.powf(-0.2), epsilon = 1e-12);
    }

    #[test]
    fn ln_pdf_survives_underflow() {
        let d = KdeEstimate::new(&[0.0], 0.1).unwrap().density_on(Interval { lo: -100.0, hi: 100.0 });
        assert_eq!(d.pdf(50.0), 0.0);
        let expected = -0.5 * (500.0f64).powi(2) - (0.1f64).ln() - 0.5 * (2.0 * PI).ln();
        assert_abs_diff_eq!(d.ln_pdf(50.0), expected, epsilon = 1e-6);
    }

    #[test]
    fn binned_tracks_naive() {
        let xs: Vec<f64> = (0..6000).map(|i| ((i * 7919) % 6000) as f64 / 600.0 - 5.0).collect();
        let b = 0.3;
        let binned = kde_density(&xs, b).unwrap();
        let naive = Naive { centers: xs.clone(), b };
        for s in [-4.0, -1.3, 0.0, 2.2, 4.9] {
            assert_abs_diff_eq!(binned.pdf(s), naive.pdf(s), epsilon = 1e-6);
            assert_abs_diff_eq!(binned.cdf(s), naive.cdf(s), epsilon = 1e-6);
        }
    }

    #[test]
    fn unfold_examples() {
        let m = MulticlassScores::new(vec![vec![1.0, 5.0, 3.0], vec![2.0, 2.0, 2.0]], 1).unwrap();
        assert_eq!(unfold_scores(&m), vec![1.0, 0.0]);
        let two = MulticlassScores::new(vec![vec![0.5, 2.5]], 1).unwrap();
        assert_eq!(unfold_scores(&two), vec![1.0]);
        assert!(MulticlassScores::new(vec![vec![1.0]], 0).is_err());
        assert!(MulticlassScores::new(vec![vec![1.0, 2.0]], 2).is_err());
        assert!(MulticlassScores::new(vec![vec![1.0, 2.0], vec![1.0]], 0).is_err());
    }

    #[test]
    fn empirical_repair_needs_both_classes() {
        assert!(matches!(empirical_repair(&[], &[1.0, 2.0], 0.5, 0.0), Err(Error::InsufficientLabels(_))));
    }
}

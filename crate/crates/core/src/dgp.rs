//! The reference data-generating process: uniform scores on a bounded
//! domain, labels from the sign of the score plus logistic noise.

use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, Interval, ScoreDensity};
use crate::error::{invalid, Result};
use crate::numerics::softplus;
use crate::posterior::PosteriorCurve;
use crate::rng::{open01, seeded};

/// Location/scale of the logistic label noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mu: f64,
    pub c: f64,
}

impl NoiseSpec {
    pub fn new(mu: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && mu.is_finite()) {
            return Err(invalid(format!("noise scale must be positive, got {c}")));
        }
        Ok(Self { mu, c })
    }

    pub fn cdf(&self, s: f64) -> f64 {
        logistic_cdf(s, self)
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        self.mu + self.c * (u / (1.0 - u)).ln()
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { mu: 0.0, c: 1.0 }
    }
}

/// Logistic CDF `σ((s − μ)/c)`.
pub fn logistic_cdf(s: f64, spec: &NoiseSpec) -> f64 {
    let z = (s - spec.mu) / spec.c;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDgp {
    pub noise: NoiseSpec,
    pub domain_lo: f64,
    pub domain_hi: f64,
    pub prior_mal: f64,
}

impl Default for ReferenceDgp {
    fn default() -> Self {
        Self { noise: NoiseSpec::default(), domain_lo: -10.0, domain_hi: 10.0, prior_mal: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clarity {
    #[serde(rename = "e")]
    Clear,
    #[serde(rename = "d")]
    Turbid,
}

/// Scores with 0/1 labels and, optionally, clarity relative to a pegged
/// threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledScoreSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub clarity: Option<Vec<Clarity>>,
    pub rng_seed: u64,
}

impl LabeledScoreSet {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn count(&self, which: Clarity) -> usize {
        self.clarity.as_ref().map_or(0, |c| c.iter().filter(|x| **x == which).count())
    }

    /// Scores whose label equals `label`.
    pub fn class_scores(&self, label: u8) -> Vec<f64> {
        self.scores.iter().zip(&self.labels).filter(|(_, l)| **l == label).map(|(s, _)| *s).collect()
    }
}

/// Clear and turbid conditionals with their natural masses `P(e)`, `P(d)`.
#[derive(Clone, Debug)]
pub struct TurbidityPair {
    pub clear: ScoreDensity,
    pub turbid: ScoreDensity,
    pub clear_mass: f64,
    pub turbid_mass: f64,
    pub threshold: f64,
}

impl ReferenceDgp {
    pub fn new(noise: NoiseSpec, domain_lo: f64, domain_hi: f64, prior_mal: f64) -> Result<Self> {
        Interval::new(domain_lo, domain_hi)?;
        if !(prior_mal > 0.0 && prior_mal < 1.0) {
            return Err(invalid(format!("prior_mal must lie in (0, 1), got {prior_mal}")));
        }
        Ok(Self { noise, domain_lo, domain_hi, prior_mal })
    }

    pub fn support(&self) -> Interval {
        Interval { lo: self.domain_lo, hi: self.domain_hi }
    }

    /// `P(y = 1 | s)` under label noise, i.e. `P(s + ξ ≥ 0)`.
    pub fn label_probability(&self, s: f64) -> f64 {
        1.0 - self.noise.cdf(-s)
    }

    /// Fraction of class-1 labels the process emits, in closed form.
    pub fn natural_prior(&self) -> f64 {
        let NoiseSpec { mu, c } = self.noise;
        let w = self.domain_hi - self.domain_lo;
        c * (softplus((self.domain_hi + mu) / c) - softplus((self.domain_lo + mu) / c)) / w
    }

    /// Score where the regular posterior equals 0.5 (the Bayes threshold).
    pub fn bayes_threshold(&self) -> f64 {
        let z1 = self.natural_prior();
        let NoiseSpec { mu, c } = self.noise;
        if (self.prior_mal - z1).abs() < 1e-12 {
            return -mu;
        }
        let logit = ((1.0 - self.prior_mal) * z1 / (self.prior_mal * (1.0 - z1))).ln();
        (c * logit - mu).clamp(self.domain_lo, self.domain_hi)
    }

    /// Class-conditional score density `p(s | class)`.
    pub fn regular_conditional(&self, class: u8) -> ScoreDensity {
        let dgp = *self;
        let w = self.domain_hi - self.domain_lo;
        let f = move |s: f64| {
            let q = dgp.label_probability(s);
            (if class == 1 { q } else { 1.0 - q }) / w
        };
        ScoreDensity::from_unnormalized(DensityKind::QuadratureBacked, self.support(), Vec::new(), f)
            .expect("logistic conditionals have positive mass")
            .0
    }

    /// Regular class-1 posterior. Equals the noise-implied label
    /// probability when `prior_mal` matches the natural prior.
    pub fn regular_posterior(&self) -> PosteriorCurve {
        let dgp = *self;
        let z1 = self.natural_prior();
        let pi = self.prior_mal;
        let natural = (pi - z1).abs() < 1e-12;
        let eval = move |s: f64| {
            let q = dgp.label_probability(s);
            if natural {
                return q;
            }
            let a = q * pi / z1;
            let b = (1.0 - q) * (1.0 - pi) / (1.0 - z1);
            a / (a + b)
        };
        PosteriorCurve::monotone(self.support(), eval)
    }

    /// Clear (correctly classified) and turbid (misclassified) score
    /// densities relative to the decision rule `s ≥ threshold`.
    pub fn turbidity_conditionals(&self, threshold: f64) -> Result<TurbidityPair> {
        if !self.support().contains(threshold) {
            return Err(invalid(format!("reference threshold {threshold} outside the score domain")));
        }
        let p0 = self.regular_conditional(0);
        let p1 = self.regular_conditional(1);
        let (pi1, pi0) = (self.prior_mal, 1.0 - self.prior_mal);
        let (lo, hi) = (self.domain_lo, self.domain_hi);
        let f0 = p0.cdf(threshold);
        let f1 = p1.cdf(threshold);

        let pieces = |parts: [(f64, &ScoreDensity, f64, f64); 2]| -> Result<(ScoreDensity, f64)> {
            let mut comps = Vec::new();
            let mut mass = 0.0;
            for (w, d, a, b) in parts {
                if w > 0.0 && a < b {
                    comps.push((w, d.truncated(a, b)?.0));
                    mass += w;
                }
            }
            Ok((ScoreDensity::mixture(DensityKind::PiecewiseMixture, comps)?, mass))
        };
        let (clear, clear_mass) =
            pieces([(pi0 * f0, &p0, lo, threshold), (pi1 * (1.0 - f1), &p1, threshold, hi)])?;
        let (turbid, turbid_mass) =
            pieces([(pi0 * (1.0 - f0), &p0, threshold, hi), (pi1 * f1, &p1, lo, threshold)])?;
        Ok(TurbidityPair { clear, turbid, clear_mass, turbid_mass, threshold })
    }

    /// Turbidity posterior `P(d | s)` with turbid prior `prior_d`, pegged at
    /// the Bayes threshold.
    pub fn turbidity_posterior(&self, prior_d: f64) -> Result<PosteriorCurve> {
        self.turbidity_posterior_at(self.bayes_threshold(), prior_d)
    }

    pub fn turbidity_posterior_at(&self, threshold: f64, prior_d: f64) -> Result<PosteriorCurve> {
        if !(prior_d > 0.0 && prior_d < 1.0) {
            return Err(invalid(format!("prior_d must lie in (0, 1), got {prior_d}")));
        }
        let pair = self.turbidity_conditionals(threshold)?;
        let (e, d) = (pair.clear, pair.turbid);
        let eval = move |s: f64| {
            let wd = d.pdf(s) * prior_d;
            let we = e.pdf(s) * (1.0 - prior_d);
            if wd + we > 0.0 {
                wd / (wd + we)
            } else {
                prior_d
            }
        };
        let interior: Vec<f64> =
            if threshold > self.domain_lo && threshold < self.domain_hi { vec![threshold] } else { Vec::new() };
        PosteriorCurve::with_preimages(self.support(), eval, &interior)
    }

    /// Draws `n` scores and labels; clarity is assigned against the Bayes
    /// threshold. Scores are uniform on the domain and labels follow
    /// `sign(s + ξ)` with logistic `ξ`.
    pub fn sample(&self, n: usize, seed: u64) -> LabeledScoreSet {
        let mut rng = seeded(seed, 0);
        let threshold = self.bayes_threshold();
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut clarity = Vec::with_capacity(n);
        for _ in 0..n {
            let (s, y) = self.draw(&mut rng);
            scores.push(s);
            labels.push(y);
            clarity.push(clarity_of(s, y, threshold));
        }
        LabeledScoreSet { scores, labels, clarity: Some(clarity), rng_seed: seed }
    }

    pub(crate) fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (f64, u8) {
        let s = self.domain_lo + (self.domain_hi - self.domain_lo) * rng.gen::<f64>();
        let xi = self.noise.quantile(open01(rng));
        (s, u8::from(s + xi >= 0.0))
    }
}

/// Clear iff the prediction `s ≥ threshold` agrees with the label.
pub fn clarity_of(s: f64, label: u8, threshold: f64) -> Clarity {
    if u8::from(s >= threshold) == label {
        Clarity::Clear
    } else {
        Clarity::Turbid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn logistic_cdf_examples() {
        let std = NoiseSpec::default();
        assert_eq!(logistic_cdf(0.0, &std), 0.5);
        assert_eq!(logistic_cdf(f64::INFINITY, &std), 1.0);
        assert_abs_diff_eq!(logistic_cdf(9f64.ln(), &std), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(logistic_cdf(2.197, &std), 0.900, epsilon = 5e-5);
        assert!(logistic_cdf(-800.0, &std) >= 0.0);
    }

    #[test]
    fn noise_scale_must_be_positive() {
        assert!(NoiseSpec::new(0.0, 0.0).is_err());
        assert!(NoiseSpec::new(0.0, -1.0).is_err());
        assert!(ReferenceDgp::new(NoiseSpec::default(), 1.0, 1.0, 0.5).is_err());
        assert!(ReferenceDgp::new(NoiseSpec::default(), -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn conditional_vanishes_outside_domain() {
        let dgp = ReferenceDgp::default();
        assert_eq!(dgp.regular_conditional(0).pdf(11.0), 0.0);
        assert_eq!(dgp.regular_conditional(1).pdf(-10.5), 0.0);
    }

    #[test]
    fn natural_prior_default_is_half() {
        let dgp = ReferenceDgp::default();
        assert_abs_diff_eq!(dgp.natural_prior(), 0.5, epsilon = 1e-14);
        assert_eq!(dgp.bayes_threshold(), 0.0);
    }

    #[test]
    fn shifted_prior_moves_bayes_threshold() {
        let dgp = ReferenceDgp { prior_mal: 0.8, ..Default::default() };
        let t = dgp.bayes_threshold();
        assert!(t < 0.0);
        assert_abs_diff_eq!(dgp.regular_posterior().eval(t), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn turbidity_requires_threshold_in_domain() {
        assert!(ReferenceDgp::default().turbidity_conditionals(12.0).is_err());
        assert!(ReferenceDgp::default().turbidity_posterior(1.0).is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let dgp = ReferenceDgp::default();
        assert!(dgp.sample(0, 1).is_empty());
        for seed in 0..50 {
            let one = dgp.sample(1, seed);
            assert!(one.scores[0] >= -10.0 && one.scores[0] <= 10.0);
        }
        assert_eq!(dgp.sample(100, 3), dgp.sample(100, 3));
    }
}

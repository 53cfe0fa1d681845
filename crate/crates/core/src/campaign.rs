//! Toxic environments: campaign scenarios, their class conditionals, the
//! inverted augmented detector and the covariate-shift construction.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, ScoreDensity};
use crate::dgp::{clarity_of, Clarity, LabeledScoreSet, ReferenceDgp};
use crate::error::{invalid, Result};
use crate::posterior::PosteriorCurve;
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignKind {
    Regular,
    SymmetricToxic,
    AsymmetricToxic,
    CovariateShift,
    HighConfidence,
}

/// A campaign environment: class prior plus, per class, the fraction of
/// samples that are clear (correctly classified by the reference rule).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignScenario {
    pub clear_frac_class0: f64,
    pub clear_frac_class1: f64,
    pub prior_mal: f64,
    pub kind: CampaignKind,
}

impl CampaignScenario {
    pub fn new(kind: CampaignKind, clear_frac_class0: f64, clear_frac_class1: f64, prior_mal: f64) -> Result<Self> {
        let s = Self { clear_frac_class0, clear_frac_class1, prior_mal, kind };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("clear_frac_class0", self.clear_frac_class0), ("clear_frac_class1", self.clear_frac_class1)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        if !(self.prior_mal > 0.0 && self.prior_mal < 1.0) {
            return Err(invalid(format!("prior_mal must lie in (0, 1), got {}", self.prior_mal)));
        }
        Ok(())
    }

    /// The regular environment: each class keeps its natural clear fraction.
    pub fn regular(dgp: &ReferenceDgp) -> Self {
        let (f0, f1) = natural_clear_fractions(dgp);
        Self { clear_frac_class0: f0, clear_frac_class1: f1, prior_mal: dgp.prior_mal, kind: CampaignKind::Regular }
    }

    /// Half of each class is turbid, balanced classes.
    pub fn symmetric() -> Self {
        Self { clear_frac_class0: 0.5, clear_frac_class1: 0.5, prior_mal: 0.5, kind: CampaignKind::SymmetricToxic }
    }

    /// Class 0 left natural, class 1 pushed to a 37.5% : 62.5% clear:turbid
    /// split.
    pub fn asymmetric(dgp: &ReferenceDgp) -> Self {
        let (f0, _) = natural_clear_fractions(dgp);
        Self { clear_frac_class0: f0, clear_frac_class1: 0.375, prior_mal: 0.5, kind: CampaignKind::AsymmetricToxic }
    }

    /// Stable identifier derived from the parameters.
    pub fn id(&self) -> String {
        let kind = serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        format!("{kind}:{:.4}:{:.4}:{:.4}", self.clear_frac_class0, self.clear_frac_class1, self.prior_mal)
    }
}

/// Natural per-class clear fractions `(F₀(θ), 1 − F₁(θ))` at the Bayes
/// threshold `θ`.
pub fn natural_clear_fractions(dgp: &ReferenceDgp) -> (f64, f64) {
    let t = dgp.bayes_threshold();
    (dgp.regular_conditional(0).cdf(t), 1.0 - dgp.regular_conditional(1).cdf(t))
}

/// Class-conditional score densities inside a toxic environment.
///
/// Each class is a mixture of its own clear tail and its own turbid tail
/// (split at the Bayes threshold), each renormalized, weighted by the
/// scenario's clear fraction. With both fractions at ½ this is the
/// symmetric campaign `p(x|0) = p_e[x<θ] + p_d[x≥θ]`,
/// `p(x|1) = p_e[x≥θ] + p_d[x<θ]`; with natural fractions it gives back the
/// regular conditionals.
pub fn toxic_conditionals(dgp: &ReferenceDgp, scenario: &CampaignScenario) -> Result<(ScoreDensity, ScoreDensity)> {
    scenario.validate()?;
    if matches!(scenario.kind, CampaignKind::CovariateShift | CampaignKind::HighConfidence) {
        return Err(invalid(format!("{:?} scenarios are not clear/turbid mixtures", scenario.kind)));
    }
    let t = dgp.bayes_threshold();
    let (lo, hi) = (dgp.domain_lo, dgp.domain_hi);
    let build = |class: u8, clear_frac: f64| -> Result<ScoreDensity> {
        let p = dgp.regular_conditional(class);
        let (clear_part, turbid_part) = if class == 0 { ((lo, t), (t, hi)) } else { ((t, hi), (lo, t)) };
        let mut comps = Vec::new();
        for (w, (a, b)) in [(clear_frac, clear_part), (1.0 - clear_frac, turbid_part)] {
            if w > 0.0 && a < b {
                comps.push((w, p.truncated(a, b)?.0));
            }
        }
        ScoreDensity::mixture(DensityKind::PiecewiseMixture, comps)
    };
    Ok((build(0, scenario.clear_frac_class0)?, build(1, scenario.clear_frac_class1)?))
}

/// The positive-side crossing of `P(d | s) = 0.5` with balanced clear and
/// turbid priors: the half-width of the augmented detector's reversal zone.
pub fn default_cutoff(dgp: &ReferenceDgp) -> Result<f64> {
    let t = dgp.bayes_threshold();
    dgp.turbidity_posterior(0.5)?
        .crossings(0.5)
        .into_iter()
        .rfind(|x| *x > t)
        .ok_or_else(|| invalid("turbidity posterior never reaches 0.5 above the threshold"))
}

/// Posterior of a detector augmented with a turbidity flag that inverts
/// its decision whenever `|x| ≤ cutoff`:
/// `F(x)` outside the zone, `F(−x)` inside it.
pub fn augmented_posterior(dgp: &ReferenceDgp, cutoff: f64) -> Result<PosteriorCurve> {
    if !(cutoff > 0.0) {
        return Err(invalid(format!("cutoff must be positive, got {cutoff}")));
    }
    let d = *dgp;
    let eval = move |x: f64| if x.abs() > cutoff { d.label_probability(x) } else { d.label_probability(-x) };
    let interior: Vec<f64> = [-cutoff, cutoff].into_iter().filter(|x| *x > dgp.domain_lo && *x < dgp.domain_hi).collect();
    PosteriorCurve::with_preimages(dgp.support(), eval, &interior)
}

/// Toxic conditionals that leave the posterior untouched: the symmetric
/// toxic marginal `m = ½p_e + ½p_d` split by the label probability,
/// `p(x|0) ∝ (1 − F(x))·m(x)` and `p(x|1) ∝ F(x)·m(x)`.
///
/// At class prior `∫F·m` (½ for the reference process) the Bayes posterior
/// of the pair is exactly `F`.
pub fn covariate_shift_env(dgp: &ReferenceDgp) -> Result<(ScoreDensity, ScoreDensity)> {
    let (t0, t1) = toxic_conditionals(dgp, &CampaignScenario::symmetric())?;
    let marginal = ScoreDensity::mixture(DensityKind::PiecewiseMixture, vec![(0.5, t0), (0.5, t1)])?;
    let t = dgp.bayes_threshold();
    let d = *dgp;
    let m0 = marginal.clone();
    let (p0, _) = ScoreDensity::from_unnormalized(DensityKind::QuadratureBacked, dgp.support(), vec![t], move |x| {
        (1.0 - d.label_probability(x)) * m0.pdf(x)
    })?;
    let (p1, _) = ScoreDensity::from_unnormalized(DensityKind::QuadratureBacked, dgp.support(), vec![t], move |x| {
        d.label_probability(x) * marginal.pdf(x)
    })?;
    Ok((p0, p1))
}

/// Samples a toxic environment by filtering regular draws into per-class,
/// per-clarity quotas, then shuffling.
///
/// Quotas are `round(n·π₁)` class-1 samples, of which
/// `round(n₁·clear_frac_class1)` are clear, and likewise for class 0.
pub fn sample_scenario(dgp: &ReferenceDgp, scenario: &CampaignScenario, n: usize, seed: u64) -> Result<LabeledScoreSet> {
    scenario.validate()?;
    let n1 = (n as f64 * scenario.prior_mal).round() as usize;
    let n0 = n - n1;
    let e0 = (n0 as f64 * scenario.clear_frac_class0).round() as usize;
    let e1 = (n1 as f64 * scenario.clear_frac_class1).round() as usize;
    // quota[label][clarity]
    let mut quota = [[e0, n0 - e0], [e1, n1 - e1]];
    let t = dgp.bayes_threshold();
    let mut rng = seeded(seed, 1);
    let mut rows: Vec<(f64, u8, Clarity)> = Vec::with_capacity(n);
    while rows.len() < n {
        let (s, y) = dgp.draw(&mut rng);
        let c = clarity_of(s, y, t);
        let slot = &mut quota[y as usize][usize::from(c == Clarity::Turbid)];
        if *slot > 0 {
            *slot -= 1;
            rows.push((s, y, c));
        }
    }
    rows.shuffle(&mut rng);
    Ok(LabeledScoreSet {
        scores: rows.iter().map(|r| r.0).collect(),
        labels: rows.iter().map(|r| r.1).collect(),
        clarity: Some(rows.iter().map(|r| r.2).collect()),
        rng_seed: seed,
    })
}

/// A high-confidence campaign on top of regular traffic: `n_adversarial`
/// class-1 evasions spread over the bottom quarter of the domain
/// (`[−10, −5]` for the reference process) and as many class-0 false alarms
/// over `[5, 7]`, leaving the centre untouched. Class posteriors estimated
/// from such data cross ½ four times.
pub fn tail_dominant_campaign(dgp: &ReferenceDgp, n_regular: usize, n_adversarial: usize, seed: u64) -> LabeledScoreSet {
    let mut rng = seeded(seed, 2);
    let t = dgp.bayes_threshold();
    let (lo, w) = (dgp.domain_lo, dgp.domain_hi - dgp.domain_lo);
    let mut rows: Vec<(f64, u8)> = (0..n_regular).map(|_| dgp.draw(&mut rng)).collect();
    for _ in 0..n_adversarial {
        rows.push((lo + w * 0.25 * rng.gen::<f64>(), 1));
        rows.push((lo + w * (0.75 + 0.1 * rng.gen::<f64>()), 0));
    }
    rows.shuffle(&mut rng);
    LabeledScoreSet {
        scores: rows.iter().map(|r| r.0).collect(),
        labels: rows.iter().map(|r| r.1).collect(),
        clarity: Some(rows.iter().map(|r| clarity_of(r.0, r.1, t)).collect()),
        rng_seed: seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scenario_validation() {
        assert!(CampaignScenario::new(CampaignKind::SymmetricToxic, 1.2, 0.5, 0.5).is_err());
        assert!(CampaignScenario::new(CampaignKind::SymmetricToxic, 0.5, 0.5, 1.0).is_err());
        assert!(CampaignScenario::new(CampaignKind::SymmetricToxic, 0.0, 1.0, 0.3).is_ok());
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = CampaignScenario::symmetric();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"kind\":\"symmetric-toxic\""));
        assert_eq!(serde_json::from_str::<CampaignScenario>(&json).unwrap(), s);
        assert_eq!(s.id(), "symmetric-toxic:0.5000:0.5000:0.5000");
    }

    #[test]
    fn covariate_kind_has_no_mixture() {
        let dgp = ReferenceDgp::default();
        let s = CampaignScenario { kind: CampaignKind::CovariateShift, ..CampaignScenario::symmetric() };
        assert!(toxic_conditionals(&dgp, &s).is_err());
    }

    #[test]
    fn symmetric_toxic_crosses_at_threshold() {
        let dgp = ReferenceDgp::default();
        let (t0, t1) = toxic_conditionals(&dgp, &CampaignScenario::symmetric()).unwrap();
        // Just below 0: class 0 is its clear tail at half weight,
        // class 1 its turbid tail at half weight.
        let eps = 1e-9;
        let f0 = dgp.regular_conditional(0).cdf(0.0);
        let p0 = dgp.regular_conditional(0).pdf(-eps);
        assert_abs_diff_eq!(t0.pdf(-eps), 0.5 * p0 / f0, epsilon = 1e-9);
        assert_abs_diff_eq!(t0.pdf(-eps), t1.pdf(eps), epsilon = 1e-7);
    }

    #[test]
    fn augmented_rejects_nonpositive_cutoff() {
        assert!(augmented_posterior(&ReferenceDgp::default(), 0.0).is_err());
    }

    #[test]
    fn sampling_meets_quotas() {
        let dgp = ReferenceDgp::default();
        let set = sample_scenario(&dgp, &CampaignScenario::symmetric(), 1000, 3).unwrap();
        assert_eq!(set.len(), 1000);
        assert_eq!(set.count(Clarity::Turbid), 500);
        assert_eq!(set.labels.iter().filter(|l| **l == 1).count(), 500);
        assert!(sample_scenario(&dgp, &CampaignScenario::symmetric(), 0, 3).unwrap().is_empty());
    }
}

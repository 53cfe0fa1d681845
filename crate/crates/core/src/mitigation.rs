//! Deployable mitigation artifacts: a repaired posterior turned into a
//! decision rule of threshold plus reversal intervals.

use serde::{Deserialize, Serialize};

use crate::density::{Interval, ScoreDensity};
use crate::dgp::ReferenceDgp;
use crate::error::{invalid, Error, Result};
use crate::numerics::linspace;
use crate::posterior::{PosteriorCurve, MERGE_TOL};

/// Points in the serialized posterior grid.
pub const DENSE_GRID: usize = 1001;

/// A repaired decision rule.
///
/// The decision for score `s` is `(s ≥ decision_threshold)` flipped inside
/// any reversal interval. When the repaired posterior's `{P ≥ ½}` region is
/// a single upper half-line the rule is a plain threshold with no
/// reversals; otherwise `decision_threshold` is the reference threshold and
/// the reversals cover where the repaired and reference rules disagree.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ArtifactWire", into = "ArtifactWire")]
pub struct MitigationArtifact {
    posterior: PosteriorCurve,
    reference_threshold: f64,
    decision_threshold: f64,
    reversal_intervals: Vec<Interval>,
    breakpoints: Vec<f64>,
    decisions: Vec<bool>,
    grid: Vec<[f64; 2]>,
    scenario_id: String,
    created_at: i64,
    zero_density: bool,
}

#[derive(Serialize, Deserialize)]
struct ArtifactWire {
    scenario_id: String,
    created_at: i64,
    reference_threshold: f64,
    decision_threshold: f64,
    reversal_intervals: Vec<Interval>,
    /// Support ends and 0.5-crossings; `decisions[i]` covers
    /// `[breakpoints[i], breakpoints[i + 1]]`.
    breakpoints: Vec<f64>,
    decisions: Vec<bool>,
    posterior_grid: Vec<[f64; 2]>,
    zero_density: bool,
}

impl From<MitigationArtifact> for ArtifactWire {
    fn from(a: MitigationArtifact) -> Self {
        Self {
            scenario_id: a.scenario_id,
            created_at: a.created_at,
            reference_threshold: a.reference_threshold,
            decision_threshold: a.decision_threshold,
            reversal_intervals: a.reversal_intervals,
            breakpoints: a.breakpoints,
            decisions: a.decisions,
            posterior_grid: a.grid,
            zero_density: a.zero_density,
        }
    }
}

impl TryFrom<ArtifactWire> for MitigationArtifact {
    type Error = Error;

    fn try_from(w: ArtifactWire) -> Result<Self> {
        if w.breakpoints.len() != w.decisions.len() + 1 {
            return Err(invalid("artifact needs exactly one decision flag per breakpoint interval"));
        }
        if w.reversal_intervals.iter().any(|iv| !(iv.lo <= iv.hi))
            || w.reversal_intervals.windows(2).any(|p| p[0].hi > p[1].lo)
        {
            return Err(invalid("reversal intervals must be ordered and disjoint"));
        }
        let posterior = PosteriorCurve::tabulated(w.posterior_grid.iter().map(|p| (p[0], p[1])).collect())?;
        Ok(Self {
            posterior,
            reference_threshold: w.reference_threshold,
            decision_threshold: w.decision_threshold,
            reversal_intervals: w.reversal_intervals,
            breakpoints: w.breakpoints,
            decisions: w.decisions,
            grid: w.posterior_grid,
            scenario_id: w.scenario_id,
            created_at: w.created_at,
            zero_density: w.zero_density,
        })
    }
}

impl MitigationArtifact {
    /// Derives the decision rule from `posterior` against the reference
    /// rule `s ≥ reference_threshold`.
    pub fn from_posterior(posterior: PosteriorCurve, reference_threshold: f64, zero_density: bool) -> Result<Self> {
        let support = posterior.support();
        if !support.contains(reference_threshold) {
            return Err(invalid(format!("reference threshold {reference_threshold} outside the posterior support")));
        }
        let crossings = posterior.crossings(0.5);
        let mut breakpoints = vec![support.lo];
        breakpoints.extend(crossings.iter().copied().filter(|c| *c > support.lo && *c < support.hi));
        breakpoints.push(support.hi);
        let decisions: Vec<bool> =
            breakpoints.windows(2).map(|w| posterior.eval(0.5 * (w[0] + w[1])) >= 0.5).collect();

        let accept = regions(&breakpoints, &decisions);
        let (decision_threshold, reversal_intervals) = match accept.as_slice() {
            [only] if only.hi == support.hi => {
                let t = if (only.lo - reference_threshold).abs() < MERGE_TOL { reference_threshold } else { only.lo };
                (t, Vec::new())
            }
            _ => (reference_threshold, disagreement(&accept, reference_threshold, support)),
        };
        let grid = linspace(support.lo, support.hi, DENSE_GRID).into_iter().map(|s| [s, posterior.eval(s)]).collect();
        Ok(Self {
            posterior,
            reference_threshold,
            decision_threshold,
            reversal_intervals,
            breakpoints,
            decisions,
            grid,
            scenario_id: String::new(),
            created_at: 0,
            zero_density,
        })
    }

    /// The no-campaign artifact: the regular posterior, which reduces to
    /// the reference threshold rule.
    pub fn identity(dgp: &ReferenceDgp) -> Result<Self> {
        Ok(Self::from_posterior(dgp.regular_posterior(), dgp.bayes_threshold(), false)?.with_provenance("regular", 0))
    }

    /// Tags the artifact with a scenario id and a logical creation time.
    pub fn with_provenance(mut self, scenario_id: impl Into<String>, created_at: i64) -> Self {
        self.scenario_id = scenario_id.into();
        self.created_at = created_at;
        self
    }

    pub fn decide(&self, s: f64) -> u8 {
        u8::from((s >= self.decision_threshold) ^ self.in_reversal(s))
    }

    pub fn in_reversal(&self, s: f64) -> bool {
        self.reversal_intervals.iter().any(|iv| iv.contains(s))
    }

    pub fn posterior(&self) -> &PosteriorCurve {
        &self.posterior
    }

    pub fn reference_threshold(&self) -> f64 {
        self.reference_threshold
    }

    pub fn decision_threshold(&self) -> f64 {
        self.decision_threshold
    }

    pub fn reversal_intervals(&self) -> &[Interval] {
        &self.reversal_intervals
    }

    /// Interior scores where the posterior crosses ½.
    pub fn crossings(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    pub fn grid(&self) -> &[[f64; 2]] {
        &self.grid
    }

    pub fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    pub fn created_at(&self) -> i64 {
        self.created_at
    }

    /// Set when both densities vanished somewhere on the grid and the
    /// posterior there came from a limiting ratio or the prior.
    pub fn zero_density(&self) -> bool {
        self.zero_density
    }

    /// True when the rule is a plain threshold at the reference point.
    pub fn is_identity(&self) -> bool {
        self.reversal_intervals.is_empty() && self.decision_threshold == self.reference_threshold
    }
}

/// Maximal intervals flagged true.
fn regions(breakpoints: &[f64], flags: &[bool]) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for (i, &on) in flags.iter().enumerate() {
        if !on {
            continue;
        }
        let (a, b) = (breakpoints[i], breakpoints[i + 1]);
        match out.last_mut() {
            Some(last) if last.hi == a => last.hi = b,
            _ => out.push(Interval { lo: a, hi: b }),
        }
    }
    out
}

/// Symmetric difference between `accept` and `[threshold, support.hi]`,
/// with gaps and slivers narrower than [`MERGE_TOL`] removed.
fn disagreement(accept: &[Interval], threshold: f64, support: Interval) -> Vec<Interval> {
    let mut cuts = vec![support.lo, threshold, support.hi];
    for iv in accept {
        cuts.push(iv.lo);
        cuts.push(iv.hi);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out: Vec<Interval> = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let repaired = accept.iter().any(|iv| iv.contains(mid));
        if repaired == (mid >= threshold) {
            continue;
        }
        match out.last_mut() {
            Some(last) if w[0] - last.hi < MERGE_TOL => last.hi = w[1],
            _ => out.push(Interval { lo: w[0], hi: w[1] }),
        }
    }
    out.retain(|iv| iv.width() >= MERGE_TOL);
    out
}

/// Repaired posterior for a toxic environment and the decision rule it
/// implies relative to `s ≥ reference_threshold`.
pub fn repair_posterior(
    toxic0: &ScoreDensity,
    toxic1: &ScoreDensity,
    prior_mal: f64,
    reference_threshold: f64,
) -> Result<MitigationArtifact> {
    if !(prior_mal > 0.0 && prior_mal < 1.0) {
        return Err(invalid(format!("prior_mal must lie in (0, 1), got {prior_mal}")));
    }
    let (s0, s1) = (toxic0.support(), toxic1.support());
    if (s0.lo - s1.lo).abs() > 1e-12 || (s0.hi - s1.hi).abs() > 1e-12 {
        return Err(invalid("toxic conditionals must share a support"));
    }
    let zero_density = linspace(s0.lo, s0.hi, DENSE_GRID).into_iter().any(|s| toxic0.pdf(s) + toxic1.pdf(s) == 0.0);
    let posterior = PosteriorCurve::from_densities(toxic0, toxic1, prior_mal);
    MitigationArtifact::from_posterior(posterior, reference_threshold, zero_density)
}

//! Precomputed mitigations keyed by scenario fingerprint.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaign::{natural_clear_fractions, sample_scenario, CampaignKind, CampaignScenario};
use crate::dgp::ReferenceDgp;
use crate::error::{invalid, Result};
use crate::estimator::empirical_repair;
use crate::mitigation::MitigationArtifact;

/// Scores drawn per table entry; 20k per class at balanced priors.
pub const TABLE_SAMPLES: usize = 40_000;

/// Observable summary of an environment: per-class clear fractions at the
/// reference threshold and the class-1 share.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub clear_frac_class0: f64,
    pub clear_frac_class1: f64,
    pub prior_mal: f64,
}

impl Fingerprint {
    pub fn distance(&self, other: &Fingerprint) -> f64 {
        ((self.clear_frac_class0 - other.clear_frac_class0).powi(2)
            + (self.clear_frac_class1 - other.clear_frac_class1).powi(2)
            + (self.prior_mal - other.prior_mal).powi(2))
        .sqrt()
    }

    pub fn scenario(&self, dgp: &ReferenceDgp) -> CampaignScenario {
        let kind = if self.is_regular(dgp) {
            CampaignKind::Regular
        } else if self.clear_frac_class0 == self.clear_frac_class1 {
            CampaignKind::SymmetricToxic
        } else {
            CampaignKind::AsymmetricToxic
        };
        CampaignScenario {
            clear_frac_class0: self.clear_frac_class0,
            clear_frac_class1: self.clear_frac_class1,
            prior_mal: self.prior_mal,
            kind,
        }
    }

    /// Natural clear fractions at the process's own prior.
    pub fn is_regular(&self, dgp: &ReferenceDgp) -> bool {
        let (f0, f1) = natural_clear_fractions(dgp);
        (self.clear_frac_class0 - f0).abs() < 1e-9
            && (self.clear_frac_class1 - f1).abs() < 1e-9
            && (self.prior_mal - dgp.prior_mal).abs() < 1e-9
    }
}

impl From<&CampaignScenario> for Fingerprint {
    fn from(s: &CampaignScenario) -> Self {
        Self { clear_frac_class0: s.clear_frac_class0, clear_frac_class1: s.clear_frac_class1, prior_mal: s.prior_mal }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableEntry {
    pub fingerprint: Fingerprint,
    pub artifact: MitigationArtifact,
}

/// Nonempty list of precomputed mitigations; lookups return the nearest
/// entry and its distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<TableEntry>", into = "Vec<TableEntry>")]
pub struct MitigationTable {
    entries: Vec<TableEntry>,
}

impl TryFrom<Vec<TableEntry>> for MitigationTable {
    type Error = crate::error::Error;

    fn try_from(entries: Vec<TableEntry>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<MitigationTable> for Vec<TableEntry> {
    fn from(t: MitigationTable) -> Self {
        t.entries
    }
}

impl MitigationTable {
    pub fn new(entries: Vec<TableEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("mitigation table needs at least one entry"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// Nearest entry by Euclidean fingerprint distance; ties go to the
    /// earlier entry.
    pub fn lookup(&self, fp: &Fingerprint) -> (&MitigationArtifact, f64) {
        let mut best = (&self.entries[0], self.entries[0].fingerprint.distance(fp));
        for e in &self.entries[1..] {
            let d = e.fingerprint.distance(fp);
            if d < best.1 {
                best = (e, d);
            }
        }
        (&best.0.artifact, best.1)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Clear fractions `{0.1, 0.3, 0.5, 0.7, natural}` per class crossed with
/// priors `{0.25, 0.5, 0.75}`, plus the regular fingerprint itself.
pub fn default_grid(dgp: &ReferenceDgp) -> Vec<Fingerprint> {
    let (n0, n1) = natural_clear_fractions(dgp);
    let mut grid = vec![Fingerprint { clear_frac_class0: n0, clear_frac_class1: n1, prior_mal: dgp.prior_mal }];
    for prior_mal in [0.25, 0.5, 0.75] {
        for f0 in [0.1, 0.3, 0.5, 0.7, n0] {
            for f1 in [0.1, 0.3, 0.5, 0.7, n1] {
                let fp = Fingerprint { clear_frac_class0: f0, clear_frac_class1: f1, prior_mal };
                if !grid.iter().any(|g| g.distance(&fp) == 0.0) {
                    grid.push(fp);
                }
            }
        }
    }
    grid
}

/// Builds one mitigation per fingerprint.
///
/// The regular fingerprint gets the analytic identity mitigation. Every
/// other entry samples [`TABLE_SAMPLES`] scores from its toxic environment
/// and runs [`empirical_repair`]. Entry `i` uses its own seed derived from
/// `seed`, so the table is reproducible whatever the thread count.
pub fn precompute_table(dgp: &ReferenceDgp, grid: &[Fingerprint], seed: u64) -> Result<MitigationTable> {
    if grid.is_empty() {
        return Err(invalid("scenario grid is empty"));
    }
    let threshold = dgp.bayes_threshold();
    let entries: Result<Vec<TableEntry>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, fp)| {
            let scenario = fp.scenario(dgp);
            scenario.validate()?;
            let artifact = if fp.is_regular(dgp) {
                MitigationArtifact::identity(dgp)?
            } else {
                let entry_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let set = sample_scenario(dgp, &scenario, TABLE_SAMPLES, entry_seed)?;
                empirical_repair(&set.class_scores(0), &set.class_scores(1), fp.prior_mal, threshold)?
            };
            Ok(TableEntry { fingerprint: *fp, artifact: artifact.with_provenance(scenario.id(), i as i64) })
        })
        .collect();
    MitigationTable::new(entries?)
}

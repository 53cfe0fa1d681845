//! Streaming detector-health monitor.
//!
//! A [`Monitor`] owns the health state and mutates it only by applying
//! [`Event`]s, which are also appended to its history. Replaying the
//! history onto a fresh monitor with the same configuration reproduces the
//! state exactly.

pub mod stream;
pub mod table;
pub mod window;

use serde::{Deserialize, Serialize};

use crate::dgp::ReferenceDgp;
use crate::error::{Error, Result};
use crate::estimator::empirical_repair;
use crate::mitigation::MitigationArtifact;
use crate::posterior::PosteriorCurve;
use crate::roc::accuracy_at;

pub use stream::StreamRecord;
pub use table::{Fingerprint, MitigationTable};
pub use window::{HistogramPair, ScoreWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Regular,
    Suspected,
    Mitigated,
    Restoring,
}

/// Declaration and release bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// Declare when the labeled error rate exceeds this.
    pub declare_error_rate: f64,
    /// Declare when the low-confidence share exceeds this.
    pub declare_lowconf_rate: f64,
    /// Rates must fall below `declare / release_factor` to count as
    /// recovered.
    pub release_factor: f64,
    /// Consecutive evaluations needed to deploy or to restore.
    pub persistence: u32,
    /// Evaluations are skipped below this many windowed records.
    pub min_samples: usize,
    /// The error-rate test needs this many labeled records.
    pub min_labeled: usize,
    /// Labeled records per class needed to fingerprint the window.
    pub min_labeled_per_class: usize,
    /// Table hits farther than this fall back to repairing the window.
    pub fallback_distance: f64,
}

impl Policy {
    /// Bounds at three times the regular Bayes error and three times the
    /// regular low-confidence share.
    pub fn for_dgp(dgp: &ReferenceDgp, band: (f64, f64)) -> Self {
        let t = dgp.bayes_threshold();
        let bayes_error = 1.0
            - accuracy_at(t, &dgp.regular_conditional(0), &dgp.regular_conditional(1), dgp.prior_mal)
                .unwrap_or(1.0);
        Self {
            declare_error_rate: 3.0 * bayes_error,
            declare_lowconf_rate: 3.0 * lowconf_baseline(dgp, band),
            release_factor: 2.0,
            persistence: 2,
            min_samples: 1000,
            min_labeled: 200,
            min_labeled_per_class: 50,
            fallback_distance: 0.1,
        }
    }
}

/// Share of regular scores whose regular posterior lies in `band`. Scores
/// are uniform on the domain, so this is the band's preimage length over
/// the domain width.
pub fn lowconf_baseline(dgp: &ReferenceDgp, band: (f64, f64)) -> f64 {
    let post = dgp.regular_posterior();
    let sup = dgp.support();
    let at = |level: f64, fallback: f64| post.crossings(level).first().copied().unwrap_or(fallback);
    let lo = if post.eval(sup.lo) >= band.0 { sup.lo } else { at(band.0, sup.hi) };
    let hi = if post.eval(sup.hi) <= band.1 { sup.hi } else { at(band.1, sup.lo) };
    ((hi - lo) / sup.width()).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub dgp: ReferenceDgp,
    pub window_capacity: usize,
    pub bins: usize,
    pub lowconf_band: (f64, f64),
    pub policy: Policy,
    /// Route every decision through the currently selected mitigation.
    pub prophylactic: bool,
}

impl MonitorConfig {
    pub fn new(dgp: ReferenceDgp) -> Self {
        let band = (0.35, 0.65);
        Self { dgp, window_capacity: 5000, bins: 100, lowconf_band: band, policy: Policy::for_dgp(&dgp, band), prophylactic: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationSource {
    Table,
    WindowRepair,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeployedMitigation {
    pub artifact: MitigationArtifact,
    /// Fingerprint distance to the table entry; 0 for window repairs.
    pub distance: f64,
    pub source: MitigationSource,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Ingested { records: Vec<StreamRecord> },
    Evaluated { error_rate: f64, lowconf_rate: f64, exceeded: bool, released: bool },
    ModeChanged { from: Mode, to: Mode },
    MitigationDeployed { mitigation: DeployedMitigation },
    /// The active mitigation is parked while restoring.
    MitigationStandby,
    /// The parked mitigation goes back into service.
    MitigationResumed,
    MitigationCleared,
    SelectionRefreshed { mitigation: DeployedMitigation },
}

#[derive(Clone, Debug, Serialize)]
pub struct HealthState {
    pub mode: Mode,
    pub window: ScoreWindow,
    pub error_rate: f64,
    pub lowconf_rate: f64,
    pub evaluations: u64,
    pub exceed_streak: u32,
    pub release_streak: u32,
    pub deployments: u64,
    pub active_mitigation: Option<DeployedMitigation>,
    pub standby_mitigation: Option<DeployedMitigation>,
    /// Latest selection, kept current in prophylactic mode.
    pub selected_mitigation: Option<DeployedMitigation>,
}

pub struct Monitor {
    config: MonitorConfig,
    regular: PosteriorCurve,
    reference_threshold: f64,
    state: HealthState,
    history: Vec<Event>,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        let t = config.dgp.bayes_threshold();
        let window = ScoreWindow::new(config.dgp.support(), config.bins, config.window_capacity, t);
        Self {
            regular: config.dgp.regular_posterior(),
            reference_threshold: t,
            state: HealthState {
                mode: Mode::Regular,
                window,
                error_rate: 0.0,
                lowconf_rate: 0.0,
                evaluations: 0,
                exceed_streak: 0,
                release_streak: 0,
                deployments: 0,
                active_mitigation: None,
                standby_mitigation: None,
                selected_mitigation: None,
            },
            history: Vec::new(),
            config,
        }
    }

    /// Rebuilds a monitor by applying `events` in order.
    pub fn replay(config: MonitorConfig, events: impl IntoIterator<Item = Event>) -> Self {
        let mut m = Self::new(config);
        for e in events {
            m.apply(e);
        }
        m
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn state(&self) -> &HealthState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn history(&self) -> &[Event] {
        &self.history
    }

    pub fn snapshot_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.state)?)
    }

    fn apply(&mut self, event: Event) {
        let s = &mut self.state;
        match &event {
            Event::Ingested { records } => {
                let (lo, hi) = self.config.lowconf_band;
                for r in records {
                    let p = self.regular.eval(r.score);
                    s.window.push(&r.id, r.score, r.label, p >= lo && p <= hi);
                }
            }
            Event::Evaluated { error_rate, lowconf_rate, exceeded, released } => {
                s.error_rate = *error_rate;
                s.lowconf_rate = *lowconf_rate;
                s.evaluations += 1;
                s.exceed_streak = if *exceeded { s.exceed_streak + 1 } else { 0 };
                s.release_streak = if *released { s.release_streak + 1 } else { 0 };
            }
            Event::ModeChanged { to, .. } => s.mode = *to,
            Event::MitigationDeployed { mitigation } => {
                s.active_mitigation = Some(mitigation.clone());
                s.standby_mitigation = None;
                s.deployments += 1;
            }
            Event::MitigationStandby => s.standby_mitigation = s.active_mitigation.take(),
            Event::MitigationResumed => s.active_mitigation = s.standby_mitigation.take(),
            Event::MitigationCleared => {
                s.active_mitigation = None;
                s.standby_mitigation = None;
            }
            Event::SelectionRefreshed { mitigation } => s.selected_mitigation = Some(mitigation.clone()),
        }
        self.history.push(event);
    }

    /// Adds a batch of records to the window.
    pub fn ingest(&mut self, batch: &[StreamRecord]) -> Result<()> {
        if batch.is_empty() {
            return Err(crate::error::invalid("ingest batch is empty"));
        }
        self.apply(Event::Ingested { records: batch.to_vec() });
        Ok(())
    }

    /// `(error_rate, lowconf_rate)` over the window. The error rate keeps
    /// its previous value while nothing in the window is labeled.
    pub fn window_rates(&self) -> (f64, f64) {
        let c = &self.state.window.counts;
        let error = if c.labeled_total() > 0 {
            c.errors() as f64 / c.labeled_total() as f64
        } else {
            self.state.error_rate
        };
        let lowconf = if c.total > 0 { c.lowconf as f64 / c.total as f64 } else { 0.0 };
        (error, lowconf)
    }

    /// Per-class clear fractions and class-1 share of the labeled window.
    pub fn fingerprint(&self) -> Result<Fingerprint> {
        let c = &self.state.window.counts;
        let need = self.config.policy.min_labeled_per_class as u64;
        if c.labeled[0] < need.max(1) || c.labeled[1] < need.max(1) {
            return Err(Error::InsufficientLabels(format!(
                "window holds {} class-0 and {} class-1 labels, need {need} each; wait for labels or run in prophylactic mode",
                c.labeled[0], c.labeled[1]
            )));
        }
        Ok(Fingerprint {
            clear_frac_class0: c.clear[0] as f64 / c.labeled[0] as f64,
            clear_frac_class1: c.clear[1] as f64 / c.labeled[1] as f64,
            prior_mal: c.labeled[1] as f64 / c.labeled_total() as f64,
        })
    }

    /// Nearest table mitigation for the window's fingerprint, or a repair
    /// estimated from the window itself when the table has nothing close.
    pub fn select_mitigation(&self, table: &MitigationTable) -> Result<DeployedMitigation> {
        let fp = self.fingerprint()?;
        let (artifact, distance) = table.lookup(&fp);
        if distance <= self.config.policy.fallback_distance {
            return Ok(DeployedMitigation { artifact: artifact.clone(), distance, source: MitigationSource::Table });
        }
        let (s0, s1) = self.state.window.labeled_scores();
        let artifact = empirical_repair(&s0, &s1, fp.prior_mal, self.reference_threshold)?
            .with_provenance(format!("window-repair:{}", self.state.evaluations), self.state.evaluations as i64);
        Ok(DeployedMitigation { artifact, distance: 0.0, source: MitigationSource::WindowRepair })
    }

    /// Updates rates and advances the mode machine.
    ///
    /// Regular moves to suspected on one exceedance; suspected deploys
    /// after `persistence` consecutive exceedances and falls back to
    /// regular otherwise. Mitigated parks its mitigation and moves to
    /// restoring once rates drop below the release bounds; restoring
    /// returns to regular after `persistence` consecutive releases and
    /// redeploys on a fresh exceedance.
    pub fn evaluate(&mut self, table: &MitigationTable) -> Result<Mode> {
        let policy = self.config.policy;
        if self.state.window.len() < policy.min_samples {
            return Ok(self.state.mode);
        }
        let (error_rate, lowconf_rate) = self.window_rates();
        let labeled_ok = self.state.window.counts.labeled_total() >= policy.min_labeled as u64;
        let exceeded =
            (labeled_ok && error_rate > policy.declare_error_rate) || lowconf_rate > policy.declare_lowconf_rate;
        let released = (!labeled_ok || error_rate <= policy.declare_error_rate / policy.release_factor)
            && lowconf_rate <= policy.declare_lowconf_rate / policy.release_factor;
        self.apply(Event::Evaluated { error_rate, lowconf_rate, exceeded, released });

        let from = self.state.mode;
        let streak_exceed = self.state.exceed_streak >= policy.persistence;
        let streak_release = self.state.release_streak >= policy.persistence;
        match from {
            Mode::Regular if exceeded => self.change(Mode::Suspected),
            Mode::Suspected if !exceeded => self.change(Mode::Regular),
            Mode::Suspected if streak_exceed => {
                // Without labels to fingerprint, stay suspected and retry.
                if let Ok(m) = self.select_mitigation(table) {
                    self.apply(Event::MitigationDeployed { mitigation: m });
                    self.change(Mode::Mitigated);
                }
            }
            Mode::Mitigated if released => {
                self.apply(Event::MitigationStandby);
                self.change(Mode::Restoring);
            }
            Mode::Mitigated => {
                if let Ok(m) = self.select_mitigation(table) {
                    let current = self.state.active_mitigation.as_ref().map(|a| a.artifact.scenario_id());
                    if current != Some(m.artifact.scenario_id()) {
                        self.apply(Event::MitigationDeployed { mitigation: m });
                    }
                }
            }
            Mode::Restoring if exceeded => {
                self.apply(Event::MitigationResumed);
                self.change(Mode::Mitigated);
            }
            Mode::Restoring if streak_release => {
                self.apply(Event::MitigationCleared);
                self.change(Mode::Regular);
            }
            _ => {}
        }
        if self.config.prophylactic {
            if let Ok(m) = self.select_mitigation(table) {
                let current = self.state.selected_mitigation.as_ref().map(|a| a.artifact.scenario_id());
                if current != Some(m.artifact.scenario_id()) {
                    self.apply(Event::SelectionRefreshed { mitigation: m });
                }
            }
        }
        debug_assert_eq!(self.state.active_mitigation.is_some(), self.state.mode == Mode::Mitigated);
        Ok(self.state.mode)
    }

    fn change(&mut self, to: Mode) {
        let from = self.state.mode;
        self.apply(Event::ModeChanged { from, to });
    }

    /// The mitigation decisions currently route through, if any.
    pub fn routing(&self) -> Option<&DeployedMitigation> {
        match self.state.mode {
            Mode::Mitigated => self.state.active_mitigation.as_ref(),
            _ if self.config.prophylactic => self.state.selected_mitigation.as_ref(),
            _ => None,
        }
    }

    /// Posterior value and decision for a raw score.
    pub fn transform(&self, s: f64) -> (f64, u8) {
        match self.routing() {
            Some(m) => (m.artifact.posterior().eval(s), m.artifact.decide(s)),
            None => (self.regular.eval(s), u8::from(s >= self.reference_threshold)),
        }
    }
}

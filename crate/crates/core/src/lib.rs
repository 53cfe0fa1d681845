//! Detector health management under adversarial campaigns: score
//! densities, nonmonotonic posteriors, multibranched ROC analysis,
//! mitigation artifacts and a streaming health monitor.

pub mod attack;
pub mod campaign;
pub mod density;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod export;
pub mod mitigation;
pub mod monitor;
pub mod numerics;
pub mod posterior;
pub mod rng;
pub mod roc;

pub use attack::{AttackPhase, AttackResult, BlackBoxScorer};
pub use campaign::{CampaignKind, CampaignScenario};
pub use density::{DensityKind, Interval, ScoreDensity};
pub use dgp::{Clarity, LabeledScoreSet, NoiseSpec, ReferenceDgp, TurbidityPair};
pub use estimator::{KdeEstimate, MulticlassScores};
pub use error::{Error, Result};
pub use mitigation::MitigationArtifact;
pub use monitor::{Mode, Monitor, MonitorConfig};
pub use posterior::{Direction, PosteriorCurve};
pub use roc::{ExactRoc, OperatingPoint, RocCurve, RocPoint};

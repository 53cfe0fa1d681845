//! Shared fixtures for the benchmarks.

use turbidity::{PosteriorCurve, ReferenceDgp, ScoreDensity};

/// Reference densities and the regular posterior, built once per bench.
pub struct Fixture {
    pub dgp: ReferenceDgp,
    pub class0: ScoreDensity,
    pub class1: ScoreDensity,
    pub posterior: PosteriorCurve,
}

impl Fixture {
    pub fn reference() -> Self {
        let dgp = ReferenceDgp::default();
        Self {
            class0: dgp.regular_conditional(0),
            class1: dgp.regular_conditional(1),
            posterior: dgp.regular_posterior(),
            dgp,
        }
    }
}

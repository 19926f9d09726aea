//! One checker per inequality, each producing a structured verdict with
//! statistical error accounting, plus the staged reverse-EPI pipeline.

mod checks;
mod pipeline;

pub use checks::{
    check_entropy_sandwich, check_epi, check_gaussian_sandwich, check_kappa_entropy_lower,
    check_reverse_bm, check_submodularity, concentration_profile, gaussian_sum_entropy,
    hyperplane_scan, typical_set_mass, ConcentrationProfile, ScanRow, TypicalSetMass,
};
pub use pipeline::{reverse_epi_pipeline, PipelineOpts, PipelineStages, ReverseEpiOutcome};

pub use crate::convolution::kappa_convolution;

use std::collections::BTreeMap;

use serde::Serialize;

/// Slack for checks whose two sides are exact closed forms.
pub const ANALYTIC_SLACK: f64 = 1e-9;
/// Statistical slack is uniformly this many combined standard errors.
pub const STAT_SLACK_MULT: f64 = 3.0;
/// Desk-scale regression ceiling for the reverse-EPI constant. The paper's
/// universal constant is unspecified; this bound is an artifact-level gate.
pub const DESK_REVERSE_EPI_CEILING: f64 = 30.0;
/// Desk-scale floor for the positioned ball-mass root (empirical c_M).
pub const DESK_MASS_ROOT_FLOOR: f64 = 0.1;
/// Default additive constant in the per-coordinate relative-entropy bound
/// ¼ log n + c used by the hyperplane scan.
pub const HYPERPLANE_C_DESK: f64 = 1.0;

/// One verified inequality instance, oriented as lhs ≤ rhs.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    /// rhs − lhs; satisfied means margin ≥ −slack.
    pub margin: f64,
    pub slack: f64,
    pub satisfied: bool,
    pub params: BTreeMap<String, String>,
}

impl InequalityReport {
    /// Report with statistical slack 3·√(lhs_se² + rhs_se²).
    pub fn stat(
        name: impl Into<String>,
        lhs: f64,
        lhs_se: f64,
        rhs: f64,
        rhs_se: f64,
    ) -> InequalityReport {
        let slack = STAT_SLACK_MULT * (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
        Self::with_slack(name, lhs, lhs_se, rhs, rhs_se, slack)
    }

    /// Report in which both sides are exact; slack 1e-9.
    pub fn analytic(name: impl Into<String>, lhs: f64, rhs: f64) -> InequalityReport {
        Self::with_slack(name, lhs, 0.0, rhs, 0.0, ANALYTIC_SLACK)
    }

    pub fn with_slack(
        name: impl Into<String>,
        lhs: f64,
        lhs_se: f64,
        rhs: f64,
        rhs_se: f64,
        slack: f64,
    ) -> InequalityReport {
        let margin = rhs - lhs;
        InequalityReport {
            name: name.into(),
            lhs,
            rhs,
            lhs_se,
            rhs_se,
            margin,
            slack,
            satisfied: margin >= -slack,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    /// Recompute the verdict from the serialized fields (pure function of
    /// lhs, rhs, slack).
    pub fn recheck(&self) -> bool {
        self.rhs - self.lhs >= -self.slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn verdict_is_pure_function_of_sides_and_slack() {
        let r = InequalityReport::stat("x", 1.0, 0.1, 1.2, 0.1);
        assert!(r.satisfied);
        assert_eq!(r.satisfied, r.recheck());
        let r = InequalityReport::analytic("y", 2.0, 1.0);
        assert!(!r.satisfied);
        assert_eq!(r.satisfied, r.recheck());
    }

    proptest! {
        #[test]
        fn satisfied_iff_margin_ge_neg_slack(
            lhs in -1e6f64..1e6,
            rhs in -1e6f64..1e6,
            lhs_se in 0.0f64..10.0,
            rhs_se in 0.0f64..10.0,
        ) {
            let r = InequalityReport::stat("p", lhs, lhs_se, rhs, rhs_se);
            prop_assert_eq!(r.satisfied, r.margin >= -r.slack);
            prop_assert_eq!(r.satisfied, r.recheck());
            // slack is exactly 3 combined SE
            let combined = (lhs_se*lhs_se + rhs_se*rhs_se).sqrt();
            prop_assert!((r.slack - 3.0*combined).abs() <= 1e-12 * combined.max(1.0));
        }
    }
}

//! Field operations: census enumeration, the coverage survey, matching,
//! imputation of unresolved cases and the evaluation follow-up.

mod census;
mod evaluation;
mod matching;
mod survey;

pub use census::{simulate_census, CensusRecord, EnumerationFile, RecordKind};
pub use evaluation::{evaluation_study, EvaluationResult, StratumBias};
pub use matching::{
    impute_unresolved, match_records, perturb, true_match, ECase, EnumStatus, ImputationPolicy, MatchResult,
    MatchStatus, PCase,
};
pub use survey::{draw_psample, PSample, Respondent};

pub(crate) use matching::resolve_stratum;

use serde::{Deserialize, Serialize};

use crate::prob::Probability;

/// Rates of the field and processing errors injected by the simulator.
///
/// These are design parameters of the experiment. [`ErrorConfig::illustrative`]
/// gives a plausible mix for demonstrations; it is not calibrated to any
/// published figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorConfig {
    pub duplicate_rate: Probability,
    pub fabrication_rate: Probability,
    pub wrong_location_rate: Probability,
    pub false_nonmatch_rate: Probability,
    pub false_match_rate: Probability,
    pub unresolved_rate: Probability,
    /// Added to `false_nonmatch_rate` for movers, capped at 1.
    pub mover_false_nonmatch_boost: Probability,
    pub eval_subsample_fraction: Probability,
    pub eval_accuracy: Probability,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig::none()
    }
}

impl ErrorConfig {
    /// No errors, and an evaluation that reviews every case perfectly.
    pub fn none() -> Self {
        ErrorConfig {
            duplicate_rate: Probability::ZERO,
            fabrication_rate: Probability::ZERO,
            wrong_location_rate: Probability::ZERO,
            false_nonmatch_rate: Probability::ZERO,
            false_match_rate: Probability::ZERO,
            unresolved_rate: Probability::ZERO,
            mover_false_nonmatch_boost: Probability::ZERO,
            eval_subsample_fraction: Probability::ONE,
            eval_accuracy: Probability::ONE,
        }
    }

    pub fn illustrative() -> Self {
        let p = |v| Probability::new(v).expect("constant in range");
        ErrorConfig {
            duplicate_rate: p(0.01),
            fabrication_rate: p(0.002),
            wrong_location_rate: p(0.01),
            false_nonmatch_rate: p(0.02),
            false_match_rate: p(0.005),
            unresolved_rate: p(0.02),
            mover_false_nonmatch_boost: p(0.10),
            eval_subsample_fraction: p(0.2),
            eval_accuracy: p(0.9),
        }
    }

    pub(crate) fn nonmatch_rate(&self, mover: bool) -> f64 {
        let base = self.false_nonmatch_rate.get();
        if mover {
            (base + self.mover_false_nonmatch_boost.get()).min(1.0)
        } else {
            base
        }
    }
}

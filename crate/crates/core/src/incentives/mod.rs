//! Coalition utilities and a falsification harness for incentive
//! compatibility, Myerson's conditions and the revenue bounds.
//!
//! Every check here searches a finite strategy suite. A clean report means
//! no violation was found, not that the property is proven.

mod coalition;
mod fixtures;
mod ic;
mod myerson;
mod revenue;
mod scripts;

use thiserror::Error;

use crate::mechanism::MechanismError;
use crate::rational::Rational;

pub use coalition::{coalition_utility, outcome_utility, Coalition, CoalitionKind};
pub use fixtures::{FirstPriceFixture, TickSkimmingFixture};
pub use ic::{check_ic, IcMode, IcSetting, ReportMode, UtilityReport};
pub use myerson::{
    myerson_check, myerson_check_bayesian, MyersonReport, MyersonViolation, ViolationKind,
};
pub use revenue::{
    platform_revenue_bound, revenue_compare, revenue_tick_lemma_check, PlatformRevenueReport,
    RevenueComparison, RevenueRow, TickLemmaReport,
};
pub use scripts::{standard_suite, CustomScript, Deviation, StrategyScript};

/// 99% two-sided normal quantile.
pub const Z_99: f64 = 2.576;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IncentiveError {
    #[error("script {script} is not available to coalition {coalition}")]
    InvalidScriptForCoalition { script: String, coalition: String },
    #[error("coalition is not one of the supported kinds: {0}")]
    InvalidCoalition(String),
    #[error("script {0} needs the real protocol; evaluate it with a protocol run")]
    RequiresProtocol(String),
    #[error("hypothesis fails between {low} and {high}: {reason}")]
    HypothesisViolated {
        low: Rational,
        high: Rational,
        reason: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

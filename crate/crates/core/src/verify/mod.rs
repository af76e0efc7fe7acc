//! Experiment suites: exact identities and finite-`n` Monte Carlo checks,
//! each producing a [`SuiteReport`] with its seed ledger and raw data.

pub mod carre_du_champ;
pub mod config;
pub mod covariance;
pub mod duality;
pub mod exact;
pub mod gradient;
pub mod martingale;
pub mod moments;
pub mod orthogonality;
pub mod recursion;
pub mod replicas;
pub mod report;
pub mod scaling;
pub mod stats;
pub mod taylor;

pub use config::{
    Context, ConventionOverride, ExperimentConfig, FieldConfig, ModelConfig, RunConfig, SuiteName, Tolerances,
};
pub use report::{Check, DataTable, SuiteReport, SCHEMA_VERSION};
pub use stats::{EstimateWithError, ScalingPoint, ScalingReport, SeedLedger, Verdict};

use crate::error::Result;

pub fn run_suite(ctx: &Context, suite: SuiteName) -> Result<SuiteReport> {
    match suite {
        SuiteName::Duality => duality::suite_duality(ctx),
        SuiteName::Orthogonality => orthogonality::suite_orthogonality(ctx),
        SuiteName::Recursion => recursion::suite_recursion(ctx),
        SuiteName::Gradient => gradient::suite_gradient(ctx),
        SuiteName::CarreDuChamp => carre_du_champ::suite_carre_du_champ(ctx),
        SuiteName::DriftScaling => scaling::suite_drift_scaling(ctx),
        SuiteName::QvReplacement => scaling::suite_qv_replacement(ctx),
        SuiteName::Martingale => martingale::suite_martingale(ctx),
        SuiteName::Covariance => covariance::suite_covariance(ctx),
        SuiteName::Taylor => taylor::suite_taylor(ctx),
        SuiteName::Moments => moments::suite_moments(ctx),
    }
}

//! Top-level `report.json` written by `check` and `experiment`.

use orthofield_core::orthopoly::{ConventionReport, PairOrigin};
use orthofield_core::verify::{ConventionOverride, RunConfig, SuiteReport, SCHEMA_VERSION};
use orthofield_core::{Context, Verdict};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConventionRecord {
    pub sign_e: i8,
    pub sign_h: i8,
    pub origin: PairOrigin,
    pub overridden: Option<ConventionOverride>,
    pub resolution: Option<ConventionReport>,
}

impl ConventionRecord {
    pub fn from_context(ctx: &Context) -> Self {
        ConventionRecord {
            sign_e: ctx.pair.sign_e,
            sign_h: ctx.pair.sign_h,
            origin: ctx.pair.origin,
            overridden: ctx.config.convention_override,
            resolution: ctx.convention.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub verdict: Verdict,
    pub failed_checks: Vec<String>,
    /// Directory of the suite's `report.json` and `data.csv`, relative to the output directory.
    pub directory: String,
}

impl SuiteSummary {
    pub fn from_report(r: &SuiteReport) -> Self {
        SuiteSummary {
            suite: r.suite.clone(),
            verdict: r.verdict,
            failed_checks: r.failed_checks().iter().map(|c| c.name.clone()).collect(),
            directory: r.suite.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteTiming {
    pub suite: String,
    pub seconds: f64,
}

/// Wall-clock times; the only part of the record that is not a function of (config, seed).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub suites: Vec<SuiteTiming>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: u32,
    pub command: String,
    pub verdict: Verdict,
    pub config: RunConfig,
    pub convention: ConventionRecord,
    pub suites: Vec<SuiteSummary>,
    pub timing: Timing,
}

impl OutputRecord {
    pub fn new(command: &str, ctx: &Context) -> Self {
        OutputRecord {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            verdict: Verdict::Pass,
            config: ctx.config.clone(),
            convention: ConventionRecord::from_context(ctx),
            suites: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn push(&mut self, report: &SuiteReport, seconds: f64) {
        if !report.verdict.passed() {
            self.verdict = Verdict::Fail;
        }
        self.suites.push(SuiteSummary::from_report(report));
        self.timing.suites.push(SuiteTiming {
            suite: report.suite.clone(),
            seconds,
        });
        self.timing.total_seconds += seconds;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("output record serializes")
    }
}

//! Built-in statistical test battery and the p-value verdict framework.
//!
//! Every test returns a two-sided p-value. Verdicts are layered on top by a
//! [`VerdictProfile`]; the test functions themselves classify with the
//! nist-style profile and the battery re-classifies per its configuration.

mod battery;
mod bytes;
mod complexity;
mod frequency;
mod pvalue;
mod serial;
mod twolevel;

pub use battery::{
    run_battery, BatteryConfig, BatteryEntry, BatteryReport, SkippedTest, SuiteTotals, TestKind, TestSpec,
};
pub use bytes::{chi2_bytes_p, ent_outcomes, ent_statistics, EntStatistics};
pub use complexity::{berlekamp_massey, linear_complexity_p};
pub use frequency::{block_frequency_p, monobit_p, runs_p};
pub use pvalue::{classify, Bands, PValue, Verdict, VerdictProfile};
pub use serial::{serial2_p, serial_p};
pub use twolevel::{combine_type2, nist_two_level, TwoLevelResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestError {
    #[error("{test}: needs at least {needed} bits, got {got}")]
    InsufficientData {
        test: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("{test}: not applicable ({reason})")]
    NotApplicable { test: &'static str, reason: String },
    #[error("{test}: parameter out of range ({reason})")]
    BadParameter { test: &'static str, reason: String },
    #[error("serial correlation is undefined for constant input")]
    ZeroVariance,
    #[error("p-value is NaN")]
    NanPValue,
    #[error("p-value {0} outside [0, 1]")]
    PValueOutOfRange(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("unknown verdict profile {0:?}")]
    UnknownProfile(String),
    #[error("need at least {needed} p-values, got {got}")]
    TooFewPValues { needed: usize, got: usize },
    #[error("battery configuration enables no tests")]
    EmptyBattery,
}

impl TestError {
    /// Applicability problems are reported as skipped, not failed.
    pub fn is_skip(&self) -> bool {
        matches!(
            self,
            TestError::InsufficientData { .. } | TestError::NotApplicable { .. } | TestError::ZeroVariance
        )
    }
}

/// One test's statistic, p-value and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_name: String,
    pub statistic: f64,
    pub p: PValue,
    pub verdict: Verdict,
    pub profile: VerdictProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestOutcome {
    pub(crate) fn new(test_name: impl Into<String>, statistic: f64, p: f64) -> Result<Self, TestError> {
        let p = PValue::clamped(p)?;
        let profile = VerdictProfile::NistStyle;
        Ok(Self {
            test_name: test_name.into(),
            statistic,
            p,
            verdict: classify(p, profile),
            profile,
            sample_id: None,
            notes: Vec::new(),
        })
    }

    /// Re-derives the verdict under `profile`.
    pub fn with_profile(mut self, profile: VerdictProfile) -> Self {
        self.profile = profile;
        self.verdict = classify(self.p, profile);
        self
    }

    pub fn with_sample_id(mut self, id: impl Into<String>) -> Self {
        self.sample_id = Some(id.into());
        self
    }

    pub(crate) fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub(crate) fn chi2_upper(chi2: f64, dof: f64) -> f64 {
    if chi2 <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(dof / 2.0, chi2 / 2.0)
}

/// Two-sided normal p-value for a z-score.
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub(crate) fn require_bits(test: &'static str, needed: usize, got: usize) -> Result<(), TestError> {
    if got < needed {
        Err(TestError::InsufficientData { test, needed, got })
    } else {
        Ok(())
    }
}

//! Configurable test battery with per-test verdict profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    block_frequency_p, bytes::ent_outcome, chi2_bytes_p, linear_complexity_p, monobit_p, runs_p, serial_p, TestError,
    TestOutcome, Verdict, VerdictProfile,
};
use crate::bitio::BitString;

/// A concrete test with its parameters. Serialized as its name, e.g.
/// `block-frequency-128`, `serial-8`, `linear-complexity-500`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestKind {
    Monobit,
    BlockFrequency { block_len: usize },
    Runs,
    Serial { m: usize },
    ByteChi2,
    EntEntropy,
    EntMean,
    EntPi,
    EntScc,
    LinearComplexity { block_len: usize },
}

impl TestKind {
    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn run(&self, s: &BitString) -> Result<TestOutcome, TestError> {
        let ent = |i: usize| ent_outcome(s, i);
        let outcome = match *self {
            TestKind::Monobit => monobit_p(s),
            TestKind::BlockFrequency { block_len } => block_frequency_p(s, block_len),
            TestKind::Runs => runs_p(s),
            TestKind::Serial { m } => serial_p(s, m),
            TestKind::ByteChi2 => chi2_bytes_p(s),
            TestKind::EntEntropy => ent(0),
            TestKind::EntMean => ent(1),
            TestKind::EntPi => ent(2),
            TestKind::EntScc => ent(3),
            TestKind::LinearComplexity { block_len } => linear_complexity_p(s, block_len),
        }?;
        Ok(TestOutcome {
            test_name: self.name(),
            ..outcome
        })
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::Monobit => f.write_str("monobit"),
            TestKind::BlockFrequency { block_len } => write!(f, "block-frequency-{block_len}"),
            TestKind::Runs => f.write_str("runs"),
            TestKind::Serial { m } => write!(f, "serial-{m}"),
            TestKind::ByteChi2 => f.write_str("byte-chi2"),
            TestKind::EntEntropy => f.write_str("ent-entropy"),
            TestKind::EntMean => f.write_str("ent-mean"),
            TestKind::EntPi => f.write_str("ent-pi"),
            TestKind::EntScc => f.write_str("ent-scc"),
            TestKind::LinearComplexity { block_len } => write!(f, "linear-complexity-{block_len}"),
        }
    }
}

impl FromStr for TestKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let param = |prefix: &str| -> Option<usize> { s.strip_prefix(prefix)?.parse().ok() };
        Ok(match s {
            "monobit" => TestKind::Monobit,
            "runs" => TestKind::Runs,
            "byte-chi2" => TestKind::ByteChi2,
            "ent-entropy" => TestKind::EntEntropy,
            "ent-mean" => TestKind::EntMean,
            "ent-pi" => TestKind::EntPi,
            "ent-scc" => TestKind::EntScc,
            _ => {
                if let Some(block_len) = param("block-frequency-") {
                    TestKind::BlockFrequency { block_len }
                } else if let Some(m) = param("serial-") {
                    TestKind::Serial { m }
                } else if let Some(block_len) = param("linear-complexity-") {
                    TestKind::LinearComplexity { block_len }
                } else {
                    return Err(format!("unknown test {s:?}"));
                }
            }
        })
    }
}

impl TryFrom<String> for TestKind {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TestKind> for String {
    fn from(k: TestKind) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub suite: String,
    pub test: TestKind,
    pub profile: VerdictProfile,
}

impl TestSpec {
    pub fn new(suite: &str, test: TestKind, profile: VerdictProfile) -> Self {
        Self {
            suite: suite.to_string(),
            test,
            profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub name: String,
    pub tests: Vec<TestSpec>,
}

impl BatteryConfig {
    /// Every built-in test, grouped into four suites.
    pub fn full() -> Self {
        use TestKind::*;
        use VerdictProfile::*;
        let tests = vec![
            TestSpec::new("frequency", Monobit, NistStyle),
            TestSpec::new("frequency", BlockFrequency { block_len: 128 }, NistStyle),
            TestSpec::new("frequency", Runs, NistStyle),
            TestSpec::new("serial", Serial { m: 2 }, DieharderStyle),
            TestSpec::new("serial", Serial { m: 8 }, DieharderStyle),
            TestSpec::new("ent", ByteChi2, NistStyle),
            TestSpec::new("ent", EntEntropy, NistStyle),
            TestSpec::new("ent", EntMean, NistStyle),
            TestSpec::new("ent", EntPi, NistStyle),
            TestSpec::new("ent", EntScc, NistStyle),
            TestSpec::new("complexity", LinearComplexity { block_len: 500 }, Testu01Style),
        ];
        Self {
            name: "all".into(),
            tests,
        }
    }

    /// The tests of `self` whose names appear in `names`, in `self`'s order.
    pub fn subset(&self, name: &str, names: &[&str]) -> Self {
        Self {
            name: name.into(),
            tests: self
                .tests
                .iter()
                .filter(|t| names.contains(&t.test.name().as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &BatteryConfig) -> bool {
        self.tests.iter().all(|t| other.tests.contains(t))
    }

    /// Expected number of fail verdicts on ideal input: Σ fail mass.
    pub fn expected_false_failures(&self) -> f64 {
        self.tests.iter().map(|t| t.profile.fail_mass()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryEntry {
    pub suite: String,
    pub outcome: TestOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTest {
    pub suite: String,
    pub test_name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteTotals {
    pub suite: String,
    pub tests: usize,
    pub failed: usize,
    pub weak: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub config: String,
    pub bits: usize,
    pub entries: Vec<BatteryEntry>,
    pub skipped: Vec<SkippedTest>,
    pub suites: Vec<SuiteTotals>,
    pub failed: usize,
    pub weak: usize,
    /// Σ fail mass over the tests that ran.
    pub expected_false_failures: f64,
    /// Wall time per suite; excluded from equality-sensitive comparisons.
    #[serde(default)]
    pub suite_seconds: BTreeMap<String, f64>,
}

impl BatteryReport {
    /// Builds a report and derives every total from the entries.
    pub fn from_parts(config: &str, bits: usize, entries: Vec<BatteryEntry>, skipped: Vec<SkippedTest>) -> Self {
        let mut suites: BTreeMap<String, SuiteTotals> = BTreeMap::new();
        let mut budget = 0.0;
        for e in &entries {
            let t = suites.entry(e.suite.clone()).or_default();
            t.tests += 1;
            match e.outcome.verdict {
                Verdict::Fail => t.failed += 1,
                Verdict::Weak => t.weak += 1,
                Verdict::Pass => {}
            }
            budget += e.outcome.profile.fail_mass();
        }
        for s in &skipped {
            suites.entry(s.suite.clone()).or_default().skipped += 1;
        }
        let suites: Vec<SuiteTotals> = suites
            .into_iter()
            .map(|(name, t)| SuiteTotals { suite: name, ..t })
            .collect();
        Self {
            config: config.to_string(),
            bits,
            failed: suites.iter().map(|s| s.failed).sum(),
            weak: suites.iter().map(|s| s.weak).sum(),
            suites,
            entries,
            skipped,
            expected_false_failures: budget,
            suite_seconds: BTreeMap::new(),
        }
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &TestOutcome> {
        self.entries.iter().map(|e| &e.outcome)
    }

    pub fn outcome(&self, test_name: &str) -> Option<&TestOutcome> {
        self.outcomes().find(|o| o.test_name == test_name)
    }

    /// Success means fewer failures than expected from ideal input.
    pub fn success(&self) -> bool {
        (self.failed as f64) < self.expected_false_failures
    }

    /// Smallest p-value among the failed outcomes.
    pub fn min_failed_p(&self) -> Option<f64> {
        self.outcomes()
            .filter(|o| o.verdict == Verdict::Fail)
            .map(|o| o.p.value())
            .reduce(f64::min)
    }
}

/// Runs the configured tests in parallel and merges them in config order.
pub fn run_battery(s: &BitString, config: &BatteryConfig) -> Result<BatteryReport, TestError> {
    if config.tests.is_empty() {
        return Err(TestError::EmptyBattery);
    }
    let results: Vec<(f64, Result<TestOutcome, TestError>)> = config
        .tests
        .par_iter()
        .map(|spec| {
            let start = Instant::now();
            let r = spec.test.run(s).map(|o| o.with_profile(spec.profile));
            (start.elapsed().as_secs_f64(), r)
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut seconds: BTreeMap<String, f64> = BTreeMap::new();
    for (spec, (secs, r)) in config.tests.iter().zip(results) {
        *seconds.entry(spec.suite.clone()).or_default() += secs;
        match r {
            Ok(outcome) => entries.push(BatteryEntry {
                suite: spec.suite.clone(),
                outcome,
            }),
            Err(e) if e.is_skip() => skipped.push(SkippedTest {
                suite: spec.suite.clone(),
                test_name: spec.test.name(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let mut report = BatteryReport::from_parts(&config.name, s.len(), entries, skipped);
    report.suite_seconds = seconds;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::uniform_generate;

    #[test]
    fn names_round_trip() {
        for t in BatteryConfig::full().tests {
            assert_eq!(t.test.name().parse::<TestKind>().unwrap(), t.test);
        }
        assert!("serial-x".parse::<TestKind>().is_err());
        let json = serde_json::to_string(&BatteryConfig::full()).unwrap();
        let back: BatteryConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, BatteryConfig::full());
    }

    #[test]
    fn empty_config_is_an_error() {
        let c = BatteryConfig {
            name: "none".into(),
            tests: vec![],
        };
        assert_eq!(
            run_battery(&uniform_generate(1000, 1), &c).unwrap_err(),
            TestError::EmptyBattery
        );
    }

    #[test]
    fn all_zeros_fails_every_applicable_test() {
        let z = BitString::from_bytes(vec![0; 125_000], 1_000_000);
        let r = run_battery(&z, &BatteryConfig::full()).unwrap();
        assert_eq!(r.failed, r.entries.len());
        // runs precondition and scc variance make those two skips
        let skipped: Vec<&str> = r.skipped.iter().map(|s| s.test_name.as_str()).collect();
        assert_eq!(skipped, ["runs", "ent-scc"]);
        assert!(!r.success());
    }

    #[test]
    fn short_input_skips_rather_than_fails() {
        let r = run_battery(&uniform_generate(5000, 2), &BatteryConfig::full()).unwrap();
        assert!(r.skipped.iter().any(|s| s.test_name == "linear-complexity-500"));
        assert_eq!(r.entries.len() + r.skipped.len(), BatteryConfig::full().tests.len());
    }

    #[test]
    fn totals_survive_reordering() {
        let r = run_battery(&uniform_generate(200_000, 3), &BatteryConfig::full()).unwrap();
        let mut entries = r.entries.clone();
        entries.reverse();
        let mut skipped = r.skipped.clone();
        skipped.reverse();
        let back = BatteryReport::from_parts(&r.config, r.bits, entries, skipped);
        assert_eq!(back.suites, r.suites);
        assert_eq!((back.failed, back.weak), (r.failed, r.weak));
        assert!((back.expected_false_failures - r.expected_false_failures).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let u = uniform_generate(300_000, 4);
        let a = run_battery(&u, &BatteryConfig::full()).unwrap();
        let b = run_battery(&u, &BatteryConfig::full()).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.suites, b.suites);
    }

    #[test]
    fn budget_is_sum_of_tail_masses() {
        let c = BatteryConfig::full();
        // 8 nist-style at 0.01, 2 dieharder-style at 0.001, 1 testu01-style at 0.002
        assert!((c.expected_false_failures() - 0.084).abs() < 1e-12);
    }
}

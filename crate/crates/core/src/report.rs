//! Test profiles, false-failure budgets and comparisons across levels.
//!
//! Profiles map onto subsets of the built-in battery:
//!
//! | profile       | tests |
//! |---------------|-------|
//! | `all`         | every built-in test |
//! | `recommended` | `all` without `serial-2` and `ent-entropy`, the two cheapest structural tests (both are implied by `serial-8` and `byte-chi2`) |
//! | `light`       | `monobit`, `byte-chi2`, `ent-pi`, `ent-scc`, `serial-8`, `linear-complexity-500` |

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};
use thiserror::Error;

use crate::bitio::{BitString, StreamFormat};
use crate::extractors::DEFAULT_EPS_ROUND;
use crate::mermin::HoeffdingForm;
use crate::pipeline::DEFAULT_MARGIN;
use crate::stattests::{classify, run_battery, BatteryConfig, BatteryReport, TestError, Verdict};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown profile {0:?} (expected light, recommended or all)")]
    UnknownProfile(String),
    #[error("profile {0} is not a subset of all")]
    NotSubset(String),
    #[error("tail mass {0} not in (0, 1)")]
    BadTailMass(f64),
    #[error("no reports to compare")]
    NoReports,
    #[error("significance {0} not in (0, 1)")]
    BadSignificance(f64),
    #[error("config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Test(#[from] TestError),
}

const RECOMMENDED_DROPS: [&str; 2] = ["serial-2", "ent-entropy"];
const LIGHT_TESTS: [&str; 6] = [
    "monobit",
    "byte-chi2",
    "ent-pi",
    "ent-scc",
    "serial-8",
    "linear-complexity-500",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Light,
    Recommended,
    #[default]
    All,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Light, Profile::Recommended, Profile::All];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Light => "light",
            Profile::Recommended => "recommended",
            Profile::All => "all",
        }
    }

    /// The profile's battery; subset membership in `all` is checked here.
    pub fn config(self) -> Result<BatteryConfig, ReportError> {
        let all = BatteryConfig::full();
        let cfg = match self {
            Profile::All => return Ok(all),
            Profile::Recommended => {
                let keep: Vec<String> = all
                    .tests
                    .iter()
                    .map(|t| t.test.name())
                    .filter(|n| !RECOMMENDED_DROPS.contains(&n.as_str()))
                    .collect();
                let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
                all.subset(self.name(), &keep)
            }
            Profile::Light => all.subset(self.name(), &LIGHT_TESTS),
        };
        if !cfg.is_subset_of(&all) || cfg.tests.is_empty() {
            return Err(ReportError::NotSubset(self.name().into()));
        }
        Ok(cfg)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "light" => Ok(Profile::Light),
            "recommended" => Ok(Profile::Recommended),
            "all" => Ok(Profile::All),
            other => Err(ReportError::UnknownProfile(other.into())),
        }
    }
}

/// Runs `profile`'s battery and records wall time per suite.
pub fn run_profile(s: &BitString, profile: Profile) -> Result<BatteryReport, ReportError> {
    let cfg = profile.config()?;
    let start = Instant::now();
    let mut report = run_battery(s, &cfg)?;
    report
        .suite_seconds
        .insert("total".into(), start.elapsed().as_secs_f64());
    Ok(report)
}

/// Σ count·tail_mass, assuming independent tests.
pub fn expected_false_failures(tests: &[(u64, f64)]) -> Result<f64, ReportError> {
    tests.iter().try_fold(0.0, |acc, &(count, mass)| {
        if mass > 0.0 && mass < 1.0 {
            Ok(acc + count as f64 * mass)
        } else {
            Err(ReportError::BadTailMass(mass))
        }
    })
}

/// Smallest `c` with `P(Poisson(expected) > c) ≤ significance`.
pub fn false_failure_allowance(expected: f64, significance: f64) -> Result<u64, ReportError> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(ReportError::BadSignificance(significance));
    }
    if expected <= 0.0 {
        return Ok(0);
    }
    let pois = Poisson::new(expected).map_err(|_| ReportError::BadTailMass(expected))?;
    Ok((0u64..)
        .find(|&c| 1.0 - pois.cdf(c) <= significance)
        .unwrap_or(u64::MAX))
}

/// The plotting transform `log2(f + 1)`.
pub fn plot_y(f: usize) -> f64 {
    ((f + 1) as f64).log2()
}

/// Identifies one battery run: a source at a processing level (0 = raw).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LevelKey {
    pub source: String,
    pub level: u8,
}

impl LevelKey {
    pub fn new(source: &str, level: u8) -> Self {
        Self {
            source: source.into(),
            level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub source: String,
    pub level: u8,
    pub bits: usize,
    pub failed: usize,
    pub weak: usize,
    pub expected_false_failures: f64,
    pub success: bool,
    pub y_failed: f64,
    pub y_failed_weak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Levels that were refused or not run, shown as `-`.
    pub missing: Vec<LevelKey>,
    /// `log2(budget + 1)` for the largest budget among the rows; points
    /// below it are in the success region.
    pub success_boundary_y: f64,
    /// Sources whose failure counts never increase with level and whose
    /// last level succeeds.
    pub improving: Vec<String>,
}

/// Builds the comparison from raw battery reports.
pub fn compare_levels(reports: &BTreeMap<LevelKey, BatteryReport>) -> Result<ComparisonReport, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::NoReports);
    }
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(key, r)| {
            // verdicts are re-derived from the p-values, not trusted
            let verdicts: Vec<Verdict> = r.outcomes().map(|o| classify(o.p, o.profile)).collect();
            let failed = verdicts.iter().filter(|&&v| v == Verdict::Fail).count();
            let weak = verdicts.iter().filter(|&&v| v == Verdict::Weak).count();
            let budget: f64 = r.outcomes().map(|o| o.profile.fail_mass()).sum();
            ComparisonRow {
                source: key.source.clone(),
                level: key.level,
                bits: r.bits,
                failed,
                weak,
                expected_false_failures: budget,
                success: (failed as f64) < budget,
                y_failed: plot_y(failed),
                y_failed_weak: plot_y(failed + weak),
            }
        })
        .collect();
    let budget = rows.iter().map(|r| r.expected_false_failures).fold(0.0, f64::max);
    let mut improving = Vec::new();
    let mut sources: Vec<&str> = rows.iter().map(|r| r.source.as_str()).collect();
    sources.dedup();
    for s in sources {
        let series: Vec<&ComparisonRow> = rows.iter().filter(|r| r.source == s).collect();
        let monotone = series.windows(2).all(|w| w[1].failed <= w[0].failed);
        if series.len() > 1 && monotone && series.last().is_some_and(|r| r.success) {
            improving.push(s.to_string());
        }
    }
    Ok(ComparisonReport {
        rows,
        missing: Vec::new(),
        success_boundary_y: (budget + 1.0).log2(),
        improving,
    })
}

impl ComparisonReport {
    pub fn mark_missing(&mut self, key: LevelKey) {
        if !self.missing.contains(&key) {
            self.missing.push(key);
            self.missing.sort();
        }
    }

    pub fn row(&self, source: &str, level: u8) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.source == source && r.level == level)
    }

    /// Checks every row against the reports it was built from.
    pub fn verify(&self, reports: &BTreeMap<LevelKey, BatteryReport>) -> bool {
        compare_levels(reports).is_ok_and(|fresh| fresh.rows == self.rows)
    }

    /// Text table: one row per source, one column per level, cells
    /// `failed(weak)`.
    pub fn to_table(&self) -> String {
        let mut levels: Vec<u8> = self
            .rows
            .iter()
            .map(|r| r.level)
            .chain(self.missing.iter().map(|k| k.level))
            .collect();
        levels.sort_unstable();
        levels.dedup();
        let mut sources: Vec<&str> = self
            .rows
            .iter()
            .map(|r| r.source.as_str())
            .chain(self.missing.iter().map(|k| k.source.as_str()))
            .collect();
        sources.sort_unstable();
        sources.dedup();
        let width = sources.iter().map(|s| s.len()).max().unwrap_or(0).max(6);

        let mut out = format!("{:<width$}", "source");
        for l in &levels {
            let _ = write!(out, " {:>9}", format!("level {l}"));
        }
        out.push('\n');
        for s in sources {
            let _ = write!(out, "{s:<width$}");
            for &l in &levels {
                let cell = match self.row(s, l) {
                    Some(r) => format!("{}({})", r.failed, r.weak),
                    None => "-".to_string(),
                };
                let _ = write!(out, " {cell:>9}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "success region: y < {:.4}", self.success_boundary_y);
        out
    }

    /// Plot data, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,level,failed,weak,y_failed,y_failed_weak,success_boundary_y\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                r.source, r.level, r.failed, r.weak, r.y_failed, r.y_failed_weak, self.success_boundary_y
            );
        }
        out
    }
}

/// Settings shared by the CLI commands, read from one JSON file.
///
/// Every field is optional in the file; flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub profile: Profile,
    pub format: StreamFormat,
    pub eps_round: f64,
    pub margin: f64,
    pub symbol_bits: usize,
    pub hoeffding: HoeffdingForm,
    pub beacon_endpoint: Option<String>,
    pub beacon_fixture: Option<PathBuf>,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        Self {
            profile: Profile::All,
            format: StreamFormat::RawBinary,
            eps_round: DEFAULT_EPS_ROUND,
            margin: DEFAULT_MARGIN,
            symbol_bits: 8,
            hoeffding: HoeffdingForm::Standard,
            beacon_endpoint: None,
            beacon_fixture: None,
        }
    }
}

impl WorkbenchConfig {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let wrap = |e: Box<dyn std::error::Error + Send + Sync>| ReportError::Config {
            path: path.to_path_buf(),
            source: e,
        };
        let text = std::fs::read_to_string(path).map_err(|e| wrap(e.into()))?;
        serde_json::from_str(&text).map_err(|e| wrap(e.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{lfsr_generate, uniform_generate};
    use crate::stattests::{BatteryEntry, TestOutcome};

    #[test]
    fn profiles_nest() {
        let all = Profile::All.config().unwrap();
        let rec = Profile::Recommended.config().unwrap();
        let light = Profile::Light.config().unwrap();
        assert_eq!(rec.tests.len(), all.tests.len() - 2);
        assert_eq!(light.tests.len(), LIGHT_TESTS.len());
        assert!(light.is_subset_of(&all) && rec.is_subset_of(&all));
        assert!("full".parse::<Profile>().is_err());
        for p in Profile::ALL {
            assert_eq!(p.name().parse::<Profile>().unwrap(), p);
        }
    }

    #[test]
    fn false_failure_arithmetic() {
        let e = expected_false_failures(&[(4600, 7.5 / 4600.0)]).unwrap();
        assert!((e - 7.5).abs() < 1e-12);
        assert_eq!(expected_false_failures(&[(1, 0.01)]).unwrap(), 0.01);
        assert!(expected_false_failures(&[(1, 0.0)]).is_err());
        assert!(expected_false_failures(&[(1, 1.0)]).is_err());
        let shipped = Profile::All.config().unwrap().expected_false_failures();
        let from_masses: Vec<(u64, f64)> = Profile::All
            .config()
            .unwrap()
            .tests
            .iter()
            .map(|t| (1, t.profile.fail_mass()))
            .collect();
        assert!((expected_false_failures(&from_masses).unwrap() - shipped).abs() < 1e-15);
    }

    #[test]
    fn allowance() {
        // P(Poisson(0.084) > 0) ≈ 0.081, P(> 1) ≈ 0.0034
        assert_eq!(false_failure_allowance(0.084, 0.01).unwrap(), 1);
        assert_eq!(false_failure_allowance(0.084, 0.1).unwrap(), 0);
        assert_eq!(false_failure_allowance(0.0, 0.01).unwrap(), 0);
        assert!(false_failure_allowance(1.0, 0.0).is_err());
        // P(Poisson(7.5) > 14) ≈ 0.0121, P(> 15) ≈ 0.0061
        assert_eq!(false_failure_allowance(7.5, 0.01).unwrap(), 15);
    }

    #[test]
    fn plot_transform() {
        assert_eq!(plot_y(0), 0.0);
        assert!((plot_y(855) - 9.741_467).abs() < 1e-6);
        assert_eq!(plot_y(1), 1.0);
    }

    fn fake_report(fails: usize, weak: usize) -> BatteryReport {
        let mut entries = Vec::new();
        for (i, p) in [1e-12; 8]
            .iter()
            .take(fails)
            .chain([1e-3; 8].iter().take(weak))
            .chain([0.5; 8].iter())
            .enumerate()
        {
            let o: TestOutcome = serde_json::from_value(serde_json::json!({
                "test_name": format!("t{i}"), "statistic": 0.0, "p": p,
                "verdict": "pass", "profile": "dieharder-style"
            }))
            .unwrap();
            entries.push(BatteryEntry {
                suite: "s".into(),
                outcome: o.with_profile(crate::stattests::VerdictProfile::DieharderStyle),
            });
        }
        BatteryReport::from_parts("all", 1000, entries, Vec::new())
    }

    #[test]
    fn comparison_rows_and_table() {
        let mut m = BTreeMap::new();
        m.insert(LevelKey::new("lfsr", 0), fake_report(3, 1));
        m.insert(LevelKey::new("lfsr", 1), fake_report(1, 0));
        m.insert(LevelKey::new("lfsr", 2), fake_report(0, 0));
        m.insert(LevelKey::new("bad", 0), fake_report(0, 0));
        m.insert(LevelKey::new("bad", 1), fake_report(2, 0));
        let mut c = compare_levels(&m).unwrap();
        c.mark_missing(LevelKey::new("lfsr", 4));
        assert_eq!(c.improving, vec!["lfsr".to_string()]);
        let r = c.row("lfsr", 0).unwrap();
        assert_eq!((r.failed, r.weak), (3, 1));
        assert_eq!(r.y_failed, 2.0);
        assert!(!r.success && c.row("lfsr", 2).unwrap().success);
        assert!(c.verify(&m));
        let table = c.to_table();
        assert!(table.contains("3(1)"), "{table}");
        assert!(table.lines().nth(2).unwrap().trim_end().ends_with('-'), "{table}");
        assert_eq!(c.to_csv().lines().count(), 6);
        assert!(compare_levels(&BTreeMap::new()).is_err());
    }

    #[test]
    fn run_profile_on_sources() {
        let u = uniform_generate(1_000_000, 11);
        let r = run_profile(&u, Profile::Light).unwrap();
        assert!(r.failed <= 1);
        let l = lfsr_generate(1, 1_000_000).unwrap();
        assert!(run_profile(&l, Profile::All).unwrap().failed >= 1);
    }

    #[test]
    fn config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wb.json");
        std::fs::write(&p, r#"{"profile": "light", "format": "hex", "margin": 0.05}"#).unwrap();
        let c = WorkbenchConfig::load(&p).unwrap();
        assert_eq!(c.profile, Profile::Light);
        assert_eq!(c.format, StreamFormat::Hex);
        assert_eq!(c.symbol_bits, 8);
        std::fs::write(&p, r#"{"profil": "light"}"#).unwrap();
        assert!(WorkbenchConfig::load(&p).is_err());
    }
}

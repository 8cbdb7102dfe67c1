use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TestError;

/// A probability in `[0, 1]`. NaN never makes it into this type.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PValue(f64);

impl PValue {
    pub fn new(value: f64) -> Result<Self, TestError> {
        if value.is_nan() {
            return Err(TestError::NanPValue);
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(TestError::PValueOutOfRange(value));
        }
        Ok(Self(value))
    }

    /// Clamps round-off just outside `[0, 1]`; NaN is still an error.
    pub fn clamped(value: f64) -> Result<Self, TestError> {
        if value.is_nan() {
            return Err(TestError::NanPValue);
        }
        Ok(Self(value.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PValue {
    type Error = TestError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        PValue::new(v)
    }
}

impl From<PValue> for f64 {
    fn from(p: PValue) -> f64 {
        p.0
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6e}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Weak,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Weak => "weak",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Two-tailed pass/weak/fail thresholds modelled on the external suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictProfile {
    /// Fail outside `[0.005, 0.995]`, no weak band.
    NistStyle,
    /// Fail outside `[0.0005, 0.9995]`, weak in `[0.0005, 0.005] ∪ [0.995, 0.9995]`.
    DieharderStyle,
    /// Fail outside `[0.001, 0.999]`, no weak band.
    Testu01Style,
    /// Fail outside `[1e-11, 1 - 1e-11]`, weak outside `[1e-6, 1 - 1e-6]`.
    PractrandStyle,
}

/// Tail thresholds of a profile, stated as distances from 0 (and from 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    pub fail_tail: f64,
    pub weak_tail: f64,
}

impl VerdictProfile {
    pub const ALL: [VerdictProfile; 4] = [
        VerdictProfile::NistStyle,
        VerdictProfile::DieharderStyle,
        VerdictProfile::Testu01Style,
        VerdictProfile::PractrandStyle,
    ];

    pub fn bands(self) -> Bands {
        match self {
            VerdictProfile::NistStyle => Bands {
                fail_tail: 0.005,
                weak_tail: 0.005,
            },
            VerdictProfile::DieharderStyle => Bands {
                fail_tail: 0.0005,
                weak_tail: 0.005,
            },
            VerdictProfile::Testu01Style => Bands {
                fail_tail: 0.001,
                weak_tail: 0.001,
            },
            VerdictProfile::PractrandStyle => Bands {
                fail_tail: 1e-11,
                weak_tail: 1e-6,
            },
        }
    }

    /// Probability of a fail verdict when p is uniform on `[0, 1]`.
    pub fn fail_mass(self) -> f64 {
        2.0 * self.bands().fail_tail
    }

    /// Probability of a weak verdict when p is uniform on `[0, 1]`.
    pub fn weak_mass(self) -> f64 {
        let b = self.bands();
        2.0 * (b.weak_tail - b.fail_tail)
    }

    pub fn name(self) -> &'static str {
        match self {
            VerdictProfile::NistStyle => "nist-style",
            VerdictProfile::DieharderStyle => "dieharder-style",
            VerdictProfile::Testu01Style => "testu01-style",
            VerdictProfile::PractrandStyle => "practrand-style",
        }
    }
}

impl FromStr for VerdictProfile {
    type Err = TestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerdictProfile::ALL
            .into_iter()
            .find(|p| p.name() == s || p.name().trim_end_matches("-style") == s)
            .ok_or_else(|| TestError::UnknownProfile(s.to_string()))
    }
}

impl fmt::Display for VerdictProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Verdict for `p` under `profile`. Band edges belong to the milder class.
pub fn classify(p: PValue, profile: VerdictProfile) -> Verdict {
    let Bands { fail_tail, weak_tail } = profile.bands();
    let v = p.value();
    let outside = |tail: f64| v < tail || v > 1.0 - tail;
    if outside(fail_tail) {
        Verdict::Fail
    } else if weak_tail > fail_tail && (v <= weak_tail || v >= 1.0 - weak_tail) {
        Verdict::Weak
    } else {
        Verdict::Pass
    }
}

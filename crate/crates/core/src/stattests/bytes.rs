//! Byte-level tests in the style of ENT.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use super::{chi2_upper, normal_two_sided, require_bits, TestError, TestOutcome};
use crate::bitio::BitString;

/// Whole bytes of `s`, plus the number of trailing bits that were dropped.
fn whole_bytes(s: &BitString) -> (&[u8], usize) {
    let full = s.len() / 8;
    (&s.as_bytes()[..full], s.len() % 8)
}

fn byte_counts(bytes: &[u8]) -> [u64; 256] {
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    counts
}

fn tail_note(outcome: TestOutcome, dropped: usize) -> TestOutcome {
    if dropped == 0 {
        outcome
    } else {
        outcome.note(format!("{dropped} trailing bits discarded"))
    }
}

/// Chi-square of the 256 byte-value counts, 255 degrees of freedom.
///
/// The p-value is the upper tail; under a two-tailed profile a p close to 1
/// flags output that is suspiciously uniform.
pub fn chi2_bytes_p(s: &BitString) -> Result<TestOutcome, TestError> {
    require_bits("byte-chi2", 8 * 256 * 5, s.len())?;
    let (bytes, dropped) = whole_bytes(s);
    let expected = bytes.len() as f64 / 256.0;
    let chi2: f64 = byte_counts(bytes)
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(tail_note(
        TestOutcome::new("byte-chi2", chi2, chi2_upper(chi2, 255.0))?,
        dropped,
    ))
}

/// Summary statistics reported by ENT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntStatistics {
    pub shannon_bits_per_byte: f64,
    pub mean_byte: f64,
    pub monte_carlo_pi: f64,
    /// `None` when the byte sequence has zero variance.
    pub scc: Option<f64>,
    pub bytes: usize,
    pub pi_points: usize,
    pub pi_inside: usize,
}

/// Points are 6 consecutive bytes: two 24-bit coordinates, inside when
/// `x² + y² ≤ (2^24 − 1)²`.
fn monte_carlo_counts(bytes: &[u8]) -> (usize, usize) {
    let radius = ((1u64 << 24) - 1) as u128;
    let r2 = radius * radius;
    let mut inside = 0;
    let chunks = bytes.chunks_exact(6);
    let total = chunks.len();
    for c in chunks {
        let x = u64::from_be_bytes([0, 0, 0, 0, 0, c[0], c[1], c[2]]) as u128;
        let y = u64::from_be_bytes([0, 0, 0, 0, 0, c[3], c[4], c[5]]) as u128;
        if x * x + y * y <= r2 {
            inside += 1;
        }
    }
    (inside, total)
}

/// Serial correlation of successive bytes, wrapping the last onto the first.
fn serial_correlation(bytes: &[u8]) -> Option<f64> {
    let n = bytes.len() as f64;
    let (mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64);
    for (i, &b) in bytes.iter().enumerate() {
        let x = b as f64;
        let next = bytes[(i + 1) % bytes.len()] as f64;
        s1 += x;
        s2 += x * x;
        s3 += x * next;
    }
    let den = n * s2 - s1 * s1;
    if den.abs() < 1e-9 {
        return None;
    }
    Some((n * s3 - s1 * s1) / den)
}

pub fn ent_statistics(s: &BitString) -> Result<EntStatistics, TestError> {
    require_bits("ent", 8 * 6, s.len())?;
    let (bytes, _) = whole_bytes(s);
    let n = bytes.len() as f64;
    let counts = byte_counts(bytes);
    let shannon = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    let mean = bytes.iter().map(|&b| b as f64).sum::<f64>() / n;
    let (inside, total) = monte_carlo_counts(bytes);
    Ok(EntStatistics {
        shannon_bits_per_byte: shannon + 0.0,
        mean_byte: mean,
        monte_carlo_pi: 4.0 * inside as f64 / total as f64,
        scc: serial_correlation(bytes),
        bytes: bytes.len(),
        pi_points: total,
        pi_inside: inside,
    })
}

/// ENT statistics turned into p-values where a null distribution exists:
/// entropy through the G-statistic `2 N ln2 (8 − H)`, the mean by the CLT,
/// the π estimate by the binomial normal approximation and the serial
/// correlation by the Fisher transform.
pub fn ent_outcomes(s: &BitString) -> Result<Vec<TestOutcome>, TestError> {
    (0..4).map(|i| ent_outcome(s, i)).collect()
}

/// One ENT outcome: 0 entropy, 1 mean, 2 π, 3 serial correlation.
pub(crate) fn ent_outcome(s: &BitString, which: usize) -> Result<TestOutcome, TestError> {
    require_bits("ent", 8 * 256 * 5, s.len())?;
    let stats = ent_statistics(s)?;
    let n = stats.bytes as f64;
    let outcome = match which {
        0 => {
            let g = 2.0 * n * LN_2 * (8.0 - stats.shannon_bits_per_byte);
            TestOutcome::new(
                "ent-entropy",
                stats.shannon_bits_per_byte,
                chi2_upper(g.max(0.0), 255.0),
            )?
        }
        1 => {
            // uniform bytes: mean 127.5, variance (256² − 1) / 12
            let z = (stats.mean_byte - 127.5) / ((256.0f64 * 256.0 - 1.0) / 12.0 / n).sqrt();
            TestOutcome::new("ent-mean", stats.mean_byte, normal_two_sided(z))?
        }
        2 => {
            let q = PI / 4.0;
            let pts = stats.pi_points as f64;
            let z = (stats.pi_inside as f64 - pts * q) / (pts * q * (1.0 - q)).sqrt();
            TestOutcome::new("ent-pi", stats.monte_carlo_pi, normal_two_sided(z))?
        }
        _ => {
            let r = stats.scc.ok_or(TestError::ZeroVariance)?;
            let z = r.clamp(-0.999_999, 0.999_999).atanh() * (n - 3.0).sqrt();
            TestOutcome::new("ent-scc", r, normal_two_sided(z))?
        }
    };
    Ok(tail_note(outcome, s.len() % 8))
}

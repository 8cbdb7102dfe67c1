use statrs::function::erf::erfc;

use super::{chi2_upper, require_bits, TestError, TestOutcome};
use crate::bitio::BitString;

/// Frequency (monobit) test: `S = #ones − #zeros`, `p = erfc(|S| / sqrt(2n))`.
pub fn monobit_p(s: &BitString) -> Result<TestOutcome, TestError> {
    let n = s.len();
    require_bits("monobit", 100, n)?;
    let ones = s.count_ones() as i64;
    let sum = 2 * ones - n as i64;
    let p = erfc((sum as f64).abs() / (2.0 * n as f64).sqrt());
    TestOutcome::new("monobit", sum as f64, p)
}

/// Block frequency test over `block_len`-bit blocks.
pub fn block_frequency_p(s: &BitString, block_len: usize) -> Result<TestOutcome, TestError> {
    if block_len == 0 {
        return Err(TestError::BadParameter {
            test: "block-frequency",
            reason: "block length 0".into(),
        });
    }
    require_bits("block-frequency", 100 * block_len, s.len())?;
    let bits = s.to_bit_values();
    let blocks = bits.len() / block_len;
    let chi2: f64 = bits
        .chunks_exact(block_len)
        .map(|blk| {
            let ones = blk.iter().filter(|&&b| b == 1).count() as f64;
            let d = ones / block_len as f64 - 0.5;
            d * d
        })
        .sum::<f64>()
        * 4.0
        * block_len as f64;
    TestOutcome::new("block-frequency", chi2, chi2_upper(chi2, blocks as f64))
}

/// Runs test. Requires the ones-proportion within `2/sqrt(n)` of one half.
pub fn runs_p(s: &BitString) -> Result<TestOutcome, TestError> {
    let n = s.len();
    require_bits("runs", 100, n)?;
    let pi = s.count_ones() as f64 / n as f64;
    let tau = 2.0 / (n as f64).sqrt();
    if (pi - 0.5).abs() >= tau {
        return Err(TestError::NotApplicable {
            test: "runs",
            reason: format!("ones proportion {pi:.4} outside 1/2 ± {tau:.4}"),
        });
    }
    let bits = s.to_bit_values();
    let runs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let v = runs as f64;
    let nf = n as f64;
    let num = (v - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    TestOutcome::new("runs", v, erfc(num / den))
}

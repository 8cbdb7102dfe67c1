//! Second-level analysis of many first-level p-values.

use serde::Serialize;

use super::{chi2_upper, PValue, TestError};

/// Uniformity threshold for the 10-bin chi-square over p-values.
pub const UNIFORMITY_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLevelResult {
    pub count: usize,
    pub uniformity_chi2: f64,
    pub uniformity_p: f64,
    pub proportion: f64,
    /// Acceptance band `0.99 ± 3·sqrt(0.99·0.01/count)`.
    pub band: (f64, f64),
    pub uniformity_pass: bool,
    pub proportion_pass: bool,
    pub overall: bool,
}

/// Uniformity (10 equal bins) and proportion (p in `[0.005, 0.995]`) checks.
pub fn nist_two_level(pvals: &[PValue]) -> Result<TwoLevelResult, TestError> {
    let n = pvals.len();
    if n < 10 {
        return Err(TestError::TooFewPValues { needed: 10, got: n });
    }
    let mut bins = [0usize; 10];
    for p in pvals {
        bins[((p.value() * 10.0) as usize).min(9)] += 1;
    }
    let e = n as f64 / 10.0;
    let chi2: f64 = bins.iter().map(|&f| (f as f64 - e).powi(2) / e).sum();
    let uniformity_p = chi2_upper(chi2, 9.0);

    let inside = pvals.iter().filter(|p| (0.005..=0.995).contains(&p.value())).count();
    let proportion = inside as f64 / n as f64;
    let half = 3.0 * (0.99 * 0.01 / n as f64).sqrt();
    let band = (0.99 - half, 0.99 + half);
    let uniformity_pass = uniformity_p >= UNIFORMITY_THRESHOLD;
    let proportion_pass = proportion >= band.0 && proportion <= band.1;
    Ok(TwoLevelResult {
        count: n,
        uniformity_chi2: chi2,
        uniformity_p,
        proportion,
        band,
        uniformity_pass,
        proportion_pass,
        overall: uniformity_pass && proportion_pass,
    })
}

/// Type-2 error of a conjunction of independent tests: the product.
pub fn combine_type2(per_test: &[f64]) -> Result<f64, TestError> {
    per_test.iter().try_fold(1.0, |acc, &p| {
        if p.is_nan() || !(0.0..=1.0).contains(&p) {
            Err(TestError::ProbabilityOutOfRange(p))
        } else {
            Ok(acc * p)
        }
    })
}

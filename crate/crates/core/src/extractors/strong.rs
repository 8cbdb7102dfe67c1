//! Exhaustive strong-extractor distance for toy sizes.

use super::{CirculantPlan, ExtractorError};
use crate::bitio::BitString;

/// Largest output width handled by [`strong_distance`].
pub const MAX_DEMO_BITS: usize = 16;

/// `Δ((Ext(X, Y), Y), (U_m, Y))` with `X` flat on `xs` and `Y` flat on `ys`,
/// by full enumeration. Equals the average over seeds of the distance of
/// `Ext(X, y)` from uniform.
pub fn strong_distance(xs: &[BitString], ys: &[BitString], m: usize) -> Result<f64, ExtractorError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(ExtractorError::EmptySupport);
    }
    if m == 0 || m > MAX_DEMO_BITS {
        return Err(ExtractorError::OutputLength { m, n: MAX_DEMO_BITS });
    }
    let cells = 1usize << m;
    let uniform = 1.0 / cells as f64;
    let mut total = 0.0;
    for y in ys {
        let plan = CirculantPlan::new(y)?;
        let mut counts = vec![0usize; cells];
        for x in xs {
            let out = plan.extract(x, m)?;
            let z = out.iter().fold(0usize, |a, b| (a << 1) | b as usize);
            counts[z] += 1;
        }
        let sd: f64 = counts
            .iter()
            .map(|&c| (c as f64 / xs.len() as f64 - uniform).abs())
            .sum::<f64>()
            / 2.0;
        total += sd;
    }
    Ok(total / ys.len() as f64)
}

/// Every bit string of length `n`, in counting order.
pub fn all_strings(n: usize) -> Vec<BitString> {
    assert!(n < 24, "enumeration of 2^{n} strings");
    (0..1u32 << n)
        .map(|v| (0..n).map(|i| v >> (n - 1 - i) & 1 == 1).collect())
        .collect()
}

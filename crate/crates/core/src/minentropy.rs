//! Min-entropy definitions, a most-common-value estimator and the 7σ lower
//! bound on the per-bit min-entropy rate.
//!
//! The arithmetic is generic over [`num_traits::Float`]; the crate root
//! re-exports `f64` aliases.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitString;

/// Sigma multiplier of the default lower bound.
pub const DEFAULT_SIGMAS: f64 = 7.0;
/// Failure probability reported for the 7σ rule.
pub const EPS_EST_7SIGMA: f64 = 1.0 / (1u64 << 39) as f64;
/// 99% one-sided normal quantile used by the MCV upper bound.
const MCV_Z: f64 = 2.576;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("probabilities must be nonnegative and sum to 1 (sum {0})")]
    InvalidDistribution(f64),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("min-entropy {k} exceeds length {n}")]
    EntropyExceedsLength { k: f64, n: usize },
    #[error("length must be at least 1")]
    ZeroLength,
    #[error("need at least {needed} bits for {symbol_bits}-bit symbols, got {got}")]
    SampleTooSmall {
        symbol_bits: usize,
        needed: usize,
        got: usize,
    },
    #[error("symbol width {0} not in 1..=16")]
    BadSymbolWidth(usize),
    #[error("need at least 2 estimates, got {0}")]
    TooFewEstimates(usize),
    #[error("estimate {0} outside [0, 1]")]
    EstimateOutOfRange(f64),
}

fn to_f64<T: Float>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn from_f64<T: Float>(x: f64) -> T {
    T::from(x).unwrap_or_else(T::nan)
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Float> Distribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self, EntropyError> {
        if probs.is_empty() {
            return Err(EntropyError::EmptyDistribution);
        }
        let sum = probs.iter().fold(T::zero(), |a, &p| a + p);
        let tol = (T::epsilon() * from_f64(4.0 * probs.len() as f64)).max(from_f64(1e-12));
        if probs.iter().any(|p| p.is_nan() || *p < T::zero()) || (sum - T::one()).abs() > tol {
            return Err(EntropyError::InvalidDistribution(to_f64(sum)));
        }
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Result<Self, EntropyError> {
        Self::new(vec![T::one() / from_f64(size as f64); size])
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }
}

/// `H∞ = −log2 max p`.
pub fn min_entropy<T: Float>(d: &Distribution<T>) -> T {
    let max = d.probs.iter().fold(T::zero(), |a, &p| a.max(p));
    -max.log2() + T::zero()
}

/// Min-entropy per bit, `k / n`.
pub fn min_entropy_rate<T: Float>(k: T, n: usize) -> Result<T, EntropyError> {
    if n == 0 {
        return Err(EntropyError::ZeroLength);
    }
    let nf: T = from_f64(n as f64);
    if k.is_nan() || k < T::zero() || k > nf {
        return Err(EntropyError::EntropyExceedsLength { k: to_f64(k), n });
    }
    Ok(k / nf)
}

/// Most-common-value estimate with its intermediate quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McvEstimate {
    pub symbols: usize,
    pub symbol_bits: usize,
    pub p_hat: f64,
    pub p_upper: f64,
    /// Min-entropy per bit.
    pub estimate: f64,
}

/// Most-common-value min-entropy estimate per bit over non-overlapping
/// `symbol_bits`-wide symbols, using a 99% upper bound on the top frequency.
pub fn mcv_estimate(s: &BitString, symbol_bits: usize) -> Result<McvEstimate, EntropyError> {
    if !(1..=16).contains(&symbol_bits) {
        return Err(EntropyError::BadSymbolWidth(symbol_bits));
    }
    let needed = symbol_bits * 1000;
    if s.len() < needed {
        return Err(EntropyError::SampleTooSmall {
            symbol_bits,
            needed,
            got: s.len(),
        });
    }
    let n = s.len() / symbol_bits;
    let mut counts = vec![0u64; 1 << symbol_bits];
    let mut bits = s.iter();
    for _ in 0..n {
        let sym = (0..symbol_bits).fold(0usize, |acc, _| (acc << 1) | bits.next().unwrap_or(false) as usize);
        counts[sym] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    Ok(mcv_from_counts(top, n, symbol_bits))
}

fn mcv_from_counts(top: u64, n: usize, symbol_bits: usize) -> McvEstimate {
    let p_hat = top as f64 / n as f64;
    let p_upper = (p_hat + MCV_Z * (p_hat * (1.0 - p_hat) / n as f64).sqrt()).min(1.0);
    McvEstimate {
        symbols: n,
        symbol_bits,
        p_hat,
        p_upper,
        estimate: -p_upper.log2() / symbol_bits as f64 + 0.0,
    }
}

/// Sample standard deviation with Bessel's correction.
pub fn sample_sigma<T: Float>(estimates: &[T]) -> Result<T, EntropyError> {
    let n = estimates.len();
    if n < 2 {
        return Err(EntropyError::TooFewEstimates(n));
    }
    let mean = mean(estimates);
    let ss = estimates.iter().fold(T::zero(), |a, &e| a + (mean - e) * (mean - e));
    Ok((ss / from_f64((n - 1) as f64)).sqrt())
}

fn mean<T: Float>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &x| a + x) / from_f64(xs.len() as f64)
}

/// Per-sample estimates summarized into a lower-bounded rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyAssessment<T> {
    pub per_sample_estimates: Vec<T>,
    pub mean_est: T,
    pub sigma: T,
    pub sigma_multiplier: T,
    /// `mean_est − z·sigma` clipped to `[0, 1]`.
    pub alpha: T,
    pub alpha_unclipped: T,
    pub clipped: bool,
    pub eps_est: f64,
}

/// `α = mean − 7σ` with ε_est = 2^−39.
pub fn lower_bound_alpha<T: Float>(estimates: &[T]) -> Result<EntropyAssessment<T>, EntropyError> {
    let mut a = lower_bound_alpha_z(estimates, from_f64(DEFAULT_SIGMAS))?;
    a.eps_est = EPS_EST_7SIGMA;
    Ok(a)
}

/// `α = mean − z·σ`; ε_est is the one-sided normal tail beyond `z`.
pub fn lower_bound_alpha_z<T: Float>(estimates: &[T], z: T) -> Result<EntropyAssessment<T>, EntropyError> {
    if let Some(bad) = estimates
        .iter()
        .find(|e| e.is_nan() || **e < T::zero() || **e > T::one())
    {
        return Err(EntropyError::EstimateOutOfRange(to_f64(*bad)));
    }
    let sigma = sample_sigma(estimates)?;
    let mean_est = mean(estimates);
    let (alpha, alpha_unclipped, clipped) = alpha_from_moments(mean_est, sigma, z);
    Ok(EntropyAssessment {
        per_sample_estimates: estimates.to_vec(),
        mean_est,
        sigma,
        sigma_multiplier: z,
        alpha,
        alpha_unclipped,
        clipped,
        eps_est: normal_tail(to_f64(z)),
    })
}

/// `(clipped α, raw α, clip flag)` for `mean − z·sigma`.
pub fn alpha_from_moments<T: Float>(mean_est: T, sigma: T, z: T) -> (T, T, bool) {
    let raw = mean_est - z * sigma;
    let clipped = raw.max(T::zero()).min(T::one());
    (clipped, raw, clipped != raw)
}

/// `P(Z > z)` for a standard normal.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

//! Circulant extractor: cyclic GF(2) convolution of a zero-padded input with
//! a prime-length seed.
//!
//! With `x′ = x‖0` of length `N = n + 1`, output bit `k` is
//! `c_k = ⊕_j x′_j · y_{(k−j) mod N}`. The fast path computes the integer
//! linear convolution with an NTT, folds it to length `N` and reduces mod 2;
//! every coefficient stays below `N`, far under the modulus.

use super::ntt::{pointwise, Ntt, MAX_LOG};
use super::ExtractorError;
use crate::bitio::BitString;

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Largest prime `≤ n`, if any.
pub fn largest_prime_at_most(n: usize) -> Option<usize> {
    (2..=n).rev().find(|&p| is_prime(p))
}

/// A seed with its transform precomputed, reusable across rounds.
#[derive(Debug, Clone)]
pub struct CirculantPlan {
    seed_len: usize,
    ntt: Ntt,
    seed_hat: Vec<u32>,
}

impl CirculantPlan {
    pub fn new(y: &BitString) -> Result<Self, ExtractorError> {
        let n = y.len();
        if !is_prime(n) {
            return Err(ExtractorError::SeedNotPrime(n));
        }
        let log = (2 * n - 1).next_power_of_two().trailing_zeros();
        if log > MAX_LOG {
            return Err(ExtractorError::SeedTooLong(n));
        }
        let ntt = Ntt::new(log);
        let mut seed_hat = vec![0u32; ntt.size()];
        for (slot, bit) in seed_hat.iter_mut().zip(y.iter()) {
            *slot = bit as u32;
        }
        ntt.forward(&mut seed_hat);
        Ok(Self {
            seed_len: n,
            ntt,
            seed_hat,
        })
    }

    pub fn seed_len(&self) -> usize {
        self.seed_len
    }

    /// Input length accepted by [`CirculantPlan::extract`], one less than the seed.
    pub fn input_len(&self) -> usize {
        self.seed_len - 1
    }

    /// First `m` bits of the cyclic convolution of `x‖0` with the seed.
    pub fn extract(&self, x: &BitString, m: usize) -> Result<BitString, ExtractorError> {
        let n = self.seed_len;
        if x.len() != n - 1 {
            return Err(ExtractorError::LengthMismatch {
                input: x.len(),
                seed: n,
            });
        }
        if m == 0 || m > n - 1 {
            return Err(ExtractorError::OutputLength { m, n: n - 1 });
        }
        let mut buf = vec![0u32; self.ntt.size()];
        for (slot, bit) in buf.iter_mut().zip(x.iter()) {
            *slot = bit as u32;
        }
        self.ntt.forward(&mut buf);
        pointwise(&mut buf, &self.seed_hat);
        self.ntt.inverse(&mut buf);
        Ok((0..m).map(|k| (buf[k] + buf[k + n]) & 1 == 1).collect())
    }
}

/// One-shot circulant extraction; see [`CirculantPlan`] for seed reuse.
pub fn circulant_core(x: &BitString, y: &BitString, m: usize) -> Result<BitString, ExtractorError> {
    CirculantPlan::new(y)?.extract(x, m)
}

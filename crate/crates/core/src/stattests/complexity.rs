//! Linear complexity test over Berlekamp–Massey.

use super::{chi2_upper, require_bits, TestError, TestOutcome};
use crate::bitio::BitString;

/// Bin probabilities of the deviation statistic T under the null.
const PI: [f64; 7] = [
    1.0 / 96.0,
    1.0 / 32.0,
    1.0 / 8.0,
    1.0 / 2.0,
    1.0 / 4.0,
    1.0 / 16.0,
    1.0 / 48.0,
];

/// Bit vector packed LSB-first into u64 words.
#[derive(Clone)]
struct Poly(Vec<u64>);

impl Poly {
    fn unit(bits: usize) -> Self {
        let mut v = vec![0u64; bits / 64 + 2];
        v[0] = 1;
        Poly(v)
    }

    /// self ^= other << shift
    fn xor_shifted(&mut self, other: &Poly, shift: usize) {
        let (w, b) = (shift / 64, shift % 64);
        let n = self.0.len();
        for (i, &o) in other.0.iter().enumerate() {
            if o == 0 {
                continue;
            }
            if i + w < n {
                self.0[i + w] ^= o << b;
            }
            if b != 0 && i + w + 1 < n {
                self.0[i + w + 1] ^= o >> (64 - b);
            }
        }
    }
}

/// 64 bits of `v` starting at bit `off`, zero beyond the end.
#[inline]
fn word_at(v: &[u64], off: usize) -> u64 {
    let (w, b) = (off / 64, off % 64);
    let lo = v.get(w).copied().unwrap_or(0) >> b;
    if b == 0 {
        lo
    } else {
        lo | v.get(w + 1).copied().unwrap_or(0) << (64 - b)
    }
}

/// Length of the shortest LFSR generating `bits` (each 0 or 1).
pub fn berlekamp_massey(bits: &[u8]) -> usize {
    let n = bits.len();
    if n == 0 {
        return 0;
    }
    // rev[k] = s_{n-1-k}, so the window s_N, s_{N-1}, ..., s_{N-L} is rev[n-1-N ..= n-1-N+L]
    let mut rev = vec![0u64; n / 64 + 2];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            let k = n - 1 - i;
            rev[k / 64] |= 1 << (k % 64);
        }
    }
    let mut c = Poly::unit(n);
    let mut b = Poly::unit(n);
    let mut l = 0usize;
    let mut m: isize = -1;
    for big_n in 0..n {
        let off = n - 1 - big_n;
        let mut acc = 0u64;
        let words = l / 64 + 1;
        for w in 0..words {
            let mut x = c.0[w] & word_at(&rev, off + 64 * w);
            if w == words - 1 {
                let keep = (l + 1) - 64 * w;
                if keep < 64 {
                    x &= (1u64 << keep) - 1;
                }
            }
            acc ^= x;
        }
        if acc.count_ones() % 2 == 1 {
            let t = c.clone();
            c.xor_shifted(&b, (big_n as isize - m) as usize);
            if 2 * l <= big_n {
                l = big_n + 1 - l;
                m = big_n as isize;
                b = t;
            }
        }
    }
    l
}

fn expected_complexity(m: usize) -> f64 {
    let mf = m as f64;
    let sign = if m % 2 == 0 { -1.0 } else { 1.0 }; // (−1)^{M+1}
    mf / 2.0 + (9.0 + sign) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powi(m.min(1000) as i32)
}

fn bin_of(t: f64) -> usize {
    match t {
        t if t <= -2.5 => 0,
        t if t <= -1.5 => 1,
        t if t <= -0.5 => 2,
        t if t <= 0.5 => 3,
        t if t <= 1.5 => 4,
        t if t <= 2.5 => 5,
        _ => 6,
    }
}

/// Linear complexity test with `block_len`-bit blocks, `block_len ∈ [500, 5000]`.
pub fn linear_complexity_p(s: &BitString, block_len: usize) -> Result<TestOutcome, TestError> {
    if !(500..=5000).contains(&block_len) {
        return Err(TestError::BadParameter {
            test: "linear-complexity",
            reason: format!("block length {block_len} not in 500..=5000"),
        });
    }
    require_bits("linear-complexity", 100 * block_len, s.len())?;
    let bits = s.to_bit_values();
    let mu = expected_complexity(block_len);
    let sign = if block_len % 2 == 0 { 1.0 } else { -1.0 };
    let mut counts = [0u64; 7];
    let blocks = bits.len() / block_len;
    for blk in bits.chunks_exact(block_len) {
        let l = berlekamp_massey(blk) as f64;
        counts[bin_of(sign * (l - mu) + 2.0 / 9.0)] += 1;
    }
    let nb = blocks as f64;
    let chi2: f64 = counts
        .iter()
        .zip(PI)
        .map(|(&v, p)| {
            let d = v as f64 - nb * p;
            d * d / (nb * p)
        })
        .sum();
    TestOutcome::new("linear-complexity", chi2, chi2_upper(chi2, 6.0))
}

//! Number-theoretic transform over the prime 998244353 = 119·2^23 + 1.

pub(crate) const MODULUS: u64 = 998_244_353;
const GENERATOR: u64 = 3;
/// Largest supported transform size, 2^23.
pub(crate) const MAX_LOG: u32 = 23;

fn pow_mod(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1;
    b %= MODULUS;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % MODULUS;
        }
        b = b * b % MODULUS;
        e >>= 1;
    }
    r
}

/// Twiddle tables for one transform size.
#[derive(Debug, Clone)]
pub(crate) struct Ntt {
    log: u32,
    roots: Vec<u32>,
    inv_roots: Vec<u32>,
    inv_size: u64,
}

impl Ntt {
    /// Transform of size `2^log`; panics above `2^23`.
    pub(crate) fn new(log: u32) -> Self {
        assert!(log <= MAX_LOG, "transform size 2^{log} unsupported");
        let n = 1usize << log;
        let w = pow_mod(GENERATOR, (MODULUS - 1) >> log);
        let wi = pow_mod(w, MODULUS - 2);
        // roots[k] = w^k for k < n/2, shared by every stage through striding
        let half = (n / 2).max(1);
        let mut roots = Vec::with_capacity(half);
        let mut inv_roots = Vec::with_capacity(half);
        let (mut a, mut b) = (1u64, 1u64);
        for _ in 0..half {
            roots.push(a as u32);
            inv_roots.push(b as u32);
            a = a * w % MODULUS;
            b = b * wi % MODULUS;
        }
        Self {
            log,
            roots,
            inv_roots,
            inv_size: pow_mod(n as u64, MODULUS - 2),
        }
    }

    pub(crate) fn size(&self) -> usize {
        1 << self.log
    }

    pub(crate) fn forward(&self, a: &mut [u32]) {
        self.transform(a, &self.roots);
    }

    pub(crate) fn inverse(&self, a: &mut [u32]) {
        self.transform(a, &self.inv_roots);
        for v in a.iter_mut() {
            *v = (*v as u64 * self.inv_size % MODULUS) as u32;
        }
    }

    fn transform(&self, a: &mut [u32], roots: &[u32]) {
        let n = self.size();
        assert_eq!(a.len(), n);
        let mut j = 0;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                a.swap(i, j);
            }
        }
        let m = MODULUS as u32;
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            let half = len / 2;
            for chunk in a.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for k in 0..half {
                    let u = lo[k];
                    let v = (hi[k] as u64 * roots[k * stride] as u64 % MODULUS) as u32;
                    let s = u + v;
                    lo[k] = if s >= m { s - m } else { s };
                    hi[k] = if u >= v { u - v } else { u + m - v };
                }
            }
            len <<= 1;
        }
    }
}

/// Pointwise product in place: `a[i] = a[i]·b[i] mod p`.
pub(crate) fn pointwise(a: &mut [u32], b: &[u32]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = (*x as u64 * y as u64 % MODULUS) as u32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_convolution() {
        let t = Ntt::new(4);
        let a0: Vec<u32> = (0..16).map(|i| (i * 7 + 3) % 11).collect();
        let mut a = a0.clone();
        t.forward(&mut a);
        t.inverse(&mut a);
        assert_eq!(a, a0);

        // (1 + 2x + 3x²)(4 + 5x) = 4 + 13x + 22x² + 15x³
        let mut p = vec![0u32; 16];
        let mut q = vec![0u32; 16];
        p[..3].copy_from_slice(&[1, 2, 3]);
        q[..2].copy_from_slice(&[4, 5]);
        t.forward(&mut p);
        t.forward(&mut q);
        pointwise(&mut p, &q);
        t.inverse(&mut p);
        assert_eq!(&p[..5], &[4, 13, 22, 15, 0]);
    }

    #[test]
    fn primitive_root_order() {
        let w = pow_mod(GENERATOR, (MODULUS - 1) >> MAX_LOG);
        assert_eq!(pow_mod(w, 1 << MAX_LOG), 1);
        assert_ne!(pow_mod(w, 1 << (MAX_LOG - 1)), 1);
    }
}

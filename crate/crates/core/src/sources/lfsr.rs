//! Fibonacci shift registers with XNOR (affine) feedback.
//!
//! Register bits are numbered `b1..bW`. One step emits `b1`, computes
//! `f = XOR of the tapped bits ⊕ 1`, moves every bit one place up
//! (`b_i ← b_{i-1}`, from `i = W` down to 2) and stores `f` in `b1`.
//! Internally `b1` is the most significant bit of the `W`-bit word, so a hex
//! seed reads in the same MSB-first order as every bit stream in the crate.

use super::SourceError;
use crate::bitio::BitString;

/// Tap layout of a register. Taps are 1-based bit positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrSpec {
    pub width: u32,
    pub taps: Vec<u32>,
    /// XNOR feedback (the `⊕ 1` term).
    pub affine: bool,
}

impl LfsrSpec {
    /// The 32-bit register with feedback `b32 ⊕ b22 ⊕ b2 ⊕ b1 ⊕ 1`.
    pub fn reference32() -> Self {
        Self {
            width: 32,
            taps: vec![32, 22, 2, 1],
            affine: true,
        }
    }

    /// 8-bit register with maximal-length taps 8, 6, 5, 4 (period 255).
    pub fn analog8() -> Self {
        Self {
            width: 8,
            taps: vec![8, 6, 5, 4],
            affine: true,
        }
    }

    fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    fn tap_mask(&self) -> u64 {
        self.taps.iter().fold(0u64, |m, &t| m | 1u64 << (self.width - t))
    }

    /// The state the update maps to itself, if any.
    ///
    /// With XNOR feedback and an even number of taps this is the all-ones
    /// register; with XOR feedback it is all-zeros.
    pub fn lockup_state(&self) -> Option<u64> {
        [0u64, self.mask()]
            .into_iter()
            .find(|&s| next_state(self.width, self.tap_mask(), self.affine, s) == s)
    }
}

#[inline]
fn next_state(width: u32, tap_mask: u64, affine: bool, state: u64) -> u64 {
    let f = ((state & tap_mask).count_ones() as u64 & 1) ^ affine as u64;
    (state >> 1) | (f << (width - 1))
}

/// Register contents plus the number of steps taken so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LfsrState {
    /// `b1` in the most significant of the low `width` bits.
    pub bits: u64,
    pub step_count: u64,
}

impl LfsrState {
    /// Bit `b_i`, 1-based.
    pub fn bit(&self, width: u32, i: u32) -> bool {
        (self.bits >> (width - i)) & 1 == 1
    }
}

#[derive(Debug, Clone)]
pub struct Lfsr {
    spec: LfsrSpec,
    tap_mask: u64,
    state: LfsrState,
}

impl Lfsr {
    pub fn new(spec: LfsrSpec, seed: u64) -> Result<Self, SourceError> {
        if spec.width == 0 || spec.width > 64 || spec.taps.iter().any(|&t| t == 0 || t > spec.width) {
            return Err(SourceError::BadLfsrSpec);
        }
        if seed & !spec.mask() != 0 {
            return Err(SourceError::SeedTooWide { width: spec.width });
        }
        if spec.lockup_state() == Some(seed) {
            return Err(SourceError::LockupState(seed));
        }
        Ok(Self {
            tap_mask: spec.tap_mask(),
            spec,
            state: LfsrState {
                bits: seed,
                step_count: 0,
            },
        })
    }

    /// The reference 32-bit register.
    pub fn reference32(seed: u32) -> Result<Self, SourceError> {
        Self::new(LfsrSpec::reference32(), seed as u64)
    }

    pub fn state(&self) -> LfsrState {
        self.state
    }

    pub fn spec(&self) -> &LfsrSpec {
        &self.spec
    }

    /// Runs one step and returns the emitted bit (`b1` before the update).
    #[inline]
    pub fn step(&mut self) -> bool {
        let w = self.spec.width;
        let out = (self.state.bits >> (w - 1)) & 1 == 1;
        self.state.bits = next_state(w, self.tap_mask, self.spec.affine, self.state.bits);
        self.state.step_count += 1;
        out
    }

    pub fn generate(&mut self, n: usize) -> BitString {
        let mut out = BitString::with_capacity(n);
        for _ in 0..n {
            out.push(self.step());
        }
        out
    }
}

/// `n` output bits of the reference 32-bit register started from `seed`.
pub fn lfsr_generate(seed: u32, n: usize) -> Result<BitString, SourceError> {
    if n == 0 {
        return Err(SourceError::ZeroLength);
    }
    Ok(Lfsr::reference32(seed)?.generate(n))
}

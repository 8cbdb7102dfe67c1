//! Reference randomness sources.

mod beacon;
mod lfsr;

pub use beacon::{
    beacon_seed, parse_pulse, BeaconPulse, BeaconSeed, FixturePulseSource, HttpPulseSource, PulseSource,
    OUTPUT_VALUE_HEX_CHARS,
};
pub use lfsr::{lfsr_generate, Lfsr, LfsrSpec, LfsrState};

use rand::distributions::{Bernoulli, Distribution};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::bitio::BitString;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("requested zero bits")]
    ZeroLength,
    #[error("probability {0} is not inside (0, 1)")]
    BadProbability(f64),
    #[error("register seed {0:#x} is the lockup state of the feedback")]
    LockupState(u64),
    #[error("seed does not fit in a {width}-bit register")]
    SeedTooWide { width: u32 },
    #[error("invalid register description")]
    BadLfsrSpec,
    #[error("beacon request failed: {0}")]
    Http(String),
    #[error("malformed beacon pulse: {0}")]
    MalformedPulse(String),
    #[error("no pulse {0} available")]
    MissingPulse(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `n` independent bits, each 0 with probability `p0`, reproducible from `rng_seed`.
pub fn biased_iid_generate(p0: f64, n: usize, rng_seed: u64) -> Result<BitString, SourceError> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(SourceError::BadProbability(p0));
    }
    if n == 0 {
        return Err(SourceError::ZeroLength);
    }
    let one = Bernoulli::new(1.0 - p0).map_err(|_| SourceError::BadProbability(p0))?;
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    Ok((0..n).map(|_| one.sample(&mut rng)).collect())
}

/// `n` uniform bits from a seeded ChaCha stream; the null-hypothesis fixture.
pub fn uniform_generate(n: usize, rng_seed: u64) -> BitString {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let mut bytes = vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    BitString::from_bytes(bytes, n)
}

//! Randomness extractors and their parameter calculators.

mod circulant;
mod ntt;
mod params;
mod strong;
mod vonneumann;

pub use circulant::{circulant_core, is_prime, largest_prime_at_most, CirculantPlan};
pub use params::{eps_budget, output_length, EpsTerm, EpsilonBudget, DEFAULT_EPS_ROUND, EPS_TARGET};
pub use strong::{all_strings, strong_distance};
pub use vonneumann::von_neumann;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractorError {
    #[error("seed length {0} is not prime")]
    SeedNotPrime(usize),
    #[error("seed length {0} exceeds the transform limit")]
    SeedTooLong(usize),
    #[error("input of {input} bits does not match a {seed}-bit seed (need seed − 1)")]
    LengthMismatch { input: usize, seed: usize },
    #[error("output length {m} not in 1..={n}")]
    OutputLength { m: usize, n: usize },
    #[error("min-entropy {k} outside [0, {max}]")]
    EntropyOutOfRange { k: f64, max: f64 },
    #[error("probability {0} not in (0, 1)")]
    BadProbability(f64),
    #[error("the Von Neumann extractor has no a-priori output length")]
    NoLengthFormula,
    #[error("empty support")]
    EmptySupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    VonNeumann,
    CirculantSeeded,
    CirculantTwoSource,
}

impl fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractorKind::VonNeumann => "von-neumann",
            ExtractorKind::CirculantSeeded => "circulant-seeded",
            ExtractorKind::CirculantTwoSource => "circulant-two-source",
        })
    }
}

/// Parameters of one extraction round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorJob {
    pub kind: ExtractorKind,
    pub n_input: usize,
    pub n_seed: usize,
    pub k1: f64,
    pub k2: f64,
    pub eps_round: f64,
    pub m_out: usize,
}

impl ExtractorJob {
    /// A circulant job with `m_out` from [`output_length`].
    pub fn circulant(
        kind: ExtractorKind,
        n_input: usize,
        k1: f64,
        k2: f64,
        eps_round: f64,
    ) -> Result<Self, ExtractorError> {
        if !is_prime(n_input + 1) {
            return Err(ExtractorError::SeedNotPrime(n_input + 1));
        }
        let k2 = if kind == ExtractorKind::CirculantSeeded {
            (n_input + 1) as f64
        } else {
            k2
        };
        let m_out = output_length(kind, n_input, k1, k2, eps_round)?;
        Ok(Self {
            kind,
            n_input,
            n_seed: n_input + 1,
            k1,
            k2,
            eps_round,
            m_out,
        })
    }

    /// Checks the structural invariants of the job.
    pub fn is_consistent(&self) -> bool {
        match self.kind {
            ExtractorKind::VonNeumann => self.n_seed == 0 && self.eps_round == 0.0 && self.m_out <= self.n_input / 2,
            _ => self.n_seed == self.n_input + 1 && is_prime(self.n_seed) && self.m_out <= self.n_input,
        }
    }
}

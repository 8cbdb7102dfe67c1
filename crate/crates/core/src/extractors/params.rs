//! Output length and ε accounting.

use serde::{Deserialize, Serialize};

use super::{ExtractorError, ExtractorKind};

/// Total failure probability allowed for a pipeline, 2^−32.
pub const EPS_TARGET: f64 = 1.0 / 4_294_967_296.0;
/// Per-round extractor error used by the pipelines, 2^−64.
pub const DEFAULT_EPS_ROUND: f64 = 1.0 / 18_446_744_073_709_551_616.0;

/// `m = max(0, ⌊k1 + k2 − (n+1) − 2·log2(1/ε)⌋)`, capped at `n`.
///
/// The seeded kind ignores `k2` and uses a perfect seed, `k2 = n + 1`.
pub fn output_length(kind: ExtractorKind, n: usize, k1: f64, k2: f64, eps: f64) -> Result<usize, ExtractorError> {
    if kind == ExtractorKind::VonNeumann {
        return Err(ExtractorError::NoLengthFormula);
    }
    let seed = (n + 1) as f64;
    let k2 = if kind == ExtractorKind::CirculantSeeded {
        seed
    } else {
        k2
    };
    if !(0.0..=n as f64).contains(&k1) {
        return Err(ExtractorError::EntropyOutOfRange { k: k1, max: n as f64 });
    }
    if !(0.0..=seed).contains(&k2) {
        return Err(ExtractorError::EntropyOutOfRange { k: k2, max: seed });
    }
    check_probability(eps)?;
    let m = (k1 + k2 - seed - 2.0 * (1.0 / eps).log2()).floor();
    Ok(if m <= 0.0 { 0 } else { (m as usize).min(n) })
}

fn check_probability(p: f64) -> Result<(), ExtractorError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ExtractorError::BadProbability(p))
    }
}

/// A group of equal ε contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsTerm {
    pub label: String,
    pub count: u64,
    pub eps: f64,
}

/// `ε_total = ε_est + Σ count·ε` against the 2^−32 target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    pub eps_est: f64,
    pub per_round: Vec<EpsTerm>,
    pub eps_total: f64,
    pub target: f64,
    pub satisfied: bool,
}

impl EpsilonBudget {
    pub fn new(eps_est: f64) -> Result<Self, ExtractorError> {
        check_probability(eps_est)?;
        Ok(Self {
            eps_est,
            per_round: Vec::new(),
            eps_total: eps_est,
            target: EPS_TARGET,
            satisfied: eps_est <= EPS_TARGET,
        })
    }

    /// Budget of an exact procedure with no estimation error.
    pub fn exact() -> Self {
        Self {
            eps_est: 0.0,
            per_round: Vec::new(),
            eps_total: 0.0,
            target: EPS_TARGET,
            satisfied: true,
        }
    }

    /// Adds `count` rounds of error `eps`; zero-count terms are kept for the record.
    pub fn add(&mut self, label: &str, count: u64, eps: f64) -> Result<(), ExtractorError> {
        check_probability(eps)?;
        self.per_round.push(EpsTerm {
            label: label.to_string(),
            count,
            eps,
        });
        self.recompute();
        Ok(())
    }

    pub fn rounds(&self) -> u64 {
        self.per_round.iter().map(|t| t.count).sum()
    }

    fn recompute(&mut self) {
        self.eps_total = self.recount();
        self.satisfied = self.eps_total <= self.target;
    }

    /// ε_total recomputed from the terms.
    pub fn recount(&self) -> f64 {
        self.eps_est + self.per_round.iter().map(|t| t.count as f64 * t.eps).sum::<f64>()
    }
}

/// Budget for `rounds` extractor rounds of error `eps_round` each.
pub fn eps_budget(eps_est: f64, rounds: u64, eps_round: f64) -> Result<EpsilonBudget, ExtractorError> {
    let mut b = EpsilonBudget::new(eps_est)?;
    b.add("extractor rounds", rounds, eps_round)?;
    Ok(b)
}

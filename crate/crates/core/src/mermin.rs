//! Mermin-inequality entropy certification for three-party GHZ records.
//!
//! Each round carries settings `(x, y)` (the third party measures `x ⊕ y`)
//! and outcomes `(a, b, c)`. The four correlators combine into
//! `M = E₀₀₀ − E₀₁₁ − E₁₀₁ − E₁₁₀`, which is reduced by a Hoeffding term before
//! being mapped to a certified min-entropy rate for two of the three bits.

use std::fmt;
use std::path::Path;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitString;

#[derive(Debug, Error)]
pub enum MerminError {
    #[error("no rounds recorded for setting x={0}, y={1}")]
    MissingSetting(u8, u8),
    #[error("record set is empty")]
    Empty,
    #[error("probability {0} not in (0, 1)")]
    BadProbability(f64),
    #[error("round count must be at least 1")]
    ZeroRounds,
    #[error("Mermin value {0} outside [-4, 4]")]
    MerminOutOfRange(f64),
    #[error("visibility {0} outside [0, 1]")]
    BadVisibility(f64),
    #[error("rate table: {0}")]
    BadRateTable(String),
    #[error("record {line}: {reason}")]
    BadRecord { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One round: settings `x, y` and outcomes `a, b, c`, each 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerminRound {
    pub x: u8,
    pub y: u8,
    pub a: u8,
    pub b: u8,
    pub c: u8,
}

impl MerminRound {
    fn parity(&self) -> u8 {
        (self.a ^ self.b ^ self.c) & 1
    }

    fn setting(&self) -> usize {
        (self.x as usize) << 1 | self.y as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MerminRecordSet {
    pub rounds: Vec<MerminRound>,
}

impl MerminRecordSet {
    pub fn new(rounds: Vec<MerminRound>) -> Self {
        Self { rounds }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Reads the `x,y,a,b,c` CSV format (header required).
    pub fn read_csv(path: &Path) -> Result<Self, MerminError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rounds = Vec::new();
        for (i, rec) in rdr.deserialize::<MerminRound>().enumerate() {
            let r = rec?;
            if [r.x, r.y, r.a, r.b, r.c].iter().any(|&v| v > 1) {
                return Err(MerminError::BadRecord {
                    line: i as u64 + 2,
                    reason: "values must be 0 or 1".into(),
                });
            }
            rounds.push(r);
        }
        Ok(Self { rounds })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MerminError> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rounds {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Correlators `[E₀₀₀, E₀₁₁, E₁₀₁, E₁₁₀]`, indexed by setting `2x + y`.
pub fn correlators(r: &MerminRecordSet) -> Result<[f64; 4], MerminError> {
    let mut even = [0u64; 4];
    let mut total = [0u64; 4];
    for round in &r.rounds {
        let s = round.setting();
        total[s] += 1;
        even[s] += (round.parity() == 0) as u64;
    }
    let mut e = [0.0; 4];
    for s in 0..4 {
        if total[s] == 0 {
            return Err(MerminError::MissingSetting((s >> 1) as u8, (s & 1) as u8));
        }
        let odd = total[s] - even[s];
        e[s] = (even[s] as f64 - odd as f64) / total[s] as f64;
    }
    Ok(e)
}

/// `M = E₀₀₀ − E₀₁₁ − E₁₀₁ − E₁₁₀`.
pub fn mermin_value<T: Float>(e: [T; 4]) -> T {
    e[0] - e[1] - e[2] - e[3]
}

/// How the finite-statistics deviation `t` is obtained from ε.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoeffdingForm {
    /// `ε = exp(−2 n t²)`.
    #[default]
    Standard,
    /// `ε = exp(−2 t / n)`, kept for comparison; gives `t = n ln(1/ε) / 2`.
    Printed,
}

/// `(t, M_adj)` with `M_adj = M_obs − 16 t`.
pub fn adjust_mermin<T: Float>(m_obs: T, n: u64, eps_est: T, form: HoeffdingForm) -> Result<(T, T), MerminError> {
    if n == 0 {
        return Err(MerminError::ZeroRounds);
    }
    if !(eps_est > T::zero() && eps_est < T::one()) {
        return Err(MerminError::BadProbability(eps_est.to_f64().unwrap_or(f64::NAN)));
    }
    let two = T::one() + T::one();
    let nf = T::from(n).ok_or(MerminError::ZeroRounds)?;
    let log_inv = -eps_est.ln();
    let t = match form {
        HoeffdingForm::Standard => (log_inv / (two * nf)).sqrt(),
        HoeffdingForm::Printed => nf * log_inv / two,
    };
    let sixteen = T::from(16.0).unwrap_or_else(T::nan);
    Ok((t, m_obs - sixteen * t))
}

/// Maps an adjusted Mermin value to a certified per-bit min-entropy rate of
/// two retained outcome bits.
///
/// Implementations must return 0 for `M ≤ 2`, and be continuous and
/// nondecreasing on `(2, 4]`.
pub trait RateFunction<T>: Send + Sync {
    fn rate(&self, m_adj: T) -> T;
    fn name(&self) -> String;
}

/// Guessing-probability envelope
/// `P_g = 1/4 + 3/4 · ((4 − M)/2)^γ`, rate `−log2(P_g) / 2`, with `γ` chosen so
/// that the curve passes through a given `(M, rate)` anchor.
///
/// `P_g` runs from 1 at the classical bound to 1/4 (two perfect bits) at the
/// algebraic maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoredEnvelope {
    pub anchor_m: f64,
    pub anchor_rate: f64,
    gamma: f64,
}

impl AnchoredEnvelope {
    pub fn new(anchor_m: f64, anchor_rate: f64) -> Result<Self, MerminError> {
        if !(anchor_m > 2.0 && anchor_m < 4.0 && anchor_rate > 0.0 && anchor_rate < 1.0) {
            return Err(MerminError::BadRateTable(format!(
                "anchor ({anchor_m}, {anchor_rate}) must lie in (2, 4) × (0, 1)"
            )));
        }
        let pg = 2f64.powf(-2.0 * anchor_rate);
        let gamma = ((pg - 0.25) / 0.75).ln() / ((4.0 - anchor_m) / 2.0).ln();
        Ok(Self {
            anchor_m,
            anchor_rate,
            gamma,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for AnchoredEnvelope {
    /// Anchored at `M = 3.75 → 0.518`.
    fn default() -> Self {
        Self::new(3.75, 0.518).expect("valid default anchor")
    }
}

impl<T: Float> RateFunction<T> for AnchoredEnvelope {
    fn rate(&self, m_adj: T) -> T {
        let m = m_adj.to_f64().unwrap_or(f64::NAN);
        let r = if m <= 2.0 {
            0.0
        } else if m >= 4.0 {
            1.0
        } else {
            let pg = 0.25 + 0.75 * ((4.0 - m) / 2.0).powf(self.gamma);
            -pg.log2() / 2.0
        };
        T::from(r + 0.0).unwrap_or_else(T::nan)
    }

    fn name(&self) -> String {
        format!("anchored-envelope({}, {})", self.anchor_m, self.anchor_rate)
    }
}

/// Piecewise-linear rate through user-supplied `(M, rate)` points, for
/// plugging in a published rate curve. Zero at and below `M = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedRate {
    points: Vec<(f64, f64)>,
}

impl TabulatedRate {
    /// Points must have strictly increasing `M` in `(2, 4]` and nondecreasing rates in `[0, 1]`.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self, MerminError> {
        points.insert(0, (2.0, 0.0));
        for w in points.windows(2) {
            let ((m0, r0), (m1, r1)) = (w[0], w[1]);
            if !(m1 > m0 && m1 <= 4.0 && r1 >= r0 && r1 <= 1.0) {
                return Err(MerminError::BadRateTable(format!(
                    "point ({m1}, {r1}) breaks monotonicity or range"
                )));
            }
        }
        Ok(Self { points })
    }
}

impl<T: Float> RateFunction<T> for TabulatedRate {
    fn rate(&self, m_adj: T) -> T {
        let m = m_adj.to_f64().unwrap_or(f64::NAN);
        let last = *self.points.last().expect("nonempty table");
        let r = if m <= 2.0 {
            0.0
        } else if m >= last.0 {
            last.1
        } else {
            let i = self.points.iter().position(|&(pm, _)| pm >= m).unwrap_or(1);
            let ((m0, r0), (m1, r1)) = (self.points[i - 1], self.points[i]);
            r0 + (r1 - r0) * (m - m0) / (m1 - m0)
        };
        T::from(r).unwrap_or_else(T::nan)
    }

    fn name(&self) -> String {
        format!("tabulated({} points)", self.points.len() - 1)
    }
}

/// Certified rate for `m_adj ∈ [−4, 4]`.
pub fn certified_rate<T: Float>(m_adj: T, model: &dyn RateFunction<T>) -> Result<T, MerminError> {
    let m = m_adj.to_f64().unwrap_or(f64::NAN);
    if !(-4.0..=4.0).contains(&m) {
        return Err(MerminError::MerminOutOfRange(m));
    }
    Ok(model.rate(m_adj))
}

/// Rounds per independently seeded simulation chunk.
const SIM_CHUNK: usize = 1 << 16;

/// Noisy-GHZ parity model: setting (0,0) targets even parity, the other three
/// odd; the target parity occurs with probability `(1 + v)/2`, and outcomes
/// are uniform within the chosen parity class. Asymptotically `M = 4v`.
pub fn simulate_records(v: f64, n: usize, rng_seed: u64) -> Result<MerminRecordSet, MerminError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(MerminError::BadVisibility(v));
    }
    let keep = (1.0 + v) / 2.0;
    let chunks = n.div_ceil(SIM_CHUNK);
    let rounds: Vec<MerminRound> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
            rng.set_stream(chunk as u64);
            let len = SIM_CHUNK.min(n - chunk * SIM_CHUNK);
            (0..len)
                .map(|_| {
                    let x = rng.gen::<bool>() as u8;
                    let y = rng.gen::<bool>() as u8;
                    let target = ((x, y) != (0, 0)) as u8;
                    let parity = if rng.gen_bool(keep) { target } else { 1 - target };
                    let a = rng.gen::<bool>() as u8;
                    let b = rng.gen::<bool>() as u8;
                    MerminRound {
                        x,
                        y,
                        a,
                        b,
                        c: a ^ b ^ parity,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(MerminRecordSet { rounds })
}

/// Outcome bits `a₁ b₁ a₂ b₂ …`; `c` is discarded.
pub fn retained_bits(r: &MerminRecordSet) -> Result<BitString, MerminError> {
    if r.is_empty() {
        return Err(MerminError::Empty);
    }
    let mut out = BitString::with_capacity(2 * r.len());
    for round in &r.rounds {
        out.push(round.a == 1);
        out.push(round.b == 1);
    }
    Ok(out)
}

/// Full analysis of a record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MerminAssessment {
    pub rounds: usize,
    #[serde(rename = "E")]
    pub e: [f64; 4],
    pub m_obs: f64,
    pub t: f64,
    pub m_adj: f64,
    pub eps_est: f64,
    pub alpha_q: f64,
    pub hoeffding: HoeffdingForm,
    pub rate_function: String,
}

impl fmt::Display for MerminAssessment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} M_obs={:.4} t={:.5} M_adj={:.4} alpha_Q={:.4}",
            self.rounds, self.m_obs, self.t, self.m_adj, self.alpha_q
        )
    }
}

pub fn assess(
    r: &MerminRecordSet,
    eps_est: f64,
    form: HoeffdingForm,
    model: &dyn RateFunction<f64>,
) -> Result<MerminAssessment, MerminError> {
    let e = correlators(r)?;
    let m_obs = mermin_value(e);
    let (t, m_adj) = adjust_mermin(m_obs, r.len() as u64, eps_est, form)?;
    // below the classical bound nothing is certified, whatever the model
    let alpha_q = if m_adj <= 2.0 {
        0.0
    } else {
        certified_rate(m_adj, model)?
    };
    Ok(MerminAssessment {
        rounds: r.len(),
        e,
        m_obs,
        t,
        m_adj,
        eps_est,
        alpha_q,
        hoeffding: form,
        rate_function: model.name(),
    })
}

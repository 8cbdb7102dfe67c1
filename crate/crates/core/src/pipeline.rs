//! The four post-processing levels as budgeted workflows.
//!
//! * level 1: Von Neumann debiasing, ε = 0 under the per-pair i.i.d. condition;
//! * level 2: circulant seeded extraction with one reused 10007-bit seed;
//! * level 3: a two-source round against a second weak source produces the
//!   seed, then seeded rounds as in level 2;
//! * level 4: as level 3 with the second source certified by a Mermin test.
//!
//! Every run returns the output bits and a manifest from which the produced
//! length and ε_total can be recomputed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitio::BitString;
use crate::extractors::{
    largest_prime_at_most, von_neumann, CirculantPlan, EpsilonBudget, ExtractorError, ExtractorJob, ExtractorKind,
    DEFAULT_EPS_ROUND,
};
use crate::mermin::{retained_bits, MerminAssessment, MerminError, MerminRecordSet};

/// Seed length of the seeded stage; prime, so blocks are 10006 bits.
pub const SEED_BITS: usize = 10007;
/// Margin added to 1 when deriving the second source's claimed rate.
pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input is empty")]
    EmptyInput,
    #[error("{stage}: need at least {needed} input bits, have {got}")]
    InsufficientInput {
        stage: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("seed must be {expected} bits, got {got}")]
    SeedLength { expected: usize, got: usize },
    #[error("rate {name} = {value} not in (0, 1]")]
    BadAlpha { name: &'static str, value: f64 },
    #[error("{0}: extractor output length is zero for these parameters")]
    NoExtraction(&'static str),
    #[error(
        "level 4 refused: alpha_rng {alpha_rng} + alpha_Q {alpha_q} <= 1; \
         the input rate must exceed {needed:.3}"
    )]
    Level4Refused { alpha_rng: f64, alpha_q: f64, needed: f64 },
    #[error("epsilon budget exceeded: {eps_total:e} > {target:e}")]
    BudgetExceeded { eps_total: f64, target: f64 },
    #[error(transparent)]
    Extractor(#[from] ExtractorError),
    #[error(transparent)]
    Mermin(#[from] MerminError),
}

/// Consecutive rounds that share one job description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundGroup {
    pub stage: String,
    pub rounds: u64,
    pub job: ExtractorJob,
}

/// Where a seed or second-source string came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub role: String,
    pub bits: usize,
    pub origin: String,
}

impl SeedProvenance {
    pub fn new(role: &str, bits: usize, origin: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            bits,
            origin: origin.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub level: u8,
    pub input_bits: usize,
    pub consumed_bits: usize,
    pub discarded_bits: usize,
    pub requested_bits: Option<usize>,
    pub produced_bits: usize,
    pub alpha_rng: Option<f64>,
    pub alpha_second: Option<f64>,
    pub rounds: Vec<RoundGroup>,
    /// Stages whose output feeds a later stage rather than the final output.
    pub internal_stages: Vec<String>,
    pub budget: EpsilonBudget,
    pub seeds: Vec<SeedProvenance>,
    pub notes: Vec<String>,
}

impl PipelineManifest {
    fn new(level: u8, input_bits: usize, budget: EpsilonBudget) -> Self {
        Self {
            level,
            input_bits,
            consumed_bits: 0,
            discarded_bits: 0,
            requested_bits: None,
            produced_bits: 0,
            alpha_rng: None,
            alpha_second: None,
            rounds: Vec::new(),
            internal_stages: Vec::new(),
            budget,
            seeds: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Σ m_out over the rounds that feed the final output.
    pub fn recount_output_bits(&self) -> usize {
        self.rounds
            .iter()
            .filter(|g| !self.internal_stages.contains(&g.stage))
            .map(|g| g.rounds as usize * g.job.m_out)
            .sum()
    }

    pub fn round_count(&self) -> u64 {
        self.rounds.iter().map(|g| g.rounds).sum()
    }

    /// Checks that lengths and ε recompute from the job list.
    pub fn verify(&self) -> Result<(), String> {
        if self.recount_output_bits() != self.produced_bits {
            return Err(format!(
                "produced {} bits but rounds account for {}",
                self.produced_bits,
                self.recount_output_bits()
            ));
        }
        let eps = self.budget.recount();
        if eps != self.budget.eps_total || (eps <= self.budget.target) != self.budget.satisfied {
            return Err(format!(
                "budget total {} does not recompute ({eps})",
                self.budget.eps_total
            ));
        }
        let extractor_rounds: u64 = self
            .rounds
            .iter()
            .filter(|g| g.job.kind != ExtractorKind::VonNeumann)
            .map(|g| g.rounds)
            .sum();
        let budget_rounds: u64 = self
            .budget
            .per_round
            .iter()
            .filter(|t| t.label.starts_with("round"))
            .map(|t| t.count)
            .sum();
        if extractor_rounds != budget_rounds {
            return Err(format!(
                "{extractor_rounds} extractor rounds but {budget_rounds} budget terms"
            ));
        }
        if let Some(g) = self.rounds.iter().find(|g| !g.job.is_consistent()) {
            return Err(format!("inconsistent job in stage {}", g.stage));
        }
        Ok(())
    }

    fn push_group(&mut self, stage: &str, rounds: u64, job: ExtractorJob) -> Result<(), PipelineError> {
        if job.kind != ExtractorKind::VonNeumann {
            self.budget.add(&format!("rounds: {stage}"), rounds, job.eps_round)?;
        }
        self.rounds.push(RoundGroup {
            stage: stage.into(),
            rounds,
            job,
        });
        Ok(())
    }

    fn enforce_budget(&self) -> Result<(), PipelineError> {
        if self.budget.satisfied {
            Ok(())
        } else {
            Err(PipelineError::BudgetExceeded {
                eps_total: self.budget.eps_total,
                target: self.budget.target,
            })
        }
    }
}

/// Output bits with their manifest.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub output: BitString,
    pub manifest: PipelineManifest,
}

/// Shared parameters of the extracting levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams {
    pub alpha_rng: f64,
    /// ε of the min-entropy estimate behind `alpha_rng`.
    pub eps_est: f64,
    pub eps_round: f64,
    /// Stop after enough seeded rounds for this many output bits.
    pub output_bits: Option<usize>,
}

impl LevelParams {
    pub fn new(alpha_rng: f64) -> Self {
        Self {
            alpha_rng,
            eps_est: crate::minentropy::EPS_EST_7SIGMA,
            eps_round: DEFAULT_EPS_ROUND,
            output_bits: None,
        }
    }

    pub fn with_output_bits(mut self, bits: usize) -> Self {
        self.output_bits = Some(bits);
        self
    }

    fn check(&self) -> Result<(), PipelineError> {
        check_alpha("alpha_rng", self.alpha_rng)
    }
}

fn check_alpha(name: &'static str, value: f64) -> Result<(), PipelineError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(PipelineError::BadAlpha { name, value })
    }
}

/// Level 1: Von Neumann over the whole input.
pub fn run_level1(input: &BitString) -> Result<PipelineRun, PipelineError> {
    if input.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let output = von_neumann(input);
    let mut m = PipelineManifest::new(1, input.len(), EpsilonBudget::exact());
    m.consumed_bits = input.len() - input.len() % 2;
    m.discarded_bits = input.len() % 2;
    m.produced_bits = output.len();
    m.push_group(
        "von-neumann",
        1,
        ExtractorJob {
            kind: ExtractorKind::VonNeumann,
            n_input: input.len(),
            n_seed: 0,
            k1: 0.0,
            k2: 0.0,
            eps_round: 0.0,
            m_out: output.len(),
        },
    )?;
    m.notes
        .push("epsilon = 0 assumes independent pairs with equal in-pair bias".into());
    if output.is_empty() {
        m.notes.push("empty output: every pair was concordant".into());
    }
    Ok(PipelineRun { output, manifest: m })
}

/// Seeded rounds over `input[offset..]` in `plan.input_len()`-bit blocks.
fn seeded_stage(
    input: &BitString,
    offset: usize,
    plan: &CirculantPlan,
    params: &LevelParams,
    m: &mut PipelineManifest,
) -> Result<BitString, PipelineError> {
    let block = plan.input_len();
    let available = (input.len() - offset) / block;
    if available == 0 {
        return Err(PipelineError::InsufficientInput {
            stage: "seeded extraction",
            needed: offset + block,
            got: input.len(),
        });
    }
    let job = ExtractorJob::circulant(
        ExtractorKind::CirculantSeeded,
        block,
        params.alpha_rng * block as f64,
        0.0,
        params.eps_round,
    )?;
    if job.m_out == 0 {
        return Err(PipelineError::NoExtraction("seeded extraction"));
    }
    let rounds = match params.output_bits {
        Some(bits) => {
            let wanted = bits.div_ceil(job.m_out);
            if wanted > available {
                m.notes.push(format!(
                    "input supports {available} seeded rounds, {wanted} needed for {bits} bits"
                ));
            }
            wanted.min(available)
        }
        None => available,
    };
    let parts: Vec<BitString> = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let start = offset + r * block;
            plan.extract(&input.slice(start, start + block), job.m_out)
        })
        .collect::<Result<_, _>>()?;
    let mut out = BitString::with_capacity(rounds * job.m_out);
    for p in &parts {
        out.extend_bits(p);
    }
    m.consumed_bits = offset + rounds * block;
    m.discarded_bits = input.len() - m.consumed_bits;
    if m.discarded_bits > 0 {
        m.notes.push(format!("{} trailing input bits unused", m.discarded_bits));
    }
    m.push_group("seeded", rounds as u64, job)?;
    Ok(out)
}

/// Level 2: one fixed `SEED_BITS`-bit seed reused over every input block.
pub fn run_level2(
    input: &BitString,
    seed: &BitString,
    seed_origin: &str,
    params: &LevelParams,
) -> Result<PipelineRun, PipelineError> {
    params.check()?;
    if seed.len() != SEED_BITS {
        return Err(PipelineError::SeedLength {
            expected: SEED_BITS,
            got: seed.len(),
        });
    }
    let plan = CirculantPlan::new(seed)?;
    let mut m = PipelineManifest::new(2, input.len(), EpsilonBudget::new(params.eps_est)?);
    m.alpha_rng = Some(params.alpha_rng);
    m.requested_bits = params.output_bits;
    m.seeds.push(SeedProvenance::new("seed", seed.len(), seed_origin));
    let output = seeded_stage(input, 0, &plan, params, &mut m)?;
    m.produced_bits = output.len();
    m.enforce_budget()?;
    Ok(PipelineRun { output, manifest: m })
}

/// Chains two-source rounds of `input[offset..]` against `y` until
/// `SEED_BITS` bits exist. Returns the seed and the new offset.
fn two_source_seed(
    input: &BitString,
    offset: usize,
    y: &BitString,
    k2: f64,
    params: &LevelParams,
    m: &mut PipelineManifest,
) -> Result<(BitString, usize), PipelineError> {
    let plan = CirculantPlan::new(y)?;
    let block = plan.input_len();
    let job = ExtractorJob::circulant(
        ExtractorKind::CirculantTwoSource,
        block,
        params.alpha_rng * block as f64,
        k2,
        params.eps_round,
    )?;
    if job.m_out == 0 {
        return Err(PipelineError::NoExtraction("two-source extraction"));
    }
    let rounds = SEED_BITS.div_ceil(job.m_out);
    let needed = offset + rounds * block;
    if input.len() < needed {
        return Err(PipelineError::InsufficientInput {
            stage: "two-source seed",
            needed,
            got: input.len(),
        });
    }
    let parts: Vec<BitString> = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let start = offset + r * block;
            plan.extract(&input.slice(start, start + block), job.m_out)
        })
        .collect::<Result<_, _>>()?;
    let mut seed = BitString::with_capacity(rounds * job.m_out);
    for p in &parts {
        seed.extend_bits(p);
    }
    if rounds > 1 {
        m.notes.push(format!(
            "{rounds} two-source rounds of {} bits chained to reach a {SEED_BITS}-bit seed",
            job.m_out
        ));
    }
    seed.truncate(SEED_BITS);
    m.push_group("two-source", rounds as u64, job)?;
    m.internal_stages.push("two-source".into());
    m.seeds.push(SeedProvenance::new(
        "seed",
        SEED_BITS,
        format!("two-source output of input bits [{offset}, {needed})"),
    ));
    Ok((seed, needed))
}

/// Level 3: `alpha_second = (1 + margin) − alpha_rng` unless given; the
/// second source `y` must have prime length.
pub fn run_level3(
    input: &BitString,
    y: &BitString,
    y_origin: &str,
    alpha_second: Option<f64>,
    margin: f64,
    params: &LevelParams,
) -> Result<PipelineRun, PipelineError> {
    params.check()?;
    let alpha_second = alpha_second.unwrap_or(1.0 + margin - params.alpha_rng);
    if !(alpha_second > 0.0 && alpha_second < 1.0) {
        return Err(PipelineError::BadAlpha {
            name: "alpha_second",
            value: alpha_second,
        });
    }
    let mut m = PipelineManifest::new(3, input.len(), EpsilonBudget::new(params.eps_est)?);
    m.alpha_rng = Some(params.alpha_rng);
    m.alpha_second = Some(alpha_second);
    m.requested_bits = params.output_bits;
    m.seeds.push(SeedProvenance::new("second source", y.len(), y_origin));
    let (seed, offset) = two_source_seed(input, 0, y, alpha_second * y.len() as f64, params, &mut m)?;
    let plan = CirculantPlan::new(&seed)?;
    let output = seeded_stage(input, offset, &plan, params, &mut m)?;
    m.produced_bits = output.len();
    m.enforce_budget()?;
    Ok(PipelineRun { output, manifest: m })
}

/// Splits off the first `SEED_BITS` input bits as the second source for
/// level 3 in self mode; independence of the two parts is assumed.
pub fn split_self_source(input: &BitString) -> Result<(BitString, BitString), PipelineError> {
    if input.len() <= SEED_BITS {
        return Err(PipelineError::InsufficientInput {
            stage: "self second source",
            needed: SEED_BITS + 1,
            got: input.len(),
        });
    }
    Ok((input.slice(0, SEED_BITS), input.slice(SEED_BITS, input.len())))
}

/// Level 4: the retained Mermin bits serve as the second source.
///
/// The second source is cut to the largest prime length it holds and the
/// first input block is matched to it.
pub fn run_level4(
    input: &BitString,
    records: &MerminRecordSet,
    assessment: &MerminAssessment,
    params: &LevelParams,
) -> Result<PipelineRun, PipelineError> {
    params.check()?;
    let alpha_q = assessment.alpha_q;
    if params.alpha_rng + alpha_q <= 1.0 {
        return Err(PipelineError::Level4Refused {
            alpha_rng: params.alpha_rng,
            alpha_q,
            needed: 1.0 - alpha_q,
        });
    }
    let retained = retained_bits(records)?;
    let n = largest_prime_at_most(retained.len()).ok_or(PipelineError::InsufficientInput {
        stage: "mermin second source",
        needed: 3,
        got: retained.len(),
    })?;
    let y = retained.slice(0, n);

    let mut budget = EpsilonBudget::new(params.eps_est)?;
    budget.add("mermin estimate", 1, assessment.eps_est)?;
    let mut m = PipelineManifest::new(4, input.len(), budget);
    m.alpha_rng = Some(params.alpha_rng);
    m.alpha_second = Some(alpha_q);
    m.requested_bits = params.output_bits;
    m.seeds.push(SeedProvenance::new(
        "second source",
        n,
        format!("retained a,b bits of {} Mermin rounds ({assessment})", records.len()),
    ));
    let (seed, offset) = two_source_seed(input, 0, &y, alpha_q * n as f64, params, &mut m)?;
    let plan = CirculantPlan::new(&seed)?;
    let output = seeded_stage(input, offset, &plan, params, &mut m)?;
    m.produced_bits = output.len();
    m.enforce_budget()?;
    Ok(PipelineRun { output, manifest: m })
}

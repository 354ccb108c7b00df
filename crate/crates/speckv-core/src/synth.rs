//! Synthetic profiling world.
//!
//! Generates desk-scale step-record corpora with a controllable coupling
//! between draft signals and acceptance, plus an affine per-step latency model
//! per compression level. A latent per-step difficulty drives both the
//! draft-target agreement probability and the draft distribution's
//! temperature, so high-entropy/low-confidence steps systematically accept
//! fewer tokens.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{mix_seed, standard_normal};
use crate::signals::{aggregate_signals, TokenDistribution};
use crate::step::{step_outcome, CompressionLevel, Gamma, StepRecord, TaskCategory};

/// Latent difficulty distribution for one task category: difficulty is a
/// spread-scaled Gaussian around `mean`, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DifficultyMixture {
    pub mean: f64,
    pub spread: f64,
}

/// Everything that defines the synthetic world.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct WorldParams {
    /// Synthetic vocabulary size; signal semantics do not depend on it.
    pub vocab_size: usize,
    /// Per-task difficulty mixtures, indexed like [`TaskCategory::ALL`].
    pub difficulty: [DifficultyMixture; 4],
    /// How strongly difficulty suppresses per-token draft-target agreement.
    pub agreement_slope: f64,
    /// How strongly difficulty raises the draft distribution's temperature.
    pub entropy_coupling: f64,
    /// Small additive agreement shift per compression level, indexed like
    /// [`CompressionLevel::ALL`].
    pub compression_agreement_offset: [f64; 3],
    /// Scale of the raw (temperature-1) draft logits.
    pub logit_scale: f64,
    /// Log-normal jitter applied to the per-token temperature.
    pub temperature_jitter: f64,
    pub seed: u64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            vocab_size: 512,
            difficulty: [
                DifficultyMixture { mean: 0.22, spread: 0.16 }, // code
                DifficultyMixture { mean: 0.18, spread: 0.14 }, // math
                DifficultyMixture { mean: 0.42, spread: 0.20 }, // chat
                DifficultyMixture { mean: 0.34, spread: 0.18 }, // summarization
            ],
            agreement_slope: 0.55,
            entropy_coupling: 2.2,
            compression_agreement_offset: [0.0, -0.015, -0.005],
            logit_scale: 4.0,
            temperature_jitter: 0.25,
            seed: 42,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::invalid("vocab_size must be at least 2"));
        }
        if !(self.agreement_slope > 0.0) {
            return Err(Error::invalid("agreement_slope must be positive"));
        }
        if !(self.entropy_coupling > 0.0) {
            return Err(Error::invalid("entropy_coupling must be positive"));
        }
        if !(self.logit_scale > 0.0) {
            return Err(Error::invalid("logit_scale must be positive"));
        }
        if self.temperature_jitter < 0.0 {
            return Err(Error::invalid("temperature_jitter must be non-negative"));
        }
        for m in &self.difficulty {
            if !(0.0..=1.0).contains(&m.mean) || m.spread < 0.0 {
                return Err(Error::invalid(
                    "difficulty mixtures need mean in [0,1] and spread >= 0",
                ));
            }
        }
        Ok(())
    }

    /// Per-token draft-target agreement probability at difficulty `d`,
    /// clamped to `[0.01, 0.99]`.
    pub fn agreement_probability(&self, difficulty: f64, compression: CompressionLevel) -> f64 {
        let p = 1.0 - self.agreement_slope * difficulty
            + self.compression_agreement_offset[compression.index()];
        p.clamp(0.01, 0.99)
    }
}

/// Affine per-step latency model: `base_ms + per_gamma_ms * gamma`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatencyLine {
    pub base_ms: f64,
    pub per_gamma_ms: f64,
}

/// Per-compression step cost plus the controller's per-decision overhead.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Indexed like [`CompressionLevel::ALL`].
    pub lines: [LatencyLine; 3],
    pub controller_overhead_ms: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        // fp16 anchored to a ~70 ms step at gamma=4; int8 carries the heavy
        // dequantization overhead that pushes its throughput optimum to
        // longer speculation; nf4 sits in between.
        CostModel {
            lines: [
                LatencyLine { base_ms: 30.0, per_gamma_ms: 10.0 },
                LatencyLine { base_ms: 120.0, per_gamma_ms: 10.0 },
                LatencyLine { base_ms: 60.0, per_gamma_ms: 10.0 },
            ],
            controller_overhead_ms: 0.34,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (line, level) in self.lines.iter().zip(CompressionLevel::ALL) {
            if !(line.base_ms > 0.0) || !(line.per_gamma_ms > 0.0) {
                return Err(Error::invalid(format!(
                    "cost model for {level} needs base_ms > 0 and per_gamma_ms > 0"
                )));
            }
        }
        if self.controller_overhead_ms < 0.0 {
            return Err(Error::invalid("controller_overhead_ms must be >= 0"));
        }
        Ok(())
    }
}

/// Step latency under `cost` for one (compression, gamma) cell.
pub fn step_latency_ms(cost: &CostModel, compression: CompressionLevel, gamma: Gamma) -> f64 {
    let line = cost.lines[compression.index()];
    line.base_ms + line.per_gamma_ms * gamma.as_f64()
}

/// Tokens per second given expected tokens per step and step latency.
pub fn throughput_toks_per_s(expected_tokens: f64, latency_ms: f64) -> Result<f64> {
    if !(latency_ms > 0.0) {
        return Err(Error::invalid(format!(
            "latency must be positive, got {latency_ms}"
        )));
    }
    Ok(1000.0 * expected_tokens / latency_ms)
}

/// One cell of a generation plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanCell {
    pub task: TaskCategory,
    pub compression: CompressionLevel,
    pub gamma: Gamma,
    pub steps: usize,
}

/// The full task x compression x gamma grid with `steps` records per cell.
pub fn full_grid_plan(steps: usize) -> Vec<PlanCell> {
    let mut plan = Vec::with_capacity(48);
    for task in TaskCategory::ALL {
        for compression in CompressionLevel::ALL {
            for gamma in Gamma::CANDIDATES {
                plan.push(PlanCell { task, compression, gamma, steps });
            }
        }
    }
    plan
}

/// Steps per cell that lands the default grid closest to the profiling
/// corpus scale (48 cells x 107 = 5,136 records).
pub const DEFAULT_STEPS_PER_CELL: usize = 107;

fn sample_difficulty<R: Rng>(world: &WorldParams, task: TaskCategory, rng: &mut R) -> f64 {
    let mixture = world.difficulty[task.index()];
    (mixture.mean + mixture.spread * standard_normal(rng)).clamp(0.0, 1.0)
}

/// Draft distribution for one proposed token: softmax of scaled Gaussian
/// logits, flattened by a difficulty-coupled temperature.
fn draft_distribution<R: Rng>(
    world: &WorldParams,
    difficulty: f64,
    rng: &mut R,
) -> TokenDistribution {
    let temperature = (1.0 + world.entropy_coupling * difficulty)
        * (world.temperature_jitter * standard_normal(rng)).exp();
    let scale = world.logit_scale / temperature;
    let mut logits: Vec<f64> = (0..world.vocab_size)
        .map(|_| scale * standard_normal(rng))
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
    TokenDistribution::new(logits).expect("softmax output is a valid distribution")
}

fn sample_step_inner<R: Rng>(
    world: &WorldParams,
    experiment_id: &str,
    step_index: u32,
    task: TaskCategory,
    compression: CompressionLevel,
    gamma: Gamma,
    difficulty: f64,
    rng: &mut R,
) -> StepRecord {
    let p = world.agreement_probability(difficulty, compression);

    // Accepted prefix: independent per-token agreement, stopping at the
    // first disagreement, capped at gamma (truncated geometric).
    let mut accepted = 0u32;
    for _ in 0..gamma.value() {
        if rng.gen::<f64>() < p {
            accepted += 1;
        } else {
            break;
        }
    }

    let dists: Vec<TokenDistribution> = (0..gamma.value())
        .map(|_| draft_distribution(world, difficulty, rng))
        .collect();
    let signals = aggregate_signals(&dists).expect("gamma >= 1 distributions");
    let outcome = step_outcome(gamma, accepted).expect("accepted <= gamma by construction");

    StepRecord {
        experiment_id: experiment_id.to_string(),
        compression,
        task,
        step_index,
        outcome,
        signals,
        step_latency_ms: None,
    }
}

/// Draws one synthetic step record. Difficulty is sampled from the task's
/// mixture; everything else follows from it.
pub fn sample_step<R: Rng>(
    world: &WorldParams,
    task: TaskCategory,
    compression: CompressionLevel,
    gamma: Gamma,
    rng: &mut R,
) -> Result<StepRecord> {
    world.validate()?;
    let difficulty = sample_difficulty(world, task, rng);
    let id = format!("{task}-{compression}-g{gamma}");
    Ok(sample_step_inner(
        world, &id, 0, task, compression, gamma, difficulty, rng,
    ))
}

/// Like [`sample_step`] but with the latent difficulty pinned; used to probe
/// the world's monotone coupling directly.
pub fn sample_step_at_difficulty<R: Rng>(
    world: &WorldParams,
    task: TaskCategory,
    compression: CompressionLevel,
    gamma: Gamma,
    difficulty: f64,
    rng: &mut R,
) -> Result<StepRecord> {
    world.validate()?;
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::invalid("difficulty must lie in [0, 1]"));
    }
    let id = format!("{task}-{compression}-g{gamma}");
    Ok(sample_step_inner(
        world, &id, 0, task, compression, gamma, difficulty, rng,
    ))
}

/// Generates the corpus for `plan`. Each cell runs on an independent rng
/// derived from `(world.seed, cell index)`, so the output is identical no
/// matter how cells are scheduled across threads.
pub fn generate_corpus(world: &WorldParams, plan: &[PlanCell]) -> Result<Vec<StepRecord>> {
    generate_corpus_with_cost(world, plan, None)
}

/// [`generate_corpus`] variant that also stamps a per-step latency drawn
/// around the cost model's affine line.
pub fn generate_corpus_with_cost(
    world: &WorldParams,
    plan: &[PlanCell],
    cost: Option<&CostModel>,
) -> Result<Vec<StepRecord>> {
    world.validate()?;
    if let Some(cost) = cost {
        cost.validate()?;
    }
    if plan.is_empty() {
        return Err(Error::invalid("generation plan is empty"));
    }
    if let Some(cell) = plan.iter().find(|c| c.steps == 0) {
        return Err(Error::invalid(format!(
            "plan cell {}-{}-g{} has zero steps",
            cell.task, cell.compression, cell.gamma
        )));
    }

    let cells: Vec<Vec<StepRecord>> = plan
        .par_iter()
        .enumerate()
        .map(|(cell_index, cell)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(world.seed, cell_index as u64));
            let experiment_id = format!(
                "{}-{}-g{}-r{:03}",
                cell.task, cell.compression, cell.gamma, cell_index
            );
            (0..cell.steps)
                .map(|step| {
                    let difficulty = sample_difficulty(world, cell.task, &mut rng);
                    let mut record = sample_step_inner(
                        world,
                        &experiment_id,
                        step as u32,
                        cell.task,
                        cell.compression,
                        cell.gamma,
                        difficulty,
                        &mut rng,
                    );
                    if let Some(cost) = cost {
                        let nominal = step_latency_ms(cost, cell.compression, cell.gamma);
                        let jitter = (0.05 * standard_normal(&mut rng)).exp();
                        record.step_latency_ms = Some(nominal * jitter);
                    }
                    record
                })
                .collect()
        })
        .collect();

    Ok(cells.into_iter().flatten().collect())
}

/// Mean expected tokens per step for the world at a fixed agreement
/// probability: `sum_{i=1..gamma} p^i + 1` (truncated geometric plus the
/// target's token).
pub fn expected_tokens_at_agreement(p: f64, gamma: Gamma) -> f64 {
    let mut total = 0.0;
    let mut power = 1.0;
    for _ in 0..gamma.value() {
        power *= p;
        total += power;
    }
    total + 1.0
}

//! Speculation-length selection policies.
//!
//! The adaptive policy picks the candidate gamma maximizing predicted
//! expected tokens per step (`a_hat * gamma + 1`). Baselines either pin a
//! constant gamma or look one up from a profiling table keyed by compression
//! (fixed-best) or by compression and task (task-oracle).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::predictor::PredictorModel;
use crate::signals::SignalVector;
use crate::step::{CompressionLevel, Gamma, StepRecord, TaskCategory};
use crate::synth::{step_latency_ms, throughput_toks_per_s, CostModel};

/// Expected tokens produced by a step with predicted acceptance rate `a_hat`
/// and speculation length `gamma`.
pub fn expected_tokens(a_hat: f64, gamma: Gamma) -> Result<f64> {
    if !(0.0..=1.0).contains(&a_hat) {
        return Err(Error::invalid(format!(
            "predicted acceptance rate {a_hat} is outside [0, 1]"
        )));
    }
    Ok(a_hat * gamma.as_f64() + 1.0)
}

/// One candidate's evaluation inside a decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEval {
    pub gamma: Gamma,
    pub predicted_acceptance: f64,
    pub expected_tokens: f64,
}

/// A policy's choice for one step. For predictor-backed policies the
/// candidate table holds every evaluated gamma; lookup and constant policies
/// leave it empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub chosen_gamma: Gamma,
    pub candidates: Vec<CandidateEval>,
    pub policy_name: String,
}

/// What a policy may observe about the current step. Signals come from the
/// draft model; task and compression are deployment-side labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub signals: SignalVector,
    pub compression: CompressionLevel,
    pub task: TaskCategory,
}

impl StepContext {
    pub fn of(record: &StepRecord) -> StepContext {
        StepContext {
            signals: record.signals,
            compression: record.compression,
            task: record.task,
        }
    }
}

/// A gamma-selection policy.
pub trait GammaPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, ctx: &StepContext) -> Result<PolicyDecision>;
}

/// Argmax of expected tokens over the candidate set, ties toward the
/// smallest gamma (equal expected tokens at lower gamma costs less latency).
pub fn select_gamma(
    model: &PredictorModel,
    signals: &SignalVector,
    compression: CompressionLevel,
    candidates: &[Gamma],
) -> Result<PolicyDecision> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    for c in candidates {
        if !Gamma::CANDIDATES.contains(c) {
            return Err(Error::invalid(format!(
                "gamma {c} is not in the candidate set {{2, 4, 6, 8}}"
            )));
        }
    }
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();

    let mut evals = Vec::with_capacity(sorted.len());
    let mut best: Option<CandidateEval> = None;
    for gamma in sorted {
        let a_hat = model.predict_for(signals, compression, gamma)?;
        let expected = expected_tokens(a_hat, gamma)?;
        let eval = CandidateEval {
            gamma,
            predicted_acceptance: a_hat,
            expected_tokens: expected,
        };
        // Strictly-greater comparison over ascending gammas implements the
        // smallest-gamma tie-break.
        if best.map_or(true, |b| expected > b.expected_tokens) {
            best = Some(eval);
        }
        evals.push(eval);
    }
    Ok(PolicyDecision {
        chosen_gamma: best.expect("candidate set validated non-empty").gamma,
        candidates: evals,
        policy_name: String::new(),
    })
}

/// Always chooses the same gamma.
#[derive(Debug, Clone)]
pub struct FixedPolicy {
    gamma: Gamma,
    name: String,
}

/// The `fixed-4` default and its siblings.
pub fn fixed_policy(gamma: Gamma) -> Result<FixedPolicy> {
    if !Gamma::CANDIDATES.contains(&gamma) {
        return Err(Error::invalid(format!(
            "fixed policy gamma {gamma} is not in the candidate set {{2, 4, 6, 8}}"
        )));
    }
    Ok(FixedPolicy {
        gamma,
        name: format!("fixed{}", gamma.value()),
    })
}

impl GammaPolicy for FixedPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, _ctx: &StepContext) -> Result<PolicyDecision> {
        Ok(PolicyDecision {
            chosen_gamma: self.gamma,
            candidates: Vec::new(),
            policy_name: self.name.clone(),
        })
    }
}

/// What profile construction maximizes.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileObjective {
    /// Mean tokens produced per step.
    ExpectedTokens,
    /// Mean tokens per second under an explicit latency model.
    Throughput(CostModel),
}

impl ProfileObjective {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileObjective::ExpectedTokens => "expected-tokens",
            ProfileObjective::Throughput(_) => "throughput",
        }
    }
}

/// The best-performing gamma for one profile key and the mean objective
/// value it attained on the profiling data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEntry {
    pub gamma: Gamma,
    pub mean_objective: f64,
}

/// Profiling-derived best gammas: per compression level, and per
/// (compression, task) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    fixed_best: BTreeMap<usize, ProfileEntry>,
    task_best: BTreeMap<(usize, usize), ProfileEntry>,
    objective_name: String,
}

impl ProfileTable {
    pub fn objective_name(&self) -> &str {
        &self.objective_name
    }

    pub fn best_fixed(&self, compression: CompressionLevel) -> Result<ProfileEntry> {
        self.fixed_best
            .get(&compression.index())
            .copied()
            .ok_or_else(|| Error::IncompleteProfile {
                missing: vec![compression.to_string()],
            })
    }

    pub fn best_for_task(
        &self,
        compression: CompressionLevel,
        task: TaskCategory,
    ) -> Result<ProfileEntry> {
        self.task_best
            .get(&(compression.index(), task.index()))
            .copied()
            .ok_or_else(|| Error::IncompleteProfile {
                missing: vec![format!("{compression}/{task}")],
            })
    }

    pub fn fixed_entries(&self) -> Vec<(CompressionLevel, ProfileEntry)> {
        self.fixed_best
            .iter()
            .map(|(&c, &e)| (CompressionLevel::ALL[c], e))
            .collect()
    }

    pub fn task_entries(&self) -> Vec<(CompressionLevel, TaskCategory, ProfileEntry)> {
        self.task_best
            .iter()
            .map(|(&(c, t), &e)| (CompressionLevel::ALL[c], TaskCategory::ALL[t], e))
            .collect()
    }

    /// Reassembles a table from persisted entries.
    pub fn from_entries(
        objective_name: String,
        fixed: Vec<(CompressionLevel, ProfileEntry)>,
        per_task: Vec<(CompressionLevel, TaskCategory, ProfileEntry)>,
    ) -> ProfileTable {
        ProfileTable {
            fixed_best: fixed.into_iter().map(|(c, e)| (c.index(), e)).collect(),
            task_best: per_task
                .into_iter()
                .map(|(c, t, e)| ((c.index(), t.index()), e))
                .collect(),
            objective_name,
        }
    }
}

/// Scans the profiling corpus and records, for every compression level (and
/// every compression-task pair) present, the candidate gamma with the best
/// mean objective. Fails listing the missing cells if any key lacks records
/// for some candidate gamma.
pub fn build_profile(corpus: &[StepRecord], objective: &ProfileObjective) -> Result<ProfileTable> {
    if corpus.is_empty() {
        return Err(Error::invalid("profiling corpus is empty"));
    }
    if let ProfileObjective::Throughput(cost) = objective {
        cost.validate()?;
    }

    let score = |r: &StepRecord| -> f64 {
        let tokens = f64::from(r.outcome.tokens_produced);
        match objective {
            ProfileObjective::ExpectedTokens => tokens,
            ProfileObjective::Throughput(cost) => {
                let latency = step_latency_ms(cost, r.compression, r.gamma());
                throughput_toks_per_s(tokens, latency).expect("validated cost model")
            }
        }
    };

    // (comp, task, gamma) -> (sum, count); gammas outside the candidate set
    // are not eligible choices and are skipped.
    let mut cells: BTreeMap<(usize, usize, u32), (f64, usize)> = BTreeMap::new();
    let mut comps_present = [false; 3];
    let mut pairs_present = [[false; 4]; 3];
    for r in corpus {
        if !Gamma::CANDIDATES.contains(&r.gamma()) {
            continue;
        }
        comps_present[r.compression.index()] = true;
        pairs_present[r.compression.index()][r.task.index()] = true;
        let entry = cells
            .entry((r.compression.index(), r.task.index(), r.gamma().value()))
            .or_insert((0.0, 0));
        entry.0 += score(r);
        entry.1 += 1;
    }

    let mut missing = Vec::new();
    let mut fixed_best = BTreeMap::new();
    let mut task_best = BTreeMap::new();

    for (c, level) in CompressionLevel::ALL.iter().enumerate() {
        if !comps_present[c] {
            continue;
        }
        let mut best: Option<ProfileEntry> = None;
        for gamma in Gamma::CANDIDATES {
            let mut sum = 0.0;
            let mut count = 0usize;
            for t in 0..TaskCategory::ALL.len() {
                if let Some((s, n)) = cells.get(&(c, t, gamma.value())) {
                    sum += s;
                    count += n;
                }
            }
            if count == 0 {
                missing.push(format!("{level}/g{gamma}"));
                continue;
            }
            let mean = sum / count as f64;
            // Ties toward the smaller gamma: strict improvement required.
            if best.map_or(true, |b| mean > b.mean_objective) {
                best = Some(ProfileEntry {
                    gamma,
                    mean_objective: mean,
                });
            }
        }
        if let Some(entry) = best {
            fixed_best.insert(c, entry);
        }

        for (t, task) in TaskCategory::ALL.iter().enumerate() {
            if !pairs_present[c][t] {
                continue;
            }
            let mut best: Option<ProfileEntry> = None;
            for gamma in Gamma::CANDIDATES {
                let Some(&(sum, count)) = cells.get(&(c, t, gamma.value())) else {
                    missing.push(format!("{level}/{task}/g{gamma}"));
                    continue;
                };
                let mean = sum / count as f64;
                if best.map_or(true, |b| mean > b.mean_objective) {
                    best = Some(ProfileEntry {
                        gamma,
                        mean_objective: mean,
                    });
                }
            }
            if let Some(entry) = best {
                task_best.insert((c, t), entry);
            }
        }
    }

    if !missing.is_empty() {
        return Err(Error::IncompleteProfile { missing });
    }

    Ok(ProfileTable {
        fixed_best,
        task_best,
        objective_name: objective.name().to_string(),
    })
}

/// Chooses the profiling-best fixed gamma for the step's compression level.
#[derive(Debug, Clone)]
pub struct FixedBestPolicy {
    profile: ProfileTable,
}

pub fn fixed_best_policy(profile: ProfileTable) -> FixedBestPolicy {
    FixedBestPolicy { profile }
}

impl GammaPolicy for FixedBestPolicy {
    fn name(&self) -> &str {
        "fixed-best"
    }

    fn decide(&self, ctx: &StepContext) -> Result<PolicyDecision> {
        let entry = self.profile.best_fixed(ctx.compression)?;
        Ok(PolicyDecision {
            chosen_gamma: entry.gamma,
            candidates: Vec::new(),
            policy_name: self.name().to_string(),
        })
    }
}

/// Chooses the profiling-best gamma for the step's (compression, task) pair;
/// requires knowing the task label at inference time.
#[derive(Debug, Clone)]
pub struct TaskOraclePolicy {
    profile: ProfileTable,
}

pub fn task_oracle_policy(profile: ProfileTable) -> TaskOraclePolicy {
    TaskOraclePolicy { profile }
}

impl GammaPolicy for TaskOraclePolicy {
    fn name(&self) -> &str {
        "task-oracle"
    }

    fn decide(&self, ctx: &StepContext) -> Result<PolicyDecision> {
        let entry = self.profile.best_for_task(ctx.compression, ctx.task)?;
        Ok(PolicyDecision {
            chosen_gamma: entry.gamma,
            candidates: Vec::new(),
            policy_name: self.name().to_string(),
        })
    }
}

/// The adaptive policy: argmax of predicted expected tokens per step.
pub struct AdaptivePolicy {
    name: String,
    model: PredictorModel,
    candidates: Vec<Gamma>,
}

pub fn adaptive_policy(name: impl Into<String>, model: PredictorModel) -> AdaptivePolicy {
    AdaptivePolicy {
        name: name.into(),
        model,
        candidates: Gamma::CANDIDATES.to_vec(),
    }
}

impl AdaptivePolicy {
    pub fn model(&self) -> &PredictorModel {
        &self.model
    }
}

impl GammaPolicy for AdaptivePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, ctx: &StepContext) -> Result<PolicyDecision> {
        let mut decision = select_gamma(&self.model, &ctx.signals, ctx.compression, &self.candidates)?;
        decision.policy_name = self.name.clone();
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::test_support::{constant_model, toy_signals};
    use crate::predictor::{ModelKind, PredictorModel, TrainingMeta};
    use crate::step::step_outcome;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gamma(v: u32) -> Gamma {
        Gamma::new(v).unwrap()
    }

    /// Model whose prediction depends only on gamma, via a lookup.
    fn gamma_lookup_model(by_gamma: [f64; 4]) -> PredictorModel {
        // raw = w0 + w7 * (gamma/8); a lookup is not affine in gamma, so use
        // a forest with splits on the gamma feature instead.
        use crate::predictor::{ForestParams, Tree, TreeNode};
        let nodes = vec![
            TreeNode::Split { feature: 7, threshold: 0.375, left: 1, right: 2 },
            TreeNode::Split { feature: 7, threshold: 0.3, left: 3, right: 4 },
            TreeNode::Split { feature: 7, threshold: 0.875, left: 5, right: 6 },
            TreeNode::Leaf { value: by_gamma[0] },
            TreeNode::Leaf { value: by_gamma[1] },
            TreeNode::Leaf { value: by_gamma[2] },
            TreeNode::Leaf { value: by_gamma[3] },
        ];
        PredictorModel {
            kind: ModelKind::Forest(ForestParams {
                trees: vec![Tree { nodes }],
                importance: [0.0; 8],
            }),
            standardizer: crate::predictor::test_support::toy_standardizer(),
            meta: TrainingMeta {
                seed: 0,
                data_fingerprint: "test".into(),
            },
        }
    }

    #[test]
    fn expected_tokens_arithmetic() {
        assert_abs_diff_eq!(expected_tokens(0.5, gamma(4)).unwrap(), 3.0);
        assert_abs_diff_eq!(expected_tokens(1.0, gamma(8)).unwrap(), 9.0);
        for g in Gamma::CANDIDATES {
            assert_abs_diff_eq!(expected_tokens(0.0, g).unwrap(), 1.0);
        }
        assert!(expected_tokens(1.2, gamma(4)).is_err());
        assert!(expected_tokens(-0.1, gamma(4)).is_err());
    }

    #[test]
    fn select_gamma_enumerates_the_candidates() {
        // Predictions (0.9, 0.8, 0.6, 0.4) -> expected (2.8, 4.2, 4.6, 4.2).
        let model = gamma_lookup_model([0.9, 0.8, 0.6, 0.4]);
        let d = select_gamma(
            &model,
            &toy_signals(2.0, 0.6),
            CompressionLevel::Fp16,
            &Gamma::CANDIDATES,
        )
        .unwrap();
        assert_eq!(d.chosen_gamma, gamma(6));
        let expected = [2.8, 4.2, 4.6, 4.2];
        for (eval, want) in d.candidates.iter().zip(expected) {
            assert_abs_diff_eq!(eval.expected_tokens, want, epsilon = 1e-12);
            assert_abs_diff_eq!(
                eval.expected_tokens,
                eval.predicted_acceptance * eval.gamma.as_f64() + 1.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn constant_prediction_prefers_the_largest_gamma() {
        let model = constant_model(0.7);
        let d = select_gamma(
            &model,
            &toy_signals(2.0, 0.6),
            CompressionLevel::Int8,
            &Gamma::CANDIDATES,
        )
        .unwrap();
        assert_eq!(d.chosen_gamma, gamma(8));
    }

    #[test]
    fn exact_ties_break_toward_the_smallest_gamma() {
        // All candidates produce expected tokens exactly 2.0.
        let model = gamma_lookup_model([0.5, 0.25, 1.0 / 6.0, 0.125]);
        let d = select_gamma(
            &model,
            &toy_signals(2.0, 0.6),
            CompressionLevel::Nf4,
            &Gamma::CANDIDATES,
        )
        .unwrap();
        for eval in &d.candidates {
            assert_abs_diff_eq!(eval.expected_tokens, 2.0, epsilon = 1e-12);
        }
        assert_eq!(d.chosen_gamma, gamma(2));
    }

    #[test]
    fn select_gamma_validates_candidates() {
        let model = constant_model(0.5);
        let s = toy_signals(2.0, 0.6);
        assert!(select_gamma(&model, &s, CompressionLevel::Fp16, &[]).is_err());
        assert!(select_gamma(&model, &s, CompressionLevel::Fp16, &[gamma(3)]).is_err());
        let d = select_gamma(&model, &s, CompressionLevel::Fp16, &[gamma(4), gamma(2)]).unwrap();
        assert_eq!(d.candidates.len(), 2);
        assert_eq!(d.candidates[0].gamma, gamma(2));
    }

    fn record(
        compression: CompressionLevel,
        task: TaskCategory,
        g: u32,
        accepted: u32,
    ) -> StepRecord {
        StepRecord {
            experiment_id: "test".into(),
            compression,
            task,
            step_index: 0,
            outcome: step_outcome(gamma(g), accepted).unwrap(),
            signals: toy_signals(2.0, 0.6),
            step_latency_ms: None,
        }
    }

    /// One record for every (comp, task, gamma) cell; `accepted` decided by
    /// the callback.
    fn grid_corpus(accepted: impl Fn(CompressionLevel, TaskCategory, Gamma) -> u32) -> Vec<StepRecord> {
        let mut corpus = Vec::new();
        for c in CompressionLevel::ALL {
            for t in TaskCategory::ALL {
                for g in Gamma::CANDIDATES {
                    corpus.push(record(c, t, g.value(), accepted(c, t, g)));
                }
            }
        }
        corpus
    }

    #[test]
    fn fixed_policy_ignores_signals() {
        let p = fixed_policy(gamma(4)).unwrap();
        assert_eq!(p.name(), "fixed4");
        let a = p
            .decide(&StepContext {
                signals: toy_signals(1.0, 0.9),
                compression: CompressionLevel::Fp16,
                task: TaskCategory::Code,
            })
            .unwrap();
        let b = p
            .decide(&StepContext {
                signals: toy_signals(7.0, 0.1),
                compression: CompressionLevel::Nf4,
                task: TaskCategory::Chat,
            })
            .unwrap();
        assert_eq!(a.chosen_gamma, gamma(4));
        assert_eq!(b.chosen_gamma, gamma(4));
        assert_eq!(fixed_policy(gamma(2)).unwrap().decide(&StepContext {
            signals: toy_signals(1.0, 0.9),
            compression: CompressionLevel::Fp16,
            task: TaskCategory::Code,
        }).unwrap().chosen_gamma, gamma(2));
        assert!(fixed_policy(Gamma::new(3).unwrap()).is_err());
    }

    #[test]
    fn profile_picks_the_dominant_gamma() {
        // gamma=6 accepts everything; other gammas accept nothing.
        let corpus = grid_corpus(|_, _, g| if g.value() == 6 { 6 } else { 0 });
        let profile = build_profile(&corpus, &ProfileObjective::ExpectedTokens).unwrap();
        for c in CompressionLevel::ALL {
            assert_eq!(profile.best_fixed(c).unwrap().gamma, gamma(6));
            for t in TaskCategory::ALL {
                assert_eq!(profile.best_for_task(c, t).unwrap().gamma, gamma(6));
            }
        }
    }

    #[test]
    fn profile_ties_break_toward_smaller_gamma() {
        // gamma=4 with k=3 and gamma=6 with k=3 both produce 4 tokens; the
        // others produce 1.
        let corpus = grid_corpus(|_, _, g| match g.value() {
            4 | 6 => 3,
            _ => 0,
        });
        let profile = build_profile(&corpus, &ProfileObjective::ExpectedTokens).unwrap();
        for c in CompressionLevel::ALL {
            assert_eq!(profile.best_fixed(c).unwrap().gamma, gamma(4));
        }
    }

    #[test]
    fn profile_reports_missing_cells() {
        let mut corpus = grid_corpus(|_, _, _| 1);
        corpus.retain(|r| {
            !(r.compression == CompressionLevel::Int8
                && r.task == TaskCategory::Math
                && r.gamma() == gamma(6))
        });
        let err = build_profile(&corpus, &ProfileObjective::ExpectedTokens).unwrap_err();
        match err {
            Error::IncompleteProfile { missing } => {
                assert!(missing.iter().any(|m| m.contains("int8/math/g6")), "{missing:?}");
            }
            other => panic!("expected incomplete profile, got {other:?}"),
        }
    }

    #[test]
    fn lookup_policies_use_labels_only() {
        let corpus = grid_corpus(|c, t, g| {
            // Make (int8, math) favor gamma 8 and nf4 favor gamma 4 overall.
            match (c, t) {
                (CompressionLevel::Int8, TaskCategory::Math) => {
                    if g.value() == 8 { 8 } else { 0 }
                }
                (CompressionLevel::Nf4, _) => {
                    if g.value() == 4 { 4 } else { 0 }
                }
                _ => if g.value() == 2 { 2 } else { 0 },
            }
        });
        let profile = build_profile(&corpus, &ProfileObjective::ExpectedTokens).unwrap();

        let oracle = task_oracle_policy(profile.clone());
        let ctx = StepContext {
            signals: toy_signals(5.0, 0.2),
            compression: CompressionLevel::Int8,
            task: TaskCategory::Math,
        };
        assert_eq!(oracle.decide(&ctx).unwrap().chosen_gamma, gamma(8));

        let fixed_best = fixed_best_policy(profile);
        let nf4_ctx = StepContext {
            signals: toy_signals(0.5, 0.95),
            compression: CompressionLevel::Nf4,
            task: TaskCategory::Chat,
        };
        assert_eq!(fixed_best.decide(&nf4_ctx).unwrap().chosen_gamma, gamma(4));

        // Decisions ignore the signal values entirely.
        let nf4_ctx2 = StepContext {
            signals: toy_signals(8.0, 0.01),
            ..nf4_ctx
        };
        assert_eq!(
            fixed_best.decide(&nf4_ctx).unwrap().chosen_gamma,
            fixed_best.decide(&nf4_ctx2).unwrap().chosen_gamma
        );
    }

    #[test]
    fn adaptive_dominates_every_fixed_policy_per_step() {
        let model = gamma_lookup_model([0.9, 0.7, 0.5, 0.35]);
        let policy = adaptive_policy("speckv-fast", model.clone());
        let ctx = StepContext {
            signals: toy_signals(2.0, 0.6),
            compression: CompressionLevel::Fp16,
            task: TaskCategory::Code,
        };
        let decision = policy.decide(&ctx).unwrap();
        let chosen_a = model
            .predict_for(&ctx.signals, ctx.compression, decision.chosen_gamma)
            .unwrap();
        let chosen_expected = expected_tokens(chosen_a, decision.chosen_gamma).unwrap();
        for g in Gamma::CANDIDATES {
            let a = model.predict_for(&ctx.signals, ctx.compression, g).unwrap();
            let e = expected_tokens(a, g).unwrap();
            assert!(chosen_expected >= e - 1e-12);
        }
    }

    proptest! {
        /// Argmax with smallest-gamma tie-break is invariant under strictly
        /// increasing transforms of the objective values.
        #[test]
        fn argmax_invariant_under_monotone_transform(
            a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, d in 0.0f64..=1.0,
            scale in 0.1f64..4.0, shift in -2.0f64..2.0
        ) {
            let model = gamma_lookup_model([a, b, c, d]);
            let s = toy_signals(2.0, 0.6);
            let decision =
                select_gamma(&model, &s, CompressionLevel::Fp16, &Gamma::CANDIDATES).unwrap();

            // Recompute the argmax after an affine (strictly increasing)
            // transform of the objective; the winner must not move.
            let mut best_gamma = None;
            let mut best_val = f64::NEG_INFINITY;
            for eval in &decision.candidates {
                let transformed = scale * eval.expected_tokens + shift;
                if transformed > best_val {
                    best_val = transformed;
                    best_gamma = Some(eval.gamma);
                }
            }
            prop_assert_eq!(best_gamma.unwrap(), decision.chosen_gamma);
        }
    }
}

//! Speculation-step semantics: greedy verification, tokens produced per step,
//! acceptance rate, and the domain vocabulary shared by every other module.
//!
//! One speculation step proposes `gamma` draft tokens, verifies them greedily
//! against the target model's top-1 predictions, and always emits one extra
//! token from the target (the correction on a mismatch, the bonus on full
//! acceptance). All operations here are pure functions on immutable values.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signals::SignalVector;

/// Opaque token identity. Vocabulary structure never matters at this level.
pub type TokenId = u32;

/// Target-model weight precision regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompressionLevel {
    Fp16,
    Int8,
    Nf4,
}

impl CompressionLevel {
    pub const ALL: [CompressionLevel; 3] = [
        CompressionLevel::Fp16,
        CompressionLevel::Int8,
        CompressionLevel::Nf4,
    ];

    /// Stable string form used in data files and reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            CompressionLevel::Fp16 => "fp16",
            CompressionLevel::Int8 => "int8",
            CompressionLevel::Nf4 => "nf4",
        }
    }

    /// Position in [`CompressionLevel::ALL`]; used for one-hot encoding.
    pub fn index(&self) -> usize {
        match self {
            CompressionLevel::Fp16 => 0,
            CompressionLevel::Int8 => 1,
            CompressionLevel::Nf4 => 2,
        }
    }
}

impl fmt::Display for CompressionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CompressionLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fp16" => Ok(CompressionLevel::Fp16),
            "int8" => Ok(CompressionLevel::Int8),
            "nf4" => Ok(CompressionLevel::Nf4),
            other => Err(Error::invalid(format!(
                "unknown compression level `{other}` (expected fp16, int8, or nf4)"
            ))),
        }
    }
}

/// Prompt task category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskCategory {
    Code,
    Math,
    Chat,
    Summarization,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 4] = [
        TaskCategory::Code,
        TaskCategory::Math,
        TaskCategory::Chat,
        TaskCategory::Summarization,
    ];

    /// Stable string form used in data files and reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskCategory::Code => "code",
            TaskCategory::Math => "math",
            TaskCategory::Chat => "chat",
            TaskCategory::Summarization => "summarization",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            TaskCategory::Code => 0,
            TaskCategory::Math => 1,
            TaskCategory::Chat => 2,
            TaskCategory::Summarization => 3,
        }
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "code" => Ok(TaskCategory::Code),
            "math" => Ok(TaskCategory::Math),
            "chat" => Ok(TaskCategory::Chat),
            "summarization" => Ok(TaskCategory::Summarization),
            other => Err(Error::invalid(format!(
                "unknown task category `{other}` (expected code, math, chat, or summarization)"
            ))),
        }
    }
}

/// Speculation length: how many draft tokens are proposed per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gamma(u32);

impl Gamma {
    /// The candidate set adaptive policies choose from.
    pub const CANDIDATES: [Gamma; 4] = [Gamma(2), Gamma(4), Gamma(6), Gamma(8)];

    pub fn new(value: u32) -> Result<Gamma> {
        if value == 0 {
            return Err(Error::invalid("gamma must be at least 1"));
        }
        Ok(Gamma(value))
    }

    pub fn value(&self) -> u32 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.0)
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What one speculation step produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub gamma: Gamma,
    /// Number of draft tokens accepted, in `[0, gamma]`.
    pub accepted: u32,
    /// Always `accepted + 1`: the target contributes a correction or bonus token.
    pub tokens_produced: u32,
    /// `accepted / gamma`.
    pub acceptance_rate: f64,
}

/// Builds a [`StepOutcome`] from the accepted-token count of a step.
pub fn step_outcome(gamma: Gamma, accepted: u32) -> Result<StepOutcome> {
    if accepted > gamma.value() {
        return Err(Error::invalid(format!(
            "accepted count {accepted} exceeds gamma {gamma}"
        )));
    }
    Ok(StepOutcome {
        gamma,
        accepted,
        tokens_produced: accepted + 1,
        acceptance_rate: f64::from(accepted) / gamma.as_f64(),
    })
}

/// Greedy verification: count how many leading draft tokens match the target's
/// top-1 predictions. Verification stops at the first mismatch; later
/// positional matches do not count.
pub fn verify_greedy(draft_tokens: &[TokenId], target_predictions: &[TokenId]) -> Result<u32> {
    if draft_tokens.len() != target_predictions.len() {
        return Err(Error::invalid(format!(
            "draft has {} tokens but target has {} predictions",
            draft_tokens.len(),
            target_predictions.len()
        )));
    }
    if draft_tokens.is_empty() {
        return Err(Error::invalid("cannot verify an empty draft"));
    }
    let accepted = draft_tokens
        .iter()
        .zip(target_predictions)
        .take_while(|(d, t)| d == t)
        .count();
    Ok(accepted as u32)
}

/// One speculation step's observables: the profiling unit of the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub experiment_id: String,
    pub compression: CompressionLevel,
    pub task: TaskCategory,
    pub step_index: u32,
    pub outcome: StepOutcome,
    pub signals: SignalVector,
    /// Wall-clock latency of the step, when measured.
    pub step_latency_ms: Option<f64>,
}

impl StepRecord {
    pub fn gamma(&self) -> Gamma {
        self.outcome.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences_accept_all() {
        assert_eq!(verify_greedy(&[5, 9, 2, 7], &[5, 9, 2, 7]).unwrap(), 4);
    }

    #[test]
    fn prefix_match_stops_at_first_mismatch() {
        // Position 3 matches again after the mismatch, but it is irrelevant.
        assert_eq!(verify_greedy(&[5, 9, 2, 7], &[5, 9, 3, 7]).unwrap(), 2);
    }

    #[test]
    fn immediate_rejection() {
        assert_eq!(verify_greedy(&[5], &[6]).unwrap(), 0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = verify_greedy(&[1, 2], &[1]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn empty_draft_is_rejected() {
        assert!(verify_greedy(&[], &[]).is_err());
    }

    #[test]
    fn full_acceptance_outcome() {
        let o = step_outcome(Gamma::new(4).unwrap(), 4).unwrap();
        assert_eq!(o.tokens_produced, 5);
        assert_eq!(o.acceptance_rate, 1.0);
    }

    #[test]
    fn full_rejection_still_yields_correction_token() {
        let o = step_outcome(Gamma::new(4).unwrap(), 0).unwrap();
        assert_eq!(o.tokens_produced, 1);
        assert_eq!(o.acceptance_rate, 0.0);
    }

    #[test]
    fn partial_acceptance_arithmetic() {
        let o = step_outcome(Gamma::new(8).unwrap(), 5).unwrap();
        assert_eq!(o.tokens_produced, 6);
        assert!((o.acceptance_rate - 0.625).abs() < 1e-12);
    }

    #[test]
    fn accepted_above_gamma_is_rejected() {
        assert!(step_outcome(Gamma::new(4).unwrap(), 5).is_err());
    }

    #[test]
    fn gamma_zero_is_rejected() {
        assert!(Gamma::new(0).is_err());
    }

    #[test]
    fn outcome_ranges_exhaustive() {
        for g in 1..=8 {
            let gamma = Gamma::new(g).unwrap();
            for k in 0..=g {
                let o = step_outcome(gamma, k).unwrap();
                assert_eq!(o.tokens_produced, k + 1);
                assert!((1..=g + 1).contains(&o.tokens_produced));
                assert!((0.0..=1.0).contains(&o.acceptance_rate));
                assert!((o.acceptance_rate - f64::from(k) / f64::from(g)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn string_forms_round_trip() {
        for c in CompressionLevel::ALL {
            assert_eq!(c.as_str().parse::<CompressionLevel>().unwrap(), c);
        }
        for t in TaskCategory::ALL {
            assert_eq!(t.as_str().parse::<TaskCategory>().unwrap(), t);
        }
        assert_eq!("FP16".parse::<CompressionLevel>().unwrap(), CompressionLevel::Fp16);
        assert_eq!("Summarization".parse::<TaskCategory>().unwrap(), TaskCategory::Summarization);
        assert!("fp32".parse::<CompressionLevel>().is_err());
    }

    /// Naive loop oracle: longest common prefix length.
    fn prefix_oracle(a: &[TokenId], b: &[TokenId]) -> u32 {
        let mut k = 0;
        for i in 0..a.len() {
            if a[i] != b[i] {
                break;
            }
            k += 1;
        }
        k
    }

    proptest! {
        #[test]
        fn verify_matches_prefix_oracle(
            pair in (1usize..=16).prop_flat_map(|len| {
                (
                    prop::collection::vec(0u32..4, len),
                    prop::collection::vec(0u32..4, len),
                )
            })
        ) {
            let (a, b) = pair;
            prop_assert_eq!(verify_greedy(&a, &b).unwrap(), prefix_oracle(&a, &b));
        }

        #[test]
        fn appending_equal_suffix_extends_only_full_acceptance(
            pair in (1usize..=8).prop_flat_map(|len| {
                (
                    prop::collection::vec(0u32..3, len),
                    prop::collection::vec(0u32..3, len),
                )
            }),
            suffix in prop::collection::vec(0u32..3, 1..4)
        ) {
            let (a, b) = pair;
            let k = verify_greedy(&a, &b).unwrap();
            let mut a2 = a.clone();
            let mut b2 = b.clone();
            a2.extend_from_slice(&suffix);
            b2.extend_from_slice(&suffix);
            let k2 = verify_greedy(&a2, &b2).unwrap();
            if k as usize == a.len() {
                prop_assert_eq!(k2, k + suffix.len() as u32);
            } else {
                prop_assert_eq!(k2, k);
            }
        }
    }
}

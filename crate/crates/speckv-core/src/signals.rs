//! Zero-cost draft-model signals.
//!
//! During speculative decoding the draft model already produces a full
//! probability distribution for every proposed token. This module turns those
//! distributions into the four per-step aggregates used everywhere downstream:
//! mean/max Shannon entropy (bits) and mean/min top-1 confidence.

use crate::error::{Error, Result};

/// Absolute tolerance on a distribution's probability sum.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A validated probability distribution over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probabilities: Vec<f64>,
}

impl TokenDistribution {
    /// Validates and wraps a probability vector. Entries must be non-negative
    /// and sum to 1 within [`SUM_TOLERANCE`]; the vocabulary must have at
    /// least two entries.
    pub fn new(probabilities: Vec<f64>) -> Result<TokenDistribution> {
        if probabilities.len() < 2 {
            return Err(Error::invalid(format!(
                "vocabulary size {} is below the minimum of 2",
                probabilities.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::invalid(format!(
                    "probability at index {i} is {p}, expected a finite value >= 0"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "probabilities sum to {sum}, expected 1 within {SUM_TOLERANCE:e}"
            )));
        }
        Ok(TokenDistribution { probabilities })
    }

    pub fn vocab_size(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Shannon entropy in bits. Zero-probability entries contribute exactly 0
    /// (by branch, not by smoothing), so one-hot distributions report 0.0.
    pub fn entropy_bits(&self) -> f64 {
        self.probabilities
            .iter()
            .map(|&p| if p > 0.0 { -p * p.log2() } else { 0.0 })
            .sum()
    }

    /// Top-1 probability. Always in `(0, 1]` for a valid distribution.
    pub fn top1_confidence(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }
}

/// The four per-step draft signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalVector {
    pub mean_entropy_bits: f64,
    pub mean_confidence: f64,
    pub max_entropy_bits: f64,
    pub min_confidence: f64,
}

/// Aggregates per-token signals over the distributions of one speculation
/// step (one distribution per proposed draft token).
pub fn aggregate_signals(dists: &[TokenDistribution]) -> Result<SignalVector> {
    if dists.is_empty() {
        return Err(Error::invalid(
            "cannot aggregate signals over an empty step",
        ));
    }
    let n = dists.len() as f64;
    let mut sum_entropy = 0.0;
    let mut sum_conf = 0.0;
    let mut max_entropy = f64::NEG_INFINITY;
    let mut min_conf = f64::INFINITY;
    for d in dists {
        let h = d.entropy_bits();
        let c = d.top1_confidence();
        sum_entropy += h;
        sum_conf += c;
        max_entropy = max_entropy.max(h);
        min_conf = min_conf.min(c);
    }
    Ok(SignalVector {
        mean_entropy_bits: sum_entropy / n,
        mean_confidence: sum_conf / n,
        max_entropy_bits: max_entropy,
        min_confidence: min_conf,
    })
}

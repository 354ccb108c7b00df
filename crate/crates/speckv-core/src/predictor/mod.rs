//! Acceptance-rate prediction.
//!
//! A predictor estimates the per-step acceptance rate `a` from the draft
//! signals, the compression level, and a candidate speculation length. The
//! supported regressor families are ridge regression (closed form), a
//! one-hidden-layer MLP (16 or 32 units), and a bagged random forest (10 or
//! 100 trees). All models share the same 8-dimensional featurization and
//! clip predictions to `[0, 1]`.

mod forest;
mod mlp;
mod ridge;

pub use forest::{forest_fit, ForestParams, Tree, TreeNode};
pub use mlp::{mlp_fit, MlpHyperParams, MlpParams};
pub use ridge::{ridge_fit, RidgeParams};

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signals::SignalVector;
use crate::stats;
use crate::step::{CompressionLevel, Gamma, StepRecord};

/// Four standardized signals + compression one-hot (3) + normalized gamma.
pub const FEATURE_DIM: usize = 8;

/// Largest speculation length the featurization accepts; the candidate set
/// is closed and models never extrapolate past it.
pub const MAX_GAMMA: u32 = 8;

/// Standardized model input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-signal mean and standard deviation fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: [f64; 4],
    std: [f64; 4],
}

impl Standardizer {
    /// Fits signal means and standard deviations. Degenerate (zero-variance)
    /// columns fall back to a standard deviation of 1.
    pub fn fit(signals: &[SignalVector]) -> Result<Standardizer> {
        if signals.is_empty() {
            return Err(Error::invalid("cannot fit a standardizer on no data"));
        }
        let n = signals.len() as f64;
        let columns: [Vec<f64>; 4] = [
            signals.iter().map(|s| s.mean_entropy_bits).collect(),
            signals.iter().map(|s| s.mean_confidence).collect(),
            signals.iter().map(|s| s.max_entropy_bits).collect(),
            signals.iter().map(|s| s.min_confidence).collect(),
        ];
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for (i, col) in columns.iter().enumerate() {
            mean[i] = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>() / n;
            std[i] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Standardizer { mean, std })
    }

    /// Construct from previously fitted statistics (model deserialization).
    pub fn from_stats(mean: [f64; 4], std: [f64; 4]) -> Result<Standardizer> {
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid(
                "standardizer standard deviations must be positive",
            ));
        }
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, s: &SignalVector) -> [f64; 4] {
        let raw = [
            s.mean_entropy_bits,
            s.mean_confidence,
            s.max_entropy_bits,
            s.min_confidence,
        ];
        let mut z = [0.0; 4];
        for i in 0..4 {
            z[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
        z
    }

    pub fn inverse_transform(&self, z: &[f64; 4]) -> [f64; 4] {
        let mut raw = [0.0; 4];
        for i in 0..4 {
            raw[i] = z[i] * self.std[i] + self.mean[i];
        }
        raw
    }

    pub fn mean_stats(&self) -> &[f64; 4] {
        &self.mean
    }

    pub fn std_stats(&self) -> &[f64; 4] {
        &self.std
    }
}

/// Builds the model input for one (signals, compression, gamma) triple.
pub fn featurize(
    signals: &SignalVector,
    compression: CompressionLevel,
    gamma: Gamma,
    standardizer: &Standardizer,
) -> Result<FeatureVector> {
    if gamma.value() > MAX_GAMMA {
        return Err(Error::invalid(format!(
            "gamma {gamma} is outside the supported range 1..={MAX_GAMMA}"
        )));
    }
    let z = standardizer.transform(signals);
    let mut x = [0.0; FEATURE_DIM];
    x[..4].copy_from_slice(&z);
    x[4 + compression.index()] = 1.0;
    x[7] = gamma.as_f64() / f64::from(MAX_GAMMA);
    Ok(FeatureVector(x))
}

/// Model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Ridge,
    Mlp16,
    Mlp32,
    Forest(u32),
}

impl Variant {
    /// The five architectures trained and compared by default.
    pub const STANDARD: [Variant; 5] = [
        Variant::Ridge,
        Variant::Mlp16,
        Variant::Mlp32,
        Variant::Forest(10),
        Variant::Forest(100),
    ];

    pub fn tag(&self) -> String {
        match self {
            Variant::Ridge => "ridge".into(),
            Variant::Mlp16 => "mlp16".into(),
            Variant::Mlp32 => "mlp32".into(),
            Variant::Forest(n) => format!("rf{n}"),
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        let normalized: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect();
        match normalized.as_str() {
            "ridge" => Ok(Variant::Ridge),
            "mlp16" => Ok(Variant::Mlp16),
            "mlp32" => Ok(Variant::Mlp32),
            other => {
                if let Some(n) = other.strip_prefix("rf") {
                    let n: u32 = n
                        .parse()
                        .map_err(|_| Error::invalid(format!("unknown model variant `{s}`")))?;
                    if n == 0 {
                        return Err(Error::invalid("forest needs at least one tree"));
                    }
                    Ok(Variant::Forest(n))
                } else {
                    Err(Error::invalid(format!(
                        "unknown model variant `{s}` (expected ridge, mlp16, mlp32, rf10, or rf100)"
                    )))
                }
            }
        }
    }
}

/// Training provenance carried by every model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    /// Content hash of the featurized training matrix and targets.
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Ridge(RidgeParams),
    Mlp(MlpParams),
    Forest(ForestParams),
}

/// A trained acceptance-rate regressor plus its featurization state.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub kind: ModelKind,
    pub standardizer: Standardizer,
    pub meta: TrainingMeta,
}

impl PredictorModel {
    pub fn variant(&self) -> Variant {
        match &self.kind {
            ModelKind::Ridge(_) => Variant::Ridge,
            ModelKind::Mlp(m) => {
                if m.hidden == 16 {
                    Variant::Mlp16
                } else {
                    Variant::Mlp32
                }
            }
            ModelKind::Forest(f) => Variant::Forest(f.trees.len() as u32),
        }
    }

    /// Predicted acceptance rate, clipped to `[0, 1]`.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let raw = match &self.kind {
            ModelKind::Ridge(m) => m.raw_predict(x),
            ModelKind::Mlp(m) => m.raw_predict(x),
            ModelKind::Forest(m) => m.raw_predict(x),
        };
        raw.clamp(0.0, 1.0)
    }

    /// Featurize-then-predict convenience for one candidate gamma.
    pub fn predict_for(
        &self,
        signals: &SignalVector,
        compression: CompressionLevel,
        gamma: Gamma,
    ) -> Result<f64> {
        let x = featurize(signals, compression, gamma, &self.standardizer)?;
        Ok(self.predict(&x))
    }
}

/// Impurity-decrease feature importance of a forest model, normalized to
/// sum to 1. Rejects non-forest models.
pub fn feature_importance(model: &PredictorModel) -> Result<[f64; FEATURE_DIM]> {
    match &model.kind {
        ModelKind::Forest(f) => Ok(f.importance),
        _ => Err(Error::invalid(format!(
            "feature importance is only defined for forest models, got {}",
            model.variant().tag()
        ))),
    }
}

/// Names of the feature slots, in [`FeatureVector`] order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "mean_entropy_bits",
    "mean_confidence",
    "max_entropy_bits",
    "min_confidence",
    "comp_fp16",
    "comp_int8",
    "comp_nf4",
    "gamma",
];

/// Hyperparameters for every trainable family, echoed into reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub ridge_lambda: f64,
    pub mlp: MlpHyperParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ridge_lambda: 1.0,
            mlp: MlpHyperParams::default(),
        }
    }
}

/// Featurized training or evaluation data.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub x: Vec<FeatureVector>,
    pub y: Vec<f64>,
}

/// Featurizes records against a fitted standardizer; targets are the
/// recorded per-step acceptance rates.
pub fn featurize_records(
    records: &[StepRecord],
    standardizer: &Standardizer,
) -> Result<LabeledSet> {
    let mut x = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        x.push(featurize(&r.signals, r.compression, r.gamma(), standardizer)?);
        y.push(r.outcome.acceptance_rate);
    }
    Ok(LabeledSet { x, y })
}

/// Content hash of a featurized dataset; ties a model file to the exact data
/// it was trained on.
pub fn data_fingerprint(x: &[FeatureVector], y: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for (xi, yi) in x.iter().zip(y) {
        for v in xi.as_slice() {
            hasher.update(format!("{v:.16e} ").as_bytes());
        }
        hasher.update(format!("-> {yi:.16e}\n").as_bytes());
    }
    hex_string(&hasher.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Fits a standardizer on `records` and trains the requested variant.
pub fn train(
    variant: Variant,
    records: &[StepRecord],
    config: &TrainConfig,
    seed: u64,
) -> Result<PredictorModel> {
    let signals: Vec<SignalVector> = records.iter().map(|r| r.signals).collect();
    let standardizer = Standardizer::fit(&signals)?;
    let set = featurize_records(records, &standardizer)?;
    let meta = TrainingMeta {
        seed,
        data_fingerprint: data_fingerprint(&set.x, &set.y),
    };
    let kind = match variant {
        Variant::Ridge => ModelKind::Ridge(ridge_fit(&set.x, &set.y, config.ridge_lambda)?),
        Variant::Mlp16 => ModelKind::Mlp(mlp_fit(&set.x, &set.y, 16, &config.mlp, seed)?),
        Variant::Mlp32 => ModelKind::Mlp(mlp_fit(&set.x, &set.y, 32, &config.mlp, seed)?),
        Variant::Forest(n) => ModelKind::Forest(forest_fit(&set.x, &set.y, n as usize, seed)?),
    };
    Ok(PredictorModel {
        kind,
        standardizer,
        meta,
    })
}

/// Held-out quality of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMetrics {
    pub test_mse: f64,
    pub test_pearson: f64,
    /// Filled in by [`measure_overhead`], not by [`eval_metrics`].
    pub overhead_us_per_decision: Option<f64>,
}

/// Mean squared error and Pearson correlation on held-out data.
pub fn eval_metrics(
    model: &PredictorModel,
    x_test: &[FeatureVector],
    y_test: &[f64],
) -> Result<PredictorMetrics> {
    if x_test.is_empty() || x_test.len() != y_test.len() {
        return Err(Error::invalid("metrics need a non-empty, aligned test set"));
    }
    let predictions: Vec<f64> = x_test.iter().map(|x| model.predict(x)).collect();
    let mse = predictions
        .iter()
        .zip(y_test)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / y_test.len() as f64;
    let pearson = stats::pearson(&predictions, y_test)?;
    Ok(PredictorMetrics {
        test_mse: mse,
        test_pearson: pearson,
        overhead_us_per_decision: None,
    })
}

/// Featurizes `records` with the model's own standardizer and evaluates.
pub fn eval_on_records(model: &PredictorModel, records: &[StepRecord]) -> Result<PredictorMetrics> {
    let set = featurize_records(records, &model.standardizer)?;
    eval_metrics(model, &set.x, &set.y)
}

/// Wall-clock cost of full policy decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadMeasurement {
    pub median_us_per_decision: f64,
    pub min_us_per_decision: f64,
    pub repetitions: usize,
    pub n_decisions: usize,
}

/// Times `n_decisions` complete controller decisions (featurize and predict
/// for all four candidate gammas, then argmax of expected tokens) and
/// reports the min and median per-decision cost over at least 5 repetitions.
pub fn measure_overhead(model: &PredictorModel, n_decisions: usize) -> Result<OverheadMeasurement> {
    const REPETITIONS: usize = 5;
    if n_decisions < 1_000 {
        return Err(Error::invalid(
            "overhead measurement needs at least 1,000 decisions",
        ));
    }

    // Plausible inputs; decision cost does not depend on the values.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let inputs: Vec<(SignalVector, CompressionLevel)> = (0..1024)
        .map(|_| {
            let mean_entropy = rng.gen_range(0.0..8.0);
            let max_entropy = mean_entropy + rng.gen_range(0.0..1.0);
            let mean_confidence = rng.gen_range(0.05..1.0);
            let min_confidence = mean_confidence * rng.gen_range(0.5..1.0);
            let compression = CompressionLevel::ALL[rng.gen_range(0..3)];
            (
                SignalVector {
                    mean_entropy_bits: mean_entropy,
                    mean_confidence,
                    max_entropy_bits: max_entropy,
                    min_confidence,
                },
                compression,
            )
        })
        .collect();

    let mut per_rep_us = Vec::with_capacity(REPETITIONS);
    for _ in 0..REPETITIONS {
        let start = Instant::now();
        let mut sink = 0.0f64;
        for i in 0..n_decisions {
            let (signals, compression) = &inputs[i % inputs.len()];
            let mut best_gamma = Gamma::CANDIDATES[0];
            let mut best_expected = f64::NEG_INFINITY;
            for gamma in Gamma::CANDIDATES {
                let a_hat = model.predict_for(signals, *compression, gamma)?;
                let expected = a_hat * gamma.as_f64() + 1.0;
                if expected > best_expected {
                    best_expected = expected;
                    best_gamma = gamma;
                }
            }
            sink += best_gamma.as_f64();
        }
        std::hint::black_box(sink);
        per_rep_us.push(start.elapsed().as_secs_f64() * 1e6 / n_decisions as f64);
    }

    per_rep_us.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    Ok(OverheadMeasurement {
        median_us_per_decision: per_rep_us[REPETITIONS / 2],
        min_us_per_decision: per_rep_us[0],
        repetitions: REPETITIONS,
        n_decisions,
    })
}

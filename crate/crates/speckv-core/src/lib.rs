//! Adaptive speculation-length control for speculative decoding.
//!
//! Speculative decoding proposes `gamma` draft tokens per step and verifies
//! them with the target model; the right `gamma` depends on how predictable
//! the text currently is and on how the target model is compressed. This
//! crate implements the full offline pipeline around that idea:
//!
//! - [`step`]: speculation-step arithmetic (greedy verification, tokens per
//!   step, acceptance rate) and the shared domain vocabulary.
//! - [`signals`]: the four zero-cost draft signals (mean/max entropy,
//!   mean/min confidence).
//! - [`synth`]: a calibrated synthetic profiling world plus the per-step
//!   latency cost model.
//! - [`predictor`]: acceptance-rate regressors (ridge, MLP, random forest)
//!   with a shared featurizer and overhead benchmarking.
//! - [`policy`]: expected-tokens gamma selection and the fixed/oracle
//!   baseline policies.
//! - [`eval`]: stratified splits, per-policy scoring, paired bootstrap
//!   significance tests, and report assembly.
//! - [`io`]: the step-record CSV format, model/profile persistence, and
//!   configuration files.

pub mod error;
pub mod eval;
pub mod io;
pub mod policy;
pub mod predictor;
pub mod signals;
pub mod step;
pub mod synth;

pub use error::{Error, Result};
pub use signals::{SignalVector, TokenDistribution};
pub use step::{CompressionLevel, Gamma, StepOutcome, StepRecord, TaskCategory};
pub use synth::{CostModel, WorldParams};

//! One-hidden-layer MLP trained by mini-batch gradient descent.
//!
//! Layout: affine (8 -> hidden) -> rectifier -> affine (hidden -> 1). The
//! squared-error loss is computed on the unclipped output; clipping to
//! `[0, 1]` happens only at prediction time.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictor::{FeatureVector, FEATURE_DIM};

/// Training knobs, all surfaced in configuration files.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpHyperParams {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub momentum: f64,
    pub cosine_decay: bool,
}

impl Default for MlpHyperParams {
    fn default() -> Self {
        MlpHyperParams {
            batch_size: 64,
            learning_rate: 1e-3,
            epochs: 200,
            momentum: 0.9,
            cosine_decay: true,
        }
    }
}

/// Trained network parameters. `w1` is `hidden x 8` row-major (one row per
/// hidden unit); `w2` has one weight per hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub hyper: MlpHyperParams,
}

#[derive(Debug, Clone)]
pub(crate) struct MlpGradients {
    pub dw1: Vec<f64>,
    pub db1: Vec<f64>,
    pub dw2: Vec<f64>,
    pub db2: f64,
}

impl MlpParams {
    fn init(hidden: usize, hyper: &MlpHyperParams, rng: &mut ChaCha8Rng) -> MlpParams {
        // Xavier-uniform for both layers, zero biases.
        let bound1 = (6.0 / (FEATURE_DIM + hidden) as f64).sqrt();
        let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
        MlpParams {
            hidden,
            w1: (0..hidden * FEATURE_DIM)
                .map(|_| rng.gen_range(-bound1..bound1))
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.gen_range(-bound2..bound2)).collect(),
            b2: 0.0,
            hyper: hyper.clone(),
        }
    }

    /// Unclipped forward pass.
    pub fn raw_predict(&self, x: &FeatureVector) -> f64 {
        let mut out = self.b2;
        for h in 0..self.hidden {
            let mut z = self.b1[h];
            let row = &self.w1[h * FEATURE_DIM..(h + 1) * FEATURE_DIM];
            for (w, v) in row.iter().zip(x.as_slice()) {
                z += w * v;
            }
            if z > 0.0 {
                out += self.w2[h] * z;
            }
        }
        out
    }

    /// Mean squared error of the unclipped output over a batch.
    pub(crate) fn batch_loss(&self, x: &[FeatureVector], y: &[f64]) -> f64 {
        let mut loss = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let e = self.raw_predict(xi) - yi;
            loss += e * e;
        }
        loss / x.len() as f64
    }

    /// Analytic gradients of [`Self::batch_loss`] for every parameter tensor.
    pub(crate) fn batch_gradients(&self, x: &[FeatureVector], y: &[f64]) -> MlpGradients {
        let n = x.len() as f64;
        let mut g = MlpGradients {
            dw1: vec![0.0; self.w1.len()],
            db1: vec![0.0; self.hidden],
            dw2: vec![0.0; self.hidden],
            db2: 0.0,
        };
        let mut hidden_out = vec![0.0; self.hidden];
        for (xi, &yi) in x.iter().zip(y) {
            let mut out = self.b2;
            for h in 0..self.hidden {
                let mut z = self.b1[h];
                let row = &self.w1[h * FEATURE_DIM..(h + 1) * FEATURE_DIM];
                for (w, v) in row.iter().zip(xi.as_slice()) {
                    z += w * v;
                }
                let a = if z > 0.0 { z } else { 0.0 };
                hidden_out[h] = a;
                out += self.w2[h] * a;
            }
            let dout = 2.0 * (out - yi) / n;
            g.db2 += dout;
            for h in 0..self.hidden {
                g.dw2[h] += dout * hidden_out[h];
                if hidden_out[h] > 0.0 {
                    let dz = dout * self.w2[h];
                    g.db1[h] += dz;
                    let grad_row = &mut g.dw1[h * FEATURE_DIM..(h + 1) * FEATURE_DIM];
                    for (gw, v) in grad_row.iter_mut().zip(xi.as_slice()) {
                        *gw += dz * v;
                    }
                }
            }
        }
        g
    }
}

/// Trains an MLP. Deterministic given `(x, y, hidden, hyper, seed)`; the
/// returned parameters are the epoch snapshot with the lowest full-training
/// MSE, so the result never fits worse than the initialization.
pub fn mlp_fit(
    x: &[FeatureVector],
    y: &[f64],
    hidden: usize,
    hyper: &MlpHyperParams,
    seed: u64,
) -> Result<MlpParams> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but targets have {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < FEATURE_DIM {
        return Err(Error::invalid(format!(
            "mlp needs at least {FEATURE_DIM} rows, got {}",
            x.len()
        )));
    }
    if hidden == 0 {
        return Err(Error::invalid("hidden layer needs at least one unit"));
    }
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "acceptance-rate target {bad} is outside [0, 1]"
        )));
    }
    if hyper.batch_size == 0 || hyper.epochs == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::invalid(
            "mlp hyperparameters need batch_size >= 1, epochs >= 1, learning_rate > 0",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::init(hidden, hyper, &mut rng);

    let mut velocity = MlpGradients {
        dw1: vec![0.0; params.w1.len()],
        db1: vec![0.0; params.b1.len()],
        dw2: vec![0.0; params.w2.len()],
        db2: 0.0,
    };

    let mut best = params.clone();
    let mut best_loss = params.batch_loss(x, y);

    let batches_per_epoch = x.len().div_ceil(hyper.batch_size);
    let total_steps = (hyper.epochs * batches_per_epoch) as f64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut step = 0usize;

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let bx: Vec<FeatureVector> = chunk.iter().map(|&i| x[i]).collect();
            let by: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let g = params.batch_gradients(&bx, &by);

            let lr = if hyper.cosine_decay {
                hyper.learning_rate
                    * 0.5
                    * (1.0 + (std::f64::consts::PI * step as f64 / total_steps).cos())
            } else {
                hyper.learning_rate
            };
            step += 1;

            let m = hyper.momentum;
            for (v, gr) in velocity.dw1.iter_mut().zip(&g.dw1) {
                *v = m * *v - lr * gr;
            }
            for (v, gr) in velocity.db1.iter_mut().zip(&g.db1) {
                *v = m * *v - lr * gr;
            }
            for (v, gr) in velocity.dw2.iter_mut().zip(&g.dw2) {
                *v = m * *v - lr * gr;
            }
            velocity.db2 = m * velocity.db2 - lr * g.db2;

            for (w, v) in params.w1.iter_mut().zip(&velocity.dw1) {
                *w += v;
            }
            for (w, v) in params.b1.iter_mut().zip(&velocity.db1) {
                *w += v;
            }
            for (w, v) in params.w2.iter_mut().zip(&velocity.dw2) {
                *w += v;
            }
            params.b2 += velocity.db2;
        }

        let loss = params.batch_loss(x, y);
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "loss became non-finite at epoch {epoch}; lower the learning rate"
            )));
        }
        if loss < best_loss {
            best_loss = loss;
            best = params.clone();
        }
    }

    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_batch(n: usize, seed: u64) -> (Vec<FeatureVector>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<FeatureVector> = (0..n)
            .map(|_| {
                let mut x = [0.0; FEATURE_DIM];
                for v in x.iter_mut() {
                    *v = rng.gen_range(-1.5..1.5);
                }
                FeatureVector(x)
            })
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        (xs, ys)
    }

    #[test]
    fn constant_target_is_learned() {
        let (xs, _) = random_batch(256, 21);
        let ys = vec![0.7; xs.len()];
        let params = mlp_fit(&xs, &ys, 16, &MlpHyperParams::default(), 3).unwrap();
        for x in &xs {
            assert_abs_diff_eq!(params.raw_predict(x), 0.7, epsilon = 0.01);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let (xs, ys) = random_batch(10, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = MlpParams::init(6, &MlpHyperParams::default(), &mut rng);
        // Shift biases off zero so no rectifier sits exactly at its kink.
        for b in params.b1.iter_mut() {
            *b = rng.gen_range(0.01..0.1);
        }
        params.b2 = 0.05;

        let analytic = params.batch_gradients(&xs, &ys);
        let h = 1e-5;
        let rel = |a: f64, fd: f64| (a - fd).abs() / f64::max(1e-8, a.abs() + fd.abs());

        let mut check = |get: &mut dyn FnMut(&mut MlpParams) -> &mut f64, expected: f64| {
            let mut p = params.clone();
            *get(&mut p) += h;
            let up = p.batch_loss(&xs, &ys);
            let mut p = params.clone();
            *get(&mut p) -= h;
            let down = p.batch_loss(&xs, &ys);
            let fd = (up - down) / (2.0 * h);
            assert!(
                rel(expected, fd) <= 1e-4,
                "gradient mismatch: analytic {expected}, finite-difference {fd}"
            );
        };

        for i in 0..params.w1.len() {
            check(&mut |p| &mut p.w1[i], analytic.dw1[i]);
        }
        for i in 0..params.b1.len() {
            check(&mut |p| &mut p.b1[i], analytic.db1[i]);
        }
        for i in 0..params.w2.len() {
            check(&mut |p| &mut p.w2[i], analytic.dw2[i]);
        }
        check(&mut |p| &mut p.b2, analytic.db2);
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = random_batch(200, 4);
        let a = mlp_fit(&xs, &ys, 16, &MlpHyperParams::default(), 17).unwrap();
        let b = mlp_fit(&xs, &ys, 16, &MlpHyperParams::default(), 17).unwrap();
        assert_eq!(a, b);
        let c = mlp_fit(&xs, &ys, 16, &MlpHyperParams::default(), 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn training_never_ends_worse_than_it_started() {
        let (xs, ys) = random_batch(300, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let initial = MlpParams::init(16, &MlpHyperParams::default(), &mut rng);
        let initial_loss = initial.batch_loss(&xs, &ys);
        let trained = mlp_fit(&xs, &ys, 16, &MlpHyperParams::default(), 5).unwrap();
        assert!(trained.batch_loss(&xs, &ys) <= initial_loss);
    }

    #[test]
    fn divergent_learning_rate_is_reported() {
        let (xs, ys) = random_batch(64, 8);
        let hyper = MlpHyperParams {
            learning_rate: 1e12,
            cosine_decay: false,
            ..MlpHyperParams::default()
        };
        let err = mlp_fit(&xs, &ys, 16, &hyper, 1).unwrap_err();
        match err {
            Error::Training(msg) => assert!(msg.contains("epoch")),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let (xs, ys) = random_batch(32, 10);
        assert!(mlp_fit(&xs[..4], &ys[..4], 16, &MlpHyperParams::default(), 0).is_err());
        assert!(mlp_fit(&xs, &ys, 0, &MlpHyperParams::default(), 0).is_err());
        let mut bad = ys.clone();
        bad[0] = -0.1;
        assert!(mlp_fit(&xs, &bad, 16, &MlpHyperParams::default(), 0).is_err());
    }
}

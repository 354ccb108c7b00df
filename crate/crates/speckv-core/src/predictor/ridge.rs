//! Ridge regression via the regularized normal equations.

use crate::error::{Error, Result};
use crate::predictor::{FeatureVector, FEATURE_DIM};

const AUG: usize = FEATURE_DIM + 1;

/// Closed-form ridge solution. `weights[0]` is the (unpenalized) intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeParams {
    pub weights: [f64; AUG],
    pub lambda: f64,
}

impl RidgeParams {
    pub fn raw_predict(&self, x: &FeatureVector) -> f64 {
        let mut out = self.weights[0];
        for (w, v) in self.weights[1..].iter().zip(x.as_slice()) {
            out += w * v;
        }
        out
    }
}

/// Solves `(D'D + lambda * P) w = D'y` where `D = [1 | X]` and `P` penalizes
/// every coefficient except the intercept. Deterministic; fails with a
/// diagnostic when the system is singular (only possible at `lambda = 0`
/// with rank-deficient inputs).
pub fn ridge_fit(x: &[FeatureVector], y: &[f64], lambda: f64) -> Result<RidgeParams> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but targets have {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < FEATURE_DIM {
        return Err(Error::invalid(format!(
            "ridge needs at least {FEATURE_DIM} rows, got {}",
            x.len()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("ridge lambda must be non-negative"));
    }
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "acceptance-rate target {bad} is outside [0, 1]"
        )));
    }

    // Normal equations on the augmented design.
    let mut a = [[0.0f64; AUG]; AUG];
    let mut b = [0.0f64; AUG];
    for (xi, &yi) in x.iter().zip(y) {
        let mut d = [0.0f64; AUG];
        d[0] = 1.0;
        d[1..].copy_from_slice(xi.as_slice());
        for r in 0..AUG {
            b[r] += d[r] * yi;
            for c in 0..AUG {
                a[r][c] += d[r] * d[c];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += lambda;
    }

    let weights = solve(a, b)?;
    Ok(RidgeParams { weights, lambda })
}

/// Value of the ridge objective `||Dw - y||^2 + lambda * ||w_1..||^2` at the
/// given weights. Exposed so independent minimizers can be compared against
/// the closed form.
pub fn ridge_objective(x: &[FeatureVector], y: &[f64], lambda: f64, weights: &[f64; AUG]) -> f64 {
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let mut pred = weights[0];
        for (w, v) in weights[1..].iter().zip(xi.as_slice()) {
            pred += w * v;
        }
        loss += (pred - yi) * (pred - yi);
    }
    loss + lambda * weights[1..].iter().map(|w| w * w).sum::<f64>()
}

/// Gaussian elimination with partial pivoting on a 9x9 system.
fn solve(mut a: [[f64; AUG]; AUG], mut b: [f64; AUG]) -> Result<[f64; AUG]> {
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for col in 0..AUG {
        let pivot_row = (col..AUG)
            .max_by(|&r1, &r2| {
                a[r1][col]
                    .abs()
                    .partial_cmp(&a[r2][col].abs())
                    .expect("finite matrix entries")
            })
            .expect("non-empty pivot range");
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return Err(Error::Numeric(format!(
                "normal equations are singular at column {col}; \
                 the design is rank-deficient and lambda = 0 provides no regularization"
            )));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..AUG {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..AUG {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut w = [0.0f64; AUG];
    for row in (0..AUG).rev() {
        let mut acc = b[row];
        for c in row + 1..AUG {
            acc -= a[row][c] * w[c];
        }
        w[row] = acc / a[row][row];
    }
    Ok(w)
}

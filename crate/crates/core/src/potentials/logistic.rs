//! Binary logistic regression trained by deterministic full-batch gradient
//! descent.
//!
//! Columns are rescaled to unit root-mean-square before training and the
//! learned weights are mapped back afterwards, so one learning rate works for
//! features of very different magnitude. Scaling never centres a column, which
//! keeps sparse inputs sparse. The L2 penalty acts on the rescaled weights and
//! is applied as a proximal step, which stays stable for arbitrarily large
//! penalties. The bias is never penalised.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{clamp_probability, write_atomic};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                got: features.len(),
            });
        }
        Ok(self.bias + dot(&self.weights, features))
    }

    /// Logit for a sparse feature vector given as `(column, value)` pairs.
    pub fn sparse_logit(&self, features: &[(usize, f64)]) -> Result<f64> {
        let mut z = self.bias;
        for &(i, v) in features {
            let w = self.weights.get(i).ok_or(Error::Dimension {
                expected: self.weights.len(),
                got: i + 1,
            })?;
            z += w * v;
        }
        Ok(z)
    }

    /// `sigmoid(w . x + bias)`, clamped into the open unit interval.
    pub fn probability(&self, features: &[f64]) -> Result<f64> {
        Ok(clamp_probability(sigmoid(self.logit(features)?)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::validation("model has non-finite parameters"))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LogisticModel = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// One training example. Features are sparse `(column, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<(usize, f64)>,
    pub label: bool,
}

impl Sample {
    pub fn dense(features: &[f64], label: bool) -> Self {
        Sample {
            features: features
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
            label,
        }
    }

    pub fn sparse(mut features: Vec<(usize, f64)>, label: bool) -> Self {
        features.sort_by_key(|&(i, _)| i);
        Sample { features, label }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1e-3,
            lr: 0.5,
            epochs: 2000,
        }
    }
}

fn cmp_samples(a: &Sample, b: &Sample) -> Ordering {
    a.label.cmp(&b.label).then_with(|| {
        for (x, y) in a.features.iter().zip(&b.features) {
            let o = x.0.cmp(&y.0).then(x.1.total_cmp(&y.1));
            if o != Ordering::Equal {
                return o;
            }
        }
        a.features.len().cmp(&b.features.len())
    })
}

pub fn train_logistic(samples: &[Sample], dim: usize, cfg: &TrainConfig) -> Result<LogisticModel> {
    train_logistic_with_history(samples, dim, cfg).map(|(m, _)| m)
}

/// Train and also return the regularised training loss before every epoch
/// plus the final loss (`epochs + 1` values).
pub fn train_logistic_with_history(
    samples: &[Sample],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<(LogisticModel, Vec<f64>)> {
    if !(cfg.l2 >= 0.0 && cfg.lr > 0.0 && cfg.l2.is_finite() && cfg.lr.is_finite()) {
        return Err(Error::Config(format!(
            "invalid training parameters l2={} lr={}",
            cfg.l2, cfg.lr
        )));
    }
    let positives = samples.iter().filter(|s| s.label).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::SingleClass);
    }
    for s in samples {
        for &(i, v) in &s.features {
            if i >= dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: i + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::validation("non-finite training feature"));
            }
        }
    }

    // Canonical order makes the floating-point sums independent of input order.
    let mut data: Vec<&Sample> = samples.iter().collect();
    data.sort_by(|a, b| cmp_samples(a, b));
    let n = data.len() as f64;

    let mut sumsq = vec![0.0; dim];
    for s in &data {
        for &(i, v) in &s.features {
            sumsq[i] += v * v;
        }
    }
    let scale: Vec<f64> = sumsq
        .iter()
        .map(|&q| if q > 0.0 { (q / n).sqrt() } else { 1.0 })
        .collect();
    let scaled: Vec<(Vec<(usize, f64)>, f64)> = data
        .iter()
        .map(|s| {
            (
                s.features.iter().map(|&(i, v)| (i, v / scale[i])).collect(),
                if s.label { 1.0 } else { 0.0 },
            )
        })
        .collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut grad = vec![0.0; dim];
    let mut history = Vec::with_capacity(cfg.epochs + 1);

    let objective = |w: &[f64], b: f64| -> f64 {
        let mut loss = 0.0;
        for (x, y) in &scaled {
            let z = b + x.iter().map(|&(i, v)| w[i] * v).sum::<f64>();
            loss += softplus(z) - y * z;
        }
        loss / n + 0.5 * cfg.l2 * dot(w, w)
    };

    for _ in 0..cfg.epochs {
        history.push(objective(&w, b));
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (x, y) in &scaled {
            let z = b + x.iter().map(|&(i, v)| w[i] * v).sum::<f64>();
            let r = sigmoid(z) - y;
            gb += r;
            for &(i, v) in x {
                grad[i] += r * v;
            }
        }
        let shrink = 1.0 + cfg.lr * cfg.l2;
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi = (*wi - cfg.lr * gi / n) / shrink;
        }
        b -= cfg.lr * gb / n;
    }
    history.push(objective(&w, b));

    let model = LogisticModel {
        weights: w.iter().zip(&scale).map(|(wi, s)| wi / s).collect(),
        bias: b,
    };
    model.validate()?;
    Ok((model, history))
}

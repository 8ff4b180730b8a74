use serde::{Deserialize, Serialize};

use super::ClassWeighting;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub good: f64,
    pub bad: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights { good: 1.0, bad: 1.0 };

    pub fn of(&self, label: u8) -> f64 {
        if label == 1 {
            self.bad
        } else {
            self.good
        }
    }
}

/// Weights from the labels under `mask`. A class absent from the mask gets 0.
pub fn class_weights(labels: &[u8], mask: &[bool], scheme: ClassWeighting) -> ClassWeights {
    match scheme {
        ClassWeighting::Uniform => ClassWeights::UNIFORM,
        ClassWeighting::Balanced => {
            let (mut n, mut bad) = (0usize, 0usize);
            for (&y, &m) in labels.iter().zip(mask) {
                if m {
                    n += 1;
                    bad += (y == 1) as usize;
                }
            }
            let w = |count: usize| {
                if count == 0 {
                    0.0
                } else {
                    n as f64 / (2.0 * count as f64)
                }
            };
            ClassWeights {
                good: w(n - bad),
                bad: w(bad),
            }
        }
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean over masked nodes of the weighted binary cross-entropy with logits:
/// `softplus(-z)` for BAD, `softplus(z)` for GOOD.
pub fn loss(logits: &[f64], labels: &[u8], mask: &[bool], weights: ClassWeights) -> Result<f64> {
    if logits.len() != labels.len() || logits.len() != mask.len() {
        return Err(Error::InternalConsistency(format!(
            "{} logits, {} labels, {} mask entries",
            logits.len(),
            labels.len(),
            mask.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((&z, &y), &m) in logits.iter().zip(labels).zip(mask) {
        if m {
            let l = if y == 1 { softplus(-z) } else { softplus(z) };
            total += weights.of(y) * l;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Evaluation("loss mask is empty".into()));
    }
    Ok(total / count as f64)
}

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::backward::backward;
use super::forward::forward;
use super::loss::{class_weights, loss};
use super::params::{init_params, ModelParams};
use super::ModelConfig;
use crate::datagen::sigmoid;
use crate::error::{Error, Result};
use crate::graph::RelGraph;
use crate::metrics::{self, masked, DEFAULT_THRESHOLD};

/// Metrics after the `epoch`-th parameter update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss of the parameters the update was computed from.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auc: f64,
    pub val_accuracy: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation AUC seen after any update, or the
    /// initial parameters when no epochs ran.
    pub params: ModelParams,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Full-batch Adam on the training mask, keeping the best-validation-AUC
/// parameters (selection only; training always runs every epoch).
pub fn train(graph: &RelGraph, config: &ModelConfig, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let masks = graph.masks();
    let labels = graph.labels();
    if !masks.train.contains(&true) || !masks.val.contains(&true) {
        return Err(Error::Evaluation(
            "training needs non-empty train and validation masks".into(),
        ));
    }
    let mut params = init_params(config, graph.feature_width(), seed)?;
    let weights = class_weights(labels, &masks.train, config.class_weighting);
    let val_labels = masked(labels, &masks.val);
    let mut adam = AdamState::new(&params, config.adam);

    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    let (mut logits, mut cache) = forward(graph, &params, config.aggregation)?;
    for epoch in 1..=config.epochs {
        let train_loss = loss(&logits, labels, &masks.train, weights)?;
        if !train_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("training loss is {train_loss}"),
            });
        }
        let grads = backward(graph, &cache, &params, labels, &masks.train, weights)?;
        adam_step(&mut params, &grads, &mut adam, config.learning_rate).map_err(|e| {
            Error::Training {
                epoch,
                message: e.to_string(),
            }
        })?;
        (logits, cache) = forward(graph, &params, config.aggregation).map_err(|e| Error::Training {
            epoch,
            message: e.to_string(),
        })?;

        let val_loss = loss(&logits, labels, &masks.val, weights)?;
        let val_probs: Vec<f64> = masked(&logits, &masks.val).into_iter().map(sigmoid).collect();
        let val = metrics::evaluate(&val_probs, &val_labels, DEFAULT_THRESHOLD)?;
        if val.auc > best.0 {
            best = (val.auc, epoch, params.clone());
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_auc: val.auc,
            val_accuracy: val.accuracy,
            val_f1: val.f1,
        });
    }
    let (_, best_epoch, params) = best;
    Ok(TrainOutcome {
        params,
        best_epoch,
        history,
    })
}

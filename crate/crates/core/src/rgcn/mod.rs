//! Two-layer relational graph convolutional network, written out by hand.
//!
//! Each layer computes
//!
//! ```text
//! h_i' = act( sum_r agg_{j in N_r(i)} h_j W_r  +  h_i W_self  +  b )
//! ```
//!
//! with one weight matrix per relation, a self weight and a bias. `agg` is a
//! plain sum by default or the in-degree mean. The hidden layer uses ReLU and
//! the output layer emits one logit per node; logits of transaction nodes are
//! the classifier output.

mod adam;
mod backward;
mod checkpoint;
mod forward;
mod loss;
mod params;
mod train;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamHyper, AdamState};
pub use backward::backward;
pub use checkpoint::{Checkpoint, GraphEcho, CHECKPOINT_VERSION};
pub use forward::{forward, ForwardCache, LayerCache};
pub use loss::{class_weights, loss, softplus, ClassWeights};
pub use params::{init_params, glorot_bound, LayerParams, ModelParams};
pub use train::{train, EpochRecord, TrainOutcome};

use crate::datagen::sigmoid;
use crate::error::Result;
use crate::graph::RelGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    /// Divide each relation's summed message by the node's in-degree under
    /// that relation; nodes without in-edges receive zero.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// `n_total / (2 * n_class)` per class, counted over the training mask.
    #[default]
    Balanced,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    GlorotUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Widths of the hidden layers; one entry gives two convolution layers.
    pub hidden_dims: Vec<usize>,
    pub aggregation: Aggregation,
    pub init: InitScheme,
    pub epochs: usize,
    pub learning_rate: f64,
    pub class_weighting: ClassWeighting,
    pub adam: AdamHyper,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![16],
            aggregation: Aggregation::Sum,
            init: InitScheme::GlorotUniform,
            epochs: 200,
            learning_rate: 0.01,
            class_weighting: ClassWeighting::Balanced,
            adam: AdamHyper::default(),
        }
    }
}

impl ModelConfig {
    /// `[d_in, hidden.., 1]`.
    pub fn layer_dims(&self, d_in: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(d_in);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden dimensions must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.adam.validate()
    }
}

/// Sigmoid of the output logits, one probability per transaction node.
pub fn predict(graph: &RelGraph, params: &ModelParams, config: &ModelConfig) -> Result<Vec<f64>> {
    let (logits, _) = forward(graph, params, config.aggregation)?;
    Ok(logits.into_iter().map(sigmoid).collect())
}

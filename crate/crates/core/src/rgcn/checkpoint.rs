//! `model.json`: everything needed to rebuild a graph with the training-time
//! layout and score it.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::params::{LayerParams, ModelParams};
use super::{Aggregation, ModelConfig};
use crate::enrich::{JoinPolicy, NormalizedIndicators};
use crate::error::{Error, Result};
use crate::graph::{FeatureLayout, SplitFractions, N_RELATIONS};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerArrays {
    pub d_in: usize,
    pub d_out: usize,
    /// Row-major `d_in x d_out`, in relation order debit, credit, debit_rev, credit_rev.
    pub relation_weights: Vec<Vec<f64>>,
    pub self_weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// How the training graph was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEcho {
    pub layout: FeatureLayout,
    pub indicators: Option<NormalizedIndicators>,
    pub join_policy: JoinPolicy,
    pub split: SplitFractions,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub aggregation: Aggregation,
    pub layers: Vec<LayerArrays>,
    pub config: ModelConfig,
    pub seed: u64,
    pub graph: Option<GraphEcho>,
}

fn to_vec(a: &Array2<f64>) -> Vec<f64> {
    a.as_standard_layout().iter().copied().collect()
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: &ModelConfig, seed: u64, graph: Option<GraphEcho>) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            layer_dims: params.dims(),
            aggregation: config.aggregation,
            layers: params
                .layers
                .iter()
                .map(|l| LayerArrays {
                    d_in: l.d_in(),
                    d_out: l.d_out(),
                    relation_weights: l.relation_weights.iter().map(to_vec).collect(),
                    self_weight: to_vec(&l.self_weight),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            config: config.clone(),
            seed,
            graph,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let bad = |msg: String| Error::Validation(format!("model checkpoint: {msg}"));
        if self.format_version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format version {}", self.format_version)));
        }
        if self.layers.len() + 1 != self.layer_dims.len() {
            return Err(bad("layer_dims does not match the layer list".into()));
        }
        let matrix = |data: &[f64], rows: usize, cols: usize| {
            Array2::from_shape_vec((rows, cols), data.to_vec())
                .map_err(|e| bad(format!("weight shape: {e}")))
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, arr) in self.layers.iter().enumerate() {
            let (d_in, d_out) = (arr.d_in, arr.d_out);
            if d_in != self.layer_dims[l] || d_out != self.layer_dims[l + 1] {
                return Err(bad(format!("layer {l} dims disagree with layer_dims")));
            }
            if arr.relation_weights.len() != N_RELATIONS || arr.bias.len() != d_out {
                return Err(bad(format!("layer {l} has malformed arrays")));
            }
            let rel: Vec<Array2<f64>> = arr
                .relation_weights
                .iter()
                .map(|w| matrix(w, d_in, d_out))
                .collect::<Result<_>>()?;
            layers.push(LayerParams {
                relation_weights: rel.try_into().expect("length checked above"),
                self_weight: matrix(&arr.self_weight, d_in, d_out)?,
                bias: Array1::from(arr.bias.clone()),
            });
        }
        let params = ModelParams { layers };
        if !params.is_finite() {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InternalConsistency(e.to_string()))?;
        crate::harness::write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            row: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    }
}

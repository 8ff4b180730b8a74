use ndarray::{Array1, Array2};
use rand::Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::N_RELATIONS;
use crate::seed::{stream_rng, STREAM_INIT};

/// Weights of one convolution layer. Matrices are `d_in x d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub relation_weights: [Array2<f64>; N_RELATIONS],
    pub self_weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            relation_weights: std::array::from_fn(|_| Array2::zeros((d_in, d_out))),
            self_weight: Array2::zeros((d_in, d_out)),
            bias: Array1::zeros(d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.self_weight.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.self_weight.ncols()
    }

    fn n_params(&self) -> usize {
        (N_RELATIONS + 1) * self.d_in() * self.d_out() + self.d_out()
    }

    /// Visits values in checkpoint order: relation weights, self weight,
    /// bias, each matrix row-major.
    fn for_each_value(&self, mut f: impl FnMut(f64)) {
        for w in self
            .relation_weights
            .iter()
            .chain(std::iter::once(&self.self_weight))
        {
            w.iter().for_each(|&v| f(v));
        }
        self.bias.iter().for_each(|&v| f(v));
    }

    fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for w in self
            .relation_weights
            .iter_mut()
            .chain(std::iter::once(&mut self.self_weight))
        {
            w.iter_mut().for_each(&mut f);
        }
        self.bias.iter_mut().for_each(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            layers: dims.windows(2).map(|w| LayerParams::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.dims())
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(LayerParams::d_in).collect();
        dims.extend(self.layers.last().map(LayerParams::d_out));
        dims
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LayerParams::n_params).sum()
    }

    /// All parameters, layer by layer, each tensor row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            layer.for_each_value(|v| out.push(v));
        }
        out
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::InternalConsistency(format!(
                "{} flat values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut values = flat.iter();
        for layer in &mut self.layers {
            layer.for_each_value_mut(|v| *v = *values.next().expect("length checked above"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let mut finite = true;
        for layer in &self.layers {
            layer.for_each_value(|v| finite &= v.is_finite());
        }
        finite
    }
}

pub fn glorot_bound(d_in: usize, d_out: usize) -> f64 {
    (6.0 / (d_in + d_out) as f64).sqrt()
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(config: &ModelConfig, d_in: usize, seed: u64) -> Result<ModelParams> {
    let dims = config.layer_dims(d_in);
    if dims.contains(&0) {
        return Err(Error::Config(format!("layer dimensions must be positive, got {dims:?}")));
    }
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut params = ModelParams::zeros(&dims);
    for layer in &mut params.layers {
        let bound = glorot_bound(layer.d_in(), layer.d_out());
        for w in layer
            .relation_weights
            .iter_mut()
            .chain(std::iter::once(&mut layer.self_weight))
        {
            w.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
    }
    Ok(params)
}

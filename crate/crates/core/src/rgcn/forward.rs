use ndarray::{Array2, Axis};

use super::params::ModelParams;
use super::Aggregation;
use crate::error::{Error, Result};
use crate::graph::{Csr, RelGraph, Relation, N_RELATIONS};

/// Intermediate values of one layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Layer input `H` (`n x d_in`).
    pub input: Array2<f64>,
    /// Aggregated neighbour inputs per relation (`n x d_in`), before `W_r`.
    pub messages: [Array2<f64>; N_RELATIONS],
    /// `Z` before the activation (`n x d_out`).
    pub pre_activation: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub aggregation: Aggregation,
    pub layers: Vec<LayerCache>,
}

/// Sums `h[j]` over the in-neighbours `j` of every row of `csr`.
///
/// `dest_scale[i]` multiplies the sum landing in row `i`; `src_scale[j]`
/// multiplies each contribution of source `j`.
pub(crate) fn aggregate(
    csr: &Csr,
    h: &Array2<f64>,
    dest_scale: Option<&[f64]>,
    src_scale: Option<&[f64]>,
) -> Array2<f64> {
    let d = h.ncols();
    let h = h.as_standard_layout();
    let src = h.as_slice().expect("standard layout");
    let mut out = Array2::<f64>::zeros((csr.n_rows(), d));
    let dst = out.as_slice_mut().expect("fresh array is contiguous");
    for i in 0..csr.n_rows() {
        let row = csr.row(i);
        if row.is_empty() {
            continue;
        }
        let acc = &mut dst[i * d..(i + 1) * d];
        for &j in row {
            let x = &src[j * d..(j + 1) * d];
            match src_scale {
                Some(s) => {
                    let s = s[j];
                    for (a, v) in acc.iter_mut().zip(x) {
                        *a += s * v;
                    }
                }
                None => {
                    for (a, v) in acc.iter_mut().zip(x) {
                        *a += v;
                    }
                }
            }
        }
        if let Some(s) = dest_scale {
            let s = s[i];
            acc.iter_mut().for_each(|a| *a *= s);
        }
    }
    out
}

/// `1 / in-degree` per row, zero for rows without in-edges.
pub(crate) fn inverse_degrees(csr: &Csr) -> Vec<f64> {
    (0..csr.n_rows())
        .map(|i| match csr.in_degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect()
}

pub(crate) fn relation_norms(graph: &RelGraph, aggregation: Aggregation) -> Option<[Vec<f64>; N_RELATIONS]> {
    match aggregation {
        Aggregation::Sum => None,
        Aggregation::Mean => Some(Relation::ALL.map(|r| inverse_degrees(graph.relation(r)))),
    }
}

/// Runs every layer and returns the logits of the transaction nodes.
pub fn forward(
    graph: &RelGraph,
    params: &ModelParams,
    aggregation: Aggregation,
) -> Result<(Vec<f64>, ForwardCache)> {
    let Some(first) = params.layers.first() else {
        return Err(Error::InternalConsistency("model has no layers".into()));
    };
    if first.d_in() != graph.feature_width() {
        return Err(Error::Validation(format!(
            "graph has {} feature columns, model expects {}",
            graph.feature_width(),
            first.d_in()
        )));
    }
    if params.layers.last().map(|l| l.d_out()) != Some(1) {
        return Err(Error::InternalConsistency("output layer must emit one logit".into()));
    }
    let norms = relation_norms(graph, aggregation);
    let n_layers = params.layers.len();
    let mut h = graph.features().clone();
    let mut caches = Vec::with_capacity(n_layers);
    for (l, layer) in params.layers.iter().enumerate() {
        if layer.d_in() != h.ncols() {
            return Err(Error::InternalConsistency(format!(
                "layer {l} expects width {}, got {}",
                layer.d_in(),
                h.ncols()
            )));
        }
        let messages: [Array2<f64>; N_RELATIONS] = std::array::from_fn(|k| {
            let scale = norms.as_ref().map(|n| n[k].as_slice());
            aggregate(graph.relation(Relation::ALL[k]), &h, scale, None)
        });
        let mut z = h.dot(&layer.self_weight);
        for (m, w) in messages.iter().zip(&layer.relation_weights) {
            z += &m.dot(w);
        }
        z += &layer.bias.view().insert_axis(Axis(0));
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { layer: l });
        }
        let next = if l + 1 < n_layers {
            z.mapv(|v| v.max(0.0))
        } else {
            z.clone()
        };
        caches.push(LayerCache {
            input: std::mem::replace(&mut h, next),
            messages,
            pre_activation: z,
        });
    }
    let logits = h.column(0).iter().skip(graph.tx_offset()).copied().collect();
    Ok((
        logits,
        ForwardCache {
            aggregation,
            layers: caches,
        },
    ))
}

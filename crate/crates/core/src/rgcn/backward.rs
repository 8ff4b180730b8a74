use ndarray::{Array2, Axis};

use super::forward::{aggregate, relation_norms, ForwardCache};
use super::loss::ClassWeights;
use super::params::ModelParams;
use crate::datagen::sigmoid;
use crate::error::{Error, Result};
use crate::graph::{RelGraph, Relation};

/// Exact gradient of [`loss`](super::loss) with respect to every parameter.
///
/// Messages are routed backwards through the transposed adjacency of each
/// relation, so a `debit` message's gradient travels along `debit_rev`.
pub fn backward(
    graph: &RelGraph,
    cache: &ForwardCache,
    params: &ModelParams,
    labels: &[u8],
    mask: &[bool],
    weights: ClassWeights,
) -> Result<ModelParams> {
    let n = graph.n_nodes();
    let offset = graph.tx_offset();
    if cache.layers.len() != params.layers.len() {
        return Err(Error::InternalConsistency(format!(
            "cache has {} layers, model has {}",
            cache.layers.len(),
            params.layers.len()
        )));
    }
    for (c, p) in cache.layers.iter().zip(&params.layers) {
        if c.input.dim() != (n, p.d_in()) || c.pre_activation.dim() != (n, p.d_out()) {
            return Err(Error::InternalConsistency(
                "forward cache does not match the parameters".into(),
            ));
        }
    }
    if labels.len() != graph.n_transactions() || mask.len() != labels.len() {
        return Err(Error::InternalConsistency(
            "labels and mask must cover every transaction node".into(),
        ));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::Evaluation("loss mask is empty".into()));
    }

    // dL/dz for the output logits.
    let last = cache.layers.last().expect("checked non-empty");
    let mut grad_z = Array2::<f64>::zeros((n, 1));
    for (k, (&y, &m)) in labels.iter().zip(mask).enumerate() {
        if m {
            let z = last.pre_activation[[offset + k, 0]];
            grad_z[[offset + k, 0]] = weights.of(y) * (sigmoid(z) - y as f64) / count as f64;
        }
    }

    let norms = relation_norms(graph, cache.aggregation);
    let mut grads = params.zeros_like();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let lc = &cache.layers[l];
        let g = &mut grads.layers[l];
        g.self_weight = lc.input.t().dot(&grad_z);
        for (k, m) in lc.messages.iter().enumerate() {
            g.relation_weights[k] = m.t().dot(&grad_z);
        }
        g.bias = grad_z.sum_axis(Axis(0));
        if l == 0 {
            break;
        }

        let mut grad_h = grad_z.dot(&layer.self_weight.t());
        for r in Relation::ALL {
            let k = r.index();
            let upstream = grad_z.dot(&layer.relation_weights[k].t());
            let scale = norms.as_ref().map(|n| n[k].as_slice());
            grad_h += &aggregate(graph.relation_transposed(r), &upstream, None, scale);
        }
        let below = &cache.layers[l - 1].pre_activation;
        grad_h.zip_mut_with(below, |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        grad_z = grad_h;
    }
    Ok(grads)
}

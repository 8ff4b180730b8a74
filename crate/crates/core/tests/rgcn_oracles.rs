mod common;

use common::*;
use hybrid_aml::datagen::{AccountRecord, TransactionRecord};
use hybrid_aml::graph::{build_graph, BuildOptions, Csr, SplitMasks};
use hybrid_aml::rgcn::{self, ModelConfig};
use hybrid_aml::{Aggregation, FeatureMode, RelGraph};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    gradient_suite(24).unwrap();
}

#[test]
fn sparse_forward_matches_dense_reference() {
    let worst = dense_suite(50).unwrap();
    assert!(worst <= 1e-10);
}

#[test]
fn relabelling_nodes_permutes_logits() {
    permutation_suite(20).unwrap();
}

/// Every node receives exactly one in-edge under every relation.
fn unit_in_degree_graph(seed: u64) -> (RelGraph, hybrid_aml::ModelParams) {
    let mut r = rng(seed);
    let n = r.random_range(3..=12);
    let n_acc = r.random_range(1..n);
    let d = r.random_range(1..=4);
    let features = Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0));
    let relations = std::array::from_fn(|_| {
        let edges = (0..n).map(|i| (i, r.random_range(0..n))).collect();
        Csr::from_edges(n, n, edges).unwrap()
    });
    let n_tx = n - n_acc;
    let labels = (0..n_tx).map(|k| (k % 2) as u8).collect();
    let graph = RelGraph::from_parts(n_acc, features, relations, labels, SplitMasks::all(n_tx)).unwrap();
    let params = rgcn::init_params(&ModelConfig::default(), d, seed).unwrap();
    (graph, params)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_equals_mean_at_unit_in_degree(seed in any::<u64>()) {
        let (graph, params) = unit_in_degree_graph(seed);
        let (sum, _) = rgcn::forward(&graph, &params, Aggregation::Sum).unwrap();
        let (mean, _) = rgcn::forward(&graph, &params, Aggregation::Mean).unwrap();
        prop_assert_eq!(sum, mean);
    }

    #[test]
    fn equivariance_holds_for_arbitrary_seeds(seed in any::<u64>()) {
        let fx = random_fixture(seed, &GRADIENT_SPEC);
        let (before, _) = rgcn::forward(&fx.graph, &fx.params, Aggregation::Sum).unwrap();
        let (permuted, perm) = permute_graph(&fx.graph, seed.rotate_left(7));
        let (after, _) = rgcn::forward(&permuted, &fx.params, Aggregation::Sum).unwrap();
        let a = fx.graph.n_accounts();
        for (k, z) in before.iter().enumerate() {
            prop_assert!((z - after[perm[a + k] - a]).abs() <= 1e-8);
        }
    }

    #[test]
    fn dense_reference_agrees_for_arbitrary_seeds(seed in any::<u64>(), mean in any::<bool>()) {
        let agg = if mean { Aggregation::Mean } else { Aggregation::Sum };
        let fx = random_fixture(seed, &GRADIENT_SPEC);
        let (sparse, _) = rgcn::forward(&fx.graph, &fx.params, agg).unwrap();
        let dense = dense_forward(&rows(fx.graph.features()), &fx.edges, &fx.params, agg);
        let offset = fx.graph.tx_offset();
        for (k, s) in sparse.iter().enumerate() {
            prop_assert!((s - dense[offset + k]).abs() <= 1e-10);
        }
    }
}

#[test]
fn separable_toy_is_learned() {
    // Sender country decides the label.
    let countries = ["AA", "BB"];
    let accounts: Vec<AccountRecord> = (0..40)
        .map(|i| AccountRecord {
            account_id: i,
            bank_id: 0,
            country: countries[(i % 2) as usize].to_string(),
        })
        .collect();
    let mut r = rng(3);
    let transactions: Vec<TransactionRecord> = (0..400)
        .map(|k| {
            let src = r.random_range(0..40u32);
            let mut dst = r.random_range(0..40u32);
            if dst == src {
                dst = (dst + 1) % 40;
            }
            TransactionRecord {
                tx_id: k,
                src,
                dst,
                tx_type: r.random_range(0..5),
                value_usd: r.random_range(10.0..1000.0),
                label: (src % 2) as u8,
            }
        })
        .collect();
    let options = BuildOptions::new(countries.iter().map(|c| c.to_string()).collect(), 5);
    let graph = build_graph(&accounts, &transactions, FeatureMode::Synthetic, None, &options, 1).unwrap();
    let outcome = rgcn::train(&graph, &ModelConfig::default(), 1).unwrap();
    assert_eq!(outcome.history.len(), 200);
    let last = outcome.history.last().unwrap();
    assert!(last.train_loss < 0.1, "train loss {}", last.train_loss);
    assert!(last.val_auc > 0.99);
}

#[test]
fn training_is_bitwise_reproducible() {
    let fx = random_fixture(42, &DENSE_SPEC);
    let config = ModelConfig {
        epochs: 30,
        ..ModelConfig::default()
    };
    let mut graph = fx.graph;
    // Validation needs both masks populated.
    if !graph.masks().val.contains(&true) {
        let n_tx = graph.n_transactions();
        let masks = SplitMasks::all(n_tx);
        graph = RelGraph::from_parts(
            graph.n_accounts(),
            graph.features().clone(),
            hybrid_aml::Relation::ALL.map(|r| graph.relation(r).clone()),
            graph.labels().to_vec(),
            masks,
        )
        .unwrap();
    }
    let a = rgcn::train(&graph, &config, 9).unwrap();
    let b = rgcn::train(&graph, &config, 9).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
}

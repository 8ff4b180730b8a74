//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use hybrid_aml::graph::{Csr, SplitMasks, N_RELATIONS};
use hybrid_aml::metrics::Confusion;
use hybrid_aml::rgcn::{self, class_weights, ClassWeighting, ModelConfig, ModelParams};
use hybrid_aml::{Aggregation, RelGraph};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random graph together with the edge sets it was built from.
pub struct Fixture {
    pub graph: RelGraph,
    /// Per relation, `(destination, source)` pairs.
    pub edges: [BTreeSet<(usize, usize)>; N_RELATIONS],
    pub params: ModelParams,
}

pub struct FixtureSpec {
    pub max_nodes: usize,
    pub max_dim: usize,
    pub edge_prob: f64,
}

pub fn random_fixture(seed: u64, spec: &FixtureSpec) -> Fixture {
    let mut rng = rng(seed);
    let n = rng.random_range(2..=spec.max_nodes);
    let n_acc = rng.random_range(1..n);
    let n_tx = n - n_acc;
    let d = rng.random_range(1..=spec.max_dim);
    let hidden = rng.random_range(1..=4);

    let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.5..1.5));
    let edges: [BTreeSet<(usize, usize)>; N_RELATIONS] = std::array::from_fn(|_| {
        let mut set = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if rng.random_bool(spec.edge_prob) {
                    set.insert((i, j));
                }
            }
        }
        set
    });
    let relations = std::array::from_fn(|k| {
        Csr::from_edges(n, n, edges[k].iter().copied().collect()).unwrap()
    });
    let labels: Vec<u8> = (0..n_tx).map(|_| rng.random_bool(0.4) as u8).collect();
    let mut train: Vec<bool> = (0..n_tx).map(|_| rng.random_bool(0.7)).collect();
    if !train.iter().any(|&m| m) {
        train[0] = true;
    }
    let masks = SplitMasks {
        train: train.clone(),
        val: train.iter().map(|m| !m).collect(),
        test: train.iter().map(|m| !m).collect(),
    };
    let graph = RelGraph::from_parts(n_acc, features, relations, labels, masks).unwrap();

    let config = ModelConfig {
        hidden_dims: vec![hidden],
        ..ModelConfig::default()
    };
    let mut params = rgcn::init_params(&config, d, seed ^ 0x5eed).unwrap();
    for layer in &mut params.layers {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    Fixture {
        graph,
        edges,
        params,
    }
}

/// Forward pass over dense adjacency matrices with plain loops. Returns the
/// logits of every node.
pub fn dense_forward(
    features: &[Vec<f64>],
    edges: &[BTreeSet<(usize, usize)>; N_RELATIONS],
    params: &ModelParams,
    aggregation: Aggregation,
) -> Vec<f64> {
    let n = features.len();
    let adjacency: Vec<Vec<Vec<f64>>> = edges
        .iter()
        .map(|set| {
            let mut a = vec![vec![0.0; n]; n];
            for &(i, j) in set {
                a[i][j] = 1.0;
            }
            if aggregation == Aggregation::Mean {
                for row in &mut a {
                    let deg: f64 = row.iter().sum();
                    if deg > 0.0 {
                        row.iter_mut().for_each(|v| *v /= deg);
                    }
                }
            }
            a
        })
        .collect();

    let matmul = |x: &[Vec<f64>], w: &Array2<f64>| -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                (0..w.ncols())
                    .map(|c| (0..w.nrows()).map(|r| row[r] * w[[r, c]]).sum())
                    .collect()
            })
            .collect()
    };

    let mut h: Vec<Vec<f64>> = features.to_vec();
    let n_layers = params.layers.len();
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = matmul(&h, &layer.self_weight);
        for (a, w) in adjacency.iter().zip(&layer.relation_weights) {
            let agg: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..h[0].len())
                        .map(|c| (0..n).map(|j| a[i][j] * h[j][c]).sum())
                        .collect()
                })
                .collect();
            let m = matmul(&agg, w);
            for (zi, mi) in z.iter_mut().zip(&m) {
                for (a, b) in zi.iter_mut().zip(mi) {
                    *a += b;
                }
            }
        }
        for zi in &mut z {
            for (a, b) in zi.iter_mut().zip(layer.bias.iter()) {
                *a += b;
            }
        }
        h = if l + 1 < n_layers {
            z.into_iter()
                .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
                .collect()
        } else {
            z
        };
    }
    h.into_iter().map(|r| r[0]).collect()
}

pub fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Weighted BCE over the training mask, written directly from its definition.
pub fn reference_loss(graph: &RelGraph, params: &ModelParams, aggregation: Aggregation) -> f64 {
    let (logits, _) = rgcn::forward(graph, params, aggregation).unwrap();
    let mask = &graph.masks().train;
    let w = class_weights(graph.labels(), mask, ClassWeighting::Balanced);
    let mut total = 0.0;
    let mut count = 0.0;
    for ((&z, &y), &m) in logits.iter().zip(graph.labels()).zip(mask) {
        if m {
            let p = 1.0 / (1.0 + (-z).exp());
            let l = if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
            total += w.of(y) * l;
            count += 1.0;
        }
    }
    total / count
}

/// Largest gradient mismatch found, as `(index, analytic, numeric)`, or
/// `None` when every entry agrees within the tolerance.
pub fn gradient_mismatch(
    graph: &RelGraph,
    params: &ModelParams,
    aggregation: Aggregation,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Option<(usize, f64, f64)> {
    let mask = &graph.masks().train;
    let weights = class_weights(graph.labels(), mask, ClassWeighting::Balanced);
    let (_, cache) = rgcn::forward(graph, params, aggregation).unwrap();
    let analytic = rgcn::backward(graph, &cache, params, graph.labels(), mask, weights)
        .unwrap()
        .to_flat();

    let base = params.to_flat();
    let mut probe = params.clone();
    let mut eval = |flat: &[f64]| {
        probe.copy_from_flat(flat).unwrap();
        reference_loss(graph, &probe, aggregation)
    };
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + step;
        let up = eval(&flat);
        flat[i] = base[i] - step;
        let down = eval(&flat);
        flat[i] = base[i];
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let diff = (a - numeric).abs();
        if diff > abs_floor && diff / a.abs().max(numeric.abs()) >= rel_tol {
            return Some((i, a, numeric));
        }
    }
    None
}

/// AUC as the all-pairs count `(2 * wins + ties) / (2 * n_pos * n_neg)`.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> (u128, u128) {
    let mut twice_wins = 0u128;
    let (mut npos, mut nneg) = (0u128, 0u128);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            npos += 1;
        } else {
            nneg += 1;
        }
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 0 {
                if scores[i] > scores[j] {
                    twice_wins += 2;
                } else if scores[i] == scores[j] {
                    twice_wins += 1;
                }
            }
        }
    }
    (twice_wins, 2 * npos * nneg)
}

/// Cross-multiplied equality of two fractions.
pub fn same_ratio(a: (u128, u128), b: (u128, u128)) -> bool {
    a.0 * b.1 == b.0 * a.1
}

/// Scores drawn from a small grid so ties are frequent.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> (Vec<f64>, Vec<u8>) {
    loop {
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
        if labels.contains(&0) && labels.contains(&1) {
            return (scores, labels);
        }
    }
}

/// Accuracy, precision, recall and F1 recomputed from their definitions.
pub fn direct_rates(c: &Confusion) -> [f64; 4] {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 / (1.0 / precision + 1.0 / recall)
    };
    [(tp + tn) / (tp + fp + tn + fn_), precision, recall, f1]
}

pub const GRADIENT_SPEC: FixtureSpec = FixtureSpec {
    max_nodes: 10,
    max_dim: 5,
    edge_prob: 0.25,
};

pub const DENSE_SPEC: FixtureSpec = FixtureSpec {
    max_nodes: 32,
    max_dim: 6,
    edge_prob: 0.15,
};

fn aggregation_for(seed: u64) -> Aggregation {
    if seed.is_multiple_of(2) {
        Aggregation::Sum
    } else {
        Aggregation::Mean
    }
}

/// Finite-difference check of every parameter on `count` random graphs,
/// alternating sum and mean aggregation.
pub fn gradient_suite(count: u64) -> Result<(), String> {
    for seed in 0..count {
        let fx = random_fixture(1000 + seed, &GRADIENT_SPEC);
        let agg = aggregation_for(seed);
        if let Some((i, a, n)) = gradient_mismatch(&fx.graph, &fx.params, agg, 1e-5, 1e-4, 1e-7) {
            return Err(format!(
                "graph {seed} ({agg:?}): parameter {i} analytic {a:e} vs numeric {n:e}"
            ));
        }
    }
    Ok(())
}

/// Largest absolute logit difference between the sparse and dense forward.
pub fn dense_suite(count: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for seed in 0..count {
        let fx = random_fixture(5000 + seed, &DENSE_SPEC);
        let agg = aggregation_for(seed);
        let (sparse, _) = rgcn::forward(&fx.graph, &fx.params, agg).map_err(|e| e.to_string())?;
        let dense = dense_forward(&rows(fx.graph.features()), &fx.edges, &fx.params, agg);
        let offset = fx.graph.tx_offset();
        for (k, s) in sparse.iter().enumerate() {
            worst = worst.max((s - dense[offset + k]).abs());
        }
    }
    if worst <= 1e-10 {
        Ok(worst)
    } else {
        Err(format!("max |sparse - dense| = {worst:e}"))
    }
}

/// Rank AUC against the all-pairs count on `count` instances with n <= 200.
pub fn auc_suite(count: u64) -> Result<(), String> {
    let mut r = rng(77);
    for case in 0..count {
        let n = r.random_range(2..=200);
        let levels = if case % 3 == 0 { 3 } else { 1000 };
        let (scores, labels) = random_scores(&mut r, n, levels);
        let fast = hybrid_aml::metrics::roc_auc_ratio(&scores, &labels).map_err(|e| e.to_string())?;
        let slow = brute_force_auc(&scores, &labels);
        if !same_ratio((fast.numerator, fast.denominator), slow) {
            return Err(format!(
                "case {case}: rank {}/{} vs brute force {}/{}",
                fast.numerator, fast.denominator, slow.0, slow.1
            ));
        }
    }
    Ok(())
}

/// `prf1` against direct recomputation on a fuzzed grid plus the degenerate
/// zero-division cases.
pub fn prf1_suite(count: u64) -> Result<(), String> {
    let mut r = rng(91);
    let mut cases: Vec<Confusion> = (0..count)
        .map(|_| {
            let mut draw = || if r.random_bool(0.15) { 0 } else { r.random_range(0..500) };
            Confusion {
                tp: draw(),
                fp: draw(),
                tn: draw(),
                fn_: draw(),
            }
        })
        .filter(|c| c.total() > 0)
        .collect();
    cases.push(Confusion { tp: 0, fp: 0, tn: 10, fn_: 5 });
    cases.push(Confusion { tp: 0, fp: 3, tn: 10, fn_: 0 });
    cases.push(Confusion { tp: 0, fp: 0, tn: 7, fn_: 0 });
    for c in &cases {
        let got = hybrid_aml::metrics::prf1(c).map_err(|e| e.to_string())?;
        let want = direct_rates(c);
        let got = [got.accuracy, got.precision, got.recall, got.f1];
        for (g, w) in got.iter().zip(want) {
            if (g - w).abs() > 1e-12 {
                return Err(format!("{c:?}: got {got:?}, want {want:?}"));
            }
        }
    }
    let degenerate = hybrid_aml::metrics::prf1(&Confusion { tp: 0, fp: 0, tn: 10, fn_: 5 })
        .map_err(|e| e.to_string())?;
    if degenerate.precision != 0.0 || degenerate.recall != 0.0 || degenerate.f1 != 0.0 {
        return Err(format!("all-negative predictions gave {degenerate:?}"));
    }
    Ok(())
}

/// Shuffles accounts among themselves and transactions among themselves.
/// Returns the permuted graph and `perm` with `new[perm[i]] = old[i]`.
pub fn permute_graph(graph: &RelGraph, seed: u64) -> (RelGraph, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut r = rng(seed);
    let n = graph.n_nodes();
    let a = graph.n_accounts();
    let mut acc: Vec<usize> = (0..a).collect();
    let mut tx: Vec<usize> = (a..n).collect();
    acc.shuffle(&mut r);
    tx.shuffle(&mut r);
    let perm: Vec<usize> = acc.into_iter().chain(tx).collect();

    let mut features = Array2::zeros(graph.features().dim());
    for (i, &p) in perm.iter().enumerate() {
        features.row_mut(p).assign(&graph.features().row(i));
    }
    let relations = hybrid_aml::Relation::ALL.map(|rel| {
        let edges = graph
            .relation(rel)
            .edges()
            .map(|(i, j)| (perm[i], perm[j]))
            .collect();
        Csr::from_edges(n, n, edges).unwrap()
    });
    let move_tx = |values: &[bool]| {
        let mut out = vec![false; values.len()];
        for (k, &v) in values.iter().enumerate() {
            out[perm[a + k] - a] = v;
        }
        out
    };
    let mut labels = vec![0u8; n - a];
    for (k, &y) in graph.labels().iter().enumerate() {
        labels[perm[a + k] - a] = y;
    }
    let masks = SplitMasks {
        train: move_tx(&graph.masks().train),
        val: move_tx(&graph.masks().val),
        test: move_tx(&graph.masks().test),
    };
    (
        RelGraph::from_parts(a, features, relations, labels, masks).unwrap(),
        perm,
    )
}

/// Largest logit deviation from exact equivariance over `count` graphs.
pub fn permutation_suite(count: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for seed in 0..count {
        let fx = random_fixture(9000 + seed, &DENSE_SPEC);
        let agg = aggregation_for(seed);
        let (before, _) = rgcn::forward(&fx.graph, &fx.params, agg).map_err(|e| e.to_string())?;
        let (permuted, perm) = permute_graph(&fx.graph, seed);
        let (after, _) = rgcn::forward(&permuted, &fx.params, agg).map_err(|e| e.to_string())?;
        let a = fx.graph.n_accounts();
        for (k, z) in before.iter().enumerate() {
            worst = worst.max((z - after[perm[a + k] - a]).abs());
        }
    }
    if worst <= 1e-8 {
        Ok(worst)
    } else {
        Err(format!("max logit deviation {worst:e}"))
    }
}

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/country_indicators.csv")
}

/// Population mean and standard deviation of one column.
pub fn column_moments(values: &[[f64; 4]], j: usize) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|r| r[j]).sum::<f64>() / n;
    let var = values.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scored fixture columns are centred with unit spread, and a strict join
/// rejects an account whose country is not in the table.
pub fn enrichment_suite() -> Result<String, String> {
    use hybrid_aml::enrich::{attach_country_features, load_country_indicators, normalize_indicators};
    use hybrid_aml::{AccountRecord, Error, JoinPolicy};

    let rows = load_country_indicators(&fixture_path()).map_err(|e| e.to_string())?;
    let norm = normalize_indicators(&rows, Default::default()).map_err(|e| e.to_string())?;
    let mut worst = (0.0f64, 0.0f64);
    for j in 0..4 {
        let (mean, std) = column_moments(&norm.values, j);
        worst = (worst.0.max(mean.abs()), worst.1.max((std - 1.0).abs()));
    }
    if worst.0 >= 1e-9 || worst.1 >= 1e-9 {
        return Err(format!("max |mean| {:e}, max |std - 1| {:e}", worst.0, worst.1));
    }
    let accounts = vec![
        AccountRecord {
            account_id: 0,
            bank_id: 0,
            country: "GB".into(),
        },
        AccountRecord {
            account_id: 1,
            bank_id: 0,
            country: "ZZ".into(),
        },
    ];
    match attach_country_features(&accounts, &norm, JoinPolicy::Strict) {
        Err(Error::Coverage { missing }) if missing == ["ZZ"] => {}
        other => return Err(format!("strict join on uncovered country gave {other:?}")),
    }
    Ok(format!(
        "{} countries, max |mean| {:.1e}, max |std - 1| {:.1e}",
        rows.len(),
        worst.0,
        worst.1
    ))
}

pub fn schema(name: &str) -> jsonschema::Validator {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let text = std::fs::read_to_string(path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

pub fn assert_valid(validator: &jsonschema::Validator, value: &serde_json::Value) {
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

/// 200 transactions over four countries, five epochs.
pub fn tiny_config(out: &std::path::Path) -> hybrid_aml::ExperimentConfig {
    use hybrid_aml::datagen::evenly_spaced_countries;
    let mut cfg = hybrid_aml::ExperimentConfig::default();
    cfg.generator.n_accounts = 60;
    cfg.generator.n_transactions = 200;
    cfg.generator.countries = evenly_spaced_countries(&["GB", "US", "IN", "NG"]);
    cfg.generator.calibration_probe = 5000;
    cfg.indicators_path = fixture_path();
    cfg.model.epochs = 5;
    cfg.seeds = vec![1, 2];
    cfg.output_dir = out.to_path_buf();
    cfg
}

//! Inputs shared by the benchmarks.

use hybrid_aml::datagen::{generate, GenConfig};
use hybrid_aml::enrich::{load_country_indicators, normalize_indicators};
use hybrid_aml::graph::{build_graph, BuildOptions};
use hybrid_aml::{FeatureMode, RelGraph};

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/country_indicators.csv")
}

/// Hybrid graph over `n_transactions` generated transactions.
pub fn hybrid_graph(n_transactions: usize) -> RelGraph {
    let cfg = GenConfig {
        n_transactions,
        ..GenConfig::default()
    };
    let ds = generate(&cfg).expect("default generator config is valid");
    let rows = load_country_indicators(&fixture_path()).expect("fixture is readable");
    let norm = normalize_indicators(&rows, Default::default()).expect("fixture normalizes");
    let options = BuildOptions::new(
        cfg.countries.iter().map(|c| c.code.clone()).collect(),
        cfg.n_tx_types(),
    );
    build_graph(&ds.accounts, &ds.transactions, FeatureMode::Hybrid, Some(&norm), &options, 1)
        .expect("graph builds")
}

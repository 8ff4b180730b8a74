//! Experiment runner: generate, enrich, build, train and evaluate, plus the
//! synthetic-vs-hybrid comparison over several seeds.

mod config;
mod report;
mod table;

use std::fs;
use std::path::Path;

pub use config::{ExperimentConfig, ModeSelection, DEFAULT_INDICATORS_PATH};
pub use report::{
    strip_timestamp, ArmSummary, ComparisonReport, DatasetSummary, Deltas, EvaluationReport,
    RunReport, SeedResult, Stat, TrainingSummary, REPORT_SCHEMA_VERSION,
};
pub use table::emit_table;

use crate::datagen::{generate, Dataset};
use crate::enrich::{load_country_indicators, normalize_indicators, NormalizedIndicators};
use crate::error::{Error, Result, StageExt};
use crate::graph::{build_graph, BuildOptions, FeatureMode, RelGraph};
use crate::metrics::{self, masked, MetricsReport, DEFAULT_THRESHOLD};
use crate::rgcn::{predict, train, Checkpoint, GraphEcho, TrainOutcome};

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn report_file_name(mode: FeatureMode, seed: u64) -> String {
    format!("report_{mode}_{seed}.json")
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InternalConsistency(e.to_string()))?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

pub fn load_indicators(cfg: &ExperimentConfig) -> Result<NormalizedIndicators> {
    let rows = load_country_indicators(&cfg.indicators_path)?;
    normalize_indicators(&rows, cfg.normalization)
}

pub fn build_options(cfg: &ExperimentConfig) -> BuildOptions {
    BuildOptions {
        countries: cfg.generator.countries.iter().map(|c| c.code.clone()).collect(),
        n_tx_types: cfg.generator.n_tx_types(),
        split: cfg.split,
        join_policy: cfg.join_policy,
    }
}

/// One trained arm: the graph it saw, the training outcome and its test metrics.
pub struct ArmRun {
    pub graph: RelGraph,
    pub outcome: TrainOutcome,
    pub test: MetricsReport,
}

/// Builds the graph for `mode`, trains, and scores the test mask once.
pub fn run_arm(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    indicators: Option<&NormalizedIndicators>,
    mode: FeatureMode,
    seed: u64,
) -> Result<ArmRun> {
    let graph = build_graph(
        &dataset.accounts,
        &dataset.transactions,
        mode,
        indicators,
        &build_options(cfg),
        seed,
    )
    .stage("build")?;
    let outcome = train(&graph, &cfg.model, seed).stage("train")?;
    let test = score(&graph, &outcome, cfg).stage("evaluate")?;
    Ok(ArmRun {
        graph,
        outcome,
        test,
    })
}

fn score(graph: &RelGraph, outcome: &TrainOutcome, cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let probs = predict(graph, &outcome.params, &cfg.model)?;
    let mask = &graph.masks().test;
    metrics::evaluate(
        &masked(&probs, mask),
        &masked(graph.labels(), mask),
        DEFAULT_THRESHOLD,
    )
}

fn run_report(cfg: &ExperimentConfig, dataset: &Dataset, mode: FeatureMode, seed: u64, arm: &ArmRun) -> RunReport {
    RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        software_version: SOFTWARE_VERSION.to_string(),
        mode,
        seed,
        evaluated_split: "test".to_string(),
        metrics: arm.test.clone(),
        training: TrainingSummary::from_outcome(&arm.outcome),
        dataset: DatasetSummary::of(dataset),
        graph: arm.graph.summary(),
        history: arm.outcome.history.clone(),
        config: cfg.clone(),
        timestamp_unix: report::now_unix(),
    }
}

/// Everything one `train` invocation produces.
pub struct SingleRun {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
    pub dataset: Dataset,
    pub graph: RelGraph,
}

/// Trains one arm on the dataset generated for `seed` and writes
/// `report_<mode>_<seed>.json` into the configured output directory.
pub fn run_single(cfg: &ExperimentConfig, mode: FeatureMode, seed: u64) -> Result<SingleRun> {
    cfg.validate_for(&[mode])?;
    let indicators = match mode {
        FeatureMode::Hybrid => Some(load_indicators(cfg).stage("enrich")?),
        FeatureMode::Synthetic => None,
    };
    let dataset = generate(&cfg.generator_for_seed(seed)).stage("generate")?;
    let arm = run_arm(cfg, &dataset, indicators.as_ref(), mode, seed)?;
    let report = run_report(cfg, &dataset, mode, seed, &arm);
    write_json(&cfg.output_dir.join(report_file_name(mode, seed)), &report).stage("report")?;
    let echo = GraphEcho {
        layout: arm
            .graph
            .layout()
            .cloned()
            .ok_or_else(|| Error::InternalConsistency("built graph has no layout".into()))?,
        indicators,
        join_policy: cfg.join_policy,
        split: cfg.split,
        split_seed: seed,
    };
    let checkpoint = Checkpoint::new(&arm.outcome.params, &cfg.model, seed, Some(echo));
    Ok(SingleRun {
        report,
        checkpoint,
        dataset,
        graph: arm.graph,
    })
}

/// Runs both arms for every seed on a shared dataset and split, writes the
/// per-run reports plus `comparison.json` and `comparison.txt`.
///
/// Metric values never make this fail; only execution errors do.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    if cfg.mode != ModeSelection::Both {
        return Err(Error::Config("compare requires mode `both`".into()));
    }
    let modes = ModeSelection::Both.modes();
    cfg.validate_for(modes)?;
    let indicators = load_indicators(cfg).stage("enrich")?;

    let mut per_mode: Vec<Vec<SeedResult>> = vec![Vec::new(); modes.len()];
    for &seed in &cfg.seeds {
        let dataset = generate(&cfg.generator_for_seed(seed)).stage("generate")?;
        for (k, &mode) in modes.iter().enumerate() {
            let ind = (mode == FeatureMode::Hybrid).then_some(&indicators);
            let arm = run_arm(cfg, &dataset, ind, mode, seed)?;
            let report = run_report(cfg, &dataset, mode, seed, &arm);
            write_json(&cfg.output_dir.join(report_file_name(mode, seed)), &report)
                .stage("report")?;
            per_mode[k].push(SeedResult {
                seed,
                best_epoch: arm.outcome.best_epoch,
                metrics: arm.test,
            });
        }
    }

    let arms: Vec<ArmSummary> = modes
        .iter()
        .zip(per_mode)
        .map(|(&mode, runs)| ArmSummary::new(mode, runs))
        .collect();
    let mut warnings = Vec::new();
    if cfg.seeds.len() < 2 {
        warnings.push("only one seed: standard deviations are undefined".to_string());
    }
    let report = ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        software_version: SOFTWARE_VERSION.to_string(),
        seeds: cfg.seeds.clone(),
        deltas: Deltas::between(&arms[0], &arms[1]),
        arms,
        warnings,
        config: cfg.clone(),
        timestamp_unix: report::now_unix(),
    };
    write_json(&cfg.output_dir.join("comparison.json"), &report).stage("report")?;
    write_atomic(
        &cfg.output_dir.join("comparison.txt"),
        emit_table(&report).as_bytes(),
    )
    .stage("report")?;
    Ok(report)
}

/// Scores a saved model on a dataset directory, rebuilding the graph with
/// the checkpoint's layout. `split` selects `test`, `val`, `train` or `all`.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    split: &str,
) -> Result<MetricsReport> {
    let echo = checkpoint
        .graph
        .as_ref()
        .ok_or_else(|| Error::Config("checkpoint carries no graph layout".into()))?;
    let options = BuildOptions {
        countries: echo.layout.countries.clone(),
        n_tx_types: echo.layout.n_tx_types,
        split: echo.split,
        join_policy: echo.join_policy,
    };
    let graph = build_graph(
        &dataset.accounts,
        &dataset.transactions,
        echo.layout.mode,
        echo.indicators.as_ref(),
        &options,
        echo.split_seed,
    )
    .stage("build")?;
    let params = checkpoint.params()?;
    let probs = predict(&graph, &params, &checkpoint.config).stage("evaluate")?;
    let masks = graph.masks();
    let all = vec![true; probs.len()];
    let mask = match split {
        "test" => &masks.test,
        "val" => &masks.val,
        "train" => &masks.train,
        "all" => &all,
        other => return Err(Error::Config(format!("unknown split `{other}`"))),
    };
    metrics::evaluate(&masked(&probs, mask), &masked(graph.labels(), mask), DEFAULT_THRESHOLD)
        .stage("evaluate")
}

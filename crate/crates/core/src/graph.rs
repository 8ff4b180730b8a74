//! Transaction-as-node relational graph.
//!
//! Accounts occupy node indices `[0, A)` and transactions `[A, A + T)`. Each
//! transaction node receives one `debit` edge from its sender and one
//! `credit` edge from its receiver; the `_rev` relations carry the same edges
//! back to the accounts. Adjacency is stored per relation in CSR form with
//! rows indexed by the destination node.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::{AccountRecord, TransactionRecord};
use crate::enrich::{attach_country_features, JoinPolicy, NormalizedIndicators, N_INDICATORS};
use crate::error::{Error, Result};
use crate::seed::{stream_rng, STREAM_SPLIT};

pub const N_RELATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Sender account to transaction.
    Debit,
    /// Receiver account to transaction.
    Credit,
    /// Transaction to sender account.
    DebitRev,
    /// Transaction to receiver account.
    CreditRev,
}

impl Relation {
    pub const ALL: [Relation; N_RELATIONS] = [
        Relation::Debit,
        Relation::Credit,
        Relation::DebitRev,
        Relation::CreditRev,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Debit => "debit",
            Relation::Credit => "credit",
            Relation::DebitRev => "debit_rev",
            Relation::CreditRev => "credit_rev",
        }
    }

    pub fn reverse(self) -> Relation {
        match self {
            Relation::Debit => Relation::DebitRev,
            Relation::Credit => Relation::CreditRev,
            Relation::DebitRev => Relation::Debit,
            Relation::CreditRev => Relation::Credit,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Lookup(s.to_string()))
    }
}

/// Compressed sparse rows: row `i` lists the source nodes sending to `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Csr {
    /// Builds from `(row, col)` pairs; columns are sorted and deduplicated per row.
    pub fn from_edges(n_rows: usize, n_cols: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(r, c)) = edges.iter().find(|&&(r, c)| r >= n_rows || c >= n_cols) {
            return Err(Error::InternalConsistency(format!(
                "edge ({r}, {c}) outside a {n_rows}x{n_cols} adjacency"
            )));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut row_ptr = vec![0; n_rows + 1];
        for &(r, _) in &edges {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n_cols,
            row_ptr,
            col_idx: edges.into_iter().map(|(_, c)| c).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_edges(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows()).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    pub fn transpose(&self) -> Csr {
        let edges = self.edges().map(|(r, c)| (c, r)).collect();
        Csr::from_edges(self.n_cols, self.n_rows(), edges).expect("transposed edges are in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Synthetic,
    Hybrid,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Synthetic => "synthetic",
            FeatureMode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(FeatureMode::Synthetic),
            "hybrid" => Ok(FeatureMode::Hybrid),
            other => Err(Error::Config(format!("unknown feature mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::Config(format!(
                "split fractions must all be positive, got {parts:?}"
            )));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {total}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Boolean masks over transaction nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn all(n: usize) -> Self {
        Self {
            train: vec![true; n],
            val: vec![true; n],
            test: vec![true; n],
        }
    }

    pub fn sizes(&self) -> SplitSizes {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
        SplitSizes {
            train: count(&self.train),
            val: count(&self.val),
            test: count(&self.test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Largest-remainder allocation of `n` items over `fractions`.
fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let mut counts = exact.map(|e| e.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Per-class proportional split. Each class's count in each part differs
/// from its exact share by less than one. A class present with a single
/// member cannot be both trained on and held out, and is rejected.
pub fn stratified_split(labels: &[u8], fractions: &SplitFractions, seed: u64) -> Result<SplitMasks> {
    fractions.validate()?;
    let n = labels.len();
    let mut masks = SplitMasks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    let mut rng = stream_rng(seed, STREAM_SPLIT);
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has a single member"
            )));
        }
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = allocate(members.len(), fractions.as_array());
        for (k, &i) in members.iter().enumerate() {
            let mask = if k < n_train {
                &mut masks.train
            } else if k < n_train + n_val {
                &mut masks.val
            } else {
                &mut masks.test
            };
            mask[i] = true;
        }
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Stratification(format!(
            "label at {i} is {}, expected 0 or 1",
            labels[i]
        )));
    }
    Ok(masks)
}

/// Column layout of the node feature matrix.
///
/// `[country one-hot | standardized log-value | type one-hot | indicators]`,
/// where the indicator block exists only in hybrid mode. Columns that do not
/// apply to a node kind are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub mode: FeatureMode,
    pub countries: Vec<String>,
    pub n_tx_types: usize,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.synthetic_width()
            + match self.mode {
                FeatureMode::Synthetic => 0,
                FeatureMode::Hybrid => N_INDICATORS,
            }
    }

    /// Width of the prefix shared by both modes.
    pub fn synthetic_width(&self) -> usize {
        self.countries.len() + 1 + self.n_tx_types
    }

    fn value_col(&self) -> usize {
        self.countries.len()
    }

    fn type_col(&self, tx_type: usize) -> usize {
        self.countries.len() + 1 + tx_type
    }

    fn indicator_col(&self) -> usize {
        self.synthetic_width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildOptions {
    pub countries: Vec<String>,
    pub n_tx_types: usize,
    pub split: SplitFractions,
    pub join_policy: JoinPolicy,
}

impl BuildOptions {
    /// Country vocabulary in first-seen order of `countries`, type count as given.
    pub fn new(countries: Vec<String>, n_tx_types: usize) -> Self {
        Self {
            countries,
            n_tx_types,
            split: SplitFractions::default(),
            join_policy: JoinPolicy::Strict,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelGraph {
    n_accounts: usize,
    features: Array2<f64>,
    relations: [Csr; N_RELATIONS],
    transposed: [Csr; N_RELATIONS],
    labels: Vec<u8>,
    masks: SplitMasks,
    layout: Option<FeatureLayout>,
}

impl RelGraph {
    /// Assembles a graph from raw parts. Nodes `[n_accounts, n)` are the
    /// labelled output nodes.
    pub fn from_parts(
        n_accounts: usize,
        features: Array2<f64>,
        relations: [Csr; N_RELATIONS],
        labels: Vec<u8>,
        masks: SplitMasks,
    ) -> Result<Self> {
        let n = features.nrows();
        if n_accounts > n {
            return Err(Error::InternalConsistency(format!(
                "{n_accounts} accounts but only {n} nodes"
            )));
        }
        let n_tx = n - n_accounts;
        for r in &relations {
            if r.n_rows() != n || r.n_cols() != n {
                return Err(Error::InternalConsistency(format!(
                    "adjacency is {}x{}, graph has {n} nodes",
                    r.n_rows(),
                    r.n_cols()
                )));
            }
        }
        if labels.len() != n_tx
            || masks.train.len() != n_tx
            || masks.val.len() != n_tx
            || masks.test.len() != n_tx
        {
            return Err(Error::InternalConsistency(
                "labels and masks must cover every output node".into(),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature matrix has non-finite entries".into()));
        }
        let transposed = [0, 1, 2, 3].map(|i| relations[i].transpose());
        Ok(Self {
            n_accounts,
            features,
            relations,
            transposed,
            labels,
            masks,
            layout: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_accounts(&self) -> usize {
        self.n_accounts
    }

    pub fn n_transactions(&self) -> usize {
        self.n_nodes() - self.n_accounts
    }

    /// Node index of the first transaction.
    pub fn tx_offset(&self) -> usize {
        self.n_accounts
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn relation(&self, r: Relation) -> &Csr {
        &self.relations[r.index()]
    }

    /// Transpose of `r`'s adjacency, used to route gradients backwards.
    pub fn relation_transposed(&self, r: Relation) -> &Csr {
        &self.transposed[r.index()]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn masks(&self) -> &SplitMasks {
        &self.masks
    }

    pub fn layout(&self) -> Option<&FeatureLayout> {
        self.layout.as_ref()
    }

    pub fn in_degrees(&self, r: Relation) -> Vec<usize> {
        let csr = self.relation(r);
        (0..csr.n_rows()).map(|i| csr.in_degree(i)).collect()
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            n_nodes: self.n_nodes(),
            n_accounts: self.n_accounts,
            n_transactions: self.n_transactions(),
            feature_width: self.feature_width(),
            relation_edges: Relation::ALL
                .iter()
                .map(|r| (r.name().to_string(), self.relation(*r).n_edges()))
                .collect(),
            split_sizes: self.masks.sizes(),
        }
    }
}

/// Debug dump written as `graph.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n_nodes: usize,
    pub n_accounts: usize,
    pub n_transactions: usize,
    pub feature_width: usize,
    pub relation_edges: BTreeMap<String, usize>,
    pub split_sizes: SplitSizes,
}

pub fn degree_table(graph: &RelGraph, relation: &str) -> Result<Vec<usize>> {
    Ok(graph.in_degrees(relation.parse()?))
}

pub fn build_graph(
    accounts: &[AccountRecord],
    transactions: &[TransactionRecord],
    mode: FeatureMode,
    indicators: Option<&NormalizedIndicators>,
    options: &BuildOptions,
    seed: u64,
) -> Result<RelGraph> {
    let indicators = match (mode, indicators) {
        (FeatureMode::Hybrid, None) => {
            return Err(Error::Config(
                "hybrid mode requires a country indicator table".into(),
            ))
        }
        (FeatureMode::Hybrid, Some(ind)) => Some(ind),
        (FeatureMode::Synthetic, _) => None,
    };
    let layout = FeatureLayout {
        mode,
        countries: options.countries.clone(),
        n_tx_types: options.n_tx_types,
    };

    let mut node_of: HashMap<u32, usize> = HashMap::with_capacity(accounts.len());
    for (i, a) in accounts.iter().enumerate() {
        if node_of.insert(a.account_id, i).is_some() {
            return Err(Error::Validation(format!(
                "duplicate account id {}",
                a.account_id
            )));
        }
    }
    let country_col: HashMap<&str, usize> = layout
        .countries
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let n_acc = accounts.len();
    let n_tx = transactions.len();
    let n = n_acc + n_tx;
    let mut features = Array2::<f64>::zeros((n, layout.width()));

    for (i, a) in accounts.iter().enumerate() {
        let col = country_col.get(a.country.as_str()).ok_or_else(|| {
            Error::Validation(format!(
                "account {} has country `{}` outside the feature vocabulary",
                a.account_id, a.country
            ))
        })?;
        features[[i, *col]] = 1.0;
    }
    if let Some(ind) = indicators {
        let joined = attach_country_features(accounts, ind, options.join_policy)?;
        let base = layout.indicator_col();
        for (i, a) in accounts.iter().enumerate() {
            let v = joined.by_account[&a.account_id];
            for (k, x) in v.iter().enumerate() {
                features[[i, base + k]] = *x;
            }
        }
    }

    let log_values: Vec<f64> = transactions.iter().map(|t| t.value_usd.ln()).collect();
    let (lv_mean, lv_std) = mean_std(&log_values);
    let lv_std = if lv_std > 0.0 { lv_std } else { 1.0 };

    let mut edges: [Vec<(usize, usize)>; N_RELATIONS] = Default::default();
    for (k, t) in transactions.iter().enumerate() {
        let node = n_acc + k;
        let endpoint = |id: u32| {
            node_of.get(&id).copied().ok_or_else(|| {
                Error::ReferentialIntegrity(format!(
                    "transaction {} references unknown account {id}",
                    t.tx_id
                ))
            })
        };
        let src = endpoint(t.src)?;
        let dst = endpoint(t.dst)?;
        let ty = t.tx_type as usize;
        if ty >= layout.n_tx_types {
            return Err(Error::Validation(format!(
                "transaction {} has type {ty}, vocabulary size is {}",
                t.tx_id, layout.n_tx_types
            )));
        }
        if !(t.value_usd > 0.0 && t.value_usd.is_finite()) {
            return Err(Error::Validation(format!(
                "transaction {} has non-positive value",
                t.tx_id
            )));
        }
        features[[node, layout.value_col()]] = (log_values[k] - lv_mean) / lv_std;
        features[[node, layout.type_col(ty)]] = 1.0;
        edges[Relation::Debit.index()].push((node, src));
        edges[Relation::Credit.index()].push((node, dst));
        edges[Relation::DebitRev.index()].push((src, node));
        edges[Relation::CreditRev.index()].push((dst, node));
    }
    let [debit, credit, debit_rev, credit_rev] = edges;
    let relations = [
        Csr::from_edges(n, n, debit)?,
        Csr::from_edges(n, n, credit)?,
        Csr::from_edges(n, n, debit_rev)?,
        Csr::from_edges(n, n, credit_rev)?,
    ];

    let labels: Vec<u8> = transactions.iter().map(|t| t.label).collect();
    let masks = stratified_split(&labels, &options.split, seed)?;
    let mut graph = RelGraph::from_parts(n_acc, features, relations, labels, masks)?;
    graph.layout = Some(layout);
    Ok(graph)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 1.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

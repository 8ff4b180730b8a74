//! Synthetic accounts and labelled transactions.
//!
//! The generator reproduces only the published marginals of the reference
//! dataset: transaction count, sixteen countries, a 20% BAD share and the
//! mean and standard deviation of the transaction value. Labels follow a
//! logistic model in the sender and receiver country risk, the standardized
//! log-value and the transaction type, so that country identity carries real
//! label signal.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{stream_rng, STREAM_ACCOUNTS, STREAM_CALIBRATION, STREAM_TRANSACTIONS};

pub const ACCOUNTS_FILE: &str = "accounts.csv";
pub const TRANSACTIONS_FILE: &str = "transactions.csv";
const ACCOUNTS_HEADER: &str = "account_id,bank_id,country";
const TRANSACTIONS_HEADER: &str = "tx_id,src,dst,tx_type,value_usd,label";

/// Default transaction type vocabulary; codes are positions in this list.
pub const TX_TYPE_NAMES: [&str; 5] = ["wire", "ach", "check", "cash_deposit", "card"];

/// Default country set ordered by ascending 2022 Basel AML Index, matching
/// `fixtures/country_indicators.csv`.
pub const DEFAULT_COUNTRIES: [&str; 16] = [
    "GB", "FR", "CH", "SG", "DE", "CA", "JP", "US", "AE", "IN", "BR", "MX", "ZA", "TR", "CN", "NG",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub account_id: u32,
    pub bank_id: u32,
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub tx_id: u32,
    pub src: u32,
    pub dst: u32,
    pub tx_type: u8,
    pub value_usd: f64,
    /// 1 = BAD (suspicious), 0 = GOOD.
    pub label: u8,
}

impl TransactionRecord {
    pub fn is_bad(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountrySpec {
    pub code: String,
    pub weight: f64,
    /// Latent risk score entering the label model.
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskCoefficients {
    /// Multiplies the sender's country risk score.
    pub src_country: f64,
    /// Multiplies the receiver's country risk score.
    pub dst_country: f64,
    /// Multiplies the standardized log-value.
    pub log_value: f64,
    /// One coefficient per transaction type; its length fixes the number of types.
    pub tx_type: Vec<f64>,
    /// Fixed intercept. `None` calibrates it to hit `target_bad_fraction`.
    pub intercept: Option<f64>,
}

impl Default for RiskCoefficients {
    fn default() -> Self {
        Self {
            src_country: 1.0,
            dst_country: 1.0,
            log_value: 0.25,
            tx_type: vec![0.25, 0.0, -0.25, 0.5, -0.5],
            intercept: None,
        }
    }
}

impl RiskCoefficients {
    /// Same number of types, every coefficient zero: labels carry no signal.
    pub fn zeroed(&self) -> Self {
        Self {
            src_country: 0.0,
            dst_country: 0.0,
            log_value: 0.0,
            tx_type: vec![0.0; self.tx_type.len()],
            intercept: None,
        }
    }

    fn logit_offset(&self, src_risk: f64, dst_risk: f64, z_value: f64, tx_type: usize) -> f64 {
        self.src_country * src_risk
            + self.dst_country * dst_risk
            + self.log_value * z_value
            + self.tx_type[tx_type]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub n_accounts: usize,
    pub n_transactions: usize,
    pub n_banks: usize,
    pub countries: Vec<CountrySpec>,
    pub value_mean_usd: f64,
    pub value_std_usd: f64,
    pub target_bad_fraction: f64,
    pub risk: RiskCoefficients,
    /// Simulated transactions used to calibrate the intercept.
    pub calibration_probe: usize,
    pub rng_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_accounts: 20_000,
            n_transactions: 523_877,
            n_banks: 50,
            countries: default_countries(),
            value_mean_usd: 148_339.46,
            value_std_usd: 473_121.20,
            target_bad_fraction: 0.20,
            risk: RiskCoefficients::default(),
            calibration_probe: 200_000,
            rng_seed: 7,
        }
    }
}

/// The sixteen default countries with equal weights and risk scores evenly
/// spaced over [-1, 1] in ascending Basel AML order.
pub fn default_countries() -> Vec<CountrySpec> {
    evenly_spaced_countries(&DEFAULT_COUNTRIES)
}

pub fn evenly_spaced_countries(codes: &[&str]) -> Vec<CountrySpec> {
    let n = codes.len();
    codes
        .iter()
        .enumerate()
        .map(|(i, code)| CountrySpec {
            code: (*code).to_string(),
            weight: 1.0 / n as f64,
            risk: if n == 1 {
                0.0
            } else {
                -1.0 + 2.0 * i as f64 / (n - 1) as f64
            },
        })
        .collect()
}

impl GenConfig {
    pub fn n_tx_types(&self) -> usize {
        self.risk.tx_type.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.countries.is_empty() {
            return bad("country set is empty".into());
        }
        if self.n_accounts < 2 {
            return bad(format!("n_accounts must be at least 2, got {}", self.n_accounts));
        }
        if self.n_banks == 0 {
            return bad("n_banks must be positive".into());
        }
        if self.risk.tx_type.is_empty() || self.risk.tx_type.len() > u8::MAX as usize {
            return bad("risk.tx_type must list between 1 and 255 type coefficients".into());
        }
        if !(self.target_bad_fraction > 0.0 && self.target_bad_fraction < 1.0) {
            return bad(format!(
                "target_bad_fraction must lie in (0, 1), got {}",
                self.target_bad_fraction
            ));
        }
        if !(self.value_mean_usd > 0.0 && self.value_mean_usd.is_finite()) {
            return bad("value_mean_usd must be positive".into());
        }
        if !(self.value_std_usd > 0.0 && self.value_std_usd.is_finite()) {
            return bad("value_std_usd must be positive".into());
        }
        let mut seen = HashSet::new();
        for c in &self.countries {
            if c.code.is_empty() || !seen.insert(c.code.as_str()) {
                return bad(format!("country code `{}` is empty or repeated", c.code));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite() && c.risk.is_finite()) {
                return bad(format!("country `{}` has an invalid weight or risk", c.code));
            }
        }
        let total: f64 = self.countries.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("country weights sum to {total}, expected 1"));
        }
        let coefs = [self.risk.src_country, self.risk.dst_country, self.risk.log_value];
        if coefs.iter().chain(&self.risk.tx_type).any(|c| !c.is_finite())
            || self.risk.intercept.is_some_and(|b| !b.is_finite())
        {
            return bad("risk coefficients must be finite".into());
        }
        Ok(())
    }

    pub fn value_distribution(&self) -> LogNormalParams {
        LogNormalParams::from_moments(self.value_mean_usd, self.value_std_usd)
    }

    fn country_sampler(&self) -> Result<WeightedIndex<f64>> {
        WeightedIndex::new(self.countries.iter().map(|c| c.weight))
            .map_err(|e| Error::Config(format!("country weights: {e}")))
    }
}

/// Parameters of the underlying normal of a log-normal variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    /// Moment matching: `sigma^2 = ln(1 + (std/mean)^2)`, `mu = ln(mean) - sigma^2 / 2`.
    pub fn from_moments(mean: f64, std: f64) -> Self {
        let sigma2 = (1.0 + (std / mean).powi(2)).ln();
        Self {
            mu: mean.ln() - sigma2 / 2.0,
            sigma: sigma2.sqrt(),
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        (self.mu + self.sigma * z).exp()
    }

    pub fn mean(&self) -> f64 {
        (self.mu + self.sigma * self.sigma / 2.0).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub accounts: Vec<AccountRecord>,
    pub transactions: Vec<TransactionRecord>,
}

impl Dataset {
    pub fn bad_fraction(&self) -> f64 {
        let bad = self.transactions.iter().filter(|t| t.is_bad()).count();
        bad as f64 / self.transactions.len().max(1) as f64
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    let accounts = generate_accounts(cfg)?;
    let transactions = generate_transactions(&accounts, cfg)?;
    Ok(Dataset {
        accounts,
        transactions,
    })
}

pub fn generate_accounts(cfg: &GenConfig) -> Result<Vec<AccountRecord>> {
    cfg.validate()?;
    let sampler = cfg.country_sampler()?;
    let mut rng = stream_rng(cfg.rng_seed, STREAM_ACCOUNTS);
    let n_banks = u32::try_from(cfg.n_banks).map_err(|_| Error::Config("n_banks too large".into()))?;
    let n_accounts =
        u32::try_from(cfg.n_accounts).map_err(|_| Error::Config("n_accounts too large".into()))?;
    Ok((0..n_accounts)
        .map(|account_id| {
            let bank_id = rng.random_range(0..n_banks);
            let country = cfg.countries[sampler.sample(&mut rng)].code.clone();
            AccountRecord {
                account_id,
                bank_id,
                country,
            }
        })
        .collect())
}

pub fn generate_transactions(
    accounts: &[AccountRecord],
    cfg: &GenConfig,
) -> Result<Vec<TransactionRecord>> {
    cfg.validate()?;
    if accounts.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 accounts to draw distinct endpoints, got {}",
            accounts.len()
        )));
    }
    let n_tx = u32::try_from(cfg.n_transactions)
        .map_err(|_| Error::Config("n_transactions too large".into()))?;
    let risk_of: HashMap<&str, f64> = cfg
        .countries
        .iter()
        .map(|c| (c.code.as_str(), c.risk))
        .collect();
    let account_risk = accounts
        .iter()
        .map(|a| {
            risk_of.get(a.country.as_str()).copied().ok_or_else(|| {
                Error::Config(format!(
                    "account {} has country `{}` outside the configured set",
                    a.account_id, a.country
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let intercept = match cfg.risk.intercept {
        Some(b) => b,
        None => calibrate_intercept(cfg, cfg.calibration_probe)?,
    };
    let values = cfg.value_distribution();
    let n_types = cfg.n_tx_types();
    let n = accounts.len();
    let mut rng = stream_rng(cfg.rng_seed, STREAM_TRANSACTIONS);

    let mut out = Vec::with_capacity(cfg.n_transactions);
    for tx_id in 0..n_tx {
        let src = rng.random_range(0..n);
        // Uniform over the other n - 1 accounts.
        let mut dst = rng.random_range(0..n - 1);
        if dst >= src {
            dst += 1;
        }
        let tx_type = rng.random_range(0..n_types);
        let z: f64 = rng.sample(StandardNormal);
        let value_usd = round_cents(values.value(z));
        let logit = intercept + cfg.risk.logit_offset(account_risk[src], account_risk[dst], z, tx_type);
        let label = u8::from(rng.random::<f64>() < sigmoid(logit));
        out.push(TransactionRecord {
            tx_id,
            src: accounts[src].account_id,
            dst: accounts[dst].account_id,
            tx_type: tx_type as u8,
            value_usd,
            label,
        });
    }
    Ok(out)
}

fn round_cents(v: f64) -> f64 {
    ((v * 100.0).round() / 100.0).max(0.01)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Finds the intercept whose mean BAD probability over `n_probe` simulated
/// transactions equals the target fraction, by bisection on [-20, 20].
///
/// Probe covariates are drawn from the configured country weights and the
/// standard normal log-value, on an RNG stream of their own.
pub fn calibrate_intercept(cfg: &GenConfig, n_probe: usize) -> Result<f64> {
    cfg.validate()?;
    if n_probe < 1000 {
        return Err(Error::Config(format!(
            "calibration needs at least 1000 probe transactions, got {n_probe}"
        )));
    }
    let sampler = cfg.country_sampler()?;
    let mut rng = stream_rng(cfg.rng_seed, STREAM_CALIBRATION);
    let n_types = cfg.n_tx_types();
    let offsets: Vec<f64> = (0..n_probe)
        .map(|_| {
            let src = cfg.countries[sampler.sample(&mut rng)].risk;
            let dst = cfg.countries[sampler.sample(&mut rng)].risk;
            let z: f64 = rng.sample(StandardNormal);
            let ty = rng.random_range(0..n_types);
            cfg.risk.logit_offset(src, dst, z, ty)
        })
        .collect();
    let target = cfg.target_bad_fraction;
    let mean_prob =
        |b: f64| offsets.iter().map(|&s| sigmoid(b + s)).sum::<f64>() / offsets.len() as f64;

    let (mut lo, mut hi) = (-20.0, 20.0);
    if mean_prob(lo) > target || mean_prob(hi) < target {
        return Err(Error::Calibration(format!(
            "target BAD fraction {target} is not bracketed by intercepts in [-20, 20]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_prob(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let b = 0.5 * (lo + hi);
    let achieved = mean_prob(b);
    if (achieved - target).abs() > 0.005 {
        return Err(Error::Calibration(format!(
            "bisection converged to mean probability {achieved}, target {target}"
        )));
    }
    Ok(b)
}

pub fn write_dataset(
    accounts: &[AccountRecord],
    transactions: &[TransactionRecord],
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(ACCOUNTS_FILE);
    write_lines(&path, ACCOUNTS_HEADER, accounts, |w, a| {
        writeln!(w, "{},{},{}", a.account_id, a.bank_id, a.country)
    })?;

    let path = dir.join(TRANSACTIONS_FILE);
    write_lines(&path, TRANSACTIONS_HEADER, transactions, |w, t| {
        writeln!(
            w,
            "{},{},{},{},{:.2},{}",
            t.tx_id, t.src, t.dst, t.tx_type, t.value_usd, t.label
        )
    })
}

fn write_lines<T>(
    path: &Path,
    header: &str,
    rows: &[T],
    mut line: impl FnMut(&mut BufWriter<File>, &T) -> std::io::Result<()>,
) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "{header}").map_err(io_err)?;
    for row in rows {
        line(&mut w, row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let accounts: Vec<AccountRecord> = read_csv(&dir.join(ACCOUNTS_FILE), ACCOUNTS_HEADER)?;
    let transactions: Vec<TransactionRecord> =
        read_csv(&dir.join(TRANSACTIONS_FILE), TRANSACTIONS_HEADER)?;
    for (i, t) in transactions.iter().enumerate() {
        let row = i + 2;
        if t.label > 1 {
            return Err(Error::Parse {
                row,
                message: format!("label must be 0 or 1, got {}", t.label),
            });
        }
        if !(t.value_usd > 0.0 && t.value_usd.is_finite()) {
            return Err(Error::Parse {
                row,
                message: format!("value_usd must be positive, got {}", t.value_usd),
            });
        }
        if t.src == t.dst {
            return Err(Error::Validation(format!(
                "transaction {} sends to its own account",
                t.tx_id
            )));
        }
    }
    Ok(Dataset {
        accounts,
        transactions,
    })
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path, header: &str) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    for column in header.split(',') {
        if !found.iter().any(|h| h == column) {
            return Err(Error::Schema {
                column: column.to_string(),
            });
        }
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, rec)| {
            rec.map_err(|e| Error::Parse {
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

//! Public country-level indicators: loading, normalization and the join onto
//! account nodes that turns the synthetic dataset into the hybrid one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::AccountRecord;
use crate::error::{Error, Result};

/// Indicator columns in feature order.
pub const INDICATOR_COLUMNS: [&str; 4] = ["basel_aml", "dei", "cpi", "gdp_per_capita_usd"];
pub const N_INDICATORS: usize = INDICATOR_COLUMNS.len();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryIndicatorRow {
    pub country: String,
    /// Basel AML Index, higher is riskier.
    pub basel_aml: f64,
    /// Digital Evolution Index, higher is more digitally evolved.
    pub dei: f64,
    /// Corruption Perceptions Index in [0, 100], higher is cleaner.
    pub cpi: f64,
    pub gdp_per_capita_usd: f64,
    pub year: i32,
}

impl CountryIndicatorRow {
    fn raw(&self) -> [f64; N_INDICATORS] {
        [self.basel_aml, self.dei, self.cpi, self.gdp_per_capita_usd]
    }
}

pub fn load_country_indicators(path: &Path) -> Result<Vec<CountryIndicatorRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_country_indicators(file)
}

/// Parses `country,basel_aml,dei,cpi,gdp_per_capita_usd,year`. Lines starting
/// with `#` are comments. Row numbers in errors are file line numbers.
pub fn parse_country_indicators<R: Read>(input: R) -> Result<Vec<CountryIndicatorRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                column: name.to_string(),
            })
    };
    let country_col = column("country")?;
    let value_cols = INDICATOR_COLUMNS
        .iter()
        .map(|name| column(name))
        .collect::<Result<Vec<_>>>()?;
    let year_col = column("year")?;

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let mut values = [0.0; N_INDICATORS];
        for (slot, (&col, name)) in values.iter_mut().zip(value_cols.iter().zip(INDICATOR_COLUMNS)) {
            let v: f64 = field(col).parse().map_err(|_| Error::Parse {
                row,
                message: format!("{name} `{}` is not a number", field(col)),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("{name} is not finite"),
                });
            }
            *slot = v;
        }
        let year = field(year_col).parse().map_err(|_| Error::Parse {
            row,
            message: format!("year `{}` is not an integer", field(year_col)),
        })?;
        let country = field(country_col).to_string();
        if country.is_empty() {
            return Err(Error::Validation(format!("row {row}: empty country code")));
        }
        let [basel_aml, dei, cpi, gdp_per_capita_usd] = values;
        if !(0.0..=100.0).contains(&cpi) {
            return Err(Error::Validation(format!(
                "row {row}: cpi {cpi} outside [0, 100]"
            )));
        }
        if gdp_per_capita_usd <= 0.0 {
            return Err(Error::Validation(format!(
                "row {row}: gdp_per_capita_usd must be positive"
            )));
        }
        if !seen.insert(country.clone()) {
            return Err(Error::Validation(format!(
                "row {row}: duplicate country `{country}`"
            )));
        }
        rows.push(CountryIndicatorRow {
            country,
            basel_aml,
            dei,
            cpi,
            gdp_per_capita_usd,
            year,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Subtract the mean, divide by the population standard deviation.
    #[default]
    ZScore,
    /// Map each column onto [0, 1].
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizeOptions {
    pub scaling: Scaling,
    /// Take the natural log of GDP per capita before scaling.
    pub log_gdp: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        Self {
            scaling: Scaling::ZScore,
            log_gdp: true,
        }
    }
}

/// Affine map applied to one column: `normalized = (raw - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedIndicators {
    pub countries: Vec<String>,
    pub values: Vec<[f64; N_INDICATORS]>,
    pub stats: [ColumnStats; N_INDICATORS],
    pub options: NormalizeOptions,
}

impl NormalizedIndicators {
    pub fn get(&self, country: &str) -> Option<&[f64; N_INDICATORS]> {
        self.countries
            .iter()
            .position(|c| c == country)
            .map(|i| &self.values[i])
    }

    /// Vector given to accounts whose country is missing under
    /// [`JoinPolicy::ImputeMean`]: the post-normalization column means.
    pub fn imputed_vector(&self) -> [f64; N_INDICATORS] {
        match self.options.scaling {
            Scaling::ZScore => [0.0; N_INDICATORS],
            Scaling::MinMax => {
                let mut mean = [0.0; N_INDICATORS];
                for row in &self.values {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.map(|m| m / self.values.len() as f64)
            }
        }
    }

    /// Recovers raw indicator values for the country at `index`.
    pub fn denormalize(&self, index: usize) -> [f64; N_INDICATORS] {
        let mut raw = [0.0; N_INDICATORS];
        for (j, r) in raw.iter_mut().enumerate() {
            let s = self.stats[j];
            *r = self.values[index][j] * s.scale + s.center;
        }
        if self.options.log_gdp {
            raw[3] = raw[3].exp();
        }
        raw
    }
}

/// Column-wise scaling of a `rows x 4` table.
pub fn standardize_columns(
    table: &[[f64; N_INDICATORS]],
    scaling: Scaling,
) -> Result<(Vec<[f64; N_INDICATORS]>, [ColumnStats; N_INDICATORS])> {
    let n = table.len() as f64;
    let mut stats = [ColumnStats {
        center: 0.0,
        scale: 1.0,
    }; N_INDICATORS];
    for (j, stat) in stats.iter_mut().enumerate() {
        let column = table.iter().map(|row| row[j]);
        *stat = match scaling {
            Scaling::ZScore => {
                let mean = column.clone().sum::<f64>() / n;
                let var = column.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                ColumnStats {
                    center: mean,
                    scale: var.sqrt(),
                }
            }
            Scaling::MinMax => {
                let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                ColumnStats {
                    center: lo,
                    scale: hi - lo,
                }
            }
        };
        if stat.scale <= 0.0 || !stat.scale.is_finite() {
            return Err(Error::DegenerateData {
                column: INDICATOR_COLUMNS[j].to_string(),
            });
        }
    }
    let scaled = table
        .iter()
        .map(|row| {
            let mut out = [0.0; N_INDICATORS];
            for j in 0..N_INDICATORS {
                out[j] = (row[j] - stats[j].center) / stats[j].scale;
            }
            out
        })
        .collect();
    Ok((scaled, stats))
}

pub fn normalize_indicators(
    rows: &[CountryIndicatorRow],
    options: NormalizeOptions,
) -> Result<NormalizedIndicators> {
    if rows.len() < 2 {
        return Err(Error::Validation(format!(
            "normalization needs at least 2 countries, got {}",
            rows.len()
        )));
    }
    let raw: Vec<[f64; N_INDICATORS]> = rows
        .iter()
        .map(|r| {
            let mut v = r.raw();
            if options.log_gdp {
                v[3] = v[3].ln();
            }
            v
        })
        .collect();
    let (values, stats) = standardize_columns(&raw, options.scaling)?;
    Ok(NormalizedIndicators {
        countries: rows.iter().map(|r| r.country.clone()).collect(),
        values,
        stats,
        options,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinPolicy {
    /// Every account's country must be covered.
    #[default]
    Strict,
    /// Uncovered countries receive the column-mean vector.
    ImputeMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryFeatures {
    pub by_account: BTreeMap<u32, [f64; N_INDICATORS]>,
    pub imputed_accounts: usize,
    pub imputed_countries: Vec<String>,
}

pub fn attach_country_features(
    accounts: &[AccountRecord],
    normalized: &NormalizedIndicators,
    policy: JoinPolicy,
) -> Result<CountryFeatures> {
    let lookup: HashMap<&str, &[f64; N_INDICATORS]> = normalized
        .countries
        .iter()
        .map(String::as_str)
        .zip(&normalized.values)
        .collect();
    let missing: BTreeSet<&str> = accounts
        .iter()
        .map(|a| a.country.as_str())
        .filter(|c| !lookup.contains_key(c))
        .collect();
    if policy == JoinPolicy::Strict && !missing.is_empty() {
        return Err(Error::Coverage {
            missing: missing.iter().map(|c| c.to_string()).collect(),
        });
    }
    let fallback = normalized.imputed_vector();
    let mut imputed_accounts = 0;
    let by_account = accounts
        .iter()
        .map(|a| {
            let v = match lookup.get(a.country.as_str()) {
                Some(v) => **v,
                None => {
                    imputed_accounts += 1;
                    fallback
                }
            };
            (a.account_id, v)
        })
        .collect();
    Ok(CountryFeatures {
        by_account,
        imputed_accounts,
        imputed_countries: missing.into_iter().map(String::from).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(country: &str, basel: f64) -> CountryIndicatorRow {
        CountryIndicatorRow {
            country: country.into(),
            basel_aml: basel,
            dei: 50.0 + basel,
            cpi: 40.0 + basel,
            gdp_per_capita_usd: 1000.0 * basel,
            year: 2022,
        }
    }

    fn account(id: u32, country: &str) -> AccountRecord {
        AccountRecord {
            account_id: id,
            bank_id: 0,
            country: country.into(),
        }
    }

    const HEADER: &str = "country,basel_aml,dei,cpi,gdp_per_capita_usd,year\n";

    #[test]
    fn header_only_file_is_empty() {
        assert!(parse_country_indicators(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn cpi_out_of_range_is_rejected() {
        let text = format!("{HEADER}US,5.1,70,101,70000,2022\n");
        assert!(matches!(
            parse_country_indicators(text.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn missing_column_is_named() {
        let text = "country,basel_aml,dei,gdp_per_capita_usd,year\n";
        match parse_country_indicators(text.as_bytes()) {
            Err(Error::Schema { column }) => assert_eq!(column, "cpi"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_value_reports_row() {
        let text = format!("{HEADER}US,5.1,70,69,70000,2022\nGB,NaN,65,73,45000,2022\n");
        match parse_country_indicators(text.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_country_is_rejected() {
        let text = format!("{HEADER}US,5.1,70,69,70000,2022\nUS,5.1,70,69,70000,2022\n");
        assert!(matches!(
            parse_country_indicators(text.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn two_point_zscore() {
        let (out, stats) =
            standardize_columns(&[[4.0, 1.0, 1.0, 1.0], [6.0, 2.0, 2.0, 2.0]], Scaling::ZScore)
                .unwrap();
        assert_eq!(out[0][0], -1.0);
        assert_eq!(out[1][0], 1.0);
        assert_eq!(stats[0].scale, 1.0);
    }

    #[test]
    fn zero_variance_column_is_named() {
        let rows = vec![row("AA", 1.0), {
            let mut r = row("BB", 2.0);
            r.cpi = 41.0;
            r
        }];
        match normalize_indicators(&rows, NormalizeOptions::default()) {
            Err(Error::DegenerateData { column }) => assert_eq!(column, "cpi"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minmax_maps_onto_unit_interval() {
        let rows = vec![row("AA", 1.0), row("BB", 2.0), row("CC", 4.0)];
        let opts = NormalizeOptions {
            scaling: Scaling::MinMax,
            log_gdp: false,
        };
        let n = normalize_indicators(&rows, opts).unwrap();
        for j in 0..N_INDICATORS {
            assert_eq!(n.values[0][j], 0.0);
            assert_eq!(n.values[2][j], 1.0);
        }
        for (i, row) in rows.iter().enumerate() {
            let raw = n.denormalize(i);
            assert!((raw[0] - row.basel_aml).abs() < 1e-12);
        }
    }

    #[test]
    fn total_join_copies_country_rows() {
        let n = normalize_indicators(&[row("AA", 1.0), row("BB", 3.0)], Default::default())
            .unwrap();
        let accounts = vec![account(0, "BB"), account(1, "AA"), account(2, "BB")];
        let f = attach_country_features(&accounts, &n, JoinPolicy::Strict).unwrap();
        assert_eq!(f.by_account.len(), 3);
        assert_eq!(f.by_account[&0], *n.get("BB").unwrap());
        assert_eq!(f.by_account[&1], *n.get("AA").unwrap());
        assert_eq!(f.imputed_accounts, 0);
    }

    #[test]
    fn strict_join_names_missing_country() {
        let n = normalize_indicators(&[row("AA", 1.0), row("BB", 3.0)], Default::default())
            .unwrap();
        let accounts = vec![account(0, "AA"), account(1, "ZZ")];
        match attach_country_features(&accounts, &n, JoinPolicy::Strict) {
            Err(Error::Coverage { missing }) => assert_eq!(missing, vec!["ZZ".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn impute_mean_gives_exact_zeros() {
        let n = normalize_indicators(
            &[row("AA", 1.0), row("BB", 3.0), row("CC", 7.0)],
            Default::default(),
        )
        .unwrap();
        let accounts = vec![account(0, "AA"), account(1, "ZZ")];
        let f = attach_country_features(&accounts, &n, JoinPolicy::ImputeMean).unwrap();
        assert_eq!(f.by_account[&1], [0.0; 4]);
        assert_eq!(f.imputed_accounts, 1);
        assert_eq!(f.imputed_countries, vec!["ZZ".to_string()]);
    }
}

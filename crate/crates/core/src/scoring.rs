//! Percentile ranks and exponential risk scores.
//!
//! Every covariate and outcome is reduced to a percentile in `[0, 1]` and
//! then mapped through `10^p`, so all scores live on the same `[1, 10]`
//! scale regardless of the units of the underlying variable. Covariates
//! where a *larger* raw value means *less* risk (vaccination, income) are
//! ranked in inverted order so that a high score always means high risk.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;

/// Lower end of the score scale (`10^0`).
pub const SCORE_MIN: f64 = 1.0;
/// Upper end of the score scale (`10^1`).
pub const SCORE_MAX: f64 = 10.0;

/// Composite score column names, in canonical output order.
///
/// `gs1`..`gs3` are the single-variable scores (vaccination, density,
/// income); `gs4`..`gs6` the pairwise means; `gs7` the mean of all three.
pub const GEO_SCORE_COLUMNS: [&str; 7] = ["gs1", "gs2", "gs3", "gs4", "gs5", "gs6", "gs7"];

/// Outcome score column derived from the positive-test rate.
pub const POSITIVE_SCORE: &str = "pos_score";
/// Outcome score column derived from the death rate.
pub const DEATH_SCORE: &str = "death_score";

/// Whether a large raw value maps to a high or a low percentile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskDirection {
    /// Larger raw value means more risk (density, outcome rates).
    Direct,
    /// Larger raw value means less risk (vaccination, income).
    Inverted,
}

/// The three covariates a score configuration can mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Vaccination,
    Density,
    Income,
}

impl Variable {
    /// Risk direction of the covariate.
    pub fn direction(self) -> RiskDirection {
        match self {
            Variable::Vaccination | Variable::Income => RiskDirection::Inverted,
            Variable::Density => RiskDirection::Direct,
        }
    }
}

/// Percentile ranks of `values` in risk order.
///
/// Ranks are `r / (n - 1)` where `r` is the zero-based position among the
/// `n` non-missing values sorted so that the *riskiest* value ranks last;
/// tied values all receive the mean of the rank positions they occupy.
/// Entries flagged in `missing` are excluded from ranking and pinned to
/// percentile `0` (lowest risk).
///
/// Percentiles depend only on the ordering of `values`, so rescaling a
/// column by any positive constant leaves the result bit-identical.
pub fn percentile_ranks(
    values: &[f64],
    direction: RiskDirection,
    missing: &[bool],
) -> Result<Vec<f64>> {
    if values.len() != missing.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: missing.len() });
    }
    let present: Vec<usize> = (0..values.len()).filter(|&i| !missing[i]).collect();
    if present.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: present.len() });
    }
    for &i in &present {
        if !values[i].is_finite() {
            return Err(Error::RangeViolation { field: "value".into(), value: values[i] });
        }
    }

    let mut order = present;
    order.sort_by(|&a, &b| match direction {
        RiskDirection::Direct => values[a].total_cmp(&values[b]),
        RiskDirection::Inverted => values[b].total_cmp(&values[a]),
    });

    let denom = (order.len() - 1) as f64;
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Tied block occupies positions start..=end; everyone gets the mean.
        let rank = (start + end) as f64 / 2.0;
        for &idx in &order[start..=end] {
            ranks[idx] = rank / denom;
        }
        start = end + 1;
    }
    Ok(ranks)
}

/// Exponential score `10^p` for a percentile `p` in `[0, 1]`.
pub fn exp_score(percentile: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&percentile) {
        return Err(Error::OutOfRange(percentile));
    }
    Ok(10f64.powf(percentile))
}

/// Weighted-mean score `Σ wᵢ · 10^pᵢ` over already-computed percentiles.
///
/// Weights must be non-negative and sum to one within `1e-12`; the result is
/// then a convex combination of values in `[1, 10]` and stays in range.
pub fn exp_mean_score(percentiles: &[f64], weights: &[f64]) -> Result<f64> {
    if percentiles.len() != weights.len() {
        return Err(Error::LengthMismatch { left: percentiles.len(), right: weights.len() });
    }
    if percentiles.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::InvalidWeights("weights must be non-negative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > crate::optimize::WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
    }
    let mut acc = 0.0;
    for (&p, &w) in percentiles.iter().zip(weights) {
        acc += w * exp_score(p)?;
    }
    Ok(acc)
}

/// Per-region percentiles for every dataset column, in risk order.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileTable {
    region_ids: Vec<String>,
    columns: IndexMap<String, Vec<f64>>,
}

impl PercentileTable {
    /// Region ids, in the dataset's canonical order.
    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    /// Percentile column by name (`vaccination`, `density`, `income`,
    /// `positive`, `death`).
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| Error::MissingColumn(name.into()))
    }
}

/// Named score columns aligned with a region id list.
///
/// Every value is either `10^p` for some percentile `p` or a convex
/// combination of such values, so the whole table lives in `[1, 10]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    region_ids: Vec<String>,
    columns: IndexMap<String, Vec<f64>>,
}

/// Slack for validating stored scores against `[1, 10]`; covers text
/// round-trips of values computed at the boundary.
const SCORE_RANGE_TOL: f64 = 1e-9;

impl ScoreTable {
    /// Empty table over the given regions.
    pub fn new(region_ids: Vec<String>) -> Self {
        ScoreTable { region_ids, columns: IndexMap::new() }
    }

    /// Number of regions (rows).
    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    /// True when the table has no rows.
    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    /// Region ids, in row order.
    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    /// Column names in insertion order.
    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Append a column, validating length and the `[1, 10]` range.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.region_ids.len() {
            return Err(Error::LengthMismatch { left: values.len(), right: self.region_ids.len() });
        }
        let name = name.into();
        let range = SCORE_MIN - SCORE_RANGE_TOL..=SCORE_MAX + SCORE_RANGE_TOL;
        for &v in &values {
            if !v.is_finite() || !range.contains(&v) {
                return Err(Error::RangeViolation { field: name, value: v });
            }
        }
        self.columns.insert(name, values);
        Ok(())
    }

    /// Column by name.
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| Error::MissingColumn(name.into()))
    }

    /// Column by name, if present.
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    /// Score value for one region/column pair, by row index.
    pub fn value(&self, row: usize, name: &str) -> Result<f64> {
        Ok(self.column(name)?[row])
    }

    /// Absorb all columns of `other`, which must cover the same regions in
    /// the same order.
    pub fn merge(&mut self, other: ScoreTable) -> Result<()> {
        if other.region_ids != self.region_ids {
            return Err(Error::LengthMismatch {
                left: self.region_ids.len(),
                right: other.region_ids.len(),
            });
        }
        for (name, values) in other.columns {
            self.columns.insert(name, values);
        }
        Ok(())
    }

    /// Serialize as CSV: `region_id` first, then every column at six decimal
    /// places. Output is deterministic for a given table.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("region_id");
        for name in self.columns.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (row, id) in self.region_ids.iter().enumerate() {
            out.push_str(id);
            for values in self.columns.values() {
                let _ = write!(out, ",{:.6}", values[row]);
            }
            out.push('\n');
        }
        out
    }

    /// Write the CSV form to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Parse a table previously written by [`ScoreTable::to_csv_string`].
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<ScoreTable> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?
            .clone();
        if headers.get(0) != Some("region_id") {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "first column must be region_id".into(),
            });
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut region_ids = Vec::new();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for record in csv.records() {
            let record = record.map_err(|e| Error::csv_row(&e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != names.len() + 1 {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("expected {} fields, got {}", names.len() + 1, record.len()),
                });
            }
            region_ids.push(record[0].to_owned());
            for (k, field) in record.iter().skip(1).enumerate() {
                let value: f64 = field.parse().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("{:?} is not a number", field),
                })?;
                columns[k].push(value);
            }
        }
        let mut table = ScoreTable::new(region_ids);
        for (name, values) in names.into_iter().zip(columns) {
            table.insert(name, values)?;
        }
        Ok(table)
    }

    /// Load a table from a CSV file.
    pub fn from_csv_file(path: &Path) -> Result<ScoreTable> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ScoreTable::from_csv_reader(std::io::BufReader::new(file))
    }
}

/// Selection of covariates and mixing weights, as stored in JSON config
/// files (`{"variables": [...], "weights": [...]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub variables: Vec<Variable>,
    pub weights: Vec<f64>,
}

impl ScoreConfig {
    /// Config mixing the given variables with the given weights.
    pub fn new(variables: Vec<Variable>, weights: Vec<f64>) -> Result<Self> {
        let config = ScoreConfig { variables, weights };
        config.validate()?;
        Ok(config)
    }

    /// Check arity, uniqueness, non-negativity, and the sum-to-one rule.
    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::TooFewValues { needed: 1, got: 0 });
        }
        if self.variables.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                left: self.variables.len(),
                right: self.weights.len(),
            });
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].contains(v) {
                return Err(Error::InvalidWeights(format!("variable {v:?} listed twice")));
            }
        }
        if self.weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidWeights("weights must be non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > crate::optimize::WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Weights in `(vaccination, density, income)` order, zero when a
    /// variable is not part of the config.
    pub fn full_weights(&self) -> (f64, f64, f64) {
        let mut w = (0.0, 0.0, 0.0);
        for (v, &weight) in self.variables.iter().zip(&self.weights) {
            match v {
                Variable::Vaccination => w.0 = weight,
                Variable::Density => w.1 = weight,
                Variable::Income => w.2 = weight,
            }
        }
        w
    }

    /// Parse and validate a JSON config.
    pub fn from_json(json: &str) -> Result<Self> {
        let config: ScoreConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    /// Serialize to JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Percentiles for all five dataset columns, one column each.
///
/// Covariates use their risk direction (vaccination and income inverted);
/// outcomes are always direct. Missing income is pinned to percentile `0`.
pub fn percentile_table(dataset: &Dataset) -> Result<PercentileTable> {
    let n = dataset.len();
    let no_missing = vec![false; n];
    let (income, income_missing) = dataset.median_incomes();

    let mut columns = IndexMap::new();
    columns.insert(
        "vaccination".to_owned(),
        percentile_ranks(&dataset.vacc_rates(), RiskDirection::Inverted, &no_missing)?,
    );
    columns.insert(
        "density".to_owned(),
        percentile_ranks(&dataset.pop_densities(), RiskDirection::Direct, &no_missing)?,
    );
    columns.insert(
        "income".to_owned(),
        percentile_ranks(&income, RiskDirection::Inverted, &income_missing)?,
    );
    columns.insert(
        "positive".to_owned(),
        percentile_ranks(&dataset.positive_rates(), RiskDirection::Direct, &no_missing)?,
    );
    columns.insert(
        "death".to_owned(),
        percentile_ranks(&dataset.death_rates(), RiskDirection::Direct, &no_missing)?,
    );
    Ok(PercentileTable { region_ids: dataset.region_ids(), columns })
}

/// The seven composite covariate scores `gs1`..`gs7`.
///
/// `gs1`, `gs2`, `gs3` are `10^p` of the vaccination, density, and income
/// percentiles; the composites are arithmetic means *of the score columns*
/// (`gs4 = (gs1 + gs2) / 2` and so on), so the composition identities hold
/// to the last bit.
pub fn geo_scores(dataset: &Dataset) -> Result<ScoreTable> {
    let pct = percentile_table(dataset)?;
    let single = |name: &str| -> Result<Vec<f64>> {
        pct.column(name)?.iter().map(|&p| exp_score(p)).collect()
    };
    let gs1 = single("vaccination")?;
    let gs2 = single("density")?;
    let gs3 = single("income")?;

    let pair = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| (x + y) / 2.0).collect()
    };
    let gs4 = pair(&gs1, &gs2);
    let gs5 = pair(&gs1, &gs3);
    let gs6 = pair(&gs2, &gs3);
    let gs7: Vec<f64> =
        gs1.iter().zip(&gs2).zip(&gs3).map(|((&a, &b), &c)| (a + b + c) / 3.0).collect();

    let mut table = ScoreTable::new(dataset.region_ids());
    for (name, values) in GEO_SCORE_COLUMNS.into_iter().zip([gs1, gs2, gs3, gs4, gs5, gs6, gs7]) {
        table.insert(name, values)?;
    }
    Ok(table)
}

/// Outcome scores `pos_score` and `death_score` (`10^p` of the direct
/// outcome percentiles).
pub fn outcome_scores(dataset: &Dataset) -> Result<ScoreTable> {
    let pct = percentile_table(dataset)?;
    let mut table = ScoreTable::new(dataset.region_ids());
    for (name, column) in [(POSITIVE_SCORE, "positive"), (DEATH_SCORE, "death")] {
        let scores: Result<Vec<f64>> = pct.column(column)?.iter().map(|&p| exp_score(p)).collect();
        table.insert(name, scores?)?;
    }
    Ok(table)
}

/// Full score table: `gs1`..`gs7` followed by `pos_score` and `death_score`.
pub fn all_scores(dataset: &Dataset) -> Result<ScoreTable> {
    let mut table = geo_scores(dataset)?;
    table.merge(outcome_scores(dataset)?)?;
    Ok(table)
}

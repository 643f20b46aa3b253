//! Canonical dataset schema, CSV loading and validation, synthetic data,
//! and the public-data fetcher.
//!
//! A dataset is a per-region table with exactly one row per region, held in
//! canonical order (ascending numeric region id) so that every downstream
//! artifact — score tables, train/test splits, rendered maps — is
//! deterministic regardless of input row order.

mod fetch;
mod synthetic;

pub use fetch::{fetch_public_data, FetchedFile, Source};
pub use synthetic::{generate_synthetic, generate_synthetic_with_scores};

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// The one and only dataset CSV header, in column order.
pub const DATASET_HEADER: [&str; 6] =
    ["region_id", "vacc_rate", "pop_density", "median_income", "positive_rate", "death_rate"];

/// One region's covariates and outcomes.
///
/// `median_income` is the only field that may be missing; an empty CSV cell
/// maps to `None` and downstream scoring pins the region to the riskiest
/// income percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    /// Digit-string region identifier (ZCTA-style).
    pub region_id: String,
    /// Fully-vaccinated share of the population, in `[0, 1]`.
    pub vacc_rate: f64,
    /// Population per unit area; non-negative.
    pub pop_density: f64,
    /// Median household income; positive when present.
    pub median_income: Option<f64>,
    /// Positive-test rate, in `[0, 1]`.
    pub positive_rate: f64,
    /// Deaths per population unit; non-negative.
    pub death_rate: f64,
}

impl RegionRecord {
    /// Numeric form of the region id; canonical ordering key.
    fn numeric_id(&self) -> Result<u64> {
        self.region_id.parse().map_err(|_| Error::MalformedRow {
            line: 0,
            reason: format!("region_id {:?} is not a digit string", self.region_id),
        })
    }

    /// Check id shape and numeric ranges.
    pub fn validate(&self) -> Result<()> {
        if self.region_id.is_empty() || !self.region_id.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedRow {
                line: 0,
                reason: format!("region_id {:?} is not a digit string", self.region_id),
            });
        }
        self.numeric_id()?;
        let checks: [(&str, f64, bool); 5] = [
            ("vacc_rate", self.vacc_rate, (0.0..=1.0).contains(&self.vacc_rate)),
            ("pop_density", self.pop_density, self.pop_density >= 0.0),
            (
                "median_income",
                self.median_income.unwrap_or(1.0),
                self.median_income.is_none_or(|v| v > 0.0 && v.is_finite()),
            ),
            ("positive_rate", self.positive_rate, (0.0..=1.0).contains(&self.positive_rate)),
            ("death_rate", self.death_rate, self.death_rate >= 0.0),
        ];
        for (field, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::RangeViolation { field: field.into(), value });
            }
        }
        Ok(())
    }
}

/// A validated set of region records in canonical order, plus a provenance
/// note (source path, synthesis parameters) carried for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<RegionRecord>,
    provenance: String,
}

impl Dataset {
    /// Validate, canonically sort, and wrap a set of records.
    ///
    /// Rejects invalid records and duplicate region ids; accepts any input
    /// order and always stores rows sorted by ascending numeric region id.
    pub fn new(records: Vec<RegionRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut records = records;
        for record in &records {
            record.validate()?;
        }
        let mut keyed: Vec<(u64, usize)> = Vec::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            keyed.push((record.numeric_id()?, i));
        }
        keyed.sort();
        for pair in keyed.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::DuplicateRegion(records[pair[1].1].region_id.clone()));
            }
        }
        let order: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
        let mut sorted = Vec::with_capacity(records.len());
        for i in order {
            sorted.push(records[i].clone());
        }
        records = sorted;
        Ok(Dataset { records, provenance: provenance.into() })
    }

    /// Records in canonical order.
    pub fn records(&self) -> &[RegionRecord] {
        &self.records
    }

    /// Number of regions.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when the dataset has no regions.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Where the data came from (file path or synthesis parameters).
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Region ids in canonical order.
    pub fn region_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.region_id.clone()).collect()
    }

    /// Vaccination-rate column.
    pub fn vacc_rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.vacc_rate).collect()
    }

    /// Population-density column.
    pub fn pop_densities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pop_density).collect()
    }

    /// Income column as `(values, missing mask)`; missing entries hold `0`
    /// and are flagged in the mask.
    pub fn median_incomes(&self) -> (Vec<f64>, Vec<bool>) {
        let values = self.records.iter().map(|r| r.median_income.unwrap_or(0.0)).collect();
        let missing = self.records.iter().map(|r| r.median_income.is_none()).collect();
        (values, missing)
    }

    /// Positive-test-rate column.
    pub fn positive_rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.positive_rate).collect()
    }

    /// Death-rate column.
    pub fn death_rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.death_rate).collect()
    }

    /// Ids of regions with missing income, for user-facing warnings.
    pub fn missing_income_regions(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| r.median_income.is_none())
            .map(|r| r.region_id.as_str())
            .collect()
    }
}

/// Parse a dataset from any reader; `provenance` labels the source.
pub fn read_dataset<R: Read>(reader: R, provenance: &str) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers =
        csv.headers().map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?;
    let expected: Vec<&str> = DATASET_HEADER.to_vec();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("header must be {:?}, got {:?}", expected.join(","), got.join(",")),
        });
    }

    let parse_field = |field: &str, name: &str, line: u64| -> Result<f64> {
        field.parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("{name} value {field:?} is not a number"),
        })
    };

    let mut records = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::csv_row(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != DATASET_HEADER.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", DATASET_HEADER.len(), record.len()),
            });
        }
        for (i, name) in DATASET_HEADER.iter().enumerate() {
            // Only median_income may be empty.
            if record[i].is_empty() && *name != "median_income" {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("{name} must not be empty"),
                });
            }
        }
        let median_income = if record[3].is_empty() {
            None
        } else {
            Some(parse_field(&record[3], "median_income", line)?)
        };
        let parsed = RegionRecord {
            region_id: record[0].to_owned(),
            vacc_rate: parse_field(&record[1], "vacc_rate", line)?,
            pop_density: parse_field(&record[2], "pop_density", line)?,
            median_income,
            positive_rate: parse_field(&record[4], "positive_rate", line)?,
            death_rate: parse_field(&record[5], "death_rate", line)?,
        };
        match parsed.validate() {
            // Attach the line number to id-shape failures.
            Err(Error::MalformedRow { reason, .. }) => {
                return Err(Error::MalformedRow { line, reason })
            }
            other => other?,
        }
        records.push(parsed);
    }
    Dataset::new(records, provenance)
}

/// Load a dataset CSV from disk.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), &path.display().to_string())
}

/// Write a dataset in the canonical CSV form.
///
/// Floats use shortest-round-trip formatting, so loading the file back
/// reproduces every record bit for bit; missing income becomes an empty
/// cell.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&DATASET_HEADER.join(","));
    out.push('\n');
    for r in dataset.records() {
        let income = r.median_income.map_or(String::new(), |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.region_id, r.vacc_rate, r.pop_density, income, r.positive_rate, r.death_rate
        ));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Small fixed dataset used across the crate's unit tests.
///
/// Covers distinct covariate orderings, a missing income (region 30003),
/// and ids that exercise canonical numeric sorting.
#[cfg(test)]
pub(crate) fn test_dataset() -> Dataset {
    let row =
        |id: &str, vacc: f64, dens: f64, income: Option<f64>, pos: f64, death: f64| RegionRecord {
            region_id: id.into(),
            vacc_rate: vacc,
            pop_density: dens,
            median_income: income,
            positive_rate: pos,
            death_rate: death,
        };
    Dataset::new(
        vec![
            row("30003", 0.81, 12000.0, None, 0.09, 150.0),
            row("10001", 0.62, 25000.0, Some(41000.0), 0.15, 320.0),
            row("20002", 0.74, 8000.0, Some(92000.0), 0.11, 210.0),
            row("40004", 0.55, 30000.0, Some(38000.0), 0.18, 400.0),
            row("50005", 0.68, 15000.0, Some(60000.0), 0.13, 260.0),
            row("60006", 0.59, 22000.0, Some(45000.0), 0.16, 350.0),
        ],
        "test fixture",
    )
    .unwrap()
}

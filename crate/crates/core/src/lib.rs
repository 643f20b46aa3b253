//! Percentile-based exponential risk scores for geographic regions.
//!
//! The pipeline turns a per-region table of covariates (vaccination rate,
//! population density, median income) and outcomes (positive-test rate,
//! death rate) into risk scores on a fixed `[1, 10]` scale, fits convex
//! weights over the covariate scores against the outcome scores, and renders
//! the result as a choropleth map.
//!
//! Modules follow the pipeline order:
//!
//! * [`ingest`] — dataset schema, CSV loading/validation, synthetic data,
//!   and a best-effort fetcher for the public NYC per-ZCTA files.
//! * [`scoring`] — percentile ranks (risk-direction aware) and the
//!   exponential score transform.
//! * [`optimize`] — weight-simplex grid search, L1 subgradient descent,
//!   and an ordinary-least-squares baseline.
//! * [`render`] — geometry join, SVG choropleth, and GeoJSON export.

pub mod error;
pub mod ingest;
pub mod optimize;
pub mod render;
pub mod scoring;

pub use error::{Error, Result};
pub use ingest::{Dataset, RegionRecord};
pub use optimize::WeightVector;
pub use scoring::ScoreTable;

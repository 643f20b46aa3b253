//! Weight fitting: grid search, L1 subgradient descent, and an OLS
//! baseline, all over the covariate scores `gs1`..`gs3`.
//!
//! A candidate predictor is `α·gs1 + β·gs2 + γ·gs3` with `(α, β, γ)` on the
//! probability simplex; fitting minimizes the mean absolute error of that
//! mix against an outcome score column.

mod descent;
mod grid;
mod ols;

pub use descent::{
    fit_subgradient, residual_subgradient, DescentOptions, FitResult, StopReason, TracePoint,
};
pub use grid::{grid_search, grid_search_with, GridCell, GridResult, GridSummary, ObjectiveKind};
pub use ols::{fit_ols, mix_as_ols, OlsResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::scoring::{ScoreTable, DEATH_SCORE, POSITIVE_SCORE};

/// How far from exactly one a weight sum may stray.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A point on the probability simplex: three non-negative weights that sum
/// to one (within [`WEIGHT_SUM_TOL`]).
///
/// Construction is validating, so any `WeightVector` in circulation is a
/// legal mixing rule. Fields are ordered `(alpha, beta, gamma)` for the
/// vaccination, density, and income scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct WeightVector {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

/// Serde-side mirror of [`WeightVector`] without the simplex guarantee.
#[derive(Serialize, Deserialize)]
struct RawWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TryFrom<RawWeights> for WeightVector {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        WeightVector::new(raw.alpha, raw.beta, raw.gamma)
    }
}

impl From<WeightVector> for RawWeights {
    fn from(w: WeightVector) -> Self {
        RawWeights { alpha: w.alpha, beta: w.beta, gamma: w.gamma }
    }
}

impl WeightVector {
    /// Validating constructor: each weight in `[0, 1]`, sum within
    /// [`WEIGHT_SUM_TOL`] of one.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, w) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidWeights(format!("{name} = {w} is outside [0, 1]")));
            }
        }
        let sum = alpha + beta + gamma;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(WeightVector { alpha, beta, gamma })
    }

    /// Construct from the two free coordinates; `gamma` absorbs the rest.
    pub fn from_alpha_beta(alpha: f64, beta: f64) -> Result<Self> {
        WeightVector::new(alpha, beta, 1.0 - alpha - beta)
    }

    /// The equal-weights center of the simplex.
    pub fn center() -> Self {
        WeightVector { alpha: 1.0 / 3.0, beta: 1.0 / 3.0, gamma: 1.0 / 3.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when any weight sits on the simplex boundary.
    pub fn on_boundary(&self) -> bool {
        self.alpha == 0.0 || self.beta == 0.0 || self.gamma <= 0.0
    }
}

/// One region's covariate scores and outcome score, the unit the fitters
/// consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    /// Vaccination score (`gs1`).
    pub vacc: f64,
    /// Density score (`gs2`).
    pub dens: f64,
    /// Income score (`gs3`).
    pub income: f64,
    /// Outcome score the mix should reproduce.
    pub target: f64,
}

/// Which outcome column(s) an objective is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Positive,
    Death,
    /// Average of the positive and death objectives.
    Both,
}

impl Target {
    /// Outcome columns this target reads.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Target::Positive => &[POSITIVE_SCORE],
            Target::Death => &[DEATH_SCORE],
            Target::Both => &[POSITIVE_SCORE, DEATH_SCORE],
        }
    }
}

/// Mean absolute error between two equal-length sequences.
pub fn mean_abs_error(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: observed.len() });
    }
    if predicted.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let sum: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

/// Largest absolute error between two equal-length sequences.
pub fn max_abs_error(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: observed.len() });
    }
    if predicted.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    Ok(predicted.iter().zip(observed).map(|(p, o)| (p - o).abs()).fold(0.0, f64::max))
}

/// The mixed predictor `α·gs1 + β·gs2 + γ·gs3`, one value per region.
///
/// A convex combination of columns in `[1, 10]` stays in `[1, 10]`.
pub fn mix_scores(table: &ScoreTable, weights: &WeightVector) -> Result<Vec<f64>> {
    let gs1 = table.column("gs1")?;
    let gs2 = table.column("gs2")?;
    let gs3 = table.column("gs3")?;
    Ok((0..gs1.len())
        .map(|i| weights.alpha * gs1[i] + weights.beta * gs2[i] + weights.gamma * gs3[i])
        .collect())
}

/// Mean absolute error of the mixed predictor against the target's outcome
/// column(s); `Both` averages the two per-column errors.
pub fn objective(table: &ScoreTable, target: Target, weights: &WeightVector) -> Result<f64> {
    let mixed = mix_scores(table, weights)?;
    let columns = target.columns();
    let mut total = 0.0;
    for name in columns {
        total += mean_abs_error(&mixed, table.column(name)?)?;
    }
    Ok(total / columns.len() as f64)
}

/// Rows of `(gs1, gs2, gs3, target)` pulled out of a score table.
pub fn score_rows(table: &ScoreTable, target_column: &str) -> Result<Vec<ScoreRow>> {
    let gs1 = table.column("gs1")?;
    let gs2 = table.column("gs2")?;
    let gs3 = table.column("gs3")?;
    let target = table.column(target_column)?;
    Ok((0..gs1.len())
        .map(|i| ScoreRow { vacc: gs1[i], dens: gs2[i], income: gs3[i], target: target[i] })
        .collect())
}

/// Alternating train/test split over canonical row order: even indices
/// train, odd indices test.
///
/// Because datasets are always held in canonical region order, the split is
/// a pure function of the region ids — re-serializing or shuffling the
/// input does not move any region between halves.
pub fn alternating_split(dataset: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    alternating_indices(dataset.len())
}

/// The even/odd index split underlying [`alternating_split`].
pub fn alternating_indices(n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::TooFewValues { needed: 2, got: n });
    }
    Ok(((0..n).step_by(2).collect(), (1..n).step_by(2).collect()))
}

/// Select the rows at `indices`.
pub fn select_rows(rows: &[ScoreRow], indices: &[usize]) -> Vec<ScoreRow> {
    indices.iter().map(|&i| rows[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::test_dataset;
    use crate::scoring::all_scores;

    #[test]
    fn weight_vector_validates_on_construction() {
        assert!(WeightVector::new(0.2, 0.3, 0.5).is_ok());
        assert!(matches!(WeightVector::new(0.5, 0.6, -0.1), Err(Error::InvalidWeights(_))));
        assert!(matches!(WeightVector::new(0.2, 0.3, 0.6), Err(Error::InvalidWeights(_))));
        assert!(matches!(WeightVector::new(f64::NAN, 0.5, 0.5), Err(Error::InvalidWeights(_))));
        // The center's sum is within tolerance even though 1/3 is inexact.
        let center = WeightVector::center();
        assert!((center.alpha() + center.beta() + center.gamma() - 1.0).abs() <= WEIGHT_SUM_TOL);
    }

    #[test]
    fn weight_vector_serde_round_trips_and_validates() {
        let w = WeightVector::new(0.45, 0.0, 0.55).unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"alpha":0.45,"beta":0.0,"gamma":0.55}"#);
        let back: WeightVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
        let bad: std::result::Result<WeightVector, _> =
            serde_json::from_str(r#"{"alpha":0.9,"beta":0.9,"gamma":0.9}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn boundary_detection() {
        assert!(WeightVector::new(0.0, 0.45, 0.55).unwrap().on_boundary());
        assert!(WeightVector::new(0.45, 0.55, 0.0).unwrap().on_boundary());
        assert!(!WeightVector::center().on_boundary());
    }

    #[test]
    fn error_metrics_match_hand_computed_values() {
        let predicted = [1.0, 2.0, 3.0];
        let observed = [1.5, 2.0, 1.0];
        assert_eq!(mean_abs_error(&predicted, &observed).unwrap(), 2.5 / 3.0);
        assert_eq!(max_abs_error(&predicted, &observed).unwrap(), 2.0);
        assert!(mean_abs_error(&predicted, &observed[..2]).is_err());
        assert!(mean_abs_error(&[], &[]).is_err());
    }

    #[test]
    fn mix_is_convex_and_matches_direct_computation() {
        let table = all_scores(&test_dataset()).unwrap();
        let w = WeightVector::new(0.2, 0.5, 0.3).unwrap();
        let mixed = mix_scores(&table, &w).unwrap();
        let gs1 = table.column("gs1").unwrap();
        let gs2 = table.column("gs2").unwrap();
        let gs3 = table.column("gs3").unwrap();
        for i in 0..mixed.len() {
            assert_eq!(mixed[i], 0.2 * gs1[i] + 0.5 * gs2[i] + 0.3 * gs3[i]);
            assert!((1.0..=10.0).contains(&mixed[i]));
        }
    }

    #[test]
    fn objective_for_both_averages_the_two_columns() {
        let table = all_scores(&test_dataset()).unwrap();
        let w = WeightVector::center();
        let pos = objective(&table, Target::Positive, &w).unwrap();
        let death = objective(&table, Target::Death, &w).unwrap();
        let both = objective(&table, Target::Both, &w).unwrap();
        assert!((both - (pos + death) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn alternating_split_is_even_odd_over_canonical_order() {
        let ds = test_dataset();
        let (train, test) = alternating_split(&ds).unwrap();
        assert_eq!(train, vec![0, 2, 4]);
        assert_eq!(test, vec![1, 3, 5]);
        assert!(alternating_indices(1).is_err());
    }
}

//! Ordinary-least-squares baseline over the three covariate scores.
//!
//! Unlike the simplex fitters, the regression has an intercept and
//! unconstrained coefficients; it answers "how well can a linear model do
//! when the convexity constraint is dropped?".

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{ScoreRow, WeightVector};

/// Singular-value ratio below which the design matrix counts as rank
/// deficient.
const RANK_TOL: f64 = 1e-10;

/// Fitted regression `target ≈ intercept + a·gs1 + b·gs2 + c·gs3`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OlsResult {
    pub intercept: f64,
    pub coef_vacc: f64,
    pub coef_dens: f64,
    pub coef_income: f64,
    pub train_mae: f64,
    pub test_mae: f64,
}

impl OlsResult {
    /// Prediction for one row.
    pub fn predict(&self, row: &ScoreRow) -> f64 {
        self.intercept
            + self.coef_vacc * row.vacc
            + self.coef_dens * row.dens
            + self.coef_income * row.income
    }

    /// Mean absolute error over a set of rows.
    pub fn mae(&self, rows: &[ScoreRow]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::TooFewValues { needed: 1, got: 0 });
        }
        let sum: f64 = rows.iter().map(|r| (r.target - self.predict(r)).abs()).sum();
        Ok(sum / rows.len() as f64)
    }
}

/// Least-squares fit of `[1, gs1, gs2, gs3]` against the target, solved via
/// singular value decomposition for numerical robustness.
pub fn fit_ols(train: &[ScoreRow], test: &[ScoreRow]) -> Result<OlsResult> {
    if train.len() < 5 {
        return Err(Error::TooFewValues { needed: 5, got: train.len() });
    }
    if test.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }

    let design = DMatrix::from_fn(train.len(), 4, |r, c| match c {
        0 => 1.0,
        1 => train[r].vacc,
        2 => train[r].dens,
        _ => train[r].income,
    });
    let targets = DVector::from_fn(train.len(), |r, _| train[r].target);

    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min / s_max).is_finite() || s_min / s_max < RANK_TOL {
        return Err(Error::RankDeficient);
    }
    let coefficients = svd.solve(&targets, 0.0).map_err(|_| Error::RankDeficient)?;

    let mut result = OlsResult {
        intercept: coefficients[(0, 0)],
        coef_vacc: coefficients[(1, 0)],
        coef_dens: coefficients[(2, 0)],
        coef_income: coefficients[(3, 0)],
        train_mae: 0.0,
        test_mae: 0.0,
    };
    result.train_mae = result.mae(train)?;
    result.test_mae = result.mae(test)?;
    Ok(result)
}

/// Convenience: the simplex mix `(α, β, γ)` expressed as an [`OlsResult`]
/// with zero intercept, for side-by-side error reporting.
pub fn mix_as_ols(
    weights: &WeightVector,
    train: &[ScoreRow],
    test: &[ScoreRow],
) -> Result<OlsResult> {
    let mut result = OlsResult {
        intercept: 0.0,
        coef_vacc: weights.alpha(),
        coef_dens: weights.beta(),
        coef_income: weights.gamma(),
        train_mae: 0.0,
        test_mae: 0.0,
    };
    result.train_mae = result.mae(train)?;
    result.test_mae = result.mae(test)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::generate_synthetic_with_scores;
    use crate::optimize::{score_rows, WeightVector};
    use crate::scoring::POSITIVE_SCORE;

    fn synthetic_rows(n: usize, noise: f64, seed: u64) -> Vec<ScoreRow> {
        let w = WeightVector::new(0.3, 0.3, 0.4).unwrap();
        let (_, table) = generate_synthetic_with_scores(n, &w, noise, seed).unwrap();
        score_rows(&table, POSITIVE_SCORE).unwrap()
    }

    #[test]
    fn recovers_an_exact_linear_relationship() {
        let mut rows = synthetic_rows(60, 0.0, 8);
        for row in &mut rows {
            row.target = 0.25 + 0.5 * row.vacc - 0.1 * row.dens + 0.35 * row.income;
        }
        let fit = fit_ols(&rows, &rows).unwrap();
        assert!((fit.intercept - 0.25).abs() < 1e-8, "{fit:?}");
        assert!((fit.coef_vacc - 0.5).abs() < 1e-8);
        assert!((fit.coef_dens + 0.1).abs() < 1e-8);
        assert!((fit.coef_income - 0.35).abs() < 1e-8);
        assert!(fit.train_mae < 1e-9);
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let rows = synthetic_rows(90, 0.8, 15);
        let fit = fit_ols(&rows, &rows).unwrap();
        let mut sums = [0.0f64; 4];
        for row in &rows {
            let residual = row.target - fit.predict(row);
            sums[0] += residual;
            sums[1] += residual * row.vacc;
            sums[2] += residual * row.dens;
            sums[3] += residual * row.income;
        }
        for (i, sum) in sums.iter().enumerate() {
            assert!(sum.abs() < 1e-8 * rows.len() as f64, "column {i}: {sum}");
        }
    }

    #[test]
    fn constant_column_is_rank_deficient() {
        let mut rows = synthetic_rows(40, 0.2, 3);
        for row in &mut rows {
            row.dens = 4.0; // collinear with the intercept
        }
        assert!(matches!(fit_ols(&rows, &rows), Err(Error::RankDeficient)));
    }

    #[test]
    fn needs_at_least_five_training_rows() {
        let rows = synthetic_rows(10, 0.1, 2);
        assert!(matches!(fit_ols(&rows[..4], &rows), Err(Error::TooFewValues { needed: 5, .. })));
    }

    #[test]
    fn mix_as_ols_mirrors_the_simplex_mix() {
        let rows = synthetic_rows(30, 0.0, 9);
        let w = WeightVector::new(0.3, 0.3, 0.4).unwrap();
        let as_ols = mix_as_ols(&w, &rows, &rows).unwrap();
        // The generator built the target as exactly this mix.
        assert!(as_ols.train_mae < 1e-12);
    }
}

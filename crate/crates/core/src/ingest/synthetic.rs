//! Seeded synthetic datasets with known ground-truth weights.
//!
//! The generator draws covariates uniformly, computes their percentile
//! scores, and mixes them with the requested weights to produce outcome
//! *scores*. Raw outcome rates are monotone re-encodings of those scores,
//! so the raw dataset and the score table tell the same story in different
//! units.
//!
//! Recovering the true weights *exactly* is only meaningful in score space:
//! re-ranking a mixture through the percentile transform keeps order but
//! not spacing, which shifts the optimum slightly off the truth. Callers
//! that need exact recovery (tests, grid-search demonstrations) should use
//! [`generate_synthetic_with_scores`] and fit against its outcome columns,
//! which are exact convex combinations of the covariate scores when
//! `noise_sd` is zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::optimize::{mix_scores, WeightVector};
use crate::scoring::{
    exp_score, percentile_ranks, RiskDirection, ScoreTable, DEATH_SCORE, GEO_SCORE_COLUMNS,
    POSITIVE_SCORE, SCORE_MAX, SCORE_MIN,
};

use super::{Dataset, RegionRecord};

/// Synthetic dataset of `n_regions` rows whose outcomes follow
/// `true_weights` plus optional Gaussian noise. Deterministic in `seed`.
pub fn generate_synthetic(
    n_regions: usize,
    true_weights: &WeightVector,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    Ok(generate_synthetic_with_scores(n_regions, true_weights, noise_sd, seed)?.0)
}

/// Like [`generate_synthetic`], but also returns the score table the
/// outcomes were built from.
///
/// The table holds `gs1`..`gs7` plus `pos_score` and `death_score`; with
/// `noise_sd = 0` the outcome columns equal
/// `α·gs1 + β·gs2 + γ·gs3` bit for bit, so the true weights are the exact
/// optimum of the L1 objective on this table.
pub fn generate_synthetic_with_scores(
    n_regions: usize,
    true_weights: &WeightVector,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, ScoreTable)> {
    if n_regions < 2 {
        return Err(Error::TooFewValues { needed: 2, got: n_regions });
    }
    if !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(Error::RangeViolation { field: "noise_sd".into(), value: noise_sd });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One column at a time, so the draw order (and thus the dataset) is a
    // stable function of the seed alone.
    let vacc: Vec<f64> = (0..n_regions).map(|_| rng.random_range(0.02..0.98)).collect();
    let density: Vec<f64> = (0..n_regions).map(|_| rng.random_range(50.0..50_000.0)).collect();
    let income: Vec<f64> = (0..n_regions).map(|_| rng.random_range(20_000.0..150_000.0)).collect();

    let no_missing = vec![false; n_regions];
    let score_of = |values: &[f64], direction: RiskDirection| -> Result<Vec<f64>> {
        percentile_ranks(values, direction, &no_missing)?.into_iter().map(exp_score).collect()
    };
    let gs1 = score_of(&vacc, RiskDirection::Inverted)?;
    let gs2 = score_of(&density, RiskDirection::Direct)?;
    let gs3 = score_of(&income, RiskDirection::Inverted)?;

    let region_ids: Vec<String> = (0..n_regions).map(|i| format!("{:05}", 10_001 + i)).collect();
    let mut table = ScoreTable::new(region_ids.clone());
    let pair = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| (x + y) / 2.0).collect()
    };
    let gs7: Vec<f64> =
        gs1.iter().zip(&gs2).zip(&gs3).map(|((&a, &b), &c)| (a + b + c) / 3.0).collect();
    let composites = [
        gs1.clone(),
        gs2.clone(),
        gs3.clone(),
        pair(&gs1, &gs2),
        pair(&gs1, &gs3),
        pair(&gs2, &gs3),
        gs7,
    ];
    for (name, values) in GEO_SCORE_COLUMNS.into_iter().zip(composites) {
        table.insert(name, values)?;
    }

    // Outcome scores: the exact mixture, plus optional clamped noise.
    let mixture = mix_scores(&table, true_weights)?;
    let noisy = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        if noise_sd > 0.0 {
            let normal = Normal::new(0.0, noise_sd).expect("validated noise_sd");
            mixture.iter().map(|&m| (m + normal.sample(rng)).clamp(SCORE_MIN, SCORE_MAX)).collect()
        } else {
            mixture.clone()
        }
    };
    let pos_score = noisy(&mut rng);
    let death_score = noisy(&mut rng);
    table.insert(POSITIVE_SCORE, pos_score.clone())?;
    table.insert(DEATH_SCORE, death_score.clone())?;

    // Monotone raw encodings keep the outcome *order* identical to the
    // score order, so re-scoring the raw dataset ranks outcomes the same
    // way the table does.
    let records: Vec<RegionRecord> = (0..n_regions)
        .map(|i| RegionRecord {
            region_id: region_ids[i].clone(),
            vacc_rate: vacc[i],
            pop_density: density[i],
            median_income: Some(income[i]),
            positive_rate: (pos_score[i] - 1.0) / 9.0,
            death_rate: (death_score[i] - 1.0) * 60.0,
        })
        .collect();
    let provenance = format!(
        "synthetic(n={n_regions}, alpha={}, beta={}, gamma={}, noise_sd={noise_sd}, seed={seed})",
        true_weights.alpha(),
        true_weights.beta(),
        true_weights.gamma()
    );
    let dataset = Dataset::new(records, provenance)?;
    Ok((dataset, table))
}

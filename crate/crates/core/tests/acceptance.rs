//! Acceptance suite: one test per shipping criterion, each printing a
//! `[PASS]`/`[FAIL]` line (visible with `--nocapture`).
//!
//! Criterion 10 needs a real NYC data snapshot and is gated on the
//! `GEORISK_NYC_DATA` environment variable; without it the test prints
//! `[SKIP]` and asserts nothing.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use georisk::ingest::{generate_synthetic, generate_synthetic_with_scores, load_dataset};
use georisk::optimize::{
    alternating_indices, fit_ols, fit_subgradient, grid_search, objective, residual_subgradient,
    score_rows, select_rows, DescentOptions, ScoreRow, Target,
};
use georisk::render::{join_geometries, render_svg_string, ChoroplethSpec, RegionGeometry};
use georisk::scoring::{all_scores, POSITIVE_SCORE};
use georisk::{Dataset, ScoreTable, WeightVector};

/// Run one acceptance criterion, printing a single pass/fail line.
fn criterion<F>(number: u8, name: &str, run: F)
where
    F: FnOnce(),
{
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(()) => println!("[PASS] criterion {number}: {name}"),
        Err(cause) => {
            println!("[FAIL] criterion {number}: {name}");
            resume_unwind(cause);
        }
    }
}

/// Strictly interior weight vector, margin 0.05 from every face.
fn interior_weights(rng: &mut ChaCha8Rng) -> WeightVector {
    loop {
        let alpha = rng.random_range(0.05..0.90);
        let beta = rng.random_range(0.05..0.90);
        if alpha + beta < 0.93 {
            return WeightVector::from_alpha_beta(alpha, beta).unwrap();
        }
    }
}

/// L1 objective over explicit rows; independent of the library's own
/// `mean_abs_error`, so descent and grid results are checked against a
/// second arithmetic path.
fn l1_mae(rows: &[ScoreRow], alpha: f64, beta: f64) -> f64 {
    let gamma = 1.0 - alpha - beta;
    let total: f64 = rows
        .iter()
        .map(|r| (alpha * r.vacc + beta * r.dens + gamma * r.income - r.target).abs())
        .sum();
    total / rows.len() as f64
}

/// Minimum of `l1_mae` over the step-0.05 grid (gamma >= step).
fn grid_minimum(rows: &[ScoreRow], divisions: usize) -> f64 {
    let m = divisions as f64;
    let mut best = f64::INFINITY;
    for i in 0..=divisions {
        for j in 0..=divisions {
            if i + j < divisions {
                best = best.min(l1_mae(rows, i as f64 / m, j as f64 / m));
            }
        }
    }
    best
}

fn train_test_rows(table: &ScoreTable, column: &str) -> (Vec<ScoreRow>, Vec<ScoreRow>) {
    let rows = score_rows(table, column).unwrap();
    let (train_idx, test_idx) = alternating_indices(rows.len()).unwrap();
    (select_rows(&rows, &train_idx), select_rows(&rows, &test_idx))
}

#[test]
fn criterion_01_exponential_transform_matches_published_values() {
    criterion(1, "exponential transform reproduces worked values", || {
        for (percentile, published) in [(0.9, 7.9), (0.4, 2.5), (0.5, 3.2)] {
            let score = georisk::scoring::exp_score(percentile).unwrap();
            assert!(
                (score - published).abs() < 0.05,
                "10^{percentile} = {score}, published {published}"
            );
        }
    });
}

#[test]
fn criterion_02_composition_identities_hold_on_random_datasets() {
    criterion(2, "gs4..gs7 are exact means of gs1..gs3 on 1,000 datasets", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_02);
        for _ in 0..1_000 {
            let n = rng.random_range(10..=300);
            let weights = interior_weights(&mut rng);
            let dataset = generate_synthetic(n, &weights, 0.0, rng.random()).unwrap();
            let table = all_scores(&dataset).unwrap();

            let gs: Vec<&[f64]> =
                (1..=7).map(|k| table.column(&format!("gs{k}")).unwrap()).collect();
            for (row, &g1) in gs[0].iter().enumerate() {
                let (g2, g3) = (gs[1][row], gs[2][row]);
                assert!((gs[3][row] - (g1 + g2) / 2.0).abs() <= 1e-12);
                assert!((gs[4][row] - (g1 + g3) / 2.0).abs() <= 1e-12);
                assert!((gs[5][row] - (g2 + g3) / 2.0).abs() <= 1e-12);
                assert!((gs[6][row] - (g1 + g2 + g3) / 3.0).abs() <= 1e-12);
            }
            for name in table.column_names().map(String::from).collect::<Vec<_>>() {
                for &value in table.column(&name).unwrap() {
                    assert!((1.0 - 1e-9..=10.0 + 1e-9).contains(&value), "{name} = {value}");
                }
            }
        }
    });
}

#[test]
fn criterion_03_scores_are_scale_invariant_bit_for_bit() {
    criterion(3, "rescaling raw covariates leaves every score bit-identical", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_03);
        for _ in 0..200 {
            let n = rng.random_range(10..=120);
            let weights = interior_weights(&mut rng);
            let dataset = generate_synthetic(n, &weights, 0.3, rng.random()).unwrap();
            let base = all_scores(&dataset).unwrap();

            // Positive factors that keep each column inside its valid range:
            // vaccination rates must stay within [0, 1].
            let max_vacc = dataset.records().iter().map(|r| r.vacc_rate).fold(0.0_f64, f64::max);
            let c_vacc = rng.random_range(0.1..1.0 / max_vacc);
            let c_dens = rng.random_range(0.1..1000.0);
            let c_income = rng.random_range(0.1..1000.0);

            let scaled_records = dataset
                .records()
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.vacc_rate *= c_vacc;
                    r.pop_density *= c_dens;
                    r.median_income = r.median_income.map(|v| v * c_income);
                    r
                })
                .collect();
            let scaled = Dataset::new(scaled_records, "rescaled").unwrap();
            let rescored = all_scores(&scaled).unwrap();

            for name in base.column_names().map(String::from).collect::<Vec<_>>() {
                let before = base.column(&name).unwrap();
                let after = rescored.column(&name).unwrap();
                for row in 0..n {
                    assert_eq!(
                        before[row].to_bits(),
                        after[row].to_bits(),
                        "{name} row {row}: {} vs {}",
                        before[row],
                        after[row]
                    );
                }
            }
        }
    });
}

#[test]
fn criterion_04_grid_search_recovers_generating_weights_exactly() {
    criterion(4, "zero-noise grid search returns the generating weights", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_04);
        let divisions = 20_usize;
        let m = divisions as f64;

        // The published optimum first, then 19 random on-grid vectors
        // (gamma >= one step, matching the feasible region).
        let mut cells = vec![(9_usize, 0_usize)];
        while cells.len() < 20 {
            let i = rng.random_range(0..=divisions - 1);
            let j = rng.random_range(0..=divisions - 1 - i);
            cells.push((i, j));
        }

        for (i, j) in cells {
            let truth = WeightVector::from_alpha_beta(i as f64 / m, j as f64 / m).unwrap();
            let n = rng.random_range(40..=160);
            let (_, table) = generate_synthetic_with_scores(n, &truth, 0.0, rng.random()).unwrap();
            let result = grid_search(&table, Target::Positive, 0.05).unwrap();
            let found = result.argmin();
            assert_eq!(
                found.alpha().to_bits(),
                truth.alpha().to_bits(),
                "alpha: found {} truth {}",
                found.alpha(),
                truth.alpha()
            );
            assert_eq!(
                found.beta().to_bits(),
                truth.beta().to_bits(),
                "beta: found {} truth {}",
                found.beta(),
                truth.beta()
            );
            assert!(result.objective() < 1e-9, "objective {}", result.objective());
        }
    });
}

#[test]
fn criterion_05_descent_matches_grid_optimum_within_tolerance() {
    criterion(5, "subgradient descent reaches the grid optimum + 0.05", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_05);
        for _ in 0..20 {
            // Keep the optimum well inside the simplex: descent stops the
            // first time a weight crosses a face, so a noisy optimum
            // sitting on a face would end some runs far from the minimum.
            let truth = loop {
                let alpha = rng.random_range(0.2..0.5);
                let beta = rng.random_range(0.2..0.5);
                if alpha + beta <= 0.78 {
                    break WeightVector::from_alpha_beta(alpha, beta).unwrap();
                }
            };
            let (_, table) = generate_synthetic_with_scores(80, &truth, 0.5, rng.random()).unwrap();
            let (train, test) = train_test_rows(&table, POSITIVE_SCORE);
            let oracle = grid_minimum(&train, 20);

            for _ in 0..5 {
                let options = DescentOptions {
                    start: interior_weights(&mut rng),
                    step_size: 2e-3,
                    max_iters: 2_500,
                    ..DescentOptions::default()
                };
                let fit = fit_subgradient(&train, &test, &options).unwrap();
                assert!(
                    fit.train_mae <= oracle + 0.05,
                    "train MAE {} vs grid optimum {oracle}",
                    fit.train_mae
                );
                for point in &fit.trace {
                    let gamma = 1.0 - point.alpha - point.beta;
                    assert!(
                        point.alpha >= -1e-12 && point.beta >= -1e-12 && gamma >= -1e-12,
                        "iteration {} left the simplex: ({}, {}, {gamma})",
                        point.iteration,
                        point.alpha,
                        point.beta
                    );
                }
            }
        }
    });
}

#[test]
fn criterion_06_subgradient_matches_finite_differences() {
    criterion(6, "subgradient equals central finite differences off the kinks", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_06);
        let truth = WeightVector::from_alpha_beta(0.4, 0.25).unwrap();
        let (_, table) = generate_synthetic_with_scores(60, &truth, 0.3, 17).unwrap();
        let rows = score_rows(&table, POSITIVE_SCORE).unwrap();

        let sum_abs = |alpha: f64, beta: f64| l1_mae(&rows, alpha, beta) * rows.len() as f64;
        let h = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let w = interior_weights(&mut rng);
            let (alpha, beta, gamma) = (w.alpha(), w.beta(), w.gamma());
            let margin = rows
                .iter()
                .map(|r| (alpha * r.vacc + beta * r.dens + gamma * r.income - r.target).abs())
                .fold(f64::INFINITY, f64::min);
            if margin < 1e-4 {
                continue; // too close to a kink for finite differences
            }
            checked += 1;

            let (mut grad_a, mut grad_b) = (0.0, 0.0);
            for row in &rows {
                let (ga, gb) = residual_subgradient(row, &w);
                grad_a += ga;
                grad_b += gb;
            }
            let fd_a = (sum_abs(alpha + h, beta) - sum_abs(alpha - h, beta)) / (2.0 * h);
            let fd_b = (sum_abs(alpha, beta + h) - sum_abs(alpha, beta - h)) / (2.0 * h);
            assert!(
                (fd_a - grad_a).abs() <= 1e-5 * grad_a.abs().max(1.0),
                "d/dalpha: finite diff {fd_a}, subgradient {grad_a}"
            );
            assert!(
                (fd_b - grad_b).abs() <= 1e-5 * grad_b.abs().max(1.0),
                "d/dbeta: finite diff {fd_b}, subgradient {grad_b}"
            );
        }
    });
}

#[test]
fn criterion_07_final_error_is_insensitive_to_the_start() {
    criterion(7, "five starts land on train MAEs within 0.02 of each other", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_07);
        let truth = WeightVector::from_alpha_beta(0.4, 0.25).unwrap();
        let (_, table) = generate_synthetic_with_scores(100, &truth, 0.5, 42).unwrap();
        let (train, test) = train_test_rows(&table, POSITIVE_SCORE);

        let mut finals = Vec::new();
        let mut starts = vec![WeightVector::center()];
        starts.extend((0..5).map(|_| interior_weights(&mut rng)));
        for start in starts {
            let options = DescentOptions {
                start,
                step_size: 1e-3,
                max_iters: 4_000,
                ..DescentOptions::default()
            };
            let fit = fit_subgradient(&train, &test, &options).unwrap();
            finals.push(fit.train_mae);
        }
        let lowest = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let highest = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            highest - lowest <= 0.02,
            "train MAEs spread {} > 0.02: {finals:?}",
            highest - lowest
        );
    });
}

#[test]
fn criterion_08_ols_baseline_is_a_valid_least_squares_fit() {
    criterion(8, "OLS recovers exact coefficients and agrees with descent", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_08);
        let truth = WeightVector::from_alpha_beta(0.3, 0.3).unwrap();
        let (_, table) = generate_synthetic_with_scores(80, &truth, 0.4, 23).unwrap();

        // Exact linear target: coefficients must come back to 1e-8.
        let mut rows = score_rows(&table, POSITIVE_SCORE).unwrap();
        let linear = [0.7, 1.3, -0.8, 0.4];
        for row in &mut rows {
            row.target =
                linear[0] + linear[1] * row.vacc + linear[2] * row.dens + linear[3] * row.income;
        }
        let (train_idx, test_idx) = alternating_indices(rows.len()).unwrap();
        let (train, test) = (select_rows(&rows, &train_idx), select_rows(&rows, &test_idx));
        let exact = fit_ols(&train, &test).unwrap();
        for (found, wanted) in [
            (exact.intercept, linear[0]),
            (exact.coef_vacc, linear[1]),
            (exact.coef_dens, linear[2]),
            (exact.coef_income, linear[3]),
        ] {
            assert!((found - wanted).abs() < 1e-8, "coefficient {found} vs {wanted}");
        }

        // Normal equations: on the noisy target, train residuals are
        // orthogonal to every design column (scores are bounded by 10, so
        // the dot products are compared against 1e-8 * n * 10).
        let (noisy_train, noisy_test) = train_test_rows(&table, POSITIVE_SCORE);
        let fitted = fit_ols(&noisy_train, &noisy_test).unwrap();
        let n = noisy_train.len() as f64;
        let mut dots = [0.0_f64; 4];
        for row in &noisy_train {
            let residual = row.target - fitted.predict(row);
            dots[0] += residual;
            dots[1] += residual * row.vacc;
            dots[2] += residual * row.dens;
            dots[3] += residual * row.income;
        }
        for (k, dot) in dots.iter().enumerate() {
            assert!(dot.abs() <= 1e-8 * n * 10.0, "column {k}: residual dot {dot}");
        }

        // On noise-free mixture data both fitters should reach (near) zero
        // test error, agreeing within 1e-3.
        let (_, clean) = generate_synthetic_with_scores(80, &truth, 0.0, rng.random()).unwrap();
        let (clean_train, clean_test) = train_test_rows(&clean, POSITIVE_SCORE);
        let ols = fit_ols(&clean_train, &clean_test).unwrap();
        let descent = fit_subgradient(
            &clean_train,
            &clean_test,
            &DescentOptions { step_size: 1e-4, max_iters: 50_000, ..DescentOptions::default() },
        )
        .unwrap();
        assert!(
            (ols.test_mae - descent.test_mae).abs() <= 1e-3,
            "test MAE: ols {} vs descent {}",
            ols.test_mae,
            descent.test_mae
        );
    });
}

#[test]
fn criterion_09_objective_is_convex_and_grid_slices_are_single_valleys() {
    criterion(9, "L1 objective is convex on lines; grid slices have one valley", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed_09);
        let datasets = [
            (WeightVector::from_alpha_beta(0.45, 0.0).unwrap(), 0.0),
            (WeightVector::from_alpha_beta(0.4, 0.25).unwrap(), 0.5),
            (WeightVector::from_alpha_beta(0.2, 0.5).unwrap(), 1.0),
        ];
        for (truth, noise_sd) in datasets {
            let (_, table) =
                generate_synthetic_with_scores(120, &truth, noise_sd, rng.random()).unwrap();

            // Midpoint convexity along random chords of the simplex.
            for _ in 0..50 {
                let a = interior_weights(&mut rng);
                let b = interior_weights(&mut rng);
                let values: Vec<f64> = (0..=20)
                    .map(|k| {
                        let t = k as f64 / 20.0;
                        let w = WeightVector::new(
                            (1.0 - t) * a.alpha() + t * b.alpha(),
                            (1.0 - t) * a.beta() + t * b.beta(),
                            (1.0 - t) * a.gamma() + t * b.gamma(),
                        )
                        .unwrap();
                        objective(&table, Target::Positive, &w).unwrap()
                    })
                    .collect();
                for k in 1..values.len() - 1 {
                    assert!(
                        values[k] <= (values[k - 1] + values[k + 1]) / 2.0 + 1e-9,
                        "objective is non-convex at sample {k}: {values:?}"
                    );
                }
            }

            // Every grid row and column falls then rises: no feasible cell
            // is a strict local maximum between two smaller neighbours.
            let grid = grid_search(&table, Target::Positive, 0.05).unwrap();
            let mut slices = Vec::new();
            for k in 0..=grid.divisions() {
                slices.push(grid.row_objectives(k));
                slices.push(grid.col_objectives(k));
            }
            for slice in slices {
                for k in 1..slice.len().saturating_sub(1) {
                    let bump = slice[k] > slice[k - 1] + 1e-9 && slice[k] > slice[k + 1] + 1e-9;
                    assert!(!bump, "interior local maximum at {k}: {slice:?}");
                }
            }
        }
    });
}

#[test]
fn criterion_10_nyc_snapshot_reproduction() {
    let Some(path) = std::env::var_os("GEORISK_NYC_DATA") else {
        println!(
            "[SKIP] criterion 10: NYC reproduction (set GEORISK_NYC_DATA to a \
             six-column snapshot CSV to enable)"
        );
        return;
    };
    criterion(10, "NYC snapshot reproduces the published fit", || {
        let dataset = load_dataset(std::path::Path::new(&path)).unwrap();
        let table = all_scores(&dataset).unwrap();

        let grid = grid_search(&table, Target::Positive, 0.05).unwrap();
        let found = grid.argmin();
        assert!(
            (found.alpha() - 0.45).abs() <= 0.05 + 1e-12
                && (found.beta() - 0.0).abs() <= 0.05 + 1e-12,
            "argmin ({}, {}, {}) not within one step of (0.45, 0, 0.55)",
            found.alpha(),
            found.beta(),
            found.gamma()
        );

        // Published minimum errors: descent about 1.94 / 1.71 and OLS about
        // 1.87 / 1.75 on the positivity / death targets.
        for (column, descent_published, ols_published) in
            [(POSITIVE_SCORE, 1.94, 1.87), (georisk::scoring::DEATH_SCORE, 1.71, 1.75)]
        {
            let (train, test) = train_test_rows(&table, column);
            let fit = fit_subgradient(&train, &test, &DescentOptions::default()).unwrap();
            let ols = fit_ols(&train, &test).unwrap();
            assert!(
                (fit.test_mae - descent_published).abs() <= 0.15,
                "{column}: descent test MAE {} vs published {descent_published}",
                fit.test_mae
            );
            assert!(
                (ols.test_mae - ols_published).abs() <= 0.15,
                "{column}: OLS test MAE {} vs published {ols_published}",
                ols.test_mae
            );
            if column == POSITIVE_SCORE {
                assert!(ols.coef_dens < 0.0, "density coefficient {}", ols.coef_dens);
            }
        }
    });
}

#[test]
fn criterion_11_choropleth_rendering_is_stable_and_exact() {
    criterion(11, "SVG output matches the golden file and the exact ramp", || {
        let square = |id: &str, x: f64| RegionGeometry {
            region_id: id.to_string(),
            rings: vec![vec![(x, 40.0), (x + 1.0, 40.0), (x + 1.0, 41.0), (x, 41.0), (x, 40.0)]],
        };
        let geometries =
            vec![square("00001", -74.0), square("00002", -73.0), square("00003", -72.0)];
        let mut table = ScoreTable::new(vec!["00001".into(), "00002".into(), "00003".into()]);
        table.insert("gs1", vec![1.0, 5.5, 10.0]).unwrap();

        let joined = join_geometries(&table, &geometries);
        assert!(joined.unmatched_scores.is_empty() && joined.unmatched_geometries.is_empty());

        let spec = ChoroplethSpec::new("gs1");
        let first = render_svg_string(&joined.features, &spec).unwrap();
        let second = render_svg_string(&joined.features, &spec).unwrap();
        assert_eq!(first, second, "two renders differ");

        let golden = include_str!("golden/choropleth.svg");
        assert_eq!(first, golden, "render drifted from the golden file");

        roxmltree::Document::parse(&first).expect("well-formed XML");

        // The score-10 region must carry color_high exactly, not a rounded
        // interpolation of it.
        assert_eq!(spec.color_for(Some(10.0)), spec.color_high);
        assert!(
            first.contains(r##"id="region-00003" fill="#d7191c""##),
            "score-10 region is not filled with color_high: {first}"
        );
    });
}

//! Subcommand implementations and the user/internal error split.

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use serde_json::json;

use georisk::ingest::{self, Dataset};
use georisk::optimize::{self, DescentOptions, FitResult, Target};
use georisk::render::{self, ChoroplethSpec, Rgb};
use georisk::scoring::{self, ScoreTable, DEATH_SCORE, POSITIVE_SCORE};
use georisk::WeightVector;

/// A failure with the exit code it maps to.
pub struct CliError {
    pub exit: u8,
    pub message: String,
}

impl CliError {
    fn user(message: impl Into<String>) -> Self {
        CliError { exit: 1, message: message.into() }
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        CliError { exit: 2, message: format!("internal: {message}") }
    }
}

impl From<georisk::Error> for CliError {
    fn from(e: georisk::Error) -> Self {
        CliError::user(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

/// Outcome selector shared by `grid` and `fit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Positive,
    Death,
    Both,
}

impl TargetArg {
    fn to_target(self) -> Target {
        match self {
            TargetArg::Positive => Target::Positive,
            TargetArg::Death => Target::Death,
            TargetArg::Both => Target::Both,
        }
    }

    fn label(self) -> &'static str {
        match self {
            TargetArg::Positive => "positive",
            TargetArg::Death => "death",
            TargetArg::Both => "both",
        }
    }

    /// The (label, outcome column) pairs `fit` runs over.
    fn fit_columns(self) -> Vec<(&'static str, &'static str)> {
        match self {
            TargetArg::Positive => vec![("positive", POSITIVE_SCORE)],
            TargetArg::Death => vec![("death", DEATH_SCORE)],
            TargetArg::Both => {
                vec![("positive", POSITIVE_SCORE), ("death", DEATH_SCORE)]
            }
        }
    }
}

/// Remote data source for `fetch`.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    /// NYC Health per-MODZCTA totals and vaccination coverage.
    Nyc,
}

#[derive(Subcommand)]
pub enum Command {
    /// Download the public per-region source files plus a manifest.json.
    Fetch {
        /// Data source to pull from.
        #[arg(value_enum)]
        source: SourceArg,
        /// Directory the downloaded files and manifest.json land in.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compute every score column for a raw dataset CSV.
    Score {
        /// Raw dataset CSV (canonical six-column schema).
        #[arg(long)]
        input: PathBuf,
        /// Score table CSV to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Exhaustive weight search on a regular simplex grid.
    Grid {
        /// Raw dataset CSV or score table CSV (detected by header).
        #[arg(long)]
        input: PathBuf,
        /// Outcome the mixed score is fitted against.
        #[arg(long, value_enum, default_value_t = TargetArg::Both)]
        target: TargetArg,
        /// Grid spacing; must divide 1 into a whole number of cells.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Grid CSV to write; the JSON summary lands next to it.
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit weights by L1 subgradient descent, with an OLS baseline.
    Fit {
        /// Raw dataset CSV or score table CSV (detected by header).
        #[arg(long)]
        input: PathBuf,
        /// Outcome(s) to fit against.
        #[arg(long, value_enum, default_value_t = TargetArg::Both)]
        target: TargetArg,
        /// Starting alpha (vaccination weight).
        #[arg(long, default_value_t = 1.0 / 3.0)]
        alpha0: f64,
        /// Starting beta (density weight).
        #[arg(long, default_value_t = 1.0 / 3.0)]
        beta0: f64,
        /// Fixed descent step size.
        #[arg(long, default_value_t = 0.001)]
        step_size: f64,
        /// Stop once an applied update falls below this.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Iteration budget.
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
        /// Keep every m-th trace point (the start and stop always stay).
        #[arg(long, default_value_t = 1)]
        trace_every: usize,
        /// Fit report JSON to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Error table: every score column against both outcome scores.
    Eval {
        /// Raw dataset CSV or score table CSV (detected by header).
        #[arg(long)]
        input: PathBuf,
        /// CSV to write; omit to print a table to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a score column as an SVG choropleth plus a scored GeoJSON.
    Render {
        /// Raw dataset CSV or score table CSV (detected by header).
        #[arg(long)]
        input: PathBuf,
        /// Region geometry (GeoJSON FeatureCollection).
        #[arg(long)]
        geo: PathBuf,
        /// Property holding the region id; default tries modzcta, then
        /// ZCTA5CE10.
        #[arg(long)]
        geo_id_prop: Option<String>,
        /// Score column that drives the fill color.
        #[arg(long)]
        column: String,
        /// SVG file to write.
        #[arg(long)]
        output: PathBuf,
        /// Scored GeoJSON to write (default: the SVG path with .geojson).
        #[arg(long)]
        geojson_out: Option<PathBuf>,
        /// Fill at score 1.
        #[arg(long, default_value = "#2c7bb6")]
        color_low: Rgb,
        /// Fill at score 10.
        #[arg(long, default_value = "#d7191c")]
        color_high: Rgb,
        /// Fill for regions missing the score column.
        #[arg(long, default_value = "#bdbdbd")]
        color_missing: Rgb,
    },
    /// Generate a seeded synthetic dataset with known true weights.
    Synth {
        /// Number of regions.
        #[arg(long, default_value_t = 200)]
        regions: usize,
        /// True alpha (vaccination weight).
        #[arg(long, default_value_t = 1.0 / 3.0)]
        alpha: f64,
        /// True beta (density weight); gamma absorbs the remainder.
        #[arg(long, default_value_t = 1.0 / 3.0)]
        beta: f64,
        /// Gaussian noise added to the outcome scores.
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Raw dataset CSV to write.
        #[arg(long)]
        output: PathBuf,
        /// Also write the generating score table here; fitting against its
        /// outcome columns recovers the true weights exactly at zero noise.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

impl Command {
    pub fn run(self) -> CliResult {
        match self {
            Command::Fetch { source, out_dir } => cmd_fetch(source, &out_dir),
            Command::Score { input, output } => cmd_score(&input, &output),
            Command::Grid { input, target, step, output } => {
                cmd_grid(&input, target, step, &output)
            }
            Command::Fit {
                input,
                target,
                alpha0,
                beta0,
                step_size,
                tol,
                max_iters,
                trace_every,
                output,
            } => cmd_fit(
                &input,
                target,
                alpha0,
                beta0,
                step_size,
                tol,
                max_iters,
                trace_every,
                &output,
            ),
            Command::Eval { input, output } => cmd_eval(&input, output.as_deref()),
            Command::Render {
                input,
                geo,
                geo_id_prop,
                column,
                output,
                geojson_out,
                color_low,
                color_high,
                color_missing,
            } => cmd_render(
                &input,
                &geo,
                geo_id_prop,
                column,
                &output,
                geojson_out,
                color_low,
                color_high,
                color_missing,
            ),
            Command::Synth { regions, alpha, beta, noise_sd, seed, output, scores } => {
                cmd_synth(regions, alpha, beta, noise_sd, seed, &output, scores.as_deref())
            }
        }
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn warn_missing_income(dataset: &Dataset) {
    let missing = dataset.missing_income_regions();
    if missing.is_empty() {
        return;
    }
    let mut shown: Vec<&str> = missing.iter().copied().take(8).collect();
    if missing.len() > shown.len() {
        shown.push("...");
    }
    eprintln!(
        "warning: {} region(s) have no median_income and score riskiest on income: {}",
        missing.len(),
        shown.join(", ")
    );
}

/// Load `--input` as either a raw dataset (canonical header) or an
/// already-computed score table, telling them apart by the header line.
fn load_table(input: &Path) -> Result<ScoreTable, CliError> {
    let file =
        fs::File::open(input).map_err(|e| CliError::user(format!("{}: {e}", input.display())))?;
    let mut first = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| CliError::user(format!("{}: {e}", input.display())))?;
    if first.trim_end() == ingest::DATASET_HEADER.join(",") {
        let dataset = ingest::load_dataset(input)?;
        warn_missing_income(&dataset);
        log::info!("scored raw dataset {} ({} regions)", input.display(), dataset.len());
        Ok(scoring::all_scores(&dataset)?)
    } else {
        log::info!("loading score table {}", input.display());
        Ok(ScoreTable::from_csv_file(input)?)
    }
}

fn cmd_fetch(source: SourceArg, out_dir: &Path) -> CliResult {
    let source = match source {
        SourceArg::Nyc => ingest::Source::Nyc,
    };
    let files = ingest::fetch_public_data(source, out_dir)?;
    for file in &files {
        println!("fetched {} ({} bytes, sha256 {})", file.path.display(), file.bytes, file.sha256);
    }
    println!("manifest: {}", out_dir.join("manifest.json").display());
    Ok(())
}

fn cmd_score(input: &Path, output: &Path) -> CliResult {
    let dataset = ingest::load_dataset(input)?;
    warn_missing_income(&dataset);
    let table = scoring::all_scores(&dataset)?;
    table.write_csv(output)?;
    println!(
        "wrote {} regions x {} score columns to {}",
        table.len(),
        table.column_names().count(),
        output.display()
    );
    Ok(())
}

fn cmd_grid(input: &Path, target: TargetArg, step: f64, output: &Path) -> CliResult {
    let table = load_table(input)?;
    let result = optimize::grid_search(&table, target.to_target(), step)?;
    write_text(output, &result.to_csv_string())?;

    let summary = result.summary();
    let mut summary_json = serde_json::to_value(&summary).map_err(CliError::internal)?;
    let object = summary_json.as_object_mut().expect("summary serializes to an object");
    object.insert("input".into(), json!(input.display().to_string()));
    object.insert("target".into(), json!(target.label()));
    let summary_path = output.with_extension("json");
    let pretty = serde_json::to_string_pretty(&summary_json).map_err(CliError::internal)?;
    write_text(&summary_path, &pretty)?;

    let argmin = result.argmin();
    println!("alpha={:.2} beta={:.2} gamma={:.2}", argmin.alpha(), argmin.beta(), argmin.gamma());
    println!("objective={:.6} (target {}, step {})", result.objective(), target.label(), step);
    println!("grid: {}", output.display());
    println!("summary: {}", summary_path.display());
    Ok(())
}

/// Thin a trace to every `every`-th point, always keeping the stop point.
fn thin_trace(fit: &FitResult, every: usize) -> FitResult {
    let last = fit.trace.last().map(|p| p.iteration);
    let mut thinned = fit.clone();
    thinned.trace = fit
        .trace
        .iter()
        .filter(|p| p.iteration % every == 0 || Some(p.iteration) == last)
        .copied()
        .collect();
    thinned
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    input: &Path,
    target: TargetArg,
    alpha0: f64,
    beta0: f64,
    step_size: f64,
    tol: f64,
    max_iters: usize,
    trace_every: usize,
    output: &Path,
) -> CliResult {
    if trace_every == 0 {
        return Err(CliError::user("--trace-every must be at least 1"));
    }
    let start = WeightVector::from_alpha_beta(alpha0, beta0)
        .map_err(|e| CliError::user(format!("start point: {e}")))?;
    let table = load_table(input)?;
    let (train_idx, test_idx) = optimize::alternating_indices(table.len())?;

    let mut targets = serde_json::Map::new();
    for (label, column) in target.fit_columns() {
        let rows = optimize::score_rows(&table, column)?;
        let train = optimize::select_rows(&rows, &train_idx);
        let test = optimize::select_rows(&rows, &test_idx);

        let options = DescentOptions { start, step_size, tol, max_iters };
        let fit = optimize::fit_subgradient(&train, &test, &options)?;
        let ols = optimize::fit_ols(&train, &test)?;

        let weights = fit.weights;
        println!(
            "{label} descent: alpha={:.4} beta={:.4} gamma={:.4} train_mae={:.4} test_mae={:.4} stop={} iters={}",
            weights.alpha(),
            weights.beta(),
            weights.gamma(),
            fit.train_mae,
            fit.test_mae,
            match fit.stop_reason {
                optimize::StopReason::Converged => "converged",
                optimize::StopReason::Boundary => "boundary",
                optimize::StopReason::MaxIters => "max_iters",
            },
            fit.iterations,
        );
        println!(
            "{label} ols:     intercept={:.4} coef_vacc={:.4} coef_dens={:.4} coef_income={:.4} train_mae={:.4} test_mae={:.4}",
            ols.intercept, ols.coef_vacc, ols.coef_dens, ols.coef_income, ols.train_mae, ols.test_mae,
        );

        let entry = json!({
            "descent": thin_trace(&fit, trace_every),
            "ols": ols,
        });
        targets.insert(label.to_owned(), entry);
    }

    let report = json!({
        "input": input.display().to_string(),
        "alpha0": alpha0,
        "beta0": beta0,
        "step_size": step_size,
        "tol": tol,
        "max_iters": max_iters,
        "trace_every": trace_every,
        "train_regions": train_idx.len(),
        "test_regions": test_idx.len(),
        "targets": targets,
    });
    let pretty = serde_json::to_string_pretty(&report).map_err(CliError::internal)?;
    write_text(output, &pretty)?;
    println!("fit report: {}", output.display());
    Ok(())
}

fn cmd_eval(input: &Path, output: Option<&Path>) -> CliResult {
    let table = load_table(input)?;
    for required in [POSITIVE_SCORE, DEATH_SCORE] {
        if table.get(required).is_none() {
            return Err(CliError::user(format!(
                "input has no {required} column; run `georisk score` on the raw dataset first"
            )));
        }
    }
    let outcomes = [POSITIVE_SCORE, DEATH_SCORE];
    let predictors: Vec<&str> =
        table.column_names().filter(|name| !outcomes.contains(name)).collect();

    let mut csv = String::from("score,target,mean_abs_error,max_abs_error\n");
    let mut lines = vec![format!(
        "{:<12} {:<12} {:>14} {:>14}",
        "score", "target", "mean_abs_error", "max_abs_error"
    )];
    for predictor in &predictors {
        for outcome in outcomes {
            let predicted = table.column(predictor)?;
            let observed = table.column(outcome)?;
            let mean = optimize::mean_abs_error(predicted, observed)?;
            let max = optimize::max_abs_error(predicted, observed)?;
            csv.push_str(&format!("{predictor},{outcome},{mean:.6},{max:.6}\n"));
            lines.push(format!("{predictor:<12} {outcome:<12} {mean:>14.6} {max:>14.6}"));
        }
    }
    match output {
        Some(path) => {
            write_text(path, &csv)?;
            println!("eval table: {}", path.display());
        }
        None => {
            for line in lines {
                println!("{line}");
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_render(
    input: &Path,
    geo: &Path,
    geo_id_prop: Option<String>,
    column: String,
    output: &Path,
    geojson_out: Option<PathBuf>,
    color_low: Rgb,
    color_high: Rgb,
    color_missing: Rgb,
) -> CliResult {
    let table = load_table(input)?;
    if table.get(&column).is_none() {
        let available: Vec<&str> = table.column_names().collect();
        return Err(CliError::user(format!(
            "no score column named {column:?}; available: {}",
            available.join(", ")
        )));
    }
    let candidates = match geo_id_prop {
        Some(prop) => vec![prop],
        None => vec!["modzcta".to_owned(), "ZCTA5CE10".to_owned()],
    };
    let geometries = render::read_geojson(geo, &candidates)?;
    let joined = render::join_geometries(&table, &geometries);
    if joined.features.is_empty() {
        return Err(CliError::user(
            "no region ids matched between the score table and the geometry",
        ));
    }
    report_unmatched("score rows", &joined.unmatched_scores);
    report_unmatched("geometries", &joined.unmatched_geometries);

    let spec = ChoroplethSpec { score_column: column, color_low, color_high, color_missing };
    render::render_svg(&joined.features, &spec, output)?;
    let geojson_path = geojson_out.unwrap_or_else(|| output.with_extension("geojson"));
    render::write_geojson(&joined.features, &geojson_path)?;
    println!(
        "rendered {} regions ({} column) to {}",
        joined.features.len(),
        spec.score_column,
        output.display()
    );
    println!("geojson: {}", geojson_path.display());
    Ok(())
}

fn report_unmatched(what: &str, ids: &[String]) {
    if ids.is_empty() {
        return;
    }
    let mut shown: Vec<&str> = ids.iter().map(String::as_str).take(5).collect();
    if ids.len() > shown.len() {
        shown.push("...");
    }
    eprintln!("warning: {} {what} had no partner: {}", ids.len(), shown.join(", "));
}

fn cmd_synth(
    regions: usize,
    alpha: f64,
    beta: f64,
    noise_sd: f64,
    seed: u64,
    output: &Path,
    scores: Option<&Path>,
) -> CliResult {
    let weights = WeightVector::from_alpha_beta(alpha, beta)
        .map_err(|e| CliError::user(format!("true weights: {e}")))?;
    let (dataset, table) =
        ingest::generate_synthetic_with_scores(regions, &weights, noise_sd, seed)?;
    ingest::write_dataset(&dataset, output)?;
    println!(
        "wrote {regions} synthetic regions to {} (alpha={} beta={} gamma={} noise_sd={noise_sd} seed={seed})",
        output.display(),
        weights.alpha(),
        weights.beta(),
        weights.gamma(),
    );
    if let Some(path) = scores {
        table.write_csv(path)?;
        println!("score table: {}", path.display());
    }
    Ok(())
}

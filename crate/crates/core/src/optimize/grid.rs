//! Exhaustive search over a regular lattice on the weight simplex.
//!
//! The lattice has `m = 1/step` divisions per axis; a cell `(i, j)` carries
//! weights `(i/m, j/m, (m-i-j)/m)`, computed as exact quotients so that
//! on-grid optima compare bit-for-bit with weight literals. Cells with
//! `gamma < step` are kept in the output but marked infeasible: the income
//! score must retain positive weight.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scoring::ScoreTable;

use super::{mean_abs_error, mix_scores, Target, WeightVector};

/// Which error the grid minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Mean absolute error (the default everywhere).
    MeanAbs,
    /// Root-mean-square error; strictly convex along grid lines, used by
    /// the valley-shape tests.
    RootMeanSq,
}

/// One lattice cell: its weights, its objective (when feasible), and the
/// feasibility flag.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `None` exactly when the cell is infeasible.
    pub objective: Option<f64>,
    pub feasible: bool,
}

/// A feasible cell in the JSON summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryCell {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub objective: f64,
}

/// JSON-facing digest of a grid search: the argmin plus the best cell of
/// every row (fixed `alpha`) and every column (fixed `beta`).
#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub step: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub objective: f64,
    /// True when the argmin touches the feasible region's edge (a zero
    /// weight or the smallest admissible `gamma`).
    pub argmin_on_edge: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub row_minima: Vec<SummaryCell>,
    pub col_minima: Vec<SummaryCell>,
}

/// Full result of a grid search.
#[derive(Debug, Clone)]
pub struct GridResult {
    step: f64,
    divisions: usize,
    cells: Vec<GridCell>,
    argmin: WeightVector,
    objective: f64,
}

impl GridResult {
    /// The step the grid was built with.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Divisions per axis (`1/step`).
    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// All cells in row-major order (`alpha` outer, `beta` inner).
    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    /// Cell at alpha index `i`, beta index `j`.
    pub fn cell(&self, i: usize, j: usize) -> &GridCell {
        &self.cells[i * (self.divisions + 1) + j]
    }

    /// The best feasible weights; ties resolve to the lexicographically
    /// smallest `(alpha, beta)`.
    pub fn argmin(&self) -> WeightVector {
        self.argmin
    }

    /// Objective at the argmin.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Feasible objectives along row `i` (fixed alpha), in beta order.
    pub fn row_objectives(&self, i: usize) -> Vec<f64> {
        (0..=self.divisions).filter_map(|j| self.cell(i, j).objective).collect()
    }

    /// Feasible objectives along column `j` (fixed beta), in alpha order.
    pub fn col_objectives(&self, j: usize) -> Vec<f64> {
        (0..=self.divisions).filter_map(|i| self.cell(i, j).objective).collect()
    }

    /// CSV form: `alpha,beta,gamma,objective,feasible`, one row per cell in
    /// row-major order; infeasible cells have an empty objective.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("alpha,beta,gamma,objective,feasible\n");
        for cell in &self.cells {
            let objective = cell.objective.map_or(String::new(), |o| o.to_string());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                cell.alpha, cell.beta, cell.gamma, objective, cell.feasible
            ));
        }
        out
    }

    /// Build the JSON-facing summary.
    pub fn summary(&self) -> GridSummary {
        let m = self.divisions;
        let best_of = |cells: Vec<&GridCell>| -> Option<SummaryCell> {
            let mut best: Option<&GridCell> = None;
            for cell in cells {
                if let Some(obj) = cell.objective {
                    if best.and_then(|b| b.objective).is_none_or(|cur| obj < cur) {
                        best = Some(cell);
                    }
                }
            }
            best.map(|c| SummaryCell {
                alpha: c.alpha,
                beta: c.beta,
                gamma: c.gamma,
                objective: c.objective.expect("feasible cell has objective"),
            })
        };
        let row_minima: Vec<SummaryCell> =
            (0..=m).filter_map(|i| best_of((0..=m).map(|j| self.cell(i, j)).collect())).collect();
        let col_minima: Vec<SummaryCell> =
            (0..=m).filter_map(|j| best_of((0..=m).map(|i| self.cell(i, j)).collect())).collect();
        let on_edge = self.argmin.alpha() == 0.0
            || self.argmin.beta() == 0.0
            || self.argmin.gamma() <= self.step + WEIGHT_EDGE_SLOP;
        GridSummary {
            step: self.step,
            alpha: self.argmin.alpha(),
            beta: self.argmin.beta(),
            gamma: self.argmin.gamma(),
            objective: self.objective,
            argmin_on_edge: on_edge,
            note: on_edge.then(|| {
                "argmin lies on the edge of the feasible region (gamma > 0 is enforced)".to_owned()
            }),
            row_minima,
            col_minima,
        }
    }
}

/// Numeric slop when testing whether gamma sits at its smallest admissible
/// grid value.
const WEIGHT_EDGE_SLOP: f64 = 1e-12;

/// Validate a step and return the number of divisions `m = 1/step`.
fn divisions_for(step: f64) -> Result<usize> {
    if !step.is_finite() || step <= 0.0 || step > 1.0 {
        return Err(Error::InvalidStep(step));
    }
    let m = (1.0 / step).round();
    if m < 1.0 || (m * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidStep(step));
    }
    Ok(m as usize)
}

/// Grid search minimizing mean absolute error.
pub fn grid_search(table: &ScoreTable, target: Target, step: f64) -> Result<GridResult> {
    grid_search_with(table, target, step, ObjectiveKind::MeanAbs)
}

/// Grid search with an explicit objective kind.
pub fn grid_search_with(
    table: &ScoreTable,
    target: Target,
    step: f64,
    kind: ObjectiveKind,
) -> Result<GridResult> {
    let m = divisions_for(step)?;
    let divisor = m as f64;

    let evaluate = |w: &WeightVector| -> Result<f64> {
        let mixed = mix_scores(table, w)?;
        let columns = target.columns();
        let mut total = 0.0;
        for name in columns {
            let observed = table.column(name)?;
            total += match kind {
                ObjectiveKind::MeanAbs => mean_abs_error(&mixed, observed)?,
                ObjectiveKind::RootMeanSq => {
                    if mixed.is_empty() {
                        return Err(Error::TooFewValues { needed: 1, got: 0 });
                    }
                    let mse: f64 =
                        mixed.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum::<f64>()
                            / mixed.len() as f64;
                    mse.sqrt()
                }
            };
        }
        Ok(total / columns.len() as f64)
    };

    let mut cells = Vec::with_capacity((m + 1) * (m + 1));
    let mut best: Option<(f64, WeightVector)> = None;
    for i in 0..=m {
        for j in 0..=m {
            let alpha = i as f64 / divisor;
            let beta = j as f64 / divisor;
            // Feasibility in exact integer arithmetic: gamma >= step.
            let feasible = i + j < m;
            let gamma = (m as i64 - i as i64 - j as i64) as f64 / divisor;
            let objective = if feasible {
                let w = WeightVector::new(alpha, beta, gamma)?;
                let value = evaluate(&w)?;
                // Strict `<` keeps the first of any exact tie, which is the
                // lexicographically smallest (alpha, beta) in this scan.
                if best.as_ref().is_none_or(|(cur, _)| value < *cur) {
                    best = Some((value, w));
                }
                Some(value)
            } else {
                None
            };
            cells.push(GridCell { alpha, beta, gamma, objective, feasible });
        }
    }
    let (objective, argmin) = best.ok_or(Error::InvalidStep(step))?;
    Ok(GridResult { step, divisions: m, cells, argmin, objective })
}

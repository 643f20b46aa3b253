//! Fixed-step subgradient descent for the L1 objective on the weight
//! simplex.
//!
//! The objective `R(α, β) = mean |target − (α·gs1 + β·gs2 + γ·gs3)|` with
//! `γ = 1 − α − β` is piecewise linear and convex. Each iteration steps
//! against the mean subgradient over the training rows; a step that would
//! leave the simplex is clamped to the boundary and the fit stops there.
//! With a fixed step size the iterates eventually bounce around the
//! minimum instead of settling, so the objective reached is resolution-
//! limited by `step_size`; callers who need a tighter fit use a smaller
//! step.

use serde::Serialize;

use crate::error::{Error, Result};

use super::{ScoreRow, WeightVector};

/// Why the descent loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Applied update fell below the tolerance.
    Converged,
    /// A step left the simplex and was clamped onto its boundary.
    Boundary,
    /// The iteration budget ran out.
    MaxIters,
}

/// One descent iterate: the free coordinates and the training error there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub alpha: f64,
    pub beta: f64,
    pub train_mae: f64,
}

/// Outcome of a descent run.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub weights: WeightVector,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub train_mae: f64,
    pub test_mae: f64,
    /// Every iterate from the start (iteration 0) to the stop point.
    pub trace: Vec<TracePoint>,
}

/// Tuning knobs for [`fit_subgradient`].
#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Start point; must lie strictly inside the simplex.
    pub start: WeightVector,
    /// Fixed step size applied to the mean subgradient.
    pub step_size: f64,
    /// Stop once `max(|Δα|, |Δβ|)` of an applied update falls below this.
    pub tol: f64,
    /// Iteration budget.
    pub max_iters: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            start: WeightVector::center(),
            step_size: 1e-3,
            tol: 1e-6,
            max_iters: 100_000,
        }
    }
}

/// Subgradient of one row's absolute residual with respect to `(α, β)`.
///
/// With `γ` eliminated, the prediction is
/// `gs3 + α·(gs1 − gs3) + β·(gs2 − gs3)`, so away from the kink the
/// derivative is `±(gs3 − gs1, gs3 − gs2)` depending on the residual sign;
/// at the kink (zero residual) this picks the zero subgradient.
pub fn residual_subgradient(row: &ScoreRow, weights: &WeightVector) -> (f64, f64) {
    row_subgradient(row, weights.alpha(), weights.beta(), weights.gamma())
}

#[inline]
fn row_subgradient(row: &ScoreRow, alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let predicted = alpha * row.vacc + beta * row.dens + gamma * row.income;
    let residual = row.target - predicted;
    if residual > 0.0 {
        (row.income - row.vacc, row.income - row.dens)
    } else if residual < 0.0 {
        (row.vacc - row.income, row.dens - row.income)
    } else {
        (0.0, 0.0)
    }
}

/// Mean absolute error at the free coordinates `(alpha, beta)`.
fn mae_at(rows: &[ScoreRow], alpha: f64, beta: f64) -> f64 {
    let gamma = 1.0 - alpha - beta;
    let sum: f64 = rows
        .iter()
        .map(|r| (r.target - (alpha * r.vacc + beta * r.dens + gamma * r.income)).abs())
        .sum();
    sum / rows.len() as f64
}

/// Minimize the training L1 error by fixed-step subgradient descent.
///
/// Iterates stay on the closed simplex throughout: an update that would
/// leave it is clamped coordinate-wise (rescaling `α + β` back to one when
/// needed) and the run stops with [`StopReason::Boundary`]. The returned
/// trace includes the start and every iterate after it, so `trace.len()`
/// is `iterations + 1`.
pub fn fit_subgradient(
    train: &[ScoreRow],
    test: &[ScoreRow],
    options: &DescentOptions,
) -> Result<FitResult> {
    if train.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    if test.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    if !options.step_size.is_finite() || options.step_size <= 0.0 {
        return Err(Error::RangeViolation { field: "step_size".into(), value: options.step_size });
    }
    if !options.tol.is_finite() || options.tol < 0.0 {
        return Err(Error::RangeViolation { field: "tol".into(), value: options.tol });
    }
    if options.max_iters == 0 {
        return Err(Error::RangeViolation { field: "max_iters".into(), value: 0.0 });
    }
    let start = options.start;
    if start.alpha() <= 0.0 || start.beta() <= 0.0 || start.gamma() <= 0.0 {
        return Err(Error::InvalidStart(format!(
            "({}, {}, {}) is not strictly inside the simplex",
            start.alpha(),
            start.beta(),
            start.gamma()
        )));
    }

    let k = train.len() as f64;
    let mut alpha = start.alpha();
    let mut beta = start.beta();
    let mut trace = Vec::with_capacity(options.max_iters.min(4096) + 1);
    trace.push(TracePoint { iteration: 0, alpha, beta, train_mae: mae_at(train, alpha, beta) });

    let mut stop_reason = StopReason::MaxIters;
    for iteration in 1..=options.max_iters {
        let gamma = 1.0 - alpha - beta;
        let (mut ga, mut gb) = (0.0, 0.0);
        for row in train {
            let (ra, rb) = row_subgradient(row, alpha, beta, gamma);
            ga += ra;
            gb += rb;
        }
        ga /= k;
        gb /= k;
        if !ga.is_finite() || !gb.is_finite() {
            return Err(Error::NonFiniteGradient { iteration });
        }

        let delta_alpha = -options.step_size * ga;
        let delta_beta = -options.step_size * gb;
        let next_alpha = alpha + delta_alpha;
        let next_beta = beta + delta_beta;

        let inside = next_alpha >= 0.0
            && next_beta >= 0.0
            && next_alpha <= 1.0
            && next_beta <= 1.0
            && 1.0 - next_alpha - next_beta >= 0.0;
        if !inside {
            // Clamp onto the simplex boundary and stop there.
            let mut a = next_alpha.clamp(0.0, 1.0);
            let mut b = next_beta.clamp(0.0, 1.0);
            let sum = a + b;
            if sum > 1.0 {
                a /= sum;
                b /= sum;
            }
            alpha = a;
            beta = b;
            trace.push(TracePoint {
                iteration,
                alpha,
                beta,
                train_mae: mae_at(train, alpha, beta),
            });
            stop_reason = StopReason::Boundary;
            break;
        }

        alpha = next_alpha;
        beta = next_beta;
        trace.push(TracePoint { iteration, alpha, beta, train_mae: mae_at(train, alpha, beta) });
        if delta_alpha.abs().max(delta_beta.abs()) < options.tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let last = *trace.last().expect("trace holds at least the start");
    let gamma = (1.0 - alpha - beta).max(0.0);
    let weights = WeightVector::new(alpha, beta, gamma).expect("iterates stay on the simplex");
    Ok(FitResult {
        weights,
        stop_reason,
        iterations: last.iteration,
        train_mae: last.train_mae,
        test_mae: mae_at(test, alpha, beta),
        trace,
    })
}

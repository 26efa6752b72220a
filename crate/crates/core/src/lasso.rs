//! Lasso with an unscaled squared loss:
//!
//! `minimize sum_{i in I} (y_i - x_i^T beta)^2 + lambda * ||beta||_1`
//!
//! over rows `I`, by cyclic coordinate descent. Without the usual `1/2` the
//! soft-threshold level is `lambda / 2`.

use crate::cv::{CvConfig, CvResult, EstimatorFamily, FoldAssignment, FoldStrategy, LambdaGrid};
use crate::error::{Error, Result};
use crate::lattice::LatticeSignal;
use crate::linalg::Matrix;
use crate::numeric::compensated_sum;

/// `n x p` design, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: Matrix,
}

impl DesignMatrix {
    pub fn new(x: Matrix) -> Self {
        DesignMatrix { x }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(DesignMatrix::new(Matrix::from_rows(rows)?))
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.x.col(j)
    }

    /// `X beta` over all rows.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        self.x.matvec(beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub max_sweeps: usize,
    /// Stop when `max |delta beta_j| <= tolerance * (1 + ||beta||_inf)`.
    pub tolerance: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            max_sweeps: 10_000,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    /// `X beta` on every row, observed or not.
    pub fitted: Vec<f64>,
    pub objective: f64,
    pub sweeps: usize,
    /// Columns that vanish on the observed rows; their coefficients stay 0.
    pub zero_columns: Vec<usize>,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn validate(x: &DesignMatrix, y: &[f64], lambda: f64, rows: Option<&[bool]>) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::invalid(format!(
            "response has {} entries, design has {} rows",
            y.len(),
            x.n()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    if let Some(mask) = rows {
        if mask.len() != x.n() {
            return Err(Error::invalid("row mask length differs from design rows"));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid("row subset I is empty"));
        }
    }
    Ok(())
}

/// Restricted objective `sum_{i in I} (y_i - x_i^T beta)^2 + lambda ||beta||_1`.
pub fn objective(x: &DesignMatrix, y: &[f64], beta: &[f64], lambda: f64, rows: Option<&[bool]>) -> f64 {
    let fitted = x.apply(beta);
    let sse = compensated_sum(
        (0..x.n())
            .filter(|&i| rows.is_none_or(|m| m[i]))
            .map(|i| (y[i] - fitted[i]).powi(2)),
    );
    sse + lambda * compensated_sum(beta.iter().map(|b| b.abs()))
}

pub fn lasso_solve(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    rows: Option<&[bool]>,
    config: &LassoConfig,
) -> Result<LassoFit> {
    lasso_solve_from(x, y, lambda, rows, config, &vec![0.0; x.p()])
}

/// As [`lasso_solve`], starting coordinate descent from `start`.
pub fn lasso_solve_from(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    rows: Option<&[bool]>,
    config: &LassoConfig,
    start: &[f64],
) -> Result<LassoFit> {
    validate(x, y, lambda, rows)?;
    if start.len() != x.p() {
        return Err(Error::invalid("warm start has the wrong length"));
    }
    let observed: Vec<usize> = (0..x.n()).filter(|&i| rows.is_none_or(|m| m[i])).collect();
    let norms: Vec<f64> = (0..x.p())
        .map(|j| {
            let c = x.column(j);
            compensated_sum(observed.iter().map(|&i| c[i] * c[i]))
        })
        .collect();
    let zero_columns: Vec<usize> = (0..x.p()).filter(|&j| norms[j] == 0.0).collect();
    let mut beta = start.to_vec();
    for &j in &zero_columns {
        beta[j] = 0.0;
    }

    let half = lambda / 2.0;
    let mut trace = vec![objective(x, y, &beta, lambda, rows)];
    let mut sweeps = 0;
    loop {
        if sweeps == config.max_sweeps {
            return Err(Error::NonConvergence {
                solver: "lasso coordinate descent",
                iterations: sweeps,
                residual: f64::NAN,
            });
        }
        sweeps += 1;
        // fresh residuals each sweep keep drift out of the updates
        let fitted = x.apply(&beta);
        let mut resid: Vec<f64> = observed.iter().map(|&i| y[i] - fitted[i]).collect();
        let mut max_change: f64 = 0.0;
        for j in 0..x.p() {
            let z = norms[j];
            if z == 0.0 {
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            let rho = observed.iter().zip(&resid).map(|(&i, r)| col[i] * r).sum::<f64>() + z * old;
            let new = soft(rho, half) / z;
            if new != old {
                let delta = new - old;
                for (r, &i) in resid.iter_mut().zip(&observed) {
                    *r -= col[i] * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let value = objective(x, y, &beta, lambda, rows);
        trace.push(value);
        let scale = 1.0 + beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if max_change <= config.tolerance * scale {
            return Ok(LassoFit {
                fitted: x.apply(&beta),
                beta,
                objective: value,
                sweeps,
                zero_columns,
                trace,
            });
        }
    }
}

/// Fits along `grid` in ascending order, each warm-started from the last.
pub fn lasso_path(
    x: &DesignMatrix,
    y: &[f64],
    grid: &LambdaGrid,
    rows: Option<&[bool]>,
    config: &LassoConfig,
) -> Result<Vec<LassoFit>> {
    let mut start = vec![0.0; x.p()];
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid.values() {
        let fit = lasso_solve_from(x, y, lambda, rows, config, &start).map_err(|e| e.at_lambda(lambda))?;
        start.clone_from(&fit.beta);
        out.push(fit);
    }
    Ok(out)
}

/// Lasso as a CV family over fitted values `X beta`.
#[derive(Debug, Clone, Copy)]
pub struct LassoFamily<'a> {
    pub design: &'a DesignMatrix,
    pub config: LassoConfig,
}

impl LassoFamily<'_> {
    fn rows_outside(folds: &FoldAssignment, fold: usize) -> Vec<bool> {
        folds.membership().iter().map(|&g| g != fold).collect()
    }

    fn fitted_path(&self, y: &LatticeSignal, grid: &LambdaGrid, rows: Option<&[bool]>) -> Result<Vec<LatticeSignal>> {
        lasso_path(self.design, y.values(), grid, rows, &self.config)?
            .into_iter()
            .map(|f| y.with_values(f.fitted))
            .collect()
    }
}

impl EstimatorFamily for LassoFamily<'_> {
    fn full_fit(&self, y: &LatticeSignal, lambda: f64) -> Result<LatticeSignal> {
        y.with_values(lasso_solve(self.design, y.values(), lambda, None, &self.config)?.fitted)
    }

    fn completion_fit(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        lambda: f64,
    ) -> Result<LatticeSignal> {
        let rows = Self::rows_outside(folds, fold);
        y.with_values(lasso_solve(self.design, y.values(), lambda, Some(&rows), &self.config)?.fitted)
    }

    fn full_path(&self, y: &LatticeSignal, grid: &LambdaGrid) -> Result<Vec<LatticeSignal>> {
        self.fitted_path(y, grid, None)
    }

    fn completion_path(
        &self,
        y: &LatticeSignal,
        folds: &FoldAssignment,
        fold: usize,
        grid: &LambdaGrid,
    ) -> Result<Vec<LatticeSignal>> {
        self.fitted_path(y, grid, Some(&Self::rows_outside(folds, fold)))
    }
}

/// Two random row folds; selection happens on fitted values. Returns the
/// coefficients refitted on all rows at the chosen penalty.
pub fn cvlasso(
    x: &DesignMatrix,
    y: &[f64],
    grid: &LambdaGrid,
    seed: u64,
    config: &LassoConfig,
) -> Result<(LassoFit, CvResult)> {
    if y.len() != x.n() {
        return Err(Error::invalid(format!(
            "response has {} entries, design has {} rows",
            y.len(),
            x.n()
        )));
    }
    if x.n() < 4 {
        return Err(Error::invalid(format!("cross-validated lasso needs at least 4 rows, got {}", x.n())));
    }
    let signal = LatticeSignal::from_vec(y.to_vec())?;
    let family = LassoFamily {
        design: x,
        config: *config,
    };
    let result = crate::cv::run_cv(
        &family,
        &signal,
        &CvConfig {
            folds: FoldStrategy::Bernoulli { seed },
            grid: grid.clone(),
        },
    )?;
    let beta = lasso_solve(x, y, result.lambda, None, config).map_err(|e| e.at_lambda(result.lambda))?;
    Ok((beta, result))
}

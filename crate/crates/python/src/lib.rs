//! Python bindings. Signals are plain lists: flat for 1-D, nested rows for
//! square 2-D lattices.

use cvdenoise::cv::{default_max_exponent, CvResult as CoreCvResult};
use cvdenoise::lasso::{DesignMatrix, LassoConfig};
use cvdenoise::linalg::Matrix;
use cvdenoise::simbench::{MethodSpec, Scenario, Suite};
use cvdenoise::tfilter::TfConfig;
use cvdenoise::{dcart, lasso, simbench, svt, tfilter};
use cvdenoise::{Error, LambdaGrid, LatticeShape, LatticeSignal};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: Error) -> PyErr {
    if err.is_usage() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

#[derive(FromPyObject)]
enum SignalArg {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl SignalArg {
    fn into_signal(self) -> cvdenoise::Result<LatticeSignal> {
        match self {
            SignalArg::Flat(v) => LatticeSignal::from_vec(v),
            SignalArg::Rows(rows) => {
                let m = Matrix::from_rows(&rows)?;
                if !m.is_square() {
                    return Err(Error::invalid(format!("expected a square matrix, got {}x{}", m.rows(), m.cols())));
                }
                LatticeSignal::new(LatticeShape::square(m.rows())?, m.into_data())
            }
        }
    }
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i)).collect()
}

/// Flat list for 1-D signals, nested rows for 2-D ones.
fn signal_to_py(py: Python<'_>, s: &LatticeSignal) -> PyResult<Py<PyAny>> {
    if s.shape().dim() == 2 {
        let side = s.shape().side();
        let m = Matrix::new(side, side, s.values().to_vec()).map_err(to_py)?;
        Ok(rows_of(&m).into_pyobject(py)?.into_any().unbind())
    } else {
        Ok(s.values().to_vec().into_pyobject(py)?.into_any().unbind())
    }
}

fn make_grid(grid: Option<Vec<f64>>, total: usize, symmetric: bool) -> cvdenoise::Result<LambdaGrid> {
    match grid {
        Some(values) => LambdaGrid::new(values),
        None => {
            let hi = default_max_exponent(total)? as i32;
            LambdaGrid::powers_of_two_between(if symmetric { -hi } else { 0 }, hi)
        }
    }
}

/// Outcome of a cross-validated fit.
#[pyclass(name = "CvResult", frozen)]
struct PyCvResult {
    #[pyo3(get)]
    fit: Py<PyAny>,
    #[pyo3(get)]
    intermediate: Py<PyAny>,
    #[pyo3(get)]
    lambda_: f64,
    #[pyo3(get)]
    fold_lambdas: Vec<f64>,
    #[pyo3(get)]
    grid: Vec<f64>,
    #[pyo3(get)]
    fold_errors: Vec<Vec<f64>>,
    #[pyo3(get)]
    final_distances: Vec<f64>,
}

#[pymethods]
impl PyCvResult {
    fn __repr__(&self) -> String {
        format!("CvResult(lambda_={}, fold_lambdas={:?})", self.lambda_, self.fold_lambdas)
    }
}

fn wrap(py: Python<'_>, r: CoreCvResult) -> PyResult<PyCvResult> {
    Ok(PyCvResult {
        fit: signal_to_py(py, &r.fit)?,
        intermediate: signal_to_py(py, &r.intermediate)?,
        lambda_: r.lambda,
        fold_lambdas: r.fold_lambdas,
        grid: r.grid.values().to_vec(),
        fold_errors: r.fold_errors,
        final_distances: r.final_distances,
    })
}

/// Cross-validated dyadic CART on a 1-D list or a square 2-D list of rows.
#[pyfunction]
#[pyo3(signature = (y, grid=None, seed=0))]
fn cvdcart(py: Python<'_>, y: SignalArg, grid: Option<Vec<f64>>, seed: u64) -> PyResult<PyCvResult> {
    let r = py
        .detach(|| {
            let y = y.into_signal()?;
            let grid = make_grid(grid, y.len(), false)?;
            dcart::cvdcart(&y, &grid, seed)
        })
        .map_err(to_py)?;
    wrap(py, r)
}

/// Cross-validated trend filtering of the given order.
#[pyfunction]
#[pyo3(signature = (y, order=1, grid=None))]
fn cvtf(py: Python<'_>, y: Vec<f64>, order: usize, grid: Option<Vec<f64>>) -> PyResult<PyCvResult> {
    let r = py
        .detach(|| {
            let y = LatticeSignal::from_vec(y)?;
            let grid = make_grid(grid, y.len(), true)?;
            tfilter::cvtf(&y, &grid, &TfConfig::new(order))
        })
        .map_err(to_py)?;
    wrap(py, r)
}

/// Cross-validated lasso; returns `(coefficients, CvResult)`.
#[pyfunction]
#[pyo3(signature = (x, y, grid=None, seed=0))]
fn cvlasso(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>, grid: Option<Vec<f64>>, seed: u64) -> PyResult<(Vec<f64>, PyCvResult)> {
    let (fit, r) = py
        .detach(|| {
            let x = DesignMatrix::from_rows(&x)?;
            let grid = make_grid(grid, y.len(), false)?;
            lasso::cvlasso(&x, &y, &grid, seed, &LassoConfig::default())
        })
        .map_err(to_py)?;
    Ok((fit.beta, wrap(py, r)?))
}

/// Cross-validated singular value thresholding of a square matrix.
#[pyfunction]
#[pyo3(signature = (y, grid=None, seed=0))]
fn cvsvt(py: Python<'_>, y: Vec<Vec<f64>>, grid: Option<Vec<f64>>, seed: u64) -> PyResult<PyCvResult> {
    let r = py
        .detach(|| {
            let m = Matrix::from_rows(&y)?;
            let grid = make_grid(grid, m.rows() * m.cols(), false)?;
            svt::cvsvt(&m, &grid, seed)
        })
        .map_err(to_py)?;
    wrap(py, r)
}

/// Dyadic CART at one penalty; `observed` restricts the data term.
/// Returns `(fit, objective, leaf_count)`.
#[pyfunction]
#[pyo3(signature = (y, lam, observed=None))]
fn dcart_fit(py: Python<'_>, y: SignalArg, lam: f64, observed: Option<Vec<bool>>) -> PyResult<(Py<PyAny>, f64, usize)> {
    let y = y.into_signal().map_err(to_py)?;
    let fit = match observed {
        Some(mask) => dcart::solve_completion(&y, &mask, lam),
        None => dcart::solve_full(&y, lam),
    }
    .map_err(to_py)?;
    Ok((signal_to_py(py, &fit.fit)?, fit.objective, fit.leaf_count))
}

/// Trend filtering at one penalty; returns `(fit, kkt_residual)`.
#[pyfunction]
#[pyo3(signature = (y, lam, order=1))]
fn tf_fit(y: Vec<f64>, lam: f64, order: usize) -> PyResult<(Vec<f64>, f64)> {
    let fit = tfilter::tf_solve(&y, lam, &TfConfig::new(order)).map_err(to_py)?;
    Ok((fit.fit, fit.kkt_residual))
}

/// Lasso coefficients at one penalty.
#[pyfunction]
#[pyo3(signature = (x, y, lam, observed=None))]
fn lasso_fit(x: Vec<Vec<f64>>, y: Vec<f64>, lam: f64, observed: Option<Vec<bool>>) -> PyResult<Vec<f64>> {
    let x = DesignMatrix::from_rows(&x).map_err(to_py)?;
    let fit = lasso::lasso_solve(&x, &y, lam, observed.as_deref(), &LassoConfig::default()).map_err(to_py)?;
    Ok(fit.beta)
}

/// Singular value thresholding at one penalty; returns `(fit, rank)`.
#[pyfunction]
fn svt_fit(y: Vec<Vec<f64>>, lam: f64) -> PyResult<(Vec<Vec<f64>>, usize)> {
    let m = Matrix::from_rows(&y).map_err(to_py)?;
    let fit = svt::svt(&m, lam).map_err(to_py)?;
    Ok((rows_of(&fit.fit), fit.rank))
}

/// Noise-free simulation signal for `suite` ("dc" or "tf").
#[pyfunction]
fn scenario_signal(py: Python<'_>, suite: &str, scenario: usize, n: usize) -> PyResult<Py<PyAny>> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let s = Scenario::new(suite, scenario, n).and_then(|s| s.signal()).map_err(to_py)?;
    signal_to_py(py, &s)
}

/// Monte Carlo MSE; returns `(mean_mse, std_error, per-replication mses)`.
#[pyfunction]
#[pyo3(signature = (suite, scenario, n, reps=20, seed=0, sigma=1.0, order=1))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo_mse(
    py: Python<'_>,
    suite: &str,
    scenario: usize,
    n: usize,
    reps: usize,
    seed: u64,
    sigma: f64,
    order: usize,
) -> PyResult<(f64, f64, Vec<f64>)> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let r = py
        .detach(|| {
            let scenario = Scenario::new(suite, scenario, n)?;
            simbench::monte_carlo_mse(&MethodSpec::default_for(&scenario, order), &scenario, sigma, reps, seed)
        })
        .map_err(to_py)?;
    Ok((r.mean_mse, r.std_error, r.mses()))
}

#[pymodule(name = "cvdenoise")]
fn cvdenoise_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCvResult>()?;
    m.add_function(wrap_pyfunction!(cvdcart, m)?)?;
    m.add_function(wrap_pyfunction!(cvtf, m)?)?;
    m.add_function(wrap_pyfunction!(cvlasso, m)?)?;
    m.add_function(wrap_pyfunction!(cvsvt, m)?)?;
    m.add_function(wrap_pyfunction!(dcart_fit, m)?)?;
    m.add_function(wrap_pyfunction!(tf_fit, m)?)?;
    m.add_function(wrap_pyfunction!(lasso_fit, m)?)?;
    m.add_function(wrap_pyfunction!(svt_fit, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_signal, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_mse, m)?)?;
    Ok(())
}

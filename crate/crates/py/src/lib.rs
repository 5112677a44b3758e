//! Python bindings: a thin layer over the solver core exposing the 1D
//! grid, the mixed-problem solve, the fractional operator, the exterior
//! extension, and the randomized maximum-principle campaign.

use mixnl::extension::{extend, extension_value, GridFunction};
use mixnl::geometry::{build_grid, Domain, Grid, Point, ShellPolicy};
use mixnl::kernels::{FracParams, QuadPolicy};
use mixnl::operators::{FracOperator, TailMode};
use mixnl::solver::{
    continuation_solve, solve_direct, AssembledSystem, ContinuationOptions, ProblemData,
};
use mixnl::verification::max_principle_campaign;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::sync::Arc;

fn err(e: mixnl::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Uniform interior lattice on an interval together with the truncated
/// exterior shell structure.
#[pyclass]
struct Grid1d {
    inner: Arc<Grid>,
}

#[pymethods]
impl Grid1d {
    #[new]
    #[pyo3(signature = (a, b, h, r_trunc = 4.0))]
    fn new(a: f64, b: f64, h: f64, r_trunc: f64) -> PyResult<Self> {
        let domain = Domain::interval(a, b).map_err(err)?;
        let grid = build_grid(&domain, h, r_trunc, ShellPolicy::default()).map_err(err)?;
        Ok(Grid1d { inner: Arc::new(grid) })
    }

    /// Interior node coordinates.
    fn xs(&self) -> Vec<f64> {
        self.inner.interior_xs()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.interior_nodes().len()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn r_trunc(&self) -> f64 {
        self.inner.r_trunc()
    }

    fn __repr__(&self) -> String {
        format!("Grid1d(n={}, h={}, r_trunc={})", self.n(), self.h(), self.r_trunc())
    }
}

/// Result of one solve: nodal values plus a convergence summary.
#[pyclass]
struct Solution {
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    mode: String,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    steps: usize,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(n={}, mode={}, residual={:.3e}, steps={})",
            self.u.len(),
            self.mode,
            self.residual,
            self.steps
        )
    }
}

fn coeff_vec(v: &Bound<'_, PyAny>, n: usize, name: &str) -> PyResult<Vec<f64>> {
    if let Ok(c) = v.extract::<f64>() {
        return Ok(vec![c; n]);
    }
    let vals: Vec<f64> = v.extract().map_err(|_| {
        PyValueError::new_err(format!("{name} must be a float or a sequence of floats"))
    })?;
    if vals.len() != n {
        return Err(PyValueError::new_err(format!(
            "{name} has {} entries for {n} interior nodes",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Solve -u'' + gamma (-Lap)^s u~ + a u + q u' = f with the classical and
/// nonlocal Neumann conditions. Coefficients accept a scalar or one value
/// per interior node. gamma > 0 solves by homotopy continuation.
#[pyfunction]
#[pyo3(signature = (grid, s, gamma, a, q, f))]
fn solve(
    grid: &Grid1d,
    s: f64,
    gamma: f64,
    a: &Bound<'_, PyAny>,
    q: &Bound<'_, PyAny>,
    f: &Bound<'_, PyAny>,
) -> PyResult<Solution> {
    let n = grid.inner.interior_nodes().len();
    let data = ProblemData {
        a: coeff_vec(a, n, "a")?,
        q: coeff_vec(q, n, "q")?,
        gamma,
        f: coeff_vec(f, n, "f")?,
    };
    let params = FracParams::new(1, s).map_err(err)?;
    let sys = AssembledSystem::new(grid.inner.clone(), params, QuadPolicy::default(), &data)
        .map_err(err)?;
    let (u, mode, residual, steps) = if gamma == 0.0 {
        let d = solve_direct(&sys).map_err(err)?;
        (d.u, "direct", d.residual_inf, 0)
    } else {
        let r = continuation_solve(&sys, ContinuationOptions::default()).map_err(err)?;
        let res = r.trace.last().map(|t| t.residual).unwrap_or(0.0);
        let steps = r.trace.len();
        (r.u, "continuation", res, steps)
    };
    Ok(Solution { x: grid.inner.interior_xs(), u, mode: mode.to_owned(), residual, steps })
}

/// Apply the truncated fractional Laplacian to the kernel-weighted
/// extension of the nodal values; returns one value per interior node.
#[pyfunction]
fn frac_laplacian(grid: &Grid1d, s: f64, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let params = FracParams::new(1, s).map_err(err)?;
    let u = GridFunction::new(grid.inner.clone(), values).map_err(err)?;
    let ext = extend(&u, &params, QuadPolicy::default()).map_err(err)?;
    let op = FracOperator::new(grid.inner.clone(), params, QuadPolicy::default(), TailMode::FarFieldMean)
        .map_err(err)?;
    (0..grid.inner.interior_nodes().len())
        .map(|i| op.apply_cached(&ext, i).map_err(err))
        .collect()
}

/// Evaluate the kernel-weighted extension of the nodal values at exterior
/// points.
#[pyfunction]
fn extension_values(grid: &Grid1d, s: f64, values: Vec<f64>, points: Vec<f64>) -> PyResult<Vec<f64>> {
    let params = FracParams::new(1, s).map_err(err)?;
    let u = GridFunction::new(grid.inner.clone(), values).map_err(err)?;
    points
        .iter()
        .map(|&x| extension_value(&u, &params, QuadPolicy::default(), &Point::one(x)).map_err(err))
        .collect()
}

/// Run the randomized nonnegativity campaign; returns
/// (failures, worst_interior_min, worst_range_excess).
#[pyfunction]
fn max_principle_summary(seed: u64, trials: usize, h: f64) -> PyResult<(usize, f64, f64)> {
    let report = max_principle_campaign(seed, trials, h).map_err(err)?;
    Ok((report.failures, report.worst_interior_min, report.worst_range_excess))
}

#[pymodule]
fn mixnl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid1d>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(frac_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(extension_values, m)?)?;
    m.add_function(wrap_pyfunction!(max_principle_summary, m)?)?;
    Ok(())
}

//! Python bindings. Everything crosses the boundary as plain Python types:
//! matrices as nested lists, reports as JSON strings, scalars as floats.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fxtmrac::config::{self, Config};
use fxtmrac::design;
use fxtmrac::estimator::{EstimatorGains, ShapeConstants};
use fxtmrac::excitation;
use fxtmrac::homogeneity::{Dilation, HomogeneousNorm};
use fxtmrac::{controller, sim, verify, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err(format!("{what} must be a rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn load_config(config_json: Option<&str>) -> PyResult<Config> {
    match config_json {
        None => Ok(config::benchmark()),
        Some(text) => Config::from_json(text).and_then(|c| c.resolve()).map_err(py_err),
    }
}

/// Outcome of one simulation run: the headline numbers as attributes, the
/// full summary as JSON, the logged trajectory as CSV text.
#[pyclass(frozen)]
struct SimulationResult {
    #[pyo3(get)]
    settle_time_theta: Option<f64>,
    #[pyo3(get)]
    theta_err_final: f64,
    #[pyo3(get)]
    e_norm_final: f64,
    #[pyo3(get)]
    v_final: Option<f64>,
    #[pyo3(get)]
    t_end: f64,
    #[pyo3(get)]
    rows_logged: usize,
    summary_json: String,
    csv: String,
}

#[pymethods]
impl SimulationResult {
    fn summary_json(&self) -> &str {
        &self.summary_json
    }

    fn csv(&self) -> &str {
        &self.csv
    }

    fn __repr__(&self) -> String {
        format!(
            "SimulationResult(t_end={}, theta_err_final={:.3e}, e_norm_final={:.3e})",
            self.t_end, self.theta_err_final, self.e_norm_final
        )
    }
}

/// Names of the built-in scenario presets.
#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    config::preset_names().to_vec()
}

/// Runs the design pipeline and returns the report as a JSON string.
/// `config_json` overlays the benchmark preset; `audit` adds the
/// discrepancy audit entries.
#[pyfunction]
#[pyo3(signature = (config_json=None, audit=false))]
fn design_report(config_json: Option<&str>, audit: bool) -> PyResult<String> {
    let cfg = load_config(config_json)?;
    let mut asm = config::build(&cfg).map_err(py_err)?;
    if !audit {
        asm.report.audit.clear();
    }
    serde_json::to_string_pretty(&asm.report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs a full closed-loop simulation of the configured scenario.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn simulate(config_json: Option<&str>) -> PyResult<SimulationResult> {
    let cfg = load_config(config_json)?;
    let asm = config::build(&cfg).map_err(py_err)?;
    let out = sim::run(&asm.scenario).map_err(py_err)?;
    let s = &out.summary;
    Ok(SimulationResult {
        settle_time_theta: s.settle_time_theta,
        theta_err_final: s.theta_err_final,
        e_norm_final: s.e_norm_final,
        v_final: s.v_final,
        t_end: s.t_end,
        rows_logged: s.rows_logged,
        summary_json: serde_json::to_string_pretty(s)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
        csv: out.trajectory.to_csv_string().map_err(py_err)?,
    })
}

/// Solves A'P + PA = -Q for symmetric P.
#[pyfunction]
fn lyapunov_solve(a: Vec<Vec<f64>>, q: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let p = design::lyapunov_solve(&matrix(&a, "a")?, &matrix(&q, "q")?).map_err(py_err)?;
    Ok(rows(&p))
}

/// Settling-time certificate `(p, kappa1, kappa2, t_max)` for the
/// fixed-time estimator at excitation floor `mu`.
#[pyfunction]
#[pyo3(signature = (kappa, gamma, alpha, mu, state_dim, q, t_window))]
fn settling_bound(
    kappa: f64,
    gamma: f64,
    alpha: f64,
    mu: f64,
    state_dim: usize,
    q: u32,
    t_window: f64,
) -> PyResult<(f64, f64, f64, f64)> {
    let gains = EstimatorGains { kappa, gamma, alpha };
    let b = fxtmrac::estimator::settling_bound(
        &gains,
        &ShapeConstants::default(),
        mu,
        state_dim,
        q,
        t_window,
    )
    .map_err(py_err)?;
    Ok((b.p, b.kappa1, b.kappa2, b.t_max))
}

/// Reaching-time bound for the target level set `{V <= upsilon}`.
#[pyfunction]
fn final_time(
    t_settle: f64,
    delta_min: f64,
    delta_max: f64,
    nu: f64,
    iota: f64,
    psi: f64,
    upsilon: f64,
) -> PyResult<f64> {
    design::final_time(t_settle, delta_min, delta_max, nu, iota, psi, upsilon).map_err(py_err)
}

/// Nominal excitation floor for `q` windows of length `t_window` under
/// filter bandwidth `k`.
#[pyfunction]
fn mu_floor(gamma: f64, k: f64, t_window: f64, q: u32) -> f64 {
    excitation::mu_floor(gamma, k, t_window, q)
}

/// Explicit weighted homogeneous norm of `e`.
#[pyfunction]
fn explicit_phi(rho: f64, weights: Vec<f64>, e: Vec<f64>) -> PyResult<f64> {
    let norm = HomogeneousNorm::explicit(rho, weights).map_err(py_err)?;
    norm.phi(&DVector::from_vec(e)).map_err(py_err)
}

/// Canonical homogeneous norm of `e` under the dilation generator.
#[pyfunction]
fn canonical_phi(generator: Vec<Vec<f64>>, e: Vec<f64>) -> PyResult<f64> {
    let dil = Dilation::new(matrix(&generator, "generator")?).map_err(py_err)?;
    HomogeneousNorm::canonical(dil).phi(&DVector::from_vec(e)).map_err(py_err)
}

/// Indirect feedback gain row from an estimated plant matrix.
#[pyfunction]
fn gain_from_estimate(
    a_hat: Vec<Vec<f64>>,
    a_m: Vec<Vec<f64>>,
    b: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let k = controller::gain_from_estimate(
        &matrix(&a_hat, "a_hat")?,
        &matrix(&a_m, "a_m")?,
        &DVector::from_vec(b),
    )
    .map_err(py_err)?;
    Ok(k.iter().cloned().collect())
}

/// Runs the internal verification suite; returns `(name, error)` pairs
/// where `error` is None for a passing check.
#[pyfunction]
fn verify_all() -> Vec<(String, Option<String>)> {
    verify::checks()
        .iter()
        .map(|c| (c.name.to_string(), (c.run)().err()))
        .collect()
}

#[pymodule]
fn fxtmrac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SimulationResult>()?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(design_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_solve, m)?)?;
    m.add_function(wrap_pyfunction!(settling_bound, m)?)?;
    m.add_function(wrap_pyfunction!(final_time, m)?)?;
    m.add_function(wrap_pyfunction!(mu_floor, m)?)?;
    m.add_function(wrap_pyfunction!(explicit_phi, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_phi, m)?)?;
    m.add_function(wrap_pyfunction!(gain_from_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}

//! Python bindings. Classification reports cross the boundary as plain dicts.

use oscmech::classifier::{self, ClassificationReport, ClassifierConfig};
use oscmech::sim::{self, ForcedConfig, HopfConfig};
use oscmech::spectral::{self, ModelParams};
use oscmech::{DetrendMode, FitConfig, MultiSeries, SpectrumModel, TimeGrid, TimeSeries};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: oscmech::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn report_dict<'py>(py: Python<'py>, value: &ClassificationReport) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn series_dict<'py>(py: Python<'py>, ms: &MultiSeries) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t0", ms.t0)?;
    d.set_item("dt", ms.dt)?;
    for (name, values) in ms.names.iter().zip(&ms.channels) {
        d.set_item(name, values.clone())?;
    }
    Ok(d)
}

fn params(beta: f64, lambda: f64, alpha: f64, sigma1: f64, sigma2: f64) -> ModelParams {
    ModelParams {
        beta,
        lambda,
        alpha,
        sigma1,
        sigma2,
    }
}

/// Hopf normal form; returns {"t0", "dt", "x", "y"}.
#[pyfunction]
#[pyo3(signature = (gamma, omega_h, sigma, dt, duration, seed=0, discard=0))]
fn simulate_hopf<'py>(
    py: Python<'py>,
    gamma: f64,
    omega_h: f64,
    sigma: f64,
    dt: f64,
    duration: f64,
    seed: u64,
    discard: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = HopfConfig { gamma, omega_h, sigma };
    let grid = TimeGrid::from_duration(dt, duration, discard).map_err(value_error)?;
    let ms = py
        .detach(|| sim::simulate_hopf(&cfg, &grid, seed))
        .map_err(value_error)?;
    series_dict(py, &ms)
}

/// Noise-driven damped mode under sinusoidal forcing; returns {"t0", "dt", "x", "y"}.
#[pyfunction]
#[pyo3(signature = (gamma, omega0, forcing_omega, forcing_amplitude, sigma, dt, duration, seed=0, discard=0))]
#[allow(clippy::too_many_arguments)]
fn simulate_forced<'py>(
    py: Python<'py>,
    gamma: f64,
    omega0: f64,
    forcing_omega: f64,
    forcing_amplitude: f64,
    sigma: f64,
    dt: f64,
    duration: f64,
    seed: u64,
    discard: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ForcedConfig {
        gamma,
        omega0,
        forcing_omega,
        forcing_amplitude,
        sigma,
    };
    let grid = TimeGrid::from_duration(dt, duration, discard).map_err(value_error)?;
    let ms = py
        .detach(|| sim::simulate_forced(&cfg, &grid, seed))
        .map_err(value_error)?;
    series_dict(py, &ms)
}

/// One-sided periodogram; returns (omega, power).
#[pyfunction]
#[pyo3(signature = (values, dt, detrend="mean"))]
fn periodogram(values: Vec<f64>, dt: f64, detrend: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let mode: DetrendMode = detrend.parse().map_err(value_error)?;
    let ts = TimeSeries::new(0.0, dt, values).map_err(value_error)?;
    let pg = spectral::periodogram(&ts, mode).map_err(value_error)?;
    Ok((pg.omega, pg.power))
}

/// Model spectral density at each frequency in `omega`.
#[pyfunction]
fn psd_x(beta: f64, lambda: f64, alpha: f64, sigma1: f64, sigma2: f64, omega: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = params(beta, lambda, alpha, sigma1, sigma2);
    omega
        .iter()
        .map(|&w| spectral::psd_x(&p, w).map_err(value_error))
        .collect()
}

#[pyfunction]
fn v_ps(beta: f64, lambda: f64, alpha: f64, sigma1: f64, sigma2: f64) -> PyResult<f64> {
    classifier::v_ps(&params(beta, lambda, alpha, sigma1, sigma2)).map_err(value_error)
}

/// Fits both regimes to a uniformly sampled record and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (values, dt, seed=0, n_starts=16, omega_c=None, detrend="mean", spectrum_model="expected_periodogram"))]
#[allow(clippy::too_many_arguments)]
fn classify<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    dt: f64,
    seed: u64,
    n_starts: usize,
    omega_c: Option<f64>,
    detrend: &str,
    spectrum_model: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let spectrum_model: SpectrumModel = spectrum_model.parse().map_err(value_error)?;
    let cfg = ClassifierConfig {
        fit: FitConfig {
            seed,
            n_starts,
            omega_c,
            spectrum_model,
            ..FitConfig::default()
        },
        detrend: detrend.parse().map_err(value_error)?,
        ..ClassifierConfig::default()
    };
    let ts = TimeSeries::new(0.0, dt, values).map_err(value_error)?;
    let report = py
        .detach(|| classifier::classify_with(&ts, &cfg))
        .map_err(value_error)?;
    report_dict(py, &report)
}

#[pymodule]
fn pyoscmech(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate_hopf, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_forced, m)?)?;
    m.add_function(wrap_pyfunction!(periodogram, m)?)?;
    m.add_function(wrap_pyfunction!(psd_x, m)?)?;
    m.add_function(wrap_pyfunction!(v_ps, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    Ok(())
}

use std::collections::HashMap;

use beamtrack_core::analytic::{centroid_mse_bias as core_centroid_mse_bias, mdc_mse_bias as core_mdc_mse_bias, MseBias, TruncationPolicy};
use beamtrack_core::crlb;
use beamtrack_core::detection::{self, ErrorProbResult};
use beamtrack_core::estimators::{self, AceParams, EstimatorTag};
use beamtrack_core::fit;
use beamtrack_core::ga::GaConfig;
use beamtrack_core::harness::{parse_config, run_experiment_with_threads, to_csv};
use beamtrack_core::model::{cell_mean_counts, ArrayGeometry, BeamConstants, BeamParams};
use beamtrack_core::rng::substream;
use beamtrack_core::sim::{sample_frame, CountFrame, SlotKind};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: beamtrack_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Geometry", module = "beamtrack", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Geometry {
    inner: ArrayGeometry,
}

#[pymethods]
impl Geometry {
    #[new]
    fn new(half_width: f64, cells_per_side: usize) -> PyResult<Self> {
        Ok(Self { inner: ArrayGeometry::new(half_width, cells_per_side).map_err(err)? })
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width()
    }

    #[getter]
    fn cells_per_side(&self) -> usize {
        self.inner.cells_per_side()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.cells()
    }

    #[getter]
    fn cell_side(&self) -> f64 {
        self.inner.cell_side()
    }

    fn cell_center(&self, m: usize) -> PyResult<(f64, f64)> {
        self.inner.cell_center(m).map_err(err)
    }

    fn cell_centers(&self) -> Vec<(f64, f64)> {
        self.inner.cell_centers()
    }

    fn __repr__(&self) -> String {
        format!("Geometry(half_width={}, cells_per_side={})", self.inner.half_width(), self.inner.cells_per_side())
    }
}

#[pyclass(name = "Beam", module = "beamtrack", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Beam {
    inner: BeamParams,
}

#[pymethods]
impl Beam {
    #[new]
    #[pyo3(signature = (i0, rho, x0=0.0, y0=0.0, lambda_n=0.0))]
    fn new(i0: f64, rho: f64, x0: f64, y0: f64, lambda_n: f64) -> PyResult<Self> {
        Ok(Self { inner: BeamParams::new(i0, rho, x0, y0, lambda_n).map_err(err)? })
    }

    #[getter]
    fn i0(&self) -> f64 {
        self.inner.i0
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    #[getter]
    fn center(&self) -> (f64, f64) {
        self.inner.center()
    }

    #[getter]
    fn lambda_n(&self) -> f64 {
        self.inner.lambda_n
    }

    fn with_center(&self, x0: f64, y0: f64) -> Self {
        Self { inner: self.inner.with_center(x0, y0) }
    }

    /// Mean photon count of every cell, row-major from the bottom-left corner.
    fn mean_counts(&self, geom: &Geometry) -> Vec<f64> {
        cell_mean_counts(&self.inner, &geom.inner)
    }

    /// Diagonal of the inverse Fisher matrix, `(var_x, var_y)`.
    fn crlb(&self, geom: &Geometry) -> PyResult<(f64, f64)> {
        let c = crlb::crlb(&self.inner, &geom.inner).map_err(err)?;
        Ok((c.var_x_lb, c.var_y_lb))
    }

    #[pyo3(signature = (geom, seed=0))]
    fn sample(&self, geom: &Geometry, seed: u64) -> Vec<u64> {
        let mut rng = substream(seed, &[]);
        sample_frame(&self.inner, &geom.inner, SlotKind::SignalPlusNoise, &mut rng).counts
    }

    fn __repr__(&self) -> String {
        let b = &self.inner;
        format!("Beam(i0={}, rho={}, x0={}, y0={}, lambda_n={})", b.i0, b.rho, b.x0, b.y0, b.lambda_n)
    }
}

/// Position estimate `(x, y, degenerate)` from a frame of counts.
///
/// `beam` supplies the constants that AUC, NLS and MLE assume; its center is
/// ignored.
#[pyfunction]
#[pyo3(signature = (name, counts, geom, beam=None, seed=0, ace_power=2.0, ace_top=3, generations=None))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    name: &str,
    counts: Vec<u64>,
    geom: &Geometry,
    beam: Option<&Beam>,
    seed: u64,
    ace_power: f64,
    ace_top: usize,
    generations: Option<usize>,
) -> PyResult<(f64, f64, bool)> {
    let tag: EstimatorTag = name.parse().map_err(PyValueError::new_err)?;
    let frame = CountFrame::new(counts, SlotKind::SignalPlusNoise);
    let g = &geom.inner;
    let constants = || -> PyResult<BeamConstants> {
        beam.map(|b| BeamConstants::from(&b.inner))
            .ok_or_else(|| PyValueError::new_err(format!("{name} needs the beam constants")))
    };
    let mut ga = GaConfig::default();
    if let Some(n) = generations {
        ga.generations = n;
    }
    let mut rng = substream(seed, &[]);
    let ace = AceParams::new(ace_power, ace_top).map_err(err)?;
    let e = match tag {
        EstimatorTag::Mdc => estimators::estimate_mdc(&frame, g, &mut rng),
        EstimatorTag::Centroid => estimators::estimate_centroid(&frame, g),
        EstimatorTag::Auc => estimators::estimate_auc(&frame, g, &constants()?),
        EstimatorTag::Ace1 => estimators::estimate_ace1(&frame, g, &ace),
        EstimatorTag::Ace2 => estimators::estimate_ace2(&frame, g, &ace),
        EstimatorTag::Nls => fit::estimate_nls(&frame, g, &constants()?, &ga, &mut rng),
        EstimatorTag::Mle => fit::estimate_mle(&frame, g, &constants()?, &ga, &mut rng),
    }
    .map_err(err)?;
    Ok((e.x, e.y, e.degenerate))
}

#[pyfunction]
fn crlb_high_snr_limit(i0: f64, rho: f64) -> f64 {
    crlb::crlb_high_snr_limit(i0, rho)
}

#[pyfunction]
fn crlb_low_snr_limit(i0: f64, rho: f64, lambda_n: f64) -> f64 {
    crlb::crlb_low_snr_limit(i0, rho, lambda_n)
}

fn mse_bias_dict(r: MseBias) -> HashMap<&'static str, f64> {
    HashMap::from([
        ("mse", r.mse),
        ("bias_x", r.bias_x),
        ("bias_y", r.bias_y),
        ("tail_bound", r.tail_bound),
        ("completeness_gap", r.completeness_gap),
    ])
}

fn policy(epsilon0: f64, k_max: usize) -> TruncationPolicy {
    TruncationPolicy { epsilon0, k_max, ..TruncationPolicy::default() }
}

/// Analytic MSE and bias of the maximum detector count estimator.
#[pyfunction]
#[pyo3(signature = (beam, geom, epsilon0=1e-5, k_max=2))]
fn mdc_mse_bias(beam: &Beam, geom: &Geometry, epsilon0: f64, k_max: usize) -> PyResult<HashMap<&'static str, f64>> {
    core_mdc_mse_bias(&beam.inner, &geom.inner, &policy(epsilon0, k_max)).map(mse_bias_dict).map_err(err)
}

/// Analytic MSE and bias of the centroid, or of AUC when `scaled_by_k`.
#[pyfunction]
#[pyo3(signature = (beam, geom, scaled_by_k=false, epsilon0=1e-5))]
fn centroid_mse_bias(beam: &Beam, geom: &Geometry, scaled_by_k: bool, epsilon0: f64) -> PyResult<HashMap<&'static str, f64>> {
    core_centroid_mse_bias(&beam.inner, &geom.inner, &policy(epsilon0, 2), scaled_by_k)
        .map(mse_bias_dict)
        .map_err(err)
}

fn error_prob_dict(py: Python<'_>, r: ErrorProbResult) -> PyResult<Py<PyAny>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("p_symbol_error", r.p_symbol_error)?;
    d.set_item("mu_v", r.mu_v)?;
    d.set_item("sigma_v", r.sigma_v)?;
    d.set_item("method", r.method.as_str())?;
    d.set_item("trials", r.trials)?;
    d.set_item("errors", r.errors)?;
    d.set_item("ci", r.ci)?;
    Ok(d.into_any().unbind())
}

/// M-PPM symbol error with receiver weights built at `assumed_center`.
/// Monte Carlo when `trials` is given, the Gaussian approximation otherwise.
#[pyfunction]
#[pyo3(signature = (beam, assumed_center, geom, order=2, trials=None, seed=0))]
fn symbol_error(
    py: Python<'_>,
    beam: &Beam,
    assumed_center: (f64, f64),
    geom: &Geometry,
    order: usize,
    trials: Option<u64>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = match trials {
        Some(n) => detection::symbol_error_mc(&beam.inner, assumed_center, &geom.inner, order, n, seed),
        None => detection::symbol_error_gaussian(&beam.inner, assumed_center, &geom.inner, order),
    }
    .map_err(err)?;
    error_prob_dict(py, r)
}

/// `μ_v/σ_v` over a `points × points` grid of assumed centers.
#[pyfunction]
#[pyo3(signature = (beam, geom, points=41))]
fn snr_ratio_landscape(py: Python<'_>, beam: &Beam, geom: &Geometry, points: usize) -> PyResult<Py<PyAny>> {
    let l = detection::snr_ratio_landscape(&beam.inner, &geom.inner, points).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    let rows: Vec<Vec<f64>> = l.values.chunks(l.axis.len()).map(|r| r.to_vec()).collect();
    d.set_item("step", l.step())?;
    d.set_item("axis", l.axis)?;
    d.set_item("values", rows)?;
    d.set_item("argmax", l.argmax)?;
    d.set_item("max_value", l.max_value)?;
    Ok(d.into_any().unbind())
}

/// Runs an experiment config given as text and returns the CSV, warnings and
/// failed points.
#[pyfunction]
#[pyo3(signature = (text, seed=None, threads=1))]
fn run_config(py: Python<'_>, text: &str, seed: Option<u64>, threads: usize) -> PyResult<Py<PyAny>> {
    let parsed = parse_config(text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        PyValueError::new_err(lines.join("\n"))
    })?;
    let mut cfg = parsed.config;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let r = py
        .detach(|| run_experiment_with_threads(&cfg, threads))
        .map_err(PyValueError::new_err)?;
    let d = pyo3::types::PyDict::new(py);
    let mut warnings = parsed.warnings;
    warnings.extend(r.warnings.iter().cloned());
    d.set_item("csv", to_csv(&r))?;
    d.set_item("warnings", warnings)?;
    d.set_item("failures", r.failures.clone())?;
    Ok(d.into_any().unbind())
}

#[pymodule]
fn beamtrack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Geometry>()?;
    m.add_class::<Beam>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(crlb_high_snr_limit, m)?)?;
    m.add_function(wrap_pyfunction!(crlb_low_snr_limit, m)?)?;
    m.add_function(wrap_pyfunction!(mdc_mse_bias, m)?)?;
    m.add_function(wrap_pyfunction!(centroid_mse_bias, m)?)?;
    m.add_function(wrap_pyfunction!(symbol_error, m)?)?;
    m.add_function(wrap_pyfunction!(snr_ratio_landscape, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}

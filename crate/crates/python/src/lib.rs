use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use xyqaoa::experiments::{self, FitModel, ThresholdSearch};
use xyqaoa::lieb_robinson::LRParameters;
use xyqaoa::{optimizer, pontryagin, spectral, subspace};

create_exception!(pyxyqaoa, XyqaoaError, PyValueError);

fn err(e: xyqaoa::Error) -> PyErr {
    XyqaoaError::new_err(e.to_string())
}

/// Alternating (dB, dC) durations; B is applied first in every pair.
#[pyclass(name = "Schedule", module = "pyxyqaoa", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySchedule(xyqaoa::Schedule);

#[pymethods]
impl PySchedule {
    #[new]
    fn new(pairs: Vec<(f64, f64)>) -> PyResult<Self> {
        xyqaoa::Schedule::new(pairs).map(Self).map_err(err)
    }

    /// Parses "dB1;dC1;dB2;dC2;...".
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_flat(durations: Vec<f64>) -> PyResult<Self> {
        xyqaoa::Schedule::from_flat(&durations).map(Self).map_err(err)
    }

    #[getter]
    fn pairs(&self) -> Vec<(f64, f64)> {
        self.0.pairs().to_vec()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    #[getter]
    fn total_time(&self) -> f64 {
        self.0.total_time()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.0.to_flat()
    }

    fn __len__(&self) -> usize {
        self.0.depth()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Schedule.parse({:?})", self.0.to_string())
    }
}

#[pyclass(name = "OptimizationResult", module = "pyxyqaoa", frozen)]
struct PyOptimizationResult(optimizer::OptimizationResult);

#[pymethods]
impl PyOptimizationResult {
    #[getter]
    fn best_fidelity(&self) -> f64 {
        self.0.best_fidelity
    }

    #[getter]
    fn best_schedule(&self) -> PySchedule {
        PySchedule(self.0.best_schedule.clone())
    }

    #[getter]
    fn restarts(&self) -> usize {
        self.0.restart_records.len()
    }

    #[getter]
    fn converged(&self) -> usize {
        self.0.converged_count()
    }

    #[getter]
    fn wall_time(&self) -> f64 {
        self.0.wall_time
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| err(e.into()))
    }

    fn __repr__(&self) -> String {
        format!(
            "OptimizationResult(n={}, p={}, best_fidelity={:.12}, converged={}/{})",
            self.0.n_sites,
            self.0.depth,
            self.0.best_fidelity,
            self.0.converged_count(),
            self.0.restart_records.len()
        )
    }
}

#[pyclass(name = "PontryaginReport", module = "pyxyqaoa", frozen)]
struct PyPontryaginReport(pontryagin::PontryaginReport);

#[pymethods]
impl PyPontryaginReport {
    /// "consistent", "violated" or "vacuous".
    #[getter]
    fn verdict(&self) -> String {
        serde_json::to_value(self.0.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }

    #[getter]
    fn fidelity(&self) -> f64 {
        self.0.fidelity
    }

    #[getter]
    fn switch_times(&self) -> Vec<f64> {
        self.0.switch_times.clone()
    }

    #[getter]
    fn switching_values(&self) -> Vec<f64> {
        self.0.switching_values.clone()
    }

    /// (segment, fraction of samples with the wrong sign) pairs.
    #[getter]
    fn sign_violations(&self) -> Vec<(usize, f64)> {
        self.0.segment_sign_violations.iter().map(|v| (v.segment, v.fraction)).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| err(e.into()))
    }

    fn __repr__(&self) -> String {
        format!("PontryaginReport(verdict={:?}, fidelity={:.12})", self.verdict(), self.0.fidelity)
    }
}

/// Transfer fidelity |<N|U(schedule)|1>|^2.
#[pyfunction]
fn fidelity(schedule: &PySchedule, n: usize) -> PyResult<f64> {
    subspace::fidelity(&schedule.0, n).map_err(err)
}

/// Gradient of the fidelity with respect to the flat durations.
#[pyfunction]
fn fidelity_gradient(schedule: &PySchedule, n: usize) -> PyResult<Vec<f64>> {
    subspace::fidelity_gradient(&schedule.0, n).map_err(err)
}

/// Single-excitation amplitudes after the schedule, starting from site 1.
#[pyfunction]
fn final_amplitudes(schedule: &PySchedule, n: usize) -> PyResult<Vec<Complex64>> {
    subspace::apply_schedule(&schedule.0, n).map(|s| s.into_amplitudes()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, p, tf=None, restarts=200, seed=0, max_iterations=2000))]
fn optimize(
    py: Python<'_>,
    n: usize,
    p: usize,
    tf: Option<f64>,
    restarts: usize,
    seed: u64,
    max_iterations: usize,
) -> PyResult<PyOptimizationResult> {
    let mut config = match tf {
        Some(t) => optimizer::OptimizerConfig::fixed_tf(t, restarts, seed),
        None => optimizer::OptimizerConfig::free(restarts, seed),
    };
    config.max_iterations = max_iterations;
    py.detach(|| optimizer::optimize(n, p, &config, &[]))
        .map(PyOptimizationResult)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (schedule, n, tolerance=1e-3))]
fn verify_pontryagin(schedule: &PySchedule, n: usize, tolerance: f64) -> PyResult<PyPontryaginReport> {
    pontryagin::verify_pontryagin(&schedule.0, n, tolerance)
        .map(PyPontryaginReport)
        .map_err(err)
}

/// Light-cone bound on the transfer fidelity at time `t`.
#[pyfunction]
#[pyo3(signature = (n, t, j=2.0))]
fn lr_success_bound(n: usize, t: f64, j: f64) -> PyResult<f64> {
    Ok(LRParameters::for_chain(n, j).map_err(err)?.success_bound(t))
}

/// "suppressed", "exponential_growth" or "steady_growth".
#[pyfunction]
#[pyo3(signature = (n, t, j=2.0))]
fn lr_region(n: usize, t: f64, j: f64) -> PyResult<&'static str> {
    Ok(LRParameters::for_chain(n, j).map_err(err)?.region(t).as_str())
}

/// Fidelity of `depth` repetitions of the (delta, pi) Grover step.
#[pyfunction]
fn grover_ansatz_fidelity(n: usize, depth: usize, delta: f64) -> PyResult<f64> {
    spectral::grover_ansatz_fidelity(n, depth, delta).map_err(err)
}

/// Same quantity via the explicit sum over partitions of the depth.
#[pyfunction]
fn partition_sum_fidelity(n: usize, depth: usize, delta: f64) -> PyResult<f64> {
    spectral::partition_sum_fidelity(n, depth, delta).map_err(err)
}

/// Least-squares fit; returns (params, r2).
#[pyfunction]
fn fit(model: &str, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    if xs.len() != ys.len() {
        return Err(XyqaoaError::new_err("xs and ys differ in length"));
    }
    let model: FitModel = model.parse().map_err(err)?;
    let points: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
    let r = experiments::fit(model, &points).map_err(err)?;
    Ok((r.params, r.r_squared))
}

/// Shortest runtime reaching `threshold` at depth N + 2, or None.
#[pyfunction]
#[pyo3(signature = (n, threshold, restarts=50, seed=0))]
fn min_tf_for_fidelity(py: Python<'_>, n: usize, threshold: f64, restarts: usize, seed: u64) -> PyResult<Option<f64>> {
    let search = ThresholdSearch::with_restarts(restarts, seed);
    py.detach(|| experiments::min_tf_for_fidelity(n, threshold, &search)).map_err(err)
}

#[pymodule]
fn pyxyqaoa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchedule>()?;
    m.add_class::<PyOptimizationResult>()?;
    m.add_class::<PyPontryaginReport>()?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(final_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(verify_pontryagin, m)?)?;
    m.add_function(wrap_pyfunction!(lr_success_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lr_region, m)?)?;
    m.add_function(wrap_pyfunction!(grover_ansatz_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(partition_sum_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(min_tf_for_fidelity, m)?)?;
    m.add("XyqaoaError", m.py().get_type::<XyqaoaError>())?;
    Ok(())
}

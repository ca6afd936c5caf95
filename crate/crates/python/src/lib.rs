//! Python bindings: quantizer, projection, estimator and controller
//! primitives, plus whole experiments driven from JSON configs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qtrack_core::analysis::{derive_constants, ConstantInputs};
use qtrack_core::error::HarnessError;
use qtrack_core::{
    harness, ExperimentConfig, NoiseModel as CoreNoise, OmegaSet, ParamVec, QuantizerSpec as CoreQuantizer,
    Regressor,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::TrialDiverged { .. } | HarnessError::TooManyDiverged { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => value_err(other),
    }
}

fn pv(x: (f64, f64)) -> ParamVec {
    ParamVec::new(x.0, x.1)
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Quantizer", module = "qtrack", from_py_object)]
#[derive(Clone)]
struct Quantizer(CoreQuantizer);

#[pymethods]
impl Quantizer {
    #[new]
    fn new(thresholds: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        CoreQuantizer::new(thresholds, weights).map(Self).map_err(value_err)
    }

    /// Thresholds `[-2, 0, 2]`, weights `[80, 50, -50, -80]`.
    #[staticmethod]
    fn preset() -> Self {
        Self(CoreQuantizer::standard())
    }

    #[getter]
    fn thresholds(&self) -> Vec<f64> {
        self.0.thresholds().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    /// Level `p` with `y` in `(C_p, C_{p+1}]`.
    fn quantize(&self, y: f64) -> usize {
        qtrack_core::quantize(&self.0, y)
    }

    fn weight(&self, level: usize) -> PyResult<f64> {
        qtrack_core::weighted_observation(&self.0, level).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Quantizer(thresholds={:?}, weights={:?})", self.0.thresholds(), self.0.weights())
    }
}

#[pyclass(name = "Noise", module = "qtrack", from_py_object)]
#[derive(Clone)]
struct Noise(CoreNoise);

#[pymethods]
impl Noise {
    #[staticmethod]
    #[pyo3(signature = (sigma = 1.0))]
    fn gaussian(sigma: f64) -> PyResult<Self> {
        Self::checked(CoreNoise::Gaussian { sigma })
    }

    #[staticmethod]
    fn logistic(scale: f64) -> PyResult<Self> {
        Self::checked(CoreNoise::Logistic { scale })
    }

    #[staticmethod]
    fn uniform(half_width: f64) -> PyResult<Self> {
        Self::checked(CoreNoise::Uniform { half_width })
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }

    fn variance(&self) -> f64 {
        self.0.variance()
    }

    fn __repr__(&self) -> String {
        format!("Noise({:?})", self.0)
    }
}

impl Noise {
    fn checked(noise: CoreNoise) -> PyResult<Self> {
        noise.validate().map_err(value_err)?;
        Ok(Self(noise))
    }
}

#[pyclass(name = "Omega", module = "qtrack", from_py_object)]
#[derive(Clone)]
struct Omega(OmegaSet);

#[pymethods]
impl Omega {
    #[staticmethod]
    fn rect(lo1: f64, hi1: f64, lo2: f64, hi2: f64) -> PyResult<Self> {
        Self::checked(OmegaSet::Box { lo1, hi1, lo2, hi2 })
    }

    /// `{ sign·x ∈ [theta_lower, m_bar], |y| ≤ theta_bar }`.
    #[staticmethod]
    fn signed_box(sign: f64, theta_lower: f64, m_bar: f64, theta_bar: f64) -> PyResult<Self> {
        Self::checked(OmegaSet::SignedBox {
            sign,
            theta_lower,
            m_bar,
            theta_bar,
        })
    }

    fn project(&self, x: (f64, f64)) -> (f64, f64) {
        let p = self.0.project(pv(x));
        (p.c1, p.c2)
    }

    fn contains(&self, x: (f64, f64)) -> bool {
        self.0.contains(pv(x))
    }

    fn __repr__(&self) -> String {
        format!("Omega({:?})", self.0)
    }
}

impl Omega {
    fn checked(omega: OmegaSet) -> PyResult<Self> {
        omega.validate().map_err(value_err)?;
        Ok(Self(omega))
    }
}

/// `max(0, |θ1| - |θ2|)`.
#[pyfunction]
fn min_phase_margin(theta: (f64, f64)) -> f64 {
    qtrack_core::model::min_phase_margin(pv(theta))
}

/// Expected weighted observation `A` at `θ̂` and regressor `φ`.
#[pyfunction]
#[pyo3(signature = (theta_hat, phi, quantizer, noise = None))]
fn predicted_weight(theta_hat: (f64, f64), phi: (f64, f64), quantizer: &Quantizer, noise: Option<Noise>) -> f64 {
    let noise = noise.map_or(CoreNoise::standard_normal(), |n| n.0);
    qtrack_core::predicted_weight(pv(theta_hat), Regressor::new(phi.0, phi.1), &quantizer.0, &noise)
}

#[pyfunction]
#[pyo3(signature = (theta_hat, y_star_next, u_prev, epsilon_guard = qtrack_core::controller::DEFAULT_EPSILON_GUARD))]
fn adaptive_control(theta_hat: (f64, f64), y_star_next: f64, u_prev: f64, epsilon_guard: f64) -> f64 {
    qtrack_core::adaptive_control(pv(theta_hat), y_star_next, u_prev, epsilon_guard)
}

#[pyfunction]
fn oracle_control(theta: (f64, f64), y_star_next: f64, u_prev: f64) -> PyResult<f64> {
    qtrack_core::oracle_control(pv(theta), y_star_next, u_prev).map_err(value_err)
}

/// Closed-form constants (input bound, δ, D1, f*, ζ, rate class) as a dict.
#[pyfunction]
#[pyo3(signature = (y_bar, h, delta_y, theta_lower, theta_bar, m_bar, quantizer, noise = None))]
#[allow(clippy::too_many_arguments)]
fn constants<'py>(
    py: Python<'py>,
    y_bar: f64,
    h: usize,
    delta_y: f64,
    theta_lower: f64,
    theta_bar: f64,
    m_bar: f64,
    quantizer: &Quantizer,
    noise: Option<Noise>,
) -> PyResult<Bound<'py, PyAny>> {
    let noise = noise.map_or(CoreNoise::standard_normal(), |n| n.0);
    let c = derive_constants(&ConstantInputs {
        y_bar,
        h,
        delta_y,
        theta_lower,
        theta_bar,
        m_bar,
        quantizer: &quantizer.0,
        noise: &noise,
    })
    .map_err(value_err)?;
    to_dict(py, &c)
}

/// A validated experiment; build with `from_json` or `example`.
#[pyclass(name = "Experiment", module = "qtrack")]
struct Experiment(ExperimentConfig);

#[pymethods]
impl Experiment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_json(text).map(Self).map_err(harness_err)
    }

    #[staticmethod]
    #[pyo3(signature = (horizon = 10_000, trials = 200, seed = 1))]
    fn example(horizon: usize, trials: usize, seed: u64) -> Self {
        Self(ExperimentConfig::example(horizon, trials, seed))
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.0.horizon
    }

    #[getter]
    fn trials(&self) -> usize {
        self.0.trials
    }

    /// Trajectory of one trial as a dict of lists indexed by `k - 1`.
    #[pyo3(signature = (index = 0))]
    fn run_trial<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyDict>> {
        let config = &self.0;
        let t = py.detach(|| harness::run_trial(config, index)).map_err(harness_err)?;
        let d = PyDict::new(py);
        d.set_item("u", t.u)?;
        d.set_item("y", t.y)?;
        d.set_item("y_star", t.y_star)?;
        d.set_item("level", t.level)?;
        d.set_item("s_bar", t.s_bar)?;
        d.set_item("theta_hat", t.theta_hat.iter().map(|p| (p.c1, p.c2)).collect::<Vec<_>>())?;
        d.set_item("err_sq", t.err_sq)?;
        d.set_item("track_sq", t.track_sq)?;
        d.set_item("guard_steps", t.guard_steps)?;
        d.set_item("step_bound_violations", t.step_bound_violations)?;
        d.set_item("max_phi_norm", t.max_phi_norm)?;
        Ok(d)
    }

    /// Aggregated Monte Carlo summary as a dict.
    fn run_montecarlo<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let config = &self.0;
        let s = py.detach(|| harness::run_montecarlo(config)).map_err(harness_err)?;
        to_dict(py, &s)
    }
}

#[pymodule]
fn qtrack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Quantizer>()?;
    m.add_class::<Noise>()?;
    m.add_class::<Omega>()?;
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(min_phase_margin, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_weight, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_control, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_control, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    Ok(())
}

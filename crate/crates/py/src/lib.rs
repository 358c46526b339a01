//! Python bindings for `bode-limits`.

use std::collections::BTreeMap;

use bode_limits::limits::{self, Weight};
use bode_limits::lti::{self, Channel, Injection, MARGIN_TOL};
use bode_limits::spectral::{self, CrossSpectra, WelchOptions};
use bode_limits::stochsim::{self, NoiseSpec, SignalBundle, SimParams};
use bode_limits::verify::{self, SimPlan, SystemSpec, VerifyOptions};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Any serializable value as plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Proper rational transfer function.
#[pyclass(name = "RationalTF", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRationalTF {
    inner: lti::RationalTF,
}

#[pymethods]
impl PyRationalTF {
    #[staticmethod]
    fn zpk(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> PyResult<Self> {
        Ok(PyRationalTF {
            inner: lti::RationalTF::zpk(zeros, poles, gain).map_err(err)?,
        })
    }

    /// Coefficients in descending powers of `s`.
    #[staticmethod]
    fn from_coeffs(num: Vec<f64>, den: Vec<f64>) -> PyResult<Self> {
        Ok(PyRationalTF {
            inner: lti::RationalTF::from_coeffs(&num, &den).map_err(err)?,
        })
    }

    #[staticmethod]
    fn constant(k: f64) -> Self {
        PyRationalTF {
            inner: lti::RationalTF::constant(k),
        }
    }

    fn zeros(&self) -> Vec<Complex64> {
        self.inner.zeros().to_vec()
    }

    fn poles(&self) -> Vec<Complex64> {
        self.inner.poles().to_vec()
    }

    fn gain(&self) -> f64 {
        self.inner.gain()
    }

    fn relative_degree(&self) -> i64 {
        self.inner.relative_degree()
    }

    fn origin_order(&self) -> i64 {
        self.inner.origin_order()
    }

    fn __call__(&self, s: Complex64) -> PyResult<Complex64> {
        self.inner.eval(s).map_err(err)
    }

    fn __mul__(&self, other: &PyRationalTF) -> Self {
        PyRationalTF {
            inner: self.inner.mul(&other.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "RationalTF(zeros={:?}, poles={:?}, gain={})",
            self.inner.zeros(),
            self.inner.poles(),
            self.inner.gain()
        )
    }
}

fn weight(weighted: bool) -> Weight {
    if weighted {
        Weight::InvOmegaSq
    } else {
        Weight::Unweighted
    }
}

fn injection(name: &str) -> PyResult<Injection> {
    match name {
        "control_noise" => Ok(Injection::ControlNoise),
        "measurement_noise" => Ok(Injection::MeasurementNoise),
        "inverse_measurement" => Ok(Injection::InverseMeasurement),
        other => Err(PyValueError::new_err(format!("unknown injection {other:?}"))),
    }
}

fn noise_spec(ou_rate: Option<f64>, intensity: f64) -> PyResult<Option<NoiseSpec>> {
    ou_rate.map(|a| NoiseSpec::ou(a, intensity).map_err(err)).transpose()
}

/// Pole and zero sums, plant log integrals and the load and noise bounds.
#[pyfunction]
fn analytic_bounds(py: Python<'_>, plant: &PyRationalTF) -> PyResult<Py<PyAny>> {
    to_py(py, &limits::analytic_bounds(&plant.inner, MARGIN_TOL).map_err(err)?)
}

/// `(1/pi) int_0^inf log|T(jw)| dw`, or with the `1/w^2` weight.
#[pyfunction]
#[pyo3(signature = (tf, weighted = false))]
fn bode_quadrature(py: Python<'_>, tf: &PyRationalTF, weighted: bool) -> PyResult<Py<PyAny>> {
    to_py(py, &limits::bode_quadrature(&tf.inner, weight(weighted)).map_err(err)?)
}

/// Bounds, quadratures and verdicts of the four closed-loop integrals.
#[pyfunction]
#[pyo3(signature = (plant, controller, slack = limits::DEFAULT_SLACK))]
fn corollary3_report(py: Python<'_>, plant: &PyRationalTF, controller: &PyRationalTF, slack: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &limits::corollary3_report(&plant.inner, &controller.inner, slack).map_err(err)?)
}

/// The gang of four `(t_uw, t_yw, t_ud, t_yd)`.
#[pyfunction]
fn gang_of_four(plant: &PyRationalTF, controller: &PyRationalTF) -> PyResult<(PyRationalTF, PyRationalTF, PyRationalTF, PyRationalTF)> {
    let g = lti::gang_of_four(&plant.inner, &controller.inner).map_err(err)?;
    let w = |t: lti::RationalTF| PyRationalTF { inner: t };
    Ok((w(g.t_uw), w(g.t_yw), w(g.t_ud), w(g.t_yd)))
}

/// Simulated loop channels as lists, keyed by channel name.
#[pyfunction]
#[pyo3(signature = (plant, controller, dt, duration, seed, injection = "control_noise", ou_rate = None, intensity = 1.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_loop(
    py: Python<'_>,
    plant: &PyRationalTF,
    controller: &PyRationalTF,
    dt: f64,
    duration: f64,
    seed: u64,
    injection: &str,
    ou_rate: Option<f64>,
    intensity: f64,
) -> PyResult<Py<PyDict>> {
    let inj = self::injection(injection)?;
    let noise = match noise_spec(ou_rate, intensity)? {
        Some(n) => n,
        None => {
            let poles = verify::variant_poles(&plant.inner, &controller.inner, inj).map_err(err)?;
            let mut n = NoiseSpec::default_for_poles(&poles).map_err(err)?;
            n.intensity = intensity;
            n
        }
    };
    let lp = noise.loop_realization(&plant.inner, &controller.inner, inj).map_err(err)?;
    let bundle = py
        .detach(|| stochsim::simulate(&lp, &SimParams { dt, duration, seed }))
        .map_err(err)?;
    let out = PyDict::new(py);
    for (ch, x) in &bundle.channels {
        out.set_item(ch.name(), x.clone())?;
    }
    out.set_item("dt", bundle.dt)?;
    out.set_item("burn_in_samples", bundle.burn_in_samples)?;
    Ok(out.unbind())
}

fn pair_bundle(x: Vec<f64>, y: Option<Vec<f64>>, dt: f64) -> PyResult<SignalBundle> {
    let mut ch = BTreeMap::new();
    ch.insert(Channel::U, x);
    if let Some(y) = y {
        ch.insert(Channel::V, y);
    }
    SignalBundle::new(dt, ch, 0, 0).map_err(err)
}

/// Two-sided Welch PSD per rad/s: `(omega, values)`.
#[pyfunction]
#[pyo3(signature = (x, dt, nperseg = None))]
fn welch_psd(x: Vec<f64>, dt: f64, nperseg: Option<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let b = pair_bundle(x, None, dt)?;
    let cs = CrossSpectra::compute(&b, &[Channel::U], WelchOptions { nperseg, overlap: 0.5 }).map_err(err)?;
    let e = cs.estimate(Channel::U, Channel::U).map_err(err)?;
    Ok((e.omega.clone(), e.real()))
}

/// Gaussian mutual-information rate of two series from their coherence, in nats per second.
#[pyfunction]
#[pyo3(signature = (x, y, dt, nperseg = None, band = None))]
fn mi_rate(x: Vec<f64>, y: Vec<f64>, dt: f64, nperseg: Option<usize>, band: Option<(f64, f64)>) -> PyResult<f64> {
    let b = pair_bundle(x, Some(y), dt)?;
    let (u, v) = (Channel::U, Channel::V);
    let cs = CrossSpectra::compute(&b, &[u, v], WelchOptions { nperseg, overlap: 0.5 }).map_err(err)?;
    let est = |a, b| cs.estimate(a, b).map_err(err);
    let r = spectral::mi_rate_pinsker_band(&est(u, u)?, &est(v, v)?, &est(u, v)?, band).map_err(err)?;
    Ok(r.value)
}

fn plan(seed: u64, samples: usize, trials: usize) -> SimPlan {
    SimPlan {
        seed,
        n_samples: samples,
        trials,
        ..SimPlan::default()
    }
}

/// Every check on one loop; the report as a dict.
#[pyfunction]
#[pyo3(signature = (plant, controller, seed, samples = verify::DEFAULT_SAMPLES, trials = 1, system_id = "system", ou_rate = None, intensity = 1.0))]
#[allow(clippy::too_many_arguments)]
fn verify_system(
    py: Python<'_>,
    plant: &PyRationalTF,
    controller: &PyRationalTF,
    seed: u64,
    samples: usize,
    trials: usize,
    system_id: &str,
    ou_rate: Option<f64>,
    intensity: f64,
) -> PyResult<Py<PyAny>> {
    let sys = SystemSpec {
        id: system_id.into(),
        plant: plant.inner.clone(),
        controller: controller.inner.clone(),
        noise: noise_spec(ou_rate, intensity)?,
    };
    let p = plan(seed, samples, trials);
    let rep = py.detach(|| verify::analyze_system(&sys, 0, &p, &VerifyOptions::default()));
    to_py(py, &rep)
}

/// Reports for the bundled example systems.
#[pyfunction]
#[pyo3(signature = (seed, samples = verify::DEFAULT_SAMPLES, trials = 1))]
fn verify_bundled(py: Python<'_>, seed: u64, samples: usize, trials: usize) -> PyResult<Py<PyAny>> {
    let p = plan(seed, samples, trials);
    let reps = py.detach(|| verify::run_full_suite(&verify::bundled_systems(), &p, &VerifyOptions::default()));
    to_py(py, &reps)
}

/// Text table of a list of report dicts.
#[pyfunction]
fn render_reports(py: Python<'_>, reports: Py<PyAny>) -> PyResult<String> {
    let text: String = py.import("json")?.call_method1("dumps", (reports,))?.extract()?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(err)?;
    Ok(verify::render_value(&v))
}

#[pymodule]
fn bode_limits_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRationalTF>()?;
    m.add_function(wrap_pyfunction!(analytic_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(bode_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(corollary3_report, m)?)?;
    m.add_function(wrap_pyfunction!(gang_of_four, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_loop, m)?)?;
    m.add_function(wrap_pyfunction!(welch_psd, m)?)?;
    m.add_function(wrap_pyfunction!(mi_rate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_system, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bundled, m)?)?;
    m.add_function(wrap_pyfunction!(render_reports, m)?)?;
    Ok(())
}

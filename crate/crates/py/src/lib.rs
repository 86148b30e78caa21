//! Python module `strobosq_py`: couplings, pulse train, closed forms,
//! trajectory simulation, spectra and fitting.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use strobosq::analytic::{self, FitModel, LightSpectrumInputs, SpinSqueezingInputs};
use strobosq::dynamics::{self, GaussianSpinState, NoiseMode, SimulationOptions};
use strobosq::fitlab::{self, FitProblem};
use strobosq::params::{self, InteractionRates};
use strobosq::spectral;
use strobosq::strobe::{self, StroboConfig};
use strobosq::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Checkpoint(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "InteractionRates", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyRates(InteractionRates);

#[pymethods]
impl PyRates {
    #[new]
    #[pyo3(signature = (kappa, zeta2, gamma_ex, larmor))]
    fn new(kappa: f64, zeta2: f64, gamma_ex: f64, larmor: f64) -> Self {
        Self(InteractionRates {
            kappa,
            zeta2,
            gamma_ex,
            larmor,
        })
    }

    /// Rates giving total decay `gamma_total` and probe fraction `epsilon`
    /// at duty cycle `duty`.
    #[staticmethod]
    fn from_reduced(zeta2: f64, gamma_total: f64, epsilon: f64, duty: f64, larmor: f64) -> PyResult<Self> {
        InteractionRates::from_reduced(zeta2, gamma_total, epsilon, duty, larmor)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa
    }
    #[getter]
    fn zeta2(&self) -> f64 {
        self.0.zeta2
    }
    #[getter]
    fn gamma_ex(&self) -> f64 {
        self.0.gamma_ex
    }
    #[getter]
    fn larmor(&self) -> f64 {
        self.0.larmor
    }

    fn gamma_total(&self, duty: f64) -> f64 {
        self.0.gamma_total(duty)
    }

    fn epsilon(&self, duty: f64) -> f64 {
        self.0.epsilon(duty)
    }

    fn __repr__(&self) -> String {
        let r = &self.0;
        format!(
            "InteractionRates(kappa={}, zeta2={}, gamma_ex={}, larmor={})",
            r.kappa, r.zeta2, r.gamma_ex, r.larmor
        )
    }
}

#[pyclass(name = "StroboConfig", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyStrobo(StroboConfig);

#[pymethods]
impl PyStrobo {
    #[new]
    #[pyo3(signature = (duty, omega_m, phase=0.0, n_max=None))]
    fn new(duty: f64, omega_m: f64, phase: f64, n_max: Option<usize>) -> PyResult<Self> {
        let n = n_max.unwrap_or_else(|| strobe::default_n_max(duty));
        StroboConfig::new(duty, omega_m, phase, n).map(Self).map_err(py_err)
    }

    /// Pulse train at twice the Larmor frequency.
    #[staticmethod]
    fn locked(duty: f64, larmor: f64) -> PyResult<Self> {
        StroboConfig::locked(duty, larmor).map(Self).map_err(py_err)
    }

    #[getter]
    fn duty(&self) -> f64 {
        self.0.duty
    }
    #[getter]
    fn omega_m(&self) -> f64 {
        self.0.omega_m
    }
    #[getter]
    fn phase(&self) -> f64 {
        self.0.phase
    }
    #[getter]
    fn n_max(&self) -> usize {
        self.0.n_max
    }

    fn period(&self) -> f64 {
        self.0.period()
    }

    /// 1 while the probe is on at time `t`, else 0.
    fn profile(&self, t: f64) -> f64 {
        self.0.profile(t)
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!(
            "StroboConfig(duty={}, omega_m={}, phase={}, n_max={})",
            s.duty, s.omega_m, s.phase, s.n_max
        )
    }
}

#[pyclass(name = "TimeGrid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(dynamics::TimeGrid);

#[pymethods]
impl PyGrid {
    /// Grid for `time` seconds, snapped to whole stroboscopic periods.
    /// Without `samples_per_period` the coarsest admissible resolution is
    /// chosen.
    #[new]
    #[pyo3(signature = (strobo, larmor, time, samples_per_period=None))]
    fn new(strobo: &PyStrobo, larmor: f64, time: f64, samples_per_period: Option<usize>) -> PyResult<Self> {
        let g = match samples_per_period {
            Some(m) => dynamics::TimeGrid::new(&strobo.0, larmor, time, m),
            None => dynamics::TimeGrid::auto(&strobo.0, larmor, time),
        };
        g.map(Self).map_err(py_err)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }
    #[getter]
    fn total_time(&self) -> f64 {
        self.0.total_time
    }
    #[getter]
    fn n_steps(&self) -> usize {
        self.0.n_steps
    }
    #[getter]
    fn samples_per_period(&self) -> usize {
        self.0.samples_per_period
    }

    fn __repr__(&self) -> String {
        let g = &self.0;
        format!(
            "TimeGrid(dt={}, total_time={}, n_steps={}, samples_per_period={})",
            g.dt, g.total_time, g.n_steps, g.samples_per_period
        )
    }
}

/// Euler-Maruyama integrator for one configuration.
#[pyclass(name = "Simulator", frozen)]
struct PySimulator(dynamics::Simulator);

#[pymethods]
impl PySimulator {
    #[new]
    #[pyo3(signature = (rates, strobo, grid, initial_mean=(0.0, 0.0), initial_scale=1.0, noise=true))]
    fn new(
        rates: &PyRates,
        strobo: &PyStrobo,
        grid: &PyGrid,
        initial_mean: (f64, f64),
        initial_scale: f64,
        noise: bool,
    ) -> PyResult<Self> {
        let opts = SimulationOptions {
            initial: GaussianSpinState::coherent_scaled(initial_scale).with_mean(initial_mean.0, initial_mean.1),
            noise: if noise { NoiseMode::Full } else { NoiseMode::Suppressed },
        };
        dynamics::Simulator::new(&rates.0, &strobo.0, &grid.0, opts)
            .map(Self)
            .map_err(py_err)
    }

    /// `(x_A, p_A)` at the end of trajectory `seed`.
    fn final_state(&self, py: Python<'_>, seed: u64) -> (f64, f64) {
        let [x, p] = py.detach(|| self.0.final_state(seed));
        (x, p)
    }

    /// Full record as a dict of lists: `times`, `x_a`, `p_a`, `x_out`,
    /// `p_out` and the `final_state` tuple.
    fn record<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let r = py.detach(|| self.0.record(seed));
        let d = PyDict::new(py);
        d.set_item("seed", r.seed)?;
        d.set_item("times", r.times)?;
        d.set_item("x_a", r.atom_series.iter().map(|s| s[0]).collect::<Vec<_>>())?;
        d.set_item("p_a", r.atom_series.iter().map(|s| s[1]).collect::<Vec<_>>())?;
        d.set_item("x_out", r.light_out_series.iter().map(|s| s[0]).collect::<Vec<_>>())?;
        d.set_item("p_out", r.light_out_series.iter().map(|s| s[1]).collect::<Vec<_>>())?;
        d.set_item("final_state", (r.final_state[0], r.final_state[1]))?;
        Ok(d)
    }

    /// `(variance, std_error)` of the quadrature at `angle` (radians)
    /// over `n_traj` trajectories.
    #[pyo3(signature = (n_traj, seed=1, angle=0.0))]
    fn ensemble_variance(&self, py: Python<'_>, n_traj: usize, seed: u64, angle: f64) -> PyResult<(f64, f64)> {
        let ev = py
            .detach(|| dynamics::ensemble_variance_with(&self.0, n_traj, seed, angle))
            .map_err(py_err)?;
        Ok((ev.variance, ev.std_error))
    }

    /// Ensemble periodogram of `p_out` on `freqs` (rad/s).
    #[pyo3(signature = (freqs, n_traj, seed=1))]
    fn spectrum<'py>(
        &self,
        py: Python<'py>,
        freqs: Vec<f64>,
        n_traj: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s = py
            .detach(|| spectral::simulate_spectrum(&self.0, &freqs, n_traj, seed))
            .map_err(py_err)?;
        spectrum_dict(py, s)
    }
}

fn spectrum_dict(py: Python<'_>, s: spectral::SpectrumResult) -> PyResult<Bound<'_, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("omega_rad_s", s.freqs)?;
    d.set_item("s_est", s.s_est)?;
    d.set_item("s_shot", s.s_shot)?;
    d.set_item("xi_l2", s.xi_l2)?;
    d.set_item("stderr", s.stderr)?;
    d.set_item("n_ensemble", s.n_ensemble)?;
    Ok(d)
}

/// `(a0, a1, a2, zeta2)` at `detuning` with hyperfine splittings
/// `delta13`, `delta23` (all rad/s).
#[pyfunction]
fn a_coefficients(detuning: f64, delta13: f64, delta23: f64) -> PyResult<(f64, f64, f64, Option<f64>)> {
    let a = params::a_coefficients(detuning, delta13, delta23).map_err(py_err)?;
    Ok((a.a0, a.a1, a.a2, a.zeta2()))
}

/// `A_n = d sinc(pi n d)`.
#[pyfunction]
fn fourier_coeff(n: i64, duty: f64) -> f64 {
    strobe::fourier_coeff(n, duty)
}

/// Spin squeezing parameter at time `time`; `angle` in radians.
#[pyfunction]
#[pyo3(signature = (gamma_total, epsilon, duty, zeta2, time, t1=None, angle=0.0))]
fn spin_squeezing(
    gamma_total: f64,
    epsilon: f64,
    duty: f64,
    zeta2: f64,
    time: f64,
    t1: Option<f64>,
    angle: f64,
) -> PyResult<f64> {
    analytic::spin_squeezing_param(&SpinSqueezingInputs {
        gamma_total,
        epsilon,
        duty,
        zeta2,
        time,
        t1,
        quad_angle: angle,
    })
    .map_err(py_err)
}

/// Normalized output-light spectrum at each of `omegas` (rad/s).
#[pyfunction]
fn light_spectrum(
    omegas: Vec<f64>,
    gamma_total: f64,
    epsilon: f64,
    zeta2: f64,
    duty: f64,
    time: f64,
    larmor: f64,
) -> PyResult<Vec<f64>> {
    let inputs = LightSpectrumInputs::new(gamma_total, epsilon, zeta2, duty, time, larmor);
    omegas
        .iter()
        .map(|&w| analytic::light_spectrum(w, &inputs).map(|p| p.xi_l2).map_err(py_err))
        .collect()
}

/// Light squeezing at the center of the `n`-th peak, `(2n + 1) larmor`.
#[pyfunction]
fn sideband_squeezing(
    n: u32,
    gamma_total: f64,
    epsilon: f64,
    zeta2: f64,
    duty: f64,
    time: f64,
    larmor: f64,
) -> PyResult<f64> {
    let inputs = LightSpectrumInputs::new(gamma_total, epsilon, zeta2, duty, time, larmor);
    analytic::sideband_squeezing(n, &inputs).map_err(py_err)
}

type Moments = ((f64, f64), [[f64; 2]; 2]);

/// Mean and covariance of `(x_A, p_A)` at the end of the grid, starting
/// from a coherent state.
#[pyfunction]
fn final_moments(rates: &PyRates, strobo: &PyStrobo, grid: &PyGrid) -> PyResult<Moments> {
    let s = dynamics::final_moments(&rates.0, &strobo.0, &grid.0, &GaussianSpinState::coherent()).map_err(py_err)?;
    Ok(((s.mean[0], s.mean[1]), s.cov))
}

/// `center +- 20 gamma` in steps of `gamma / 10`.
#[pyfunction]
fn default_frequency_grid(center: f64, gamma: f64) -> Vec<f64> {
    spectral::default_frequency_grid(center, gamma)
}

/// Evaluates model `model` at each of `x`.
#[pyfunction]
fn eval_model(model: &str, params: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
    analytic::fit_models(model, &params, &x).map_err(py_err)
}

/// Damped least-squares fit of model `model`; returns a dict with
/// `params`, `stderr`, `covariance`, `rss`, `converged`, `iterations`.
#[pyfunction]
#[pyo3(signature = (model, x, y, initial, weights=None, tol=fitlab::DEFAULT_TOL, max_iter=fitlab::DEFAULT_MAX_ITER))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    model: &str,
    x: Vec<f64>,
    y: Vec<f64>,
    initial: Vec<f64>,
    weights: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let model: FitModel = model.parse().map_err(py_err)?;
    let mut problem = FitProblem::new(model, x, y, initial);
    problem.weights = weights;
    let res = fitlab::fit(&problem, tol, max_iter).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("names", model.param_names().to_vec())?;
    d.set_item("stderr", res.std_errors())?;
    d.set_item("params", res.params)?;
    d.set_item("covariance", res.covariance)?;
    d.set_item("rss", res.rss)?;
    d.set_item("converged", res.converged)?;
    d.set_item("iterations", res.iterations)?;
    Ok(d)
}

#[pymodule]
fn strobosq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRates>()?;
    m.add_class::<PyStrobo>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(a_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(spin_squeezing, m)?)?;
    m.add_function(wrap_pyfunction!(light_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(sideband_squeezing, m)?)?;
    m.add_function(wrap_pyfunction!(final_moments, m)?)?;
    m.add_function(wrap_pyfunction!(default_frequency_grid, m)?)?;
    m.add_function(wrap_pyfunction!(eval_model, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add("SHOT_NOISE", analytic::SHOT_NOISE)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_runs_a_small_pipeline() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "strobosq_py").unwrap();
            strobosq_py(&m).unwrap();
            let larmor = 2.0 * std::f64::consts::PI * 500e3;
            let rates = m
                .getattr("InteractionRates")
                .unwrap()
                .call_method1("from_reduced", (0.1, larmor / 100.0, 1.0, 0.08, larmor))
                .unwrap();
            let strobo = m
                .getattr("StroboConfig")
                .unwrap()
                .call_method1("locked", (0.08, larmor))
                .unwrap();
            let grid = m
                .getattr("TimeGrid")
                .unwrap()
                .call1((&strobo, larmor, 100.0 / larmor))
                .unwrap();
            let sim = m.getattr("Simulator").unwrap().call1((&rates, &strobo, &grid)).unwrap();
            let (x, p): (f64, f64) = sim.call_method1("final_state", (5u64,)).unwrap().extract().unwrap();
            assert!(x.is_finite() && p.is_finite());
        });
    }

    #[test]
    fn errors_become_value_errors() {
        Python::initialize();
        Python::attach(|py| {
            let err = PyStrobo::locked(1.5, 1.0).err().unwrap();
            assert!(err.is_instance_of::<PyValueError>(py));
        });
    }
}

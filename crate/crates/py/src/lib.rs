//! Python bindings for the stochastic-convolution laboratory.
//!
//! Exposes the main types and operations of the core crate: sequence spaces
//! and their norms, Gaussian-sum norms of finite-rank operators, ensemble
//! simulation of stochastic convolutions, moment/tail estimators, the
//! Poisson-kernel dilation identity, smoothness-constant probes, and the
//! full experiment runner driven by a TOML config string.

use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use convolab::dilation::{verify_dilation_identity, DilationRep};
use convolab::estimators::{self, MomentReport};
use convolab::gammanorm::{self, GammaOperator};
use convolab::linalg::{CMat, CVec};
use convolab::model::{Generator, LqSpace, SpectralGenerator};
use convolab::renorm::cr_bound_probe;
use convolab::simulate::{ou_variance_coeff, simulate_ensemble, Integrator, StepProcess, TimeGrid};

fn err(e: convolab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_cvec(x: Vec<Complex64>) -> CVec {
    Array1::from(x)
}

fn to_cmat(rows: Vec<Vec<Complex64>>) -> PyResult<CMat> {
    let d = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((d, m), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn moment_dict<'py>(py: Python<'py>, r: &MomentReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("p", r.p)?;
    d.set_item("value", r.value)?;
    d.set_item("ci_low", r.ci_low)?;
    d.set_item("ci_high", r.ci_high)?;
    d.set_item("n", r.n)?;
    Ok(d)
}

/// A finite-dimensional l^q space: the ambient state space of every model.
#[pyclass(name = "Space")]
struct PySpace {
    inner: LqSpace,
}

#[pymethods]
impl PySpace {
    #[new]
    fn new(q: f64, d: usize) -> PyResult<Self> {
        Ok(PySpace {
            inner: LqSpace::new(q, d).map_err(err)?,
        })
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    /// The l^q norm of a complex vector of length d.
    fn norm(&self, x: Vec<Complex64>) -> PyResult<f64> {
        if x.len() != self.inner.d {
            return Err(PyValueError::new_err("vector length must equal d"));
        }
        Ok(self.inner.norm_vec(&to_cvec(x)))
    }

    fn __repr__(&self) -> String {
        format!("Space(q={}, d={})", self.inner.q, self.inner.d)
    }
}

/// A finite-rank operator from the noise space into l^q, given by its
/// complex matrix (d rows, one column per noise direction).
#[pyclass(name = "GammaMap")]
struct PyGammaMap {
    inner: GammaOperator,
}

#[pymethods]
impl PyGammaMap {
    #[new]
    fn new(rows: Vec<Vec<Complex64>>, q: f64) -> PyResult<Self> {
        Ok(PyGammaMap {
            inner: GammaOperator::new(to_cmat(rows)?, q).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }

    /// The square-function norm: the l^q norm of the per-coordinate
    /// root-sum-of-squares profile. Closed form, no sampling.
    fn square_function_norm(&self) -> f64 {
        gammanorm::square_function_norm(&self.inner)
    }

    /// Monte Carlo estimate of the Gaussian-sum norm (E ||sum_j g_j F e_j||^2)^(1/2)
    /// with a 95% confidence interval. Returns (value, ci_low, ci_high).
    fn gamma_norm(&self, n: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
        let e = gammanorm::gamma_norm_mc(&self.inner, n, seed).map_err(err)?;
        Ok((e.value, e.ci_low, e.ci_high))
    }

    fn __repr__(&self) -> String {
        format!(
            "GammaMap(d={}, noise_dim={})",
            self.inner.dim(),
            self.inner.noise_dim()
        )
    }
}

/// The q-dependent constant relating the square-function norm to the
/// Gaussian-sum norm: the L^q norm of a standard Gaussian.
#[pyfunction]
fn kappa(q: f64) -> f64 {
    gammanorm::kappa_q(q)
}

/// Exact one-step variance coefficient of the scalar Ornstein-Uhlenbeck
/// update with mode mu over a step of length dt.
#[pyfunction]
fn ou_variance(mu: Complex64, dt: f64) -> f64 {
    ou_variance_coeff(mu, dt)
}

/// Simulate the stochastic convolution for a diagonal (spectral) generator
/// with the identity-pattern constant integrand. Returns (sups, terminals):
/// per-path running-sup norms and terminal norms.
///
/// `modes` are the decay rates mu_k of the generator A = -diag(mu_k);
/// each must satisfy Re mu_k > 0 and |arg mu_k| < pi/2.
#[pyfunction]
#[pyo3(signature = (modes, q, t_end, steps, paths, seed, exact=true))]
#[allow(clippy::too_many_arguments)]
fn simulate_convolution(
    modes: Vec<Complex64>,
    q: f64,
    t_end: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    exact: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let d = modes.len();
    let gen = Generator::Spectral(SpectralGenerator::new(modes, q).map_err(err)?);
    let grid = TimeGrid::uniform(t_end, steps).map_err(err)?;
    let mut e = CMat::from_elem((d, d), Complex64::new(0.0, 0.0));
    for k in 0..d {
        e[(k, k)] = Complex64::new(1.0, 0.0);
    }
    let proc = StepProcess::constant(GammaOperator::new(e, q).map_err(err)?, steps).map_err(err)?;
    let integrator = if exact {
        Integrator::Exact
    } else {
        Integrator::ExponentialEuler
    };
    let ens = simulate_ensemble(&gen, &proc, &grid, paths, seed, integrator, false).map_err(err)?;
    Ok((ens.sups, ens.terminals))
}

/// Power mean (mean of v^p)^(1/p) with a batch-means confidence interval.
#[pyfunction]
fn estimate_pth_moment<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    p: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = estimators::estimate_pth_moment(&values, p).map_err(err)?;
    moment_dict(py, &r)
}

/// Ratio of the p-th moment of path suprema to the p-th moment of terminal
/// values, with a propagated confidence interval (martingale maximal factor).
#[pyfunction]
fn doob_ratio<'py>(
    py: Python<'py>,
    sups: Vec<f64>,
    terminals: Vec<f64>,
    p: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = estimators::doob_ratio(&sups, &terminals, p).map_err(err)?;
    moment_dict(py, &r)
}

/// Residual of the Poisson-kernel dilation identity J S(t) x = P U(t) J x
/// for a diagonal generator with the given modes, at time t and state x.
#[pyfunction]
fn dilation_residual(modes: Vec<Complex64>, q: f64, t: f64, x: Vec<Complex64>) -> PyResult<f64> {
    if x.len() != modes.len() {
        return Err(PyValueError::new_err("x length must match number of modes"));
    }
    let rep = DilationRep::new(SpectralGenerator::new(modes, q).map_err(err)?);
    verify_dilation_identity(&rep, t, &to_cvec(x)).map_err(err)
}

/// Empirical smoothness constants of the r-th power of the l^q norm over a
/// random cloud plus deterministic extremal candidates. Returns a dict with
/// k1_hat (= r), k2_hat, and the homogeneity residual.
#[pyfunction]
fn cr_probe<'py>(
    py: Python<'py>,
    r: f64,
    q: f64,
    d: usize,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = cr_bound_probe(r, q, d, n, seed).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("r", p.r)?;
    out.set_item("q", p.q)?;
    out.set_item("k1_hat", p.k1_hat)?;
    out.set_item("k2_hat", p.k2_hat)?;
    out.set_item("scale_residual", p.scale_residual)?;
    Ok(out)
}

/// Run one experiment from a TOML config string, writing the report and CSV
/// tables into out_dir. Returns the report parsed into a Python dict.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str, out_dir: &str) -> PyResult<PyObject> {
    let cfg = convolab::config::ExperimentConfig::from_toml(config_toml).map_err(err)?;
    let out = convolab::experiment::run_experiment(&cfg, Path::new(out_dir)).map_err(err)?;
    let json = out.report.to_json();
    let module = py.import("json")?;
    let obj = module.call_method1("loads", (json,))?;
    Ok(obj.unbind())
}

/// Canonical hash of a TOML config (what reports record as config_hash).
#[pyfunction]
fn config_hash(config_toml: &str) -> PyResult<String> {
    let cfg = convolab::config::ExperimentConfig::from_toml(config_toml).map_err(err)?;
    Ok(cfg.hash())
}

#[pymodule]
fn convolab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyGammaMap>()?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(ou_variance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_convolution, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_pth_moment, m)?)?;
    m.add_function(wrap_pyfunction!(doob_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(dilation_residual, m)?)?;
    m.add_function(wrap_pyfunction!(cr_probe, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    Ok(())
}

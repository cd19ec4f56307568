//! Python bindings: distribution, purification, swapping, chain and rate
//! planning, plus the effective-Hamiltonian validation as a JSON report.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qrepeater::distribution::{self as dist, DistributionParams};
use qrepeater::effective::{self, EffectiveScenario};
use qrepeater::field::LossChannel;
use qrepeater::planner;
use qrepeater::purification::{self, TripletEvolutionSpec};
use qrepeater::qmat::BellState;
use qrepeater::swapping::{self, SwapMethod};
use qrepeater::{Error, C64};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::NonImaginaryDisplacement { .. }
        | Error::HierarchyViolated(_)
        | Error::MismatchedSegments(_)
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<SwapMethod> {
    name.parse().map_err(to_py)
}

fn params(alpha: f64, ell_km: f64, beta: f64, attenuation_km: f64) -> PyResult<DistributionParams> {
    DistributionParams::new(alpha, LossChannel::new(ell_km, attenuation_km).map_err(to_py)?, beta).map_err(to_py)
}

/// Bell-diagonal two-qubit state; weights ordered φ⁺, φ⁻, ψ⁺, ψ⁻.
#[pyclass(name = "BellDiagonalPair", module = "qrepeater", from_py_object)]
#[derive(Clone)]
struct PyPair {
    inner: dist::BellDiagonalPair,
}

#[pymethods]
impl PyPair {
    #[new]
    fn new(weights: [f64; 4]) -> PyResult<Self> {
        Ok(Self { inner: dist::BellDiagonalPair::new(weights).map_err(to_py)? })
    }

    #[getter]
    fn weights(&self) -> [f64; 4] {
        self.inner.weights()
    }

    /// Largest Bell weight.
    fn fidelity(&self) -> f64 {
        self.inner.fidelity()
    }

    /// Label of the dominant Bell state.
    fn dominant(&self) -> &'static str {
        self.inner.dominant().0.label()
    }

    #[pyo3(signature = (tol = 1e-12))]
    fn rank(&self, tol: f64) -> usize {
        self.inner.rank(tol)
    }

    fn __repr__(&self) -> String {
        let w = self.inner.weights();
        format!("BellDiagonalPair([{}, {}, {}, {}])", w[0], w[1], w[2], w[3])
    }
}

#[pyclass(name = "RepeaterParams", module = "qrepeater", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: planner::RepeaterParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha = 1.0, ell_km = 10.0, n_segments = 1, attenuation_km = 25.0, p_swap = 0.9, fiber_speed_mps = 2e8, method = "conventional"))]
    fn new(
        alpha: f64,
        ell_km: f64,
        n_segments: u32,
        attenuation_km: f64,
        p_swap: f64,
        fiber_speed_mps: f64,
        method: &str,
    ) -> PyResult<Self> {
        let inner = planner::RepeaterParams {
            alpha_mag: alpha,
            ell_km,
            n_segments,
            attenuation_km,
            p_swap,
            fiber_speed_mps,
            method: self::method(method)?,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha_mag
    }

    #[getter]
    fn ell_km(&self) -> f64 {
        self.inner.ell_km
    }

    #[getter]
    fn n_segments(&self) -> u32 {
        self.inner.n_segments
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("RepeaterParams(alpha={}, ell_km={}, n_segments={}, method={:?})", p.alpha_mag, p.ell_km, p.n_segments, p.method.label())
    }
}

/// Heralded pair: (state, success probability).
#[pyfunction]
#[pyo3(signature = (alpha, ell_km, beta = 1.0, attenuation_km = 25.0))]
fn distribute_pair(alpha: f64, ell_km: f64, beta: f64, attenuation_km: f64) -> PyResult<(PyPair, f64)> {
    let h = dist::distribute_pair(&params(alpha, ell_km, beta, attenuation_km)?).map_err(to_py)?;
    Ok((PyPair { inner: h.state }, h.success_prob))
}

/// Heralded four-atom state as a 16×16 nested list of complex numbers.
#[pyfunction]
#[pyo3(signature = (alpha, ell_km, beta = 1.0, attenuation_km = 25.0))]
fn distribute_quad(alpha: f64, ell_km: f64, beta: f64, attenuation_km: f64) -> PyResult<(Vec<Vec<C64>>, f64)> {
    let h = dist::distribute_quad(&params(alpha, ell_km, beta, attenuation_km)?).map_err(to_py)?;
    let m = h.state.matrix();
    Ok(((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect(), h.success_prob))
}

/// Purifies a freshly distributed pair: (state, total success probability).
#[pyfunction]
#[pyo3(signature = (alpha, ell_km, j2_angle = TripletEvolutionSpec::ANGLE))]
fn purify(alpha: f64, ell_km: f64, j2_angle: f64) -> PyResult<(PyPair, f64)> {
    let p = DistributionParams::standard(alpha, ell_km).map_err(to_py)?;
    let pair = dist::distribute_pair(&p).map_err(to_py)?;
    let quad = dist::distribute_quad(&p).map_err(to_py)?;
    let spec = TripletEvolutionSpec::with_angle(1.0, j2_angle).map_err(to_py)?;
    let r = purification::purify(&pair, &quad, &spec).map_err(to_py)?;
    Ok((PyPair { inner: r.outcomes[0].state }, r.total_success_prob))
}

#[pyfunction]
fn purified_fidelity_closed_form(f: f64, alpha: f64, eta: f64) -> f64 {
    purification::purified_fidelity_closed_form(f, alpha, eta)
}

/// Frame-corrected result of swapping three copies of `pair`.
#[pyfunction]
#[pyo3(signature = (pair, method = "conventional"))]
fn swap(pair: &PyPair, method: &str) -> PyResult<PyPair> {
    let p = &pair.inner;
    let r = swapping::swap(p, p, p, self::method(method)?).map_err(to_py)?;
    Ok(PyPair { inner: r.corrected() })
}

/// Final φ⁻ weight of an N-segment chain of rank-2 segments with fidelity `f`.
#[pyfunction]
#[pyo3(signature = (f, n_segments, method = "conventional"))]
fn chain_compose(f: f64, n_segments: u32, method: &str) -> PyResult<f64> {
    let seg = dist::BellDiagonalPair::rank2(BellState::PhiMinus, BellState::PsiMinus, f).map_err(to_py)?;
    Ok(swapping::chain_compose_pairs(&seg, n_segments, self::method(method)?).map_err(to_py)?.f_final)
}

#[pyfunction]
fn success_probability(params: &PyParams) -> f64 {
    planner::success_probability(&params.inner)
}

/// Entangled pairs per second.
#[pyfunction]
fn rate(params: &PyParams) -> PyResult<f64> {
    planner::rate(&params.inner).map_err(to_py)
}

#[pyfunction]
fn chain_fidelity(params: &PyParams) -> PyResult<f64> {
    planner::chain_fidelity(&params.inner).map_err(to_py)
}

/// Largest segment length reaching `target`; inf when every length does.
#[pyfunction]
fn solve_segment_length(params: &PyParams, target: f64) -> PyResult<f64> {
    planner::solve_segment_length(&params.inner, target).map_err(to_py)
}

/// Full-dynamics validation of one effective scenario, as JSON.
#[pyfunction]
#[pyo3(signature = (target = "controlled_displacement"))]
fn validate_appendix(py: Python<'_>, target: &str) -> PyResult<String> {
    let s = match target {
        "controlled_displacement" => EffectiveScenario::default_displacement(),
        "xx_effective" => EffectiveScenario::default_xx(),
        "xy_effective" => EffectiveScenario::default_xy(),
        other => return Err(PyValueError::new_err(format!("unknown target {other:?}"))),
    };
    let report = py.detach(|| effective::validate(&s)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule(name = "qrepeater")]
fn qrepeater_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPair>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(distribute_pair, m)?)?;
    m.add_function(wrap_pyfunction!(distribute_quad, m)?)?;
    m.add_function(wrap_pyfunction!(purify, m)?)?;
    m.add_function(wrap_pyfunction!(purified_fidelity_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(swap, m)?)?;
    m.add_function(wrap_pyfunction!(chain_compose, m)?)?;
    m.add_function(wrap_pyfunction!(success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(chain_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(solve_segment_length, m)?)?;
    m.add_function(wrap_pyfunction!(validate_appendix, m)?)?;
    Ok(())
}

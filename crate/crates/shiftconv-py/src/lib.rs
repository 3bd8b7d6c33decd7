//! Python bindings for `shiftconv`.

use num_rational::Ratio;
use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use shiftconv::experiments::{self, ExperimentConfig};
use shiftconv::mainterm::{self, Truncation};
use shiftconv::sums::{self, CertainQuery, ConvolutionQuery};
use shiftconv::weights::SmoothWeight;
use shiftconv::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Capacity(_) => PyMemoryError::new_err(e.to_string()),
        Error::InvalidInput(_) | Error::Domain(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn weight(name: &str) -> PyResult<SmoothWeight> {
    SmoothWeight::by_name(name).map_err(py_err)
}

fn to_fraction<'py>(py: Python<'py>, q: Ratio<i64>) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((*q.numer(), *q.denom()))
}

/// Accepts an int, a `fractions.Fraction`, or a float (rounded to denominator 10^6).
fn from_number(v: &Bound<'_, PyAny>) -> PyResult<Ratio<i64>> {
    if let (Ok(n), Ok(d)) = (v.getattr("numerator"), v.getattr("denominator")) {
        if let (Ok(n), Ok(d)) = (n.extract::<i64>(), d.extract::<i64>()) {
            return Ok(Ratio::new(n, d));
        }
    }
    Ok(experiments::to_ratio(v.extract::<f64>()?))
}

/// `d_k(n)` for `0 <= n <= limit`; entry 0 is 0.
#[pyfunction]
fn sieve_dk(k: u32, limit: usize) -> PyResult<Vec<u64>> {
    let t = shiftconv::arith::sieve_dk(k, limit).map_err(py_err)?;
    Ok((0..=limit).map(|n| if n == 0 { 0 } else { t.get(n) }).collect())
}

#[pyfunction]
fn ramanujan_sum(d: u64, h: i64) -> PyResult<i64> {
    shiftconv::arith::ramanujan_sum(d, h).map_err(py_err)
}

#[pyfunction]
fn factorize(n: u64) -> PyResult<Vec<(u64, u32)>> {
    Ok(shiftconv::arith::factorize(n).map_err(py_err)?.factors)
}

#[pyfunction]
#[pyo3(signature = (k, h, x, weight_name = "mollifier"))]
fn direct_sum(k: u32, h: i64, x: f64, weight_name: &str) -> PyResult<f64> {
    sums::direct_sum(&ConvolutionQuery { k, h, x, w: weight(weight_name)? }).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (r1, r2, h, x, weight_name = "mollifier"))]
fn certain_sum(r1: u64, r2: u64, h: i64, x: f64, weight_name: &str) -> PyResult<f64> {
    let w = weight(weight_name)?;
    sums::certain_sum(&CertainQuery { r1, r2, h, x, w1: w.clone(), w2: w }).map_err(py_err)
}

#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct MainTerm {
    value: f64,
    terms: usize,
    m_max: u64,
    top_half: f64,
}

#[pymethods]
impl MainTerm {
    fn __repr__(&self) -> String {
        format!("MainTerm(value={}, terms={}, m_max={})", self.value, self.terms, self.m_max)
    }
}

#[pyfunction]
#[pyo3(signature = (k, h, x, weight_name = "mollifier", truncation = "hyperbola"))]
fn main_term(k: u32, h: i64, x: f64, weight_name: &str, truncation: &str) -> PyResult<MainTerm> {
    let t = Truncation::by_name(truncation).map_err(py_err)?;
    let m = mainterm::main_term(k, h, x, &weight(weight_name)?, t).map_err(py_err)?;
    Ok(MainTerm { value: m.value, terms: m.terms, m_max: m.m_max, top_half: m.top_half })
}

#[pyfunction]
fn singular_series<'py>(py: Python<'py>, m: u64, h: i64) -> PyResult<Bound<'py, PyAny>> {
    to_fraction(py, mainterm::g_eval(m, h).map_err(py_err)?)
}

#[pyfunction]
fn coset_count(q1: u64, q2: u64) -> PyResult<usize> {
    Ok(shiftconv::sl2::coset_list(q1, q2).map_err(py_err)?.len())
}

#[pyfunction]
fn ksum_b(r1: u64, r2: u64, b: f64) -> PyResult<f64> {
    let w = shiftconv::sl2::AutoWeight::alpha0(r1, r2).map_err(py_err)?;
    shiftconv::sl2::ksum_b(&w, b).map_err(py_err)
}

#[pyfunction]
fn ksum_c(r1: u64, r2: u64, c: f64) -> PyResult<f64> {
    let w = shiftconv::sl2::AutoWeight::alpha0(r1, r2).map_err(py_err)?;
    shiftconv::sl2::ksum_c(&w, c).map_err(py_err)
}

/// `(count_direct, count_matrix)` for the determinant correspondence.
#[pyfunction]
fn correspondence(r1: u64, r2: u64, h: i64, x: f64) -> PyResult<(usize, usize)> {
    let inst = shiftconv::detmat::DetInstance::new(r1, r2, h).map_err(py_err)?;
    let c = shiftconv::detmat::correspondence_check(&inst, x).map_err(py_err)?;
    Ok((c.count_direct, c.count_matrix))
}

/// Case tag `"A"`, `"B"` or `"C"` and the zero-based witness indices.
#[pyfunction]
fn classify_partition(alpha: Vec<Bound<'_, PyAny>>, delta: Bound<'_, PyAny>) -> PyResult<(String, Vec<usize>)> {
    let a: Vec<Ratio<i64>> = alpha.iter().map(from_number).collect::<PyResult<_>>()?;
    let c = sums::classify_partition(&a, from_number(&delta)?).map_err(py_err)?;
    Ok((format!("{:?}", c.tag), c.witness))
}

#[pyfunction]
#[pyo3(signature = (delta, theta, h_exp = None))]
fn exponent_table<'py>(
    py: Python<'py>,
    delta: Bound<'py, PyAny>,
    theta: Bound<'py, PyAny>,
    h_exp: Option<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyDict>> {
    let e = match h_exp {
        Some(v) => from_number(&v)?,
        None => Ratio::from_integer(0),
    };
    let t = experiments::exponent_calculator(from_number(&delta)?, from_number(&theta)?, e).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("theorem", to_fraction(py, t.theorem)?)?;
    d.set_item("general", to_fraction(py, t.general.exponent)?)?;
    d.set_item("general_range", format!("{:?}", t.general.range))?;
    d.set_item("small", to_fraction(py, t.small.exponent)?)?;
    d.set_item("small_range", format!("{:?}", t.small.range))?;
    d.set_item("small_x_parts", (to_fraction(py, t.small_x_parts.0)?, to_fraction(py, t.small_x_parts.1)?))?;
    match t.small_b_limit {
        Some(l) => d.set_item("small_b_limit", to_fraction(py, l)?)?,
        None => d.set_item("small_b_limit", py.None())?,
    }
    match t.intro {
        Some((eta, ex)) => d.set_item("uniform", (to_fraction(py, eta)?, to_fraction(py, ex)?))?,
        None => d.set_item("uniform", py.None())?,
    }
    Ok(d)
}

#[pyclass(frozen, skip_from_py_object)]
struct ErrorReport {
    inner: experiments::ErrorReport,
}

#[pymethods]
impl ErrorReport {
    /// `(x, S, M, R, |R|)` per grid point.
    #[getter]
    fn rows(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        self.inner.rows.iter().map(|r| (r.x, r.s, r.m, r.r, r.abs_r)).collect()
    }

    #[getter]
    fn fitted_slope(&self) -> Option<f64> {
        self.inner.fitted_slope
    }

    #[getter]
    fn dropped(&self) -> Vec<f64> {
        self.inner.dropped.clone()
    }

    #[getter]
    fn predicted_exponent(&self) -> f64 {
        self.inner.predicted_exponent
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Runs a grid experiment from a TOML config string.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<ErrorReport> {
    let cfg = ExperimentConfig::from_toml(config).map_err(py_err)?;
    let inner = py.detach(|| experiments::run_experiment(&cfg)).map_err(py_err)?;
    Ok(ErrorReport { inner })
}

/// `(name, passed, detail)` for each bundled check.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn verify_all(py: Python<'_>, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let r = py.detach(|| experiments::verify_all(seed)).map_err(py_err)?;
    Ok(r.into_iter().map(|c| (c.name, c.passed, c.detail)).collect())
}

#[pymodule]
#[pyo3(name = "shiftconv")]
fn shiftconv_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MainTerm>()?;
    m.add_class::<ErrorReport>()?;
    m.add_function(wrap_pyfunction!(sieve_dk, m)?)?;
    m.add_function(wrap_pyfunction!(ramanujan_sum, m)?)?;
    m.add_function(wrap_pyfunction!(factorize, m)?)?;
    m.add_function(wrap_pyfunction!(direct_sum, m)?)?;
    m.add_function(wrap_pyfunction!(certain_sum, m)?)?;
    m.add_function(wrap_pyfunction!(main_term, m)?)?;
    m.add_function(wrap_pyfunction!(singular_series, m)?)?;
    m.add_function(wrap_pyfunction!(coset_count, m)?)?;
    m.add_function(wrap_pyfunction!(ksum_b, m)?)?;
    m.add_function(wrap_pyfunction!(ksum_c, m)?)?;
    m.add_function(wrap_pyfunction!(correspondence, m)?)?;
    m.add_function(wrap_pyfunction!(classify_partition, m)?)?;
    m.add_function(wrap_pyfunction!(exponent_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_all, m)?)?;
    Ok(())
}

//! Python bindings for `mmtpd`.
//!
//! Matrices cross the boundary as lists of rows. Heavy calls release the
//! interpreter lock while they run.

use ::mmtpd::campaign::{run_campaign as run_campaign_rs, CampaignConfig};
use ::mmtpd::discretize::{discretize as discretize_rs, DiscretizeConfig};
use ::mmtpd::layout::{contract, enumerate_st as enumerate_st_rs, GenCsLayout};
use ::mmtpd::mmt::{apply_base_algorithm, build_mmt, naive_pd, verify_pd, FactorTriple, Shape, Verdict};
use ::mmtpd::pdfile::{PdRecord, STRUCTURE_TOL};
use ::mmtpd::solver::{al_solve, SolverConfig};
use ::mmtpd::transforms::{jacobian_rank, recursive_cs_pd, recursive_pd, DEFAULT_RANK_TOL};
use ::mmtpd::{fixtures, Error};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde_json::Map;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..mat.nrows()).map(|i| mat.row(i).iter().copied().collect()).collect()
}

fn matrix(data: &[Vec<f64>], name: &str) -> PyResult<DMatrix<f64>> {
    let nrows = data.len();
    let ncols = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| data[i][j]))
}

fn shape(m: usize, p: usize, n: usize) -> PyResult<Shape> {
    Shape::new(m, p, n).map_err(err)
}

/// A polyadic decomposition of `T_mpn`, optionally carrying an `(s, t)`
/// structure.
#[pyclass(name = "Pd", module = "mmtpd", from_py_object)]
#[derive(Clone)]
struct PyPd {
    inner: PdRecord,
}

impl PyPd {
    fn wrap(factors: FactorTriple, structure: Option<(usize, usize)>) -> PyResult<Self> {
        Ok(PyPd { inner: PdRecord::new(factors, structure, Map::new()).map_err(err)? })
    }

    fn structured_point(&self) -> PyResult<::mmtpd::StructuredPoint> {
        contract(&self.inner.factors, &self.inner.layout().map_err(err)?, STRUCTURE_TOL).map_err(err)
    }
}

#[pymethods]
impl PyPd {
    #[new]
    #[pyo3(signature = (m, p, n, u, v, w, structure=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        m: usize,
        p: usize,
        n: usize,
        u: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        w: Vec<Vec<f64>>,
        structure: Option<(usize, usize)>,
    ) -> PyResult<Self> {
        let factors =
            FactorTriple::new(shape(m, p, n)?, matrix(&u, "U")?, matrix(&v, "V")?, matrix(&w, "W")?).map_err(err)?;
        Self::wrap(factors, structure)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPd { inner: PdRecord::from_json_str(text).map_err(err)? })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyPd { inner: PdRecord::read(path).map_err(err)? })
    }

    /// The standard rank-`mpn` decomposition.
    #[staticmethod]
    fn naive(m: usize, p: usize, n: usize) -> PyResult<Self> {
        Self::wrap(naive_pd(shape(m, p, n)?).map_err(err)?, None)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let s = self.inner.shape();
        (s.m, s.p, s.n)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn structure(&self) -> Option<(usize, usize)> {
        self.inner.structure
    }

    #[getter]
    fn practical(&self) -> bool {
        self.inner.practical
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }

    #[getter(U)]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(self.inner.factors.u())
    }

    #[getter(V)]
    fn v(&self) -> Vec<Vec<f64>> {
        rows(self.inner.factors.v())
    }

    #[getter(W)]
    fn w(&self) -> Vec<Vec<f64>> {
        rows(self.inner.factors.w())
    }

    /// `"exact_integer"`, `"exact_float"` or `"failed"`.
    #[pyo3(signature = (tol=1e-6))]
    fn verify(&self, tol: f64) -> PyResult<&'static str> {
        let s = self.inner.shape();
        let tensor = build_mmt(s.m, s.p, s.n).map_err(err)?;
        Ok(match verify_pd(&self.inner.factors, &tensor, tol).map_err(err)? {
            Verdict::ExactInteger => "exact_integer",
            Verdict::ExactFloat { .. } => "exact_float",
            Verdict::Failed { .. } => "failed",
        })
    }

    /// Raises `ValueError` when the factors break the declared structure.
    fn check_structure(&self) -> PyResult<()> {
        self.inner.check_structure().map_err(err)
    }

    /// Computes `A · B` with the decomposition (`A` is `m × p`, `B` is `p × n`).
    fn multiply(&self, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let c = apply_base_algorithm(&self.inner.factors, &matrix(&a, "A")?, &matrix(&b, "B")?).map_err(err)?;
        Ok(rows(&c.transpose()))
    }

    /// Jacobian rank summary at this point of its structured parameterization.
    #[pyo3(signature = (tol=DEFAULT_RANK_TOL))]
    fn jacobian_rank<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let point = self.structured_point()?;
        let s = self.inner.shape();
        let tensor = build_mmt(s.m, s.p, s.n).map_err(err)?;
        let report = py.detach(|| jacobian_rank(&point, &tensor, tol)).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("rows", report.rows)?;
        out.set_item("cols", report.cols)?;
        out.set_item("rank", report.rank)?;
        out.set_item("singular_values", report.singular_values)?;
        Ok(out)
    }

    /// Recursive self-composition, keeping the cyclic structure when the
    /// layout is fully cyclic-symmetric.
    fn compose(&self, py: Python<'_>) -> PyResult<Self> {
        let layout = self.inner.layout().map_err(err)?;
        let factors = self.inner.factors.clone();
        let (factors, structure) = py
            .detach(|| {
                if layout.is_full_cs() {
                    recursive_cs_pd(&factors, &layout).map(|(f, l)| (f, Some((l.s(), l.t()))))
                } else {
                    recursive_pd(&factors).map(|f| (f, None))
                }
            })
            .map_err(err)?;
        Self::wrap(factors, structure)
    }

    /// Refines to entries in `{-1, 0, 1}`; raises `ValueError` on failure.
    #[pyo3(signature = (h_scale=0.1, threshold=0.25))]
    fn discretize(&self, py: Python<'_>, h_scale: f64, threshold: f64) -> PyResult<Self> {
        let point = self.structured_point()?;
        let s = self.inner.shape();
        let tensor = build_mmt(s.m, s.p, s.n).map_err(err)?;
        let config = DiscretizeConfig { h_scale, rounding_threshold: threshold, ..Default::default() };
        let inner = py.detach(|| discretize_rs(&point, &tensor, &config)).map_err(err)?;
        Ok(PyPd { inner })
    }

    fn __repr__(&self) -> String {
        let st = self.inner.structure.map_or("unstructured".to_string(), |(s, t)| format!("s={s}, t={t}"));
        format!(
            "Pd(T_{}, r={}, {st}, residual={:.3e}, practical={})",
            self.inner.shape().label(),
            self.inner.rank(),
            self.inner.residual_norm,
            self.inner.practical
        )
    }
}

/// Coordinates `(i, j, k)` of the ones of `T_mpn`.
#[pyfunction]
fn mmt_nonzeros(m: usize, p: usize, n: usize) -> PyResult<Vec<(usize, usize, usize)>> {
    let t = build_mmt(m, p, n).map_err(err)?;
    Ok(t.nonzeros().into_iter().map(|[i, j, k]| (i, j, k)).collect())
}

/// Admissible `(s, t)` pairs for square rank-`r` layouts, in table order.
#[pyfunction]
fn enumerate_st(r: usize) -> Vec<(usize, usize)> {
    enumerate_st_rs(r)
}

#[pyfunction]
fn fixture_names() -> Vec<&'static str> {
    fixtures::all_factors().into_iter().map(|(name, _)| name).collect()
}

/// A reference decomposition by name, see `fixture_names()`.
#[pyfunction]
fn fixture(name: &str) -> PyResult<PyPd> {
    if name == "strassen_cs" {
        let (f, l) = fixtures::strassen_cs();
        return PyPd::wrap(f, Some((l.s(), l.t())));
    }
    if let Some((_, point)) = fixtures::structured().into_iter().find(|(n, _)| *n == name) {
        let l = *point.layout();
        return PyPd::wrap(::mmtpd::expand(&point), Some((l.s(), l.t())));
    }
    fixtures::all_factors()
        .into_iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| PyKeyError::new_err(format!("unknown fixture `{name}`")))
        .and_then(|(_, f)| PyPd::wrap(f, None))
}

/// One seeded search. Returns `(pd, status, cost)`; `pd` is the final iterate
/// whether or not it is exact.
#[pyfunction]
#[pyo3(signature = (m, p, n, r, s=None, t=None, seed=0, max_outer=None))]
#[allow(clippy::too_many_arguments)]
fn search(
    py: Python<'_>,
    m: usize,
    p: usize,
    n: usize,
    r: usize,
    s: Option<usize>,
    t: Option<usize>,
    seed: u64,
    max_outer: Option<usize>,
) -> PyResult<(PyPd, String, f64)> {
    let sh = shape(m, p, n)?;
    let layout = match (s, t) {
        (Some(s), Some(t)) => GenCsLayout::new(sh, r, s, t),
        (None, None) => GenCsLayout::unstructured(sh, r),
        _ => return Err(PyValueError::new_err("give both s and t or neither")),
    }
    .map_err(err)?;
    let mut config = SolverConfig::default();
    if let Some(k) = max_outer {
        config.max_outer = k;
    }
    let tensor = build_mmt(m, p, n).map_err(err)?;
    let outcome = py.detach(|| al_solve(&tensor, &layout, &config, seed)).map_err(err)?;
    let structure = (!layout.is_unstructured()).then(|| (layout.s(), layout.t()));
    let pd = PyPd::wrap(::mmtpd::expand(&outcome.point), structure)?;
    Ok((pd, format!("{:?}", outcome.status).to_lowercase(), outcome.cost()))
}

/// Runs a campaign described by TOML text and returns the summary CSV.
#[pyfunction]
#[pyo3(signature = (config_toml, timed=false))]
fn run_campaign(py: Python<'_>, config_toml: &str, timed: bool) -> PyResult<String> {
    let config = CampaignConfig::from_toml_str(config_toml).map_err(err)?;
    let summary = py.detach(|| run_campaign_rs(&config)).map_err(err)?;
    Ok(if timed { summary.to_csv() } else { summary.to_csv_untimed() })
}

#[pymodule(name = "mmtpd")]
fn mmtpd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPd>()?;
    m.add_function(wrap_pyfunction!(mmt_nonzeros, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_st, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_names, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    Ok(())
}

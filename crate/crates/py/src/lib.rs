//! Python bindings: coefficient families, Taylor / Legendre expansions, and
//! decay-rate analysis.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use polydiff::analysis;
use polydiff::fem1d::{load_constant, FemSpace, Mesh, WeightFn};
use polydiff::fields::{CoefficientField, FamilyConfig};
use polydiff::galerkin;
use polydiff::multiindex::MultiIndex;
use polydiff::runner::family_mesh;
use polydiff::taylor::{self, CoefficientMap};

fn to_py_err(e: polydiff::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn index_to_dict(nu: &MultiIndex) -> BTreeMap<u32, u32> {
    nu.pairs().collect()
}

fn dict_to_index(pairs: BTreeMap<u32, u32>) -> MultiIndex {
    MultiIndex::from_pairs(pairs)
}

/// An affine diffusion coefficient family `a(y) = 1 + sum_j y_j psi_j`.
#[pyclass(name = "Field")]
struct PyField {
    field: CoefficientField,
    config: Option<FamilyConfig>,
}

#[pymethods]
impl PyField {
    /// Disjoint inclusions `psi_j = theta j^{-beta}` on a partition of (0,1).
    #[staticmethod]
    fn inclusions(beta: f64, theta: f64, j: usize) -> PyResult<Self> {
        let config = FamilyConfig::Inclusions { beta, theta, j };
        Ok(PyField {
            field: config.build().map_err(to_py_err)?,
            config: Some(config),
        })
    }

    /// Fourier modes `psi_j = theta c j^{-beta} sin(j pi x)`.
    #[staticmethod]
    fn fourier(beta: f64, theta: f64, j: usize) -> PyResult<Self> {
        let config = FamilyConfig::Fourier { beta, theta, j };
        Ok(PyField {
            field: config.build().map_err(to_py_err)?,
            config: Some(config),
        })
    }

    /// Haar wavelets over levels `0..=l_max` with levelwise decay `alpha`.
    #[staticmethod]
    fn haar(alpha: f64, theta: f64, l_max: u32) -> PyResult<Self> {
        let config = FamilyConfig::Haar {
            alpha,
            theta,
            l_max,
        };
        Ok(PyField {
            field: config.build().map_err(to_py_err)?,
            config: Some(config),
        })
    }

    /// Spatially constant expansion functions `psi_j = b_j` (the family with
    /// closed-form Taylor coefficients).
    #[staticmethod]
    fn constant(b: Vec<f64>) -> PyResult<Self> {
        let psis = b.into_iter().map(WeightFn::Constant).collect();
        Ok(PyField {
            field: CoefficientField::custom(WeightFn::Constant(1.0), psis).map_err(to_py_err)?,
            config: None,
        })
    }

    /// Reported ellipticity constant `|| sum |psi_j| ||_inf`.
    #[getter]
    fn theta(&self) -> f64 {
        self.field.theta()
    }

    /// Number of expansion terms.
    #[getter]
    fn terms(&self) -> usize {
        self.field.j_count()
    }

    /// Predicted limiting decay rate of the coefficient norms, when the
    /// family has one.
    #[getter]
    fn predicted_rate(&self) -> Option<f64> {
        self.config.as_ref().and_then(|c| c.predicted_rate())
    }

    fn __repr__(&self) -> String {
        format!(
            "Field(terms={}, theta={:.6})",
            self.field.j_count(),
            self.field.theta()
        )
    }
}

impl PyField {
    fn space(&self, elements: Option<usize>) -> PyResult<FemSpace> {
        let mesh = match &self.config {
            Some(config) => family_mesh(config, elements, &[]).map_err(to_py_err)?,
            None => Mesh::uniform(elements.unwrap_or(64)),
        };
        Ok(FemSpace::new(mesh))
    }
}

/// Computed coefficients of one expansion.
#[pyclass(name = "Expansion")]
struct PyExpansion {
    map: CoefficientMap,
}

#[pymethods]
impl PyExpansion {
    /// `(index, norm)` pairs in canonical order; indices are dicts mapping
    /// coordinates to exponents.
    fn coefficients(&self) -> Vec<(BTreeMap<u32, u32>, f64)> {
        self.map
            .iter()
            .map(|(nu, entry)| (index_to_dict(nu), entry.v_norm))
            .collect()
    }

    /// V-norm of one coefficient, if it was computed.
    fn norm(&self, index: BTreeMap<u32, u32>) -> Option<f64> {
        self.map.get(&dict_to_index(index)).map(|e| e.v_norm)
    }

    /// Decreasing rearrangement of the retained coefficient norms.
    fn rearranged(&self) -> Vec<f64> {
        analysis::rearrange_retained(&self.map).values
    }

    /// Dyadic decay rates `s_1..s_i_max` of the retained rearrangement.
    fn rates(&self, i_max: u32) -> PyResult<Vec<f64>> {
        let seq = analysis::rearrange_retained(&self.map);
        analysis::rate_estimates(&seq, i_max).map_err(to_py_err)
    }

    #[getter]
    fn total(&self) -> usize {
        self.map.len()
    }

    #[getter]
    fn retained(&self) -> usize {
        self.map.member_count()
    }

    fn __len__(&self) -> usize {
        self.map.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Expansion(kind={:?}, retained={}, total={})",
            self.map.kind.tag(),
            self.map.member_count(),
            self.map.len()
        )
    }
}

/// Greedy Taylor expansion with `n_target` retained coefficients.
#[pyfunction]
#[pyo3(signature = (field, n_target, bulk = 0.2, elements = None))]
fn taylor_expand(
    field: &PyField,
    n_target: usize,
    bulk: f64,
    elements: Option<usize>,
) -> PyResult<PyExpansion> {
    let space = field.space(elements)?;
    let load = load_constant(&space, 1.0);
    let map =
        taylor::greedy_expand(&field.field, &space, &load, n_target, bulk).map_err(to_py_err)?;
    Ok(PyExpansion { map })
}

/// Adaptive stochastic Galerkin Legendre expansion.
#[pyfunction]
#[pyo3(signature = (field, n_target, dorfler = 0.5, cg_tol = 1e-10, elements = None))]
fn legendre_expand(
    field: &PyField,
    n_target: usize,
    dorfler: f64,
    cg_tol: f64,
    elements: Option<usize>,
) -> PyResult<PyExpansion> {
    let space = field.space(elements)?;
    let load = load_constant(&space, 1.0);
    let run = galerkin::adaptive_solve(
        &field.field,
        &space,
        &load,
        n_target,
        dorfler,
        cg_tol,
        galerkin::DEGREE_CAP,
    )
    .map_err(to_py_err)?;
    Ok(PyExpansion { map: run.map })
}

/// `||u_nu||_V` by tensor Gauss quadrature (at most 3 variables).
#[pyfunction]
#[pyo3(signature = (field, index, nodes_per_dim = 24, elements = None))]
fn quadrature_oracle(
    field: &PyField,
    index: BTreeMap<u32, u32>,
    nodes_per_dim: usize,
    elements: Option<usize>,
) -> PyResult<f64> {
    let space = field.space(elements)?;
    let load = load_constant(&space, 1.0);
    galerkin::quadrature_oracle(
        &field.field,
        &space,
        &load,
        &dict_to_index(index),
        nodes_per_dim,
    )
    .map_err(to_py_err)
}

/// Dyadic decay rates of an arbitrary norm sequence (sorted internally).
#[pyfunction]
fn rate_estimates(values: Vec<f64>, i_max: u32) -> PyResult<Vec<f64>> {
    let pairs = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| (MultiIndex::unit(i as u32 + 1), v))
        .collect();
    let seq = analysis::rearrange_pairs(pairs);
    analysis::rate_estimates(&seq, i_max).map_err(to_py_err)
}

/// Legendre three-term coupling `c(k) = k / sqrt(4 k^2 - 1)`.
#[pyfunction]
fn coupling(k: u32) -> f64 {
    galerkin::coupling(k)
}

/// Multinomial ratio `|nu|! / nu!` of a multi-index dict.
#[pyfunction]
fn factorial_ratio(index: BTreeMap<u32, u32>) -> PyResult<f64> {
    dict_to_index(index).factorial_ratio().map_err(to_py_err)
}

#[pymodule]
fn polydiff_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyExpansion>()?;
    m.add_function(wrap_pyfunction!(taylor_expand, m)?)?;
    m.add_function(wrap_pyfunction!(legendre_expand, m)?)?;
    m.add_function(wrap_pyfunction!(quadrature_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(rate_estimates, m)?)?;
    m.add_function(wrap_pyfunction!(coupling, m)?)?;
    m.add_function(wrap_pyfunction!(factorial_ratio, m)?)?;
    Ok(())
}

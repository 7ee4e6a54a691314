//! Python bindings for the `kcontact` toolkit.
//!
//! Symbolic objects cross the boundary as DSL strings (re-parseable with
//! [`Lagrangian::parse`]); numeric results cross as plain floats and lists
//! so the module has no runtime dependency beyond the interpreter.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kcontact::chart::{BundleChart, Coord};
use kcontact::dissipation::{
    verify_on_solution_with, verify_symbolic, SymbolicConfig, VerificationReport,
    DEFAULT_NUMERIC_C,
};
use kcontact::expr::parse;
use kcontact::model::{ModelFile, VectorFieldDef};
use kcontact::solver::{
    manufactured_string_solution, reconstruct_s_fields, solve_damped_string, Gauge, GridSpec,
    StringParams,
};
use kcontact::symmetry::{is_k_contact_symmetry, is_natural_symmetry};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn coord_label(chart: &BundleChart, c: Coord) -> String {
    match c {
        Coord::Q(i) => chart.base_name(i).to_string(),
        Coord::V(i, alpha) => format!("v[{},{}]", chart.base_name(i), alpha + 1),
        Coord::S(alpha) => format!("s[{}]", alpha + 1),
    }
}

/// A coordinate chart on the phase bundle.
#[pyclass(frozen, name = "Chart")]
struct PyChart {
    inner: Arc<BundleChart>,
}

#[pymethods]
impl PyChart {
    /// Chart(n, k, names, params) — `names` are the base coordinate
    /// labels, `params` maps parameter names to default values.
    #[new]
    #[pyo3(signature = (n, k, names, params=None))]
    fn new(
        n: usize,
        k: usize,
        names: Vec<String>,
        params: Option<BTreeMap<String, f64>>,
    ) -> PyResult<Self> {
        if names.len() != n {
            return Err(PyValueError::new_err("expected one name per base coordinate"));
        }
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let params = params.unwrap_or_default();
        let param_refs: Vec<(&str, f64)> =
            params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Ok(PyChart {
            inner: BundleChart::with_params(n, k, &name_refs, &param_refs),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    /// All coordinate labels in chart order.
    #[getter]
    fn coords(&self) -> Vec<String> {
        self.inner
            .coords()
            .into_iter()
            .map(|c| coord_label(&self.inner, c))
            .collect()
    }

    #[getter]
    fn params(&self) -> BTreeMap<String, Option<f64>> {
        self.inner
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.default))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Chart(n={}, k={})", self.inner.n(), self.inner.k())
    }
}

/// A Lagrangian density on a chart, with its derived geometric objects.
#[pyclass(frozen, name = "Lagrangian")]
struct PyLagrangian {
    inner: kcontact::lagrangian::Lagrangian,
}

#[pymethods]
impl PyLagrangian {
    /// Lagrangian(chart, dsl) — parse a density from its DSL text.
    #[new]
    fn new(chart: &PyChart, dsl: &str) -> PyResult<Self> {
        let l = parse(dsl, &chart.inner).map_err(err)?;
        Ok(PyLagrangian {
            inner: kcontact::lagrangian::Lagrangian::new(chart.inner.clone(), l).map_err(err)?,
        })
    }

    #[getter]
    fn dsl(&self) -> String {
        self.inner.expr().to_dsl(self.inner.chart())
    }

    /// The Lagrangian energy E_L as DSL text.
    fn energy(&self) -> String {
        self.inner.energy().to_dsl(self.inner.chart())
    }

    /// The contact one-forms, one string per form, terms as
    /// `(coeff) d<label>`.
    fn contact_forms(&self) -> Vec<String> {
        let chart = self.inner.chart();
        self.inner
            .contact_forms()
            .iter()
            .map(|eta| {
                let terms: Vec<String> = chart
                    .coords()
                    .into_iter()
                    .filter(|&c| !eta.coeff(c).is_num_zero())
                    .map(|c| {
                        format!("({}) d{}", eta.coeff(c).to_dsl(chart), coord_label(chart, c))
                    })
                    .collect();
                terms.join(" + ")
            })
            .collect()
    }

    /// Determinant of the Hessian with respect to the velocities.
    fn hessian_det(&self) -> String {
        self.inner.hessian().determinant().to_dsl(self.inner.chart())
    }

    /// "regular", "singular" or "pointwise".
    fn regularity(&self) -> &'static str {
        use kcontact::lagrangian::RegularityVerdict::*;
        match self.inner.is_regular() {
            Regular => "regular",
            Singular => "singular",
            Pointwise(_) => "pointwise",
        }
    }

    /// The Euler–Lagrange residuals, one DSL string per field.
    fn euler_lagrange(&self) -> Vec<String> {
        let chart = self.inner.chart();
        self.inner
            .euler_lagrange_residuals()
            .residuals
            .iter()
            .map(|r| r.to_dsl(chart))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Lagrangian({})", self.dsl())
    }
}

fn report_dict<'py>(
    py: Python<'py>,
    chart: &BundleChart,
    rep: &VerificationReport,
) -> PyResult<Bound<'py, PyDict>> {
    let _ = chart;
    let d = PyDict::new_bound(py);
    d.set_item("passed", rep.passed())?;
    d.set_item("mode", rep.mode.to_string())?;
    d.set_item("linf", rep.norms.linf)?;
    d.set_item("l2", rep.norms.l2)?;
    d.set_item("tolerance", rep.tolerance)?;
    if let Some(cert) = &rep.certificate {
        d.set_item("certificate_exists", cert.exists)?;
        d.set_item("certificate_residual", cert.residual)?;
    }
    d.set_item("note", rep.note.clone())?;
    Ok(d)
}

/// A model file: chart, Lagrangian and named fixtures.
#[pyclass(frozen, name = "Model")]
struct PyModel {
    inner: ModelFile,
}

#[pymethods]
impl PyModel {
    /// Load a `.kc` model file, optionally overriding parameter defaults.
    #[staticmethod]
    #[pyo3(signature = (path, overrides=None))]
    fn load(path: PathBuf, overrides: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let inner = match overrides {
            Some(o) => ModelFile::load_with_overrides(&path, &o).map_err(err)?,
            None => ModelFile::load(&path).map_err(err)?,
        };
        Ok(PyModel { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn preset(&self) -> Option<String> {
        self.inner.preset.map(|p| p.to_string())
    }

    #[getter]
    fn chart(&self) -> PyChart {
        PyChart {
            inner: self.inner.chart.clone(),
        }
    }

    #[getter]
    fn lagrangian(&self) -> PyLagrangian {
        PyLagrangian {
            inner: self.inner.lagrangian.clone(),
        }
    }

    #[getter]
    fn laws(&self) -> Vec<String> {
        self.inner.laws.keys().cloned().collect()
    }

    #[getter]
    fn vector_fields(&self) -> Vec<String> {
        self.inner.vector_fields.keys().cloned().collect()
    }

    #[getter]
    fn sopdes(&self) -> Vec<String> {
        self.inner.sopdes.keys().cloned().collect()
    }

    /// Components of a named dissipation law as DSL strings.
    fn law_components(&self, name: &str) -> PyResult<Vec<String>> {
        let law = self
            .inner
            .laws
            .get(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Ok(law
            .components()
            .iter()
            .map(|c| c.to_dsl(&self.inner.chart))
            .collect())
    }

    /// Run the symbolic dissipation-identity check for a named law.
    #[pyo3(signature = (name, seed=None))]
    fn verify_law<'py>(
        &self,
        py: Python<'py>,
        name: &str,
        seed: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let law = self
            .inner
            .laws
            .get(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        let rep = match seed {
            Some(s) => {
                let cfg = SymbolicConfig {
                    seed: s,
                    ..SymbolicConfig::default()
                };
                kcontact::dissipation::verify_symbolic_with(&self.inner.lagrangian, law, &cfg)
                    .map_err(err)?
            }
            None => verify_symbolic(&self.inner.lagrangian, law).map_err(err)?,
        };
        report_dict(py, &self.inner.chart, &rep)
    }

    /// Classify a named vector field: natural (base fields only) and
    /// k-contact symmetry verdicts, plus the emitted law if any.
    fn check_symmetry<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyDict>> {
        let def = self
            .inner
            .vector_fields
            .get(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        let d = PyDict::new_bound(py);
        let lag = &self.inner.lagrangian;
        if let VectorFieldDef::Base(z) = def {
            let rep = is_natural_symmetry(lag, z).map_err(err)?;
            d.set_item("natural", rep.is_symmetry())?;
        }
        let rep = is_k_contact_symmetry(lag, &def.as_bundle()).map_err(err)?;
        d.set_item("k_contact", rep.is_symmetry())?;
        if let Some(law) = &rep.law {
            let comps: Vec<String> = law
                .components()
                .iter()
                .map(|c| c.to_dsl(&self.inner.chart))
                .collect();
            d.set_item("law", comps)?;
        }
        Ok(d)
    }

    /// Whether a named SOPDE fixture satisfies the Lagrangian membership
    /// equations symbolically.
    fn sopde_is_member(&self, name: &str) -> PyResult<bool> {
        let sopde = self
            .inner
            .sopdes
            .get(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        let (family, trace) = self
            .inner
            .lagrangian
            .sopde_field_residuals(sopde)
            .map_err(err)?;
        Ok(family
            .iter()
            .chain(std::iter::once(&trace))
            .all(|r| r.is_zero(&self.inner.chart).is_zeroish()))
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.inner.name)
    }
}

fn string_params(model: &ModelFile) -> PyResult<StringParams> {
    let get = |n: &str| {
        model
            .chart
            .param(n)
            .and_then(|p| p.default)
            .ok_or_else(|| PyValueError::new_err(format!("model lacks parameter {n}")))
    };
    Ok(StringParams {
        rho: get("rho")?,
        tau: get("tau")?,
        gamma: get("gamma")?,
    })
}

/// Solve the damped-string model against its manufactured solution and
/// return the grid, the field, and the exact-solution error.
#[pyfunction]
#[pyo3(signature = (model, nt=101, nx=101))]
fn simulate_damped_string<'py>(
    py: Python<'py>,
    model: &PyModel,
    nt: usize,
    nx: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let params = string_params(&model.inner)?;
    let oracle = manufactured_string_solution(&params, 1.0).map_err(err)?;
    let grid = GridSpec::from_extents([0.5, 1.0], [nt, nx]).map_err(err)?;
    let sol = solve_damped_string(&params, &grid, &oracle.boundary_conditions()).map_err(err)?;
    let mut error: f64 = 0.0;
    let mut phi = Vec::with_capacity(nt);
    for i0 in 0..nt {
        let mut row = Vec::with_capacity(nx);
        for i1 in 0..nx {
            let value = sol.phi[0][[i0, i1]];
            error = error.max((value - oracle.phi(grid.coord(0, i0), grid.coord(1, i1))).abs());
            row.push(value);
        }
        phi.push(row);
    }
    let d = PyDict::new_bound(py);
    d.set_item("t", (0..nt).map(|i| grid.coord(0, i)).collect::<Vec<_>>())?;
    d.set_item("x", (0..nx).map(|i| grid.coord(1, i)).collect::<Vec<_>>())?;
    d.set_item("phi", phi)?;
    d.set_item("oracle_linf", error)?;
    Ok(d)
}

/// Verify a named law on a freshly computed damped-string solution.
#[pyfunction]
#[pyo3(signature = (model, law, nodes=101, cal=DEFAULT_NUMERIC_C))]
fn verify_law_numeric<'py>(
    py: Python<'py>,
    model: &PyModel,
    law: &str,
    nodes: usize,
    cal: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let law = model
        .inner
        .laws
        .get(law)
        .ok_or_else(|| PyKeyError::new_err(law.to_string()))?;
    let params = string_params(&model.inner)?;
    let oracle = manufactured_string_solution(&params, 1.0).map_err(err)?;
    let grid = GridSpec::from_extents([0.5, 1.0], [nodes, nodes]).map_err(err)?;
    let sol = solve_damped_string(&params, &grid, &oracle.boundary_conditions()).map_err(err)?;
    let sol =
        reconstruct_s_fields(&model.inner.lagrangian, &sol, Gauge::ZeroAllButFirst).map_err(err)?;
    let rep =
        verify_on_solution_with(&model.inner.lagrangian, law, &sol, cal).map_err(err)?;
    report_dict(py, &model.inner.chart, &rep)
}

#[pymodule]
fn kcontact_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChart>()?;
    m.add_class::<PyLagrangian>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(simulate_damped_string, m)?)?;
    m.add_function(wrap_pyfunction!(verify_law_numeric, m)?)?;
    m.add("DEFAULT_NUMERIC_C", DEFAULT_NUMERIC_C)?;
    Ok(())
}

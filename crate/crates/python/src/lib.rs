//! Python bindings: parse a run configuration, count its unknowns and run it.

use std::path::PathBuf;

use cosserat::cli::{self, DofCount, RunConfig, RunSummary};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn value_err(e: cosserat::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: cosserat::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn config(text: &str) -> PyResult<RunConfig> {
    cli::parse_config(text).map_err(value_err)
}

fn summary_dict<'py>(py: Python<'py>, s: &RunSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("name", &s.config.name)?;
    d.set_item("unknowns", s.dofs.unknowns)?;
    d.set_item("nodes", s.dofs.nodes)?;
    d.set_item("mean_iterations", s.mean_iterations())?;
    d.set_item("max_constraint_violation", s.max_constraint_violation())?;
    d.set_item("failure", s.failure.clone())?;
    let steps = PyList::empty_bound(py);
    for r in &s.reports {
        let row = PyDict::new_bound(py);
        row.set_item("step", r.step)?;
        row.set_item("t", r.t)?;
        row.set_item("pred_iters", r.pred_iters)?;
        row.set_item("corr_iters", r.corr_iters)?;
        row.set_item("energy", r.energy)?;
        row.set_item("grad_norm", r.grad_norm)?;
        row.set_item("constraint_violation", r.constraint_violation)?;
        row.set_item("converged", r.converged)?;
        steps.append(row)?;
    }
    d.set_item("steps", steps)?;
    d.set_item("table", cli::summary_table(s, true))?;
    Ok(d)
}

/// Free unknowns and grid nodes of a configuration, as `(unknowns, nodes)`.
#[pyfunction]
fn dof_count(text: &str) -> PyResult<(usize, usize)> {
    let c = DofCount::of(&config(text)?).map_err(value_err)?;
    Ok((c.unknowns, c.nodes))
}

/// Run a configuration; with `out` the artifacts are written there as well.
#[pyfunction]
#[pyo3(signature = (text, out=None))]
fn run<'py>(py: Python<'py>, text: &str, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(text)?;
    let summary = py
        .allow_threads(|| match out {
            Some(dir) => cli::execute(&cfg, &dir),
            None => cli::execute_in_memory(&cfg),
        })
        .map_err(runtime_err)?;
    summary_dict(py, &summary)
}

#[pymodule]
fn cosserat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dof_count, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

//! Python bindings exposing the main lab types and operations: instance
//! construction, LQD and baseline simulation, the exact offline optimum,
//! the full verification pipeline, adversarial search, and the numeric
//! ratio reproduction.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use lqdlab::config::{search_ties, ExperimentConfig};
use lqdlab::gen::{adversarial_search, SearchParams};
use lqdlab::opt::{brute_force as oracle_solve, solve_exact, SearchLimits};
use lqdlab::pipeline::verify_instance;
use lqdlab::ratio;
use lqdlab::switch::{build_instance, simulate_policy, ArrivalEvent, Policy, TieBreak};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

fn parse_tie(tie: &str) -> PyResult<TieBreak> {
    TieBreak::parse(tie).ok_or_else(|| err(format!("unknown tie-break `{tie}`")))
}

/// A buffer-management instance: capacity M plus the arrival schedule.
#[pyclass(name = "Instance")]
#[derive(Clone)]
struct PyInstance {
    inner: lqdlab::Instance,
}

#[pymethods]
impl PyInstance {
    /// Build from a capacity and arrivals given as (step, queue, count).
    #[new]
    fn new(capacity: u32, arrivals: Vec<(u32, u32, u32)>) -> PyResult<Self> {
        let events: Vec<ArrivalEvent> = arrivals
            .into_iter()
            .map(|(step, queue, count)| ArrivalEvent { step, queue, count })
            .collect();
        Ok(PyInstance { inner: build_instance(capacity, &events).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance { inner: lqdlab::codec::decode_instance(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        lqdlab::codec::encode_instance(&self.inner)
    }

    #[getter]
    fn buffer_capacity(&self) -> u32 {
        self.inner.buffer_capacity()
    }

    #[getter]
    fn queue_count(&self) -> u32 {
        self.inner.queue_count()
    }

    #[getter]
    fn total_packets(&self) -> u64 {
        self.inner.total_packets()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(M={}, N={}, packets={})",
            self.inner.buffer_capacity(),
            self.inner.queue_count(),
            self.inner.total_packets()
        )
    }
}

/// Simulate a policy; returns a dict with throughput, drops, and per-step
/// records matching the JSONL trace format.
#[pyfunction]
#[pyo3(signature = (instance, policy="lqd", tie="min"))]
fn simulate(py: Python<'_>, instance: &PyInstance, policy: &str, tie: &str) -> PyResult<PyObject> {
    let policy = Policy::parse(policy).ok_or_else(|| err(format!("unknown policy `{policy}`")))?;
    let tie = parse_tie(tie)?;
    let trace = simulate_policy(&instance.inner, policy, &tie);
    let steps: Vec<serde_json::Value> = trace
        .steps
        .iter()
        .map(|s| {
            serde_json::json!({
                "step": s.step,
                "sizes": s.sizes,
                "transmit": s.transmit,
                "drops": s.drops.iter().map(|d| serde_json::json!({
                    "queue": d.queue,
                    "count": d.count,
                    "kind": match d.kind {
                        lqdlab::switch::DropKind::Rejected => "rejected",
                        lqdlab::switch::DropKind::Preempted => "preempted",
                    },
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "algorithm": trace.algorithm,
        "throughput": trace.throughput(),
        "steps": steps,
    });
    Ok(json_to_py(py, &doc)?.unbind())
}

/// Certified exact offline optimum; set oracle=True for the exhaustive
/// subset search (small instances only).
#[pyfunction]
#[pyo3(signature = (instance, oracle=false, solver_nodes=20_000_000, oracle_cap=14))]
fn solve_opt(
    py: Python<'_>,
    instance: &PyInstance,
    oracle: bool,
    solver_nodes: u64,
    oracle_cap: u32,
) -> PyResult<PyObject> {
    let schedule = if oracle {
        oracle_solve(&instance.inner, oracle_cap).map_err(err)?
    } else {
        solve_exact(&instance.inner, &SearchLimits { max_nodes: solver_nodes })
    };
    let doc = serde_json::json!({
        "throughput": schedule.throughput,
        "certified": schedule.certified,
        "transmit": schedule.transmit.iter().map(|r| serde_json::json!({
            "packet": r.packet,
            "queue": r.queue,
            "arrival_step": r.arrival_step,
            "step": r.step,
        })).collect::<Vec<_>>(),
    });
    Ok(json_to_py(py, &doc)?.unbind())
}

/// Run the full pipeline (normalize, simulate, solve, ledger, checks) and
/// return the verification report as a dict.
#[pyfunction]
#[pyo3(signature = (instance, alpha="0.57635", rho="1.41478"))]
fn verify(py: Python<'_>, instance: &PyInstance, alpha: &str, rho: &str) -> PyResult<PyObject> {
    let cfg = ExperimentConfig {
        alpha: lqdlab::parse_decimal_rat(alpha).ok_or_else(|| err("bad alpha"))?,
        rho: lqdlab::parse_decimal_rat(rho).ok_or_else(|| err("bad rho"))?,
        ..ExperimentConfig::default()
    };
    let outcome = verify_instance("py", &instance.inner, &cfg).map_err(err)?;
    let doc: serde_json::Value =
        serde_json::from_str(&lqdlab::codec::encode_report(&outcome.report)).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("lqd", outcome.lqd)?;
    dict.set_item("opt", outcome.opt)?;
    dict.set_item("ratio", outcome.ratio)?;
    dict.set_item("all_pass", outcome.report.all_pass())?;
    dict.set_item("report", json_to_py(py, &doc)?)?;
    Ok(dict.into_any().unbind())
}

/// rho(alpha) via Lambert-W, or the full alpha optimization when alpha is
/// omitted.
#[pyfunction]
#[pyo3(signature = (alpha=None))]
fn rho(py: Python<'_>, alpha: Option<f64>) -> PyResult<PyObject> {
    let doc = match alpha {
        Some(a) => serde_json::to_value(ratio::rho_of_alpha(a).map_err(err)?).map_err(err)?,
        None => serde_json::to_value(ratio::optimize_alpha().map_err(err)?).map_err(err)?,
    };
    Ok(json_to_py(py, &doc)?.unbind())
}

/// Lambert W on the -1 branch.
#[pyfunction]
fn lambert_w_minus1(y: f64) -> PyResult<f64> {
    ratio::lambert_w_minus1(y).map_err(err)
}

/// Known competitive-ratio bounds for (M, N).
#[pyfunction]
fn bounds(py: Python<'_>, m: u32, n: u32) -> PyResult<PyObject> {
    let doc = serde_json::to_value(ratio::known_bounds(m, n)).map_err(err)?;
    Ok(json_to_py(py, &doc)?.unbind())
}

/// Adversarial hill-climbing search; returns the champion instance and its
/// certified ratio.
#[pyfunction]
#[pyo3(signature = (m, n, t, budget=5_000, seed=1, max_packets=32))]
fn search(
    py: Python<'_>,
    m: u32,
    n: u32,
    t: u32,
    budget: u64,
    seed: u64,
    max_packets: u32,
) -> PyResult<PyObject> {
    let params = SearchParams {
        capacity: m,
        max_queues: n,
        horizon: t,
        max_packets,
        solver_nodes: 4_000_000,
    };
    let outcome = adversarial_search(&params, &search_ties(seed), budget, seed).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("ratio", outcome.ratio)?;
    dict.set_item("opt", outcome.opt)?;
    dict.set_item("lqd", outcome.worst_lqd)?;
    dict.set_item("champion", PyInstance { inner: outcome.champion }.into_pyobject(py)?)?;
    Ok(dict.into_any().unbind())
}

#[pymodule]
fn lqdlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_opt, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(lambert_w_minus1, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    Ok(())
}

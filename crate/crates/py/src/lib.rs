//! Python bindings. Results that are plain records are returned as dicts
//! built from their JSON form.

use catloop::geometry;
use catloop::policy::{self, CandidateGroup, GroupMember, GrpoConfig, MmtgConfig, SequenceLogProbs};
use catloop::reward::{self, PhysConfig, RewardWeights};
use catloop::search::{self, EnergyPredictor, MutationGenerator, PairPotentialSurrogate, ScoringContext, SearchConfig};
use catloop::textify::{to_system_text, SystemMetadata, TextifyConfig};
use catloop::{CompositionVector, CovalentRadiusTable};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn formula(f: &str) -> PyResult<CompositionVector> {
    CompositionVector::parse_formula(f).map_err(err)
}

/// A parsed crystal structure.
#[pyclass(name = "Structure", frozen)]
struct PyStructure {
    inner: catloop::Structure,
}

#[pymethods]
impl PyStructure {
    /// Parses CIF text; raises ValueError listing the fatal defects.
    #[staticmethod]
    fn from_cif(text: &str) -> PyResult<Self> {
        let outcome = catloop::parse_cif(text);
        match outcome.structure {
            Some(inner) => Ok(PyStructure { inner }),
            None => {
                let msgs: Vec<String> =
                    outcome.defects.iter().map(|d| format!("{} (line {}): {}", d.code, d.line, d.message)).collect();
                Err(PyValueError::new_err(msgs.join("; ")))
            }
        }
    }

    fn to_cif(&self) -> String {
        catloop::serialize_cif(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Structure({}, {} sites)", self.inner.composition().reduced_formula(), self.inner.len())
    }

    /// (a, b, c, alpha, beta, gamma) in Å and degrees.
    #[getter]
    fn lattice(&self) -> (f64, f64, f64, f64, f64, f64) {
        let p = self.inner.lattice().params();
        (p.a, p.b, p.c, p.alpha, p.beta, p.gamma)
    }

    /// List of (label, element, (x, y, z)) in fractional coordinates.
    #[getter]
    fn sites(&self) -> Vec<(String, String, (f64, f64, f64))> {
        self.inner
            .sites()
            .iter()
            .map(|s| (s.label.clone(), s.element.symbol().to_string(), (s.frac[0], s.frac[1], s.frac[2])))
            .collect()
    }

    #[getter]
    fn formula(&self) -> String {
        self.inner.composition().reduced_formula()
    }

    fn min_image_distance(&self, i: usize, j: usize) -> PyResult<f64> {
        geometry::min_image_distance(&self.inner, i, j).map_err(err)
    }

    fn min_pair_distance(&self) -> PyResult<f64> {
        geometry::min_pair_distance(&self.inner).map_err(err)
    }

    fn volume_per_atom(&self) -> f64 {
        geometry::volume_per_atom(&self.inner)
    }

    /// Surrogate energy in eV.
    fn surrogate_energy(&self) -> PyResult<f64> {
        PairPotentialSurrogate::default().predict(&self.inner).map_err(err)
    }
}

/// Parses CIF text and returns {"ok": bool, "defects": [...]}.
#[pyfunction]
fn parse_defects(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let outcome = catloop::parse_cif(text);
    #[derive(Serialize)]
    struct Summary<'a> {
        ok: bool,
        defects: &'a [catloop::Defect],
    }
    to_py(py, &Summary { ok: outcome.structure.is_some(), defects: &outcome.defects })
}

/// Parse/valid/composition/physical reward of CIF text against a target formula.
#[pyfunction]
#[pyo3(signature = (text, target, weights = (0.6, 0.2, 0.1, 0.1)))]
fn pvcp(py: Python<'_>, text: &str, target: &str, weights: (f64, f64, f64, f64)) -> PyResult<Py<PyAny>> {
    let w = RewardWeights::new(weights.0, weights.1, weights.2, weights.3).map_err(err)?;
    let r = reward::pvcp(text, &formula(target)?, &w, &CovalentRadiusTable::default(), &PhysConfig::default())
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (rewards, epsilon = 1e-8))]
fn group_advantages(rewards: Vec<f64>, epsilon: f64) -> PyResult<Vec<f64>> {
    let members = rewards
        .into_iter()
        .map(|reward| {
            Ok(GroupMember { sequence: SequenceLogProbs::from_logprobs(vec![0.0], vec![0.0]).map_err(err)?, reward })
        })
        .collect::<PyResult<_>>()?;
    Ok(policy::group_advantages(&CandidateGroup::new("py", members, epsilon).map_err(err)?))
}

#[pyfunction]
fn kl_estimate(logp_current: Vec<f64>, logp_reference: Vec<f64>) -> PyResult<f64> {
    Ok(policy::kl_estimate(&SequenceLogProbs::from_logprobs(logp_current, logp_reference).map_err(err)?))
}

/// Group loss for members given as (logp_current, logp_reference, reward).
#[pyfunction]
#[pyo3(signature = (members, beta = 0.1, epsilon = 1e-8))]
fn grpo_loss(py: Python<'_>, members: Vec<(Vec<f64>, Vec<f64>, f64)>, beta: f64, epsilon: f64) -> PyResult<Py<PyAny>> {
    let members = members
        .into_iter()
        .map(|(cur, reference, reward)| {
            Ok(GroupMember { sequence: SequenceLogProbs::from_logprobs(cur, reference).map_err(err)?, reward })
        })
        .collect::<PyResult<_>>()?;
    let g = CandidateGroup::new("py", members, epsilon).map_err(err)?;
    to_py(py, &policy::grpo_loss(&g, &GrpoConfig { beta, epsilon }).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (l_mae, l_ce, lam = 1.0))]
fn mmtg_loss(l_mae: f64, l_ce: f64, lam: f64) -> PyResult<f64> {
    policy::mmtg_loss(l_mae, l_ce, &MmtgConfig::new(lam).map_err(err)?).map_err(err)
}

/// Text description of an adsorption system; `metadata` is the sidecar JSON.
#[pyfunction]
fn system_text(cif: &str, metadata: &str) -> PyResult<String> {
    let s = PyStructure::from_cif(cif)?.inner;
    let meta: SystemMetadata = serde_json::from_str(metadata).map_err(err)?;
    let t = to_system_text(&meta.tag(&s), &meta, &CovalentRadiusTable::default(), &TextifyConfig::default())
        .map_err(err)?;
    Ok(t.joined)
}

/// Exemplar-pool search from a template structure toward a target energy.
#[pyfunction]
#[pyo3(signature = (template, target_energy, iterations = 10, pool_capacity = 8, candidates_per_iteration = 16, tolerance = 0.1, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_search(
    py: Python<'_>,
    template: &PyStructure,
    target_energy: f64,
    iterations: usize,
    pool_capacity: usize,
    candidates_per_iteration: usize,
    tolerance: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let cfg = SearchConfig {
        target_energy,
        iterations,
        pool_capacity,
        candidates_per_iteration,
        tolerance,
        seed,
        ..Default::default()
    };
    let ctx = ScoringContext::new(template.inner.composition());
    let gen = MutationGenerator::new(template.inner.clone());
    let (report, _) = search::run_search(&cfg, &gen, &PairPotentialSurrogate::default(), &ctx).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn catloop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStructure>()?;
    m.add_function(wrap_pyfunction!(parse_defects, m)?)?;
    m.add_function(wrap_pyfunction!(pvcp, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(kl_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(grpo_loss, m)?)?;
    m.add_function(wrap_pyfunction!(mmtg_loss, m)?)?;
    m.add_function(wrap_pyfunction!(system_text, m)?)?;
    m.add_function(wrap_pyfunction!(run_search, m)?)?;
    Ok(())
}

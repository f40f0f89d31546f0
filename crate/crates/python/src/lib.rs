//! Python bindings for `clusterprior`.

use std::path::PathBuf;

use clusterprior::evaluation::{self, WilcoxonMethod};
use clusterprior::gateway::{BackendConfig, ChatBackend, HttpBackend, MockBackend};
use clusterprior::pipeline::{run_strategy, PipelineError, StrategyContext};
use clusterprior::report_store::StoreError;
use clusterprior::{prioritizer, ClusterNode, PromptVariant, Report, ReportId, StrategyKind};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyList, PyTuple};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn store_err(e: StoreError) -> PyErr {
    match e {
        StoreError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

#[pyclass(name = "Corpus", module = "pyclusterprior", frozen)]
struct PyCorpus {
    inner: clusterprior::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[new]
    #[pyo3(signature = (reports, app_name = "app"))]
    fn new(reports: Vec<(ReportId, String)>, app_name: &str) -> PyResult<Self> {
        let reports = reports.into_iter().map(|(id, d)| Report::new(id, d)).collect();
        let inner = clusterprior::Corpus::new(app_name, reports).map_err(store_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: clusterprior::load_corpus(&path).map_err(store_err)?,
        })
    }

    #[getter]
    fn app_name(&self) -> String {
        self.inner.app_name.clone()
    }

    fn ids(&self) -> Vec<ReportId> {
        self.inner.ids().collect()
    }

    fn description(&self, id: ReportId) -> Option<String> {
        self.inner.get(id).map(|r| r.description.clone())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(app_name={:?}, reports={})",
            self.inner.app_name,
            self.inner.len()
        )
    }
}

#[pyclass(name = "GroundTruth", module = "pyclusterprior", frozen)]
struct PyGroundTruth {
    inner: clusterprior::GroundTruth,
}

#[pymethods]
impl PyGroundTruth {
    #[new]
    fn new(corpus: &PyCorpus, labels: Vec<(ReportId, String)>) -> PyResult<Self> {
        let inner = clusterprior::GroundTruth::new(&corpus.inner, labels).map_err(store_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf, corpus: &PyCorpus) -> PyResult<Self> {
        Ok(Self {
            inner: clusterprior::load_ground_truth(&path, &corpus.inner).map_err(store_err)?,
        })
    }

    fn bug_of(&self, id: ReportId) -> Option<String> {
        self.inner.bug_of(id).map(str::to_owned)
    }

    #[getter]
    fn bug_count(&self) -> usize {
        self.inner.bug_count()
    }

    fn __len__(&self) -> usize {
        self.inner.report_count()
    }
}

#[pyclass(name = "ClusterTree", module = "pyclusterprior", frozen)]
struct PyClusterTree {
    inner: clusterprior::ClusterTree,
}

fn node_from_py(item: &Bound<'_, PyAny>) -> PyResult<ClusterNode> {
    if let Ok(id) = item.extract::<ReportId>() {
        return Ok(ClusterNode::leaf(id));
    }
    let pair = item
        .cast::<PyTuple>()
        .map_err(|_| value_err("tree items must be report ids or (label, children) tuples"))?;
    if pair.len() != 2 {
        return Err(value_err("category tuples must be (label, children)"));
    }
    let label: String = pair.get_item(0)?.extract()?;
    let children = pair.get_item(1)?;
    let children = children
        .cast::<PyList>()
        .map_err(|_| value_err("category children must be a list"))?;
    let nodes = children
        .iter()
        .map(|c| node_from_py(&c))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(ClusterNode::category(label, nodes))
}

#[pymethods]
impl PyClusterTree {
    /// Builds a tree from nested `(label, [children])` tuples; a child is a
    /// report id or another tuple.
    #[new]
    fn new(categories: &Bound<'_, PyList>) -> PyResult<Self> {
        let nodes = categories
            .iter()
            .map(|c| node_from_py(&c))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = clusterprior::ClusterTree::new(nodes);
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn render(&self) -> String {
        clusterprior::render_tree(&self.inner)
    }

    fn report_ids(&self) -> Vec<ReportId> {
        self.inner.report_ids().into_iter().collect()
    }

    fn leaf_count(&self) -> usize {
        self.inner.root.leaf_count()
    }

    /// Raw selection order, repeats included.
    fn raw_sequence(&self) -> PyResult<Vec<ReportId>> {
        let mut tree = self.inner.clone();
        prioritizer::generate_raw(&mut tree).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("ClusterTree(leaves={})", self.inner.root.leaf_count())
    }
}

#[pyclass(name = "ApfdResult", module = "pyclusterprior", frozen, get_all)]
struct PyApfdResult {
    value: f64,
    n: usize,
    m: usize,
    first_hit_indices: Vec<usize>,
}

#[pymethods]
impl PyApfdResult {
    fn __repr__(&self) -> String {
        format!("ApfdResult(value={}, n={}, m={})", self.value, self.n, self.m)
    }
}

#[pyclass(name = "WilcoxonResult", module = "pyclusterprior", frozen, get_all)]
struct PyWilcoxonResult {
    p_value: f64,
    statistic: f64,
    n: usize,
    method: String,
}

#[pymethods]
impl PyWilcoxonResult {
    fn __repr__(&self) -> String {
        format!(
            "WilcoxonResult(p_value={}, statistic={}, n={}, method={:?})",
            self.p_value, self.statistic, self.n, self.method
        )
    }
}

#[pyclass(name = "Prioritization", module = "pyclusterprior", frozen, get_all)]
struct PyPrioritization {
    order: Vec<ReportId>,
    strategy: String,
    seed: Option<u64>,
    incomplete: bool,
    prompt: Option<String>,
    response: Option<String>,
    prompt_tokens: Option<u64>,
    response_tokens: Option<u64>,
    tree: Option<String>,
}

#[pyfunction]
#[pyo3(signature = (corpus, variant = "cluster"))]
fn build_prompt(corpus: &PyCorpus, variant: &str) -> PyResult<String> {
    let variant: PromptVariant = variant.parse().map_err(value_err)?;
    Ok(clusterprior::build_prompt(&corpus.inner, variant)
        .map_err(value_err)?
        .text)
}

/// Parses a LEVEL-formatted answer; returns the tree and the reports it omitted.
#[pyfunction]
fn parse_response(text: &str, corpus: &PyCorpus) -> PyResult<(PyClusterTree, Vec<ReportId>)> {
    let parsed = clusterprior::parse_response(text, &corpus.inner).map_err(value_err)?;
    Ok((PyClusterTree { inner: parsed.tree }, parsed.missing))
}

#[pyfunction]
fn generate_sequence(tree: &PyClusterTree) -> PyResult<Vec<ReportId>> {
    Ok(clusterprior::generate_sequence(tree.inner.clone())
        .map_err(value_err)?
        .order)
}

#[pyfunction]
fn deduplicate(raw: Vec<ReportId>) -> Vec<ReportId> {
    clusterprior::deduplicate(&raw)
}

#[pyfunction]
fn ideal_sequence(corpus: &PyCorpus, truth: &PyGroundTruth) -> Vec<ReportId> {
    clusterprior::ideal_sequence(&corpus.inner, &truth.inner).order
}

#[pyfunction]
fn random_sequence(corpus: &PyCorpus, seed: u64) -> Vec<ReportId> {
    clusterprior::random_sequence(&corpus.inner, seed).order
}

#[pyfunction]
fn apfd(order: Vec<ReportId>, truth: &PyGroundTruth) -> PyResult<PyApfdResult> {
    let r = clusterprior::apfd(&order, &truth.inner).map_err(value_err)?;
    Ok(PyApfdResult {
        value: r.value,
        n: r.n,
        m: r.m,
        first_hit_indices: r.first_hit_indices,
    })
}

#[pyfunction]
fn tpr(prompt_tokens: u64, response_tokens: u64, report_count: usize) -> PyResult<f64> {
    Ok(
        evaluation::tpr_from_counts(prompt_tokens, response_tokens, report_count)
            .map_err(value_err)?
            .value,
    )
}

#[pyfunction]
fn wilcoxon(a: Vec<f64>, b: Vec<f64>) -> PyResult<PyWilcoxonResult> {
    if a.len() != b.len() {
        return Err(value_err("samples must have equal length"));
    }
    let pairs: Vec<(f64, f64)> = a.into_iter().zip(b).collect();
    let r = clusterprior::wilcoxon_signed_rank(&pairs).map_err(value_err)?;
    Ok(PyWilcoxonResult {
        p_value: r.p_value,
        statistic: r.statistic,
        n: r.n,
        method: match r.method {
            WilcoxonMethod::Exact => "exact",
            WilcoxonMethod::Normal => "normal",
        }
        .to_string(),
    })
}

#[pyfunction]
fn cohens_d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    clusterprior::cohens_d(&a, &b).map_err(value_err)
}

/// Runs one strategy end to end. Model strategies use `mock_script` when
/// given, otherwise the HTTP endpoint from `endpoint`/`model` and the
/// `OPENAI_API_KEY` environment variable.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (corpus, strategy = "llmprior", truth = None, seed = None, mock_script = None, endpoint = None, model = None))]
fn prioritize(
    py: Python<'_>,
    corpus: &PyCorpus,
    strategy: &str,
    truth: Option<&PyGroundTruth>,
    seed: Option<u64>,
    mock_script: Option<PathBuf>,
    endpoint: Option<String>,
    model: Option<String>,
) -> PyResult<PyPrioritization> {
    let strategy: StrategyKind = strategy.parse().map_err(value_err)?;
    let mut config = BackendConfig::default();
    if let Some(e) = endpoint {
        config.endpoint = e;
    }
    if let Some(m) = model {
        config.model_name = m;
    }
    let backend: Option<Box<dyn ChatBackend>> = match (strategy.needs_backend(), mock_script) {
        (false, _) => None,
        (true, Some(path)) => Some(Box::new(MockBackend::from_file(&path, false).map_err(value_err)?)),
        (true, None) => Some(Box::new(HttpBackend::from_env())),
    };
    let mut ctx = StrategyContext::new(&corpus.inner);
    ctx.truth = truth.map(|t| &t.inner);
    ctx.backend = backend.as_deref();
    ctx.config = config;
    let run = py
        .detach(|| run_strategy(&ctx, strategy, seed))
        .map_err(|f| match f.error {
            PipelineError::Gateway(e) => PyRuntimeError::new_err(e.to_string()),
            PipelineError::Store(e) => store_err(e),
            other => value_err(other),
        })?;
    let exchange = run.sequence.exchange.clone();
    Ok(PyPrioritization {
        order: run.sequence.order,
        strategy: strategy.to_string(),
        seed: run.sequence.seed,
        incomplete: run.sequence.incomplete,
        prompt: run.prompt.map(|p| p.text),
        response: exchange.as_ref().map(|e| e.response_text.clone()),
        prompt_tokens: exchange.as_ref().map(|e| e.prompt_tokens),
        response_tokens: exchange.as_ref().map(|e| e.response_tokens),
        tree: run.tree.as_ref().map(clusterprior::render_tree),
    })
}

#[pymodule]
fn pyclusterprior(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyGroundTruth>()?;
    m.add_class::<PyClusterTree>()?;
    m.add_class::<PyApfdResult>()?;
    m.add_class::<PyWilcoxonResult>()?;
    m.add_class::<PyPrioritization>()?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(deduplicate, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(random_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(apfd, m)?)?;
    m.add_function(wrap_pyfunction!(tpr, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(prioritize, m)?)?;
    Ok(())
}

//! Python bindings: `import tadpy`.
//!
//! Tasks are passed as lists of category ids. Structured results come back as
//! plain dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use tad_core::apps::{
    self, run_intervention, InterventionConfig, ScoredTask, Strategy, SynthEvaluator,
    SynthWorldConfig, TaskEvaluator,
};
use tad_core::attr_model::io::{load_attribute_table, read_schema, save_attribute_table, TableFormat};
use tad_core::attr_model::AttributeSchema;
use tad_core::distance::DiscreteDistribution;
use tad_core::episodes::{self, EpisodeConfig};
use tad_core::matching::{self, CostMatrix, Matching};
use tad_core::{
    AttributeTable, CategoryProfile, FeatureRecord, TadError, Tables, TaskSpec, Variant,
};

create_exception!(tadpy, InfeasibleError, PyValueError);

fn err(e: TadError) -> PyErr {
    match e {
        TadError::Infeasible(msg) => InfeasibleError::new_err(msg),
        TadError::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: std::str::FromStr<Err = TadError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn tasks_from(ids: Vec<Vec<String>>, prefix: &str) -> PyResult<Vec<TaskSpec>> {
    ids.into_iter()
        .enumerate()
        .map(|(i, cats)| TaskSpec::new(format!("{prefix}-{i:06}"), cats, prefix).map_err(err))
        .collect()
}

fn tables<'a>(first: &'a Table, second: Option<&'a Table>) -> PyResult<Tables<'a>> {
    match second {
        Some(s) => Tables::split(&first.inner, &s.inner).map_err(err),
        None => Ok(Tables::shared(&first.inner)),
    }
}

/// Attribute table: per-category, per-attribute value distributions.
#[pyclass(module = "tadpy", frozen)]
struct Table {
    inner: AttributeTable,
}

#[pymethods]
impl Table {
    #[staticmethod]
    #[pyo3(signature = (path, format = "distribution-csv", schema = None))]
    fn load(path: &str, format: &str, schema: Option<&str>) -> PyResult<Self> {
        let schema = schema.map(read_schema).transpose().map_err(err)?;
        let inner = load_attribute_table(path, parse::<TableFormat>(format)?, schema.as_ref()).map_err(err)?;
        Ok(Self { inner })
    }

    /// Binary table from `P(a_l = 1)` per category.
    #[staticmethod]
    fn from_binary_marginals(category_ids: Vec<String>, marginals: Vec<Vec<f64>>) -> PyResult<Self> {
        if category_ids.len() != marginals.len() {
            return Err(PyValueError::new_err("one marginal row per category"));
        }
        let width = marginals.first().map_or(0, Vec::len);
        let schema = AttributeSchema::binary(width).map_err(err)?;
        let profiles = category_ids
            .into_iter()
            .zip(&marginals)
            .map(|(id, p)| CategoryProfile::from_binary_marginals(id, p))
            .collect();
        let inner = AttributeTable::new(schema, profiles, "").map_err(err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (path, format = "distribution-csv"))]
    fn save(&self, path: &str, format: &str) -> PyResult<()> {
        save_attribute_table(&self.inner, path, parse::<TableFormat>(format)?).map_err(err)
    }

    fn category_ids(&self) -> Vec<String> {
        self.inner.category_ids().map(String::from).collect()
    }

    fn num_attributes(&self) -> usize {
        self.inner.schema().len()
    }

    fn distributions(&self, category_id: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.profile(category_id)?.distributions.clone())
    }

    fn category_distance(&self, first: &str, second: &str) -> PyResult<f64> {
        tad_core::distance::category_distance(self.profile(first)?, self.profile(second)?).map_err(err)
    }

    fn lemma1_check(&self, py: Python<'_>, first: &str, second: &str) -> PyResult<Py<PyAny>> {
        let report = tad_core::distance::lemma1_check(self.profile(first)?, self.profile(second)?).map_err(err)?;
        to_py(py, &report)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Table({} categories, {} attributes)",
            self.inner.len(),
            self.inner.schema().len()
        )
    }
}

impl Table {
    fn profile(&self, id: &str) -> PyResult<&CategoryProfile> {
        self.inner
            .profile(id)
            .ok_or_else(|| PyValueError::new_err(format!("category '{id}' not in table")))
    }
}

#[pyfunction]
fn tv_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let p = DiscreteDistribution::new(p).map_err(err)?;
    let q = DiscreteDistribution::new(q).map_err(err)?;
    tad_core::distance::tv_distance(&p, &q).map_err(err)
}

type Edges = Vec<(String, String, f64)>;

fn matching_out(m: Matching) -> (f64, Vec<(usize, usize)>) {
    (m.total_weight, m.pairs)
}

/// `(total_weight, pairs)` of the minimum-weight maximum matching.
#[pyfunction]
fn hungarian_min_weight(cost: Vec<Vec<f64>>) -> PyResult<(f64, Vec<(usize, usize)>)> {
    let cost = CostMatrix::from_rows(&cost).map_err(err)?;
    matching::hungarian_min_weight(&cost).map(matching_out).map_err(err)
}

/// Exhaustive counterpart of `hungarian_min_weight` for small matrices.
#[pyfunction]
fn brute_force_min_weight(cost: Vec<Vec<f64>>) -> PyResult<(f64, Vec<(usize, usize)>)> {
    let cost = CostMatrix::from_rows(&cost).map_err(err)?;
    matching::brute_force_min_weight(&cost).map(matching_out).map_err(err)
}

/// Matched distance between two tasks and the matched category pairs.
#[pyfunction]
#[pyo3(signature = (table, first, second, second_table = None))]
fn tad_orig(
    table: &Table,
    first: Vec<String>,
    second: Vec<String>,
    second_table: Option<PyRef<'_, Table>>,
) -> PyResult<(f64, Edges)> {
    let tables = tables(table, second_table.as_deref())?;
    let a = TaskSpec::new("first", first, "").map_err(err)?;
    let b = TaskSpec::new("second", second, "").map_err(err)?;
    let r = tad_core::tad::tad_orig(&a, &b, tables).map_err(err)?;
    let edges = r.per_edge.into_iter().map(|e| (e.first, e.second, e.distance)).collect();
    Ok((r.orig.unwrap_or_default(), edges))
}

/// Approximate distance; both tasks must have the same number of categories.
#[pyfunction]
#[pyo3(signature = (table, first, second, second_table = None))]
fn tad_approx(
    table: &Table,
    first: Vec<String>,
    second: Vec<String>,
    second_table: Option<PyRef<'_, Table>>,
) -> PyResult<f64> {
    let tables = tables(table, second_table.as_deref())?;
    let a = TaskSpec::new("first", first, "").map_err(err)?;
    let b = TaskSpec::new("second", second, "").map_err(err)?;
    tad_core::tad::tad_approx(&a, &b, tables).map_err(err)
}

/// Mean distance from each novel task to the pool; pool tasks resolve in
/// `table`, novel tasks in `novel_table` when given.
#[pyfunction]
#[pyo3(signature = (table, novel_tasks, pool, variant = "approx", novel_table = None))]
fn avg_distances(
    py: Python<'_>,
    table: &Table,
    novel_tasks: Vec<Vec<String>>,
    pool: Vec<Vec<String>>,
    variant: &str,
    novel_table: Option<PyRef<'_, Table>>,
) -> PyResult<Vec<f64>> {
    let tables = tables(table, novel_table.as_deref())?;
    let variant: Variant = parse(variant)?;
    let novel = tasks_from(novel_tasks, "novel")?;
    let pool = tasks_from(pool, "pool")?;
    py.detach(|| tad_core::tad::avg_distances(&novel, &pool, tables, variant))
        .map_err(err)
}

#[pyfunction]
fn vc_complexity_term(m: u64, d: u64, delta: f64) -> PyResult<f64> {
    tad_core::distance::vc_complexity_term(m, d, delta).map_err(err)
}

/// `num_tasks` lists of `ways` distinct classes, reproducible from the seed.
#[pyfunction]
#[pyo3(signature = (classes, ways, num_tasks, seed = 0))]
fn sample_tasks(classes: Vec<String>, ways: usize, num_tasks: usize, seed: u64) -> PyResult<Vec<Vec<String>>> {
    let config = EpisodeConfig {
        ways,
        shots: 1,
        queries: 1,
        seed,
    };
    let tasks = episodes::sample_tasks(&classes, &config, num_tasks, "pool").map_err(err)?;
    Ok(tasks.into_iter().map(|t| t.category_ids).collect())
}

/// Binned accuracy curve plus the count-weighted linear fit.
#[pyfunction]
#[pyo3(signature = (distances, accuracies, bin_width = 0.01, min_count = 5))]
fn accuracy_curve(
    py: Python<'_>,
    distances: Vec<f64>,
    accuracies: Vec<f64>,
    bin_width: f64,
    min_count: usize,
) -> PyResult<Py<PyAny>> {
    if distances.len() != accuracies.len() {
        return Err(PyValueError::new_err("distances and accuracies differ in length"));
    }
    let records: Vec<(f64, f64)> = distances.into_iter().zip(accuracies).collect();
    let bins = episodes::bin_accuracy_curve(&records, bin_width, min_count).map_err(err)?;
    let fit = episodes::fit_linear(&bins).map_err(err)?;
    #[derive(Serialize)]
    struct Curve {
        bins: Vec<episodes::BinStat>,
        fit: episodes::RegressionFit,
    }
    to_py(py, &Curve { bins, fit })
}

#[pyfunction]
fn fit_gamma_moments(py: Python<'_>, samples: Vec<f64>) -> PyResult<Py<PyAny>> {
    to_py(py, &episodes::fit_gamma_moments(&samples).map_err(err)?)
}

/// Ids of the most distant fraction of tasks.
#[pyfunction]
fn select_top_fraction(records: Vec<(String, f64)>, fraction: f64) -> PyResult<Vec<String>> {
    episodes::select_top_fraction(&records, fraction).map_err(err)
}

fn features(rows: Vec<(String, String, Vec<f64>)>) -> Vec<FeatureRecord> {
    rows.into_iter()
        .map(|(instance_id, category_id, scores)| FeatureRecord {
            instance_id,
            category_id,
            scores,
        })
        .collect()
}

/// Prototype classifier; support and query rows are `(instance, category, scores)`.
#[pyfunction]
#[pyo3(signature = (support, query, temperature = 1.0))]
fn prototype_classifier_eval(
    py: Python<'_>,
    support: Vec<(String, String, Vec<f64>)>,
    query: Vec<(String, String, Vec<f64>)>,
    temperature: f64,
) -> PyResult<Py<PyAny>> {
    let query = features(query);
    let out = apps::prototype_classifier_eval(&features(support), &query, temperature).map_err(err)?;
    let loss = apps::episode_loss(&out, &query).map_err(err)?;
    let dict = to_py(py, &out)?;
    dict.bind(py).set_item("episode_loss", loss)?;
    Ok(dict)
}

/// Synthetic attribute world. Keyword arguments override the default config.
#[pyclass(module = "tadpy", frozen)]
struct SynthWorld {
    inner: apps::SynthWorld,
}

#[pymethods]
impl SynthWorld {
    #[new]
    #[pyo3(signature = (**config))]
    fn new(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let config: SynthWorldConfig = match config {
            Some(d) => {
                let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
                serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            None => SynthWorldConfig::default(),
        };
        let inner = py.detach(|| apps::generate_synth_world(&config)).map_err(err)?;
        Ok(Self { inner })
    }

    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.config)
    }

    fn table(&self) -> Table {
        Table {
            inner: self.inner.table.clone(),
        }
    }

    fn train_class_ids(&self) -> Vec<String> {
        self.inner.train_class_ids()
    }

    fn novel_class_ids(&self) -> Vec<String> {
        self.inner.novel_class_ids()
    }

    fn class_ids_in_domain(&self, domain: usize) -> Vec<String> {
        self.inner.class_ids_in_domain(domain)
    }

    /// `(instance, category, scores)` rows of one class.
    fn instances(&self, category_id: &str) -> PyResult<Vec<(String, String, Vec<f64>)>> {
        Ok(self
            .inner
            .instances(category_id)
            .map_err(err)?
            .iter()
            .map(|f| (f.instance_id.clone(), f.category_id.clone(), f.scores.clone()))
            .collect())
    }

    /// Prototype classifier accuracy of one sampled episode per task.
    #[pyo3(signature = (tasks, shots = 1, queries = 15, temperature = 0.1, seed = 0))]
    fn evaluate(
        &self,
        py: Python<'_>,
        tasks: Vec<Vec<String>>,
        shots: usize,
        queries: usize,
        temperature: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let tasks = tasks_from(tasks, "novel")?;
        let evaluator = SynthEvaluator {
            world: &self.inner,
            shots,
            queries,
            temperature,
        };
        py.detach(|| {
            tasks
                .iter()
                .enumerate()
                .map(|(i, t)| evaluator.accuracy(i, t, seed, None))
                .collect::<tad_core::Result<Vec<_>>>()
        })
        .map_err(err)
    }

    /// Test-time intervention on tasks with their distances; returns the report.
    #[pyo3(signature = (
        tasks, distances, threshold = 0.18, budget = 25, strategy = "balanced",
        seeds = vec![0], ks = vec![5, 10, 20, 60, 120], shots = 1, queries = 15, temperature = 0.1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn intervene(
        &self,
        py: Python<'_>,
        tasks: Vec<Vec<String>>,
        distances: Vec<f64>,
        threshold: f64,
        budget: usize,
        strategy: &str,
        seeds: Vec<u64>,
        ks: Vec<usize>,
        shots: usize,
        queries: usize,
        temperature: f64,
    ) -> PyResult<Py<PyAny>> {
        if tasks.len() != distances.len() {
            return Err(PyValueError::new_err("one distance per task"));
        }
        let scored: Vec<ScoredTask> = tasks_from(tasks, "novel")?
            .into_iter()
            .zip(distances)
            .map(|(task, distance)| ScoredTask { task, distance })
            .collect();
        let config = InterventionConfig {
            threshold_r: threshold,
            budget,
            strategy: parse::<Strategy>(strategy)?,
            seeds,
            ks,
        };
        let evaluator = SynthEvaluator {
            world: &self.inner,
            shots,
            queries,
            temperature,
        };
        let report = py.detach(|| run_intervention(&scored, &evaluator, &config)).map_err(err)?;
        to_py(py, &report)
    }
}

#[pymodule]
pub fn tadpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("RNG_NAME", tad_core::RNG_NAME)?;
    m.add_class::<Table>()?;
    m.add_class::<SynthWorld>()?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian_min_weight, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_min_weight, m)?)?;
    m.add_function(wrap_pyfunction!(tad_orig, m)?)?;
    m.add_function(wrap_pyfunction!(tad_approx, m)?)?;
    m.add_function(wrap_pyfunction!(avg_distances, m)?)?;
    m.add_function(wrap_pyfunction!(vc_complexity_term, m)?)?;
    m.add_function(wrap_pyfunction!(sample_tasks, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gamma_moments, m)?)?;
    m.add_function(wrap_pyfunction!(select_top_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(prototype_classifier_eval, m)?)?;
    Ok(())
}

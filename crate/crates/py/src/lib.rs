//! Python module `synthrec`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use synthrec_core::dataset::{self as ds, FormatSpec, RatingRange, RatingTriple};
use synthrec_core::deepmf::{self, DeepMfConfig, RatingCodec};
use synthrec_core::discretize::{self, ConflictPolicy, KMeansConfig, SynthesisSpec};
use synthrec_core::evaluate::{self as eval, EvalConfig};
use synthrec_core::gan::{self, GanCheckpoint, GanTrainConfig};
use synthrec_core::nn::Tensor2;
use synthrec_core::pipeline::{cmd_pipeline, PipelineConfig};
use synthrec_core::{Error, Rng};

create_exception!(synthrec, SynthrecError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingInput(_) => PyOSError::new_err(e.to_string()),
        Error::Training(_) | Error::DegenerateBatch { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Parameter(_) | Error::Validation(_) | Error::Config(_) | Error::Shape { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => SynthrecError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| SynthrecError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rows(t: &Tensor2) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

/// Sparse ratings dataset with 1-based user and item IDs.
#[pyclass(name = "Dataset", module = "synthrec", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: ds::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (triples, num_users, num_items, rating_min = 1, rating_max = 5, label = "dataset".to_string()))]
    fn new(
        triples: Vec<(u32, u32, i32)>,
        num_users: usize,
        num_items: usize,
        rating_min: i32,
        rating_max: i32,
        label: String,
    ) -> PyResult<Self> {
        let range = RatingRange::new(rating_min, rating_max).map_err(to_py)?;
        let t = triples.into_iter().map(|(u, i, r)| RatingTriple::new(u, i, r)).collect();
        Ok(Self {
            inner: ds::Dataset::new(t, num_users, num_items, range, label).map_err(to_py)?,
        })
    }

    /// Reads a ratings file; `format` is `canonical`, `movielens`, `csv` or `tsv`.
    #[staticmethod]
    #[pyo3(signature = (path, format = "canonical"))]
    fn load(path: PathBuf, format: &str) -> PyResult<Self> {
        let f: FormatSpec = format.parse().map_err(to_py)?;
        Ok(Self {
            inner: ds::load_dataset(path, &f).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (path, format = "canonical"))]
    fn write(&self, path: PathBuf, format: &str) -> PyResult<()> {
        let f: FormatSpec = format.parse().map_err(to_py)?;
        ds::write_dataset(&self.inner, path, &f).map_err(to_py)
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    #[getter]
    fn num_items(&self) -> usize {
        self.inner.num_items()
    }

    #[getter]
    fn rating_range(&self) -> (i32, i32) {
        let r = self.inner.range();
        (r.min, r.max)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn sparsity(&self) -> f64 {
        self.inner.sparsity()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn triples(&self) -> Vec<(u32, u32, i32)> {
        self.inner.triples().iter().map(|t| (t.user, t.item, t.rating)).collect()
    }

    /// Rating, user-activity and item-popularity histograms.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &ds::stats(&self.inner))
    }

    /// Seeded per-user holdout split; returns `(train, test)`.
    #[pyo3(signature = (test_fraction = 0.2, seed = 0))]
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = ds::split(&self.inner, test_fraction, &mut Rng::new(seed)).map_err(to_py)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(label={:?}, ratings={}, users={}, items={}, range={})",
            self.inner.label(),
            self.inner.len(),
            self.inner.num_users(),
            self.inner.num_items(),
            self.inner.range()
        )
    }
}

/// Dot-product matrix factorization model.
#[pyclass(name = "DeepMF", module = "synthrec", skip_from_py_object)]
#[derive(Clone)]
struct PyDeepMf {
    inner: deepmf::DeepMfModel,
}

#[pymethods]
impl PyDeepMf {
    #[staticmethod]
    #[pyo3(signature = (dataset, embedding_size = 5, epochs = 20, batch_size = 256, learning_rate = 0.001, seed = 0))]
    fn train(
        py: Python<'_>,
        dataset: &PyDataset,
        embedding_size: usize,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let mut cfg = DeepMfConfig {
            embedding_size,
            epochs,
            batch_size,
            ..DeepMfConfig::default()
        };
        cfg.adam = cfg.adam.with_learning_rate(learning_rate);
        let data = dataset.inner.clone();
        let (m, h) = py
            .detach(move || deepmf::train_deepmf(&data, &cfg, &mut Rng::new(seed)))
            .map_err(to_py)?;
        Ok((Self { inner: m }, h.epoch_mse))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: deepmf::DeepMfModel::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn predict(&self, user: u32, item: u32) -> PyResult<f64> {
        self.inner.predict(user, item).map_err(to_py)
    }

    fn user_embeddings(&self) -> Vec<Vec<f64>> {
        rows(self.inner.users().matrix())
    }

    fn item_embeddings(&self) -> Vec<Vec<f64>> {
        rows(self.inner.items().matrix())
    }

    /// `⟨user_vec, item_vec, rating_code⟩` rows for every rating of `dataset`.
    fn dense_samples(&self, dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        let (u, i) = deepmf::extract_embeddings(&self.inner);
        let d = deepmf::densify(&dataset.inner, &u, &i, &self.inner.codec()).map_err(to_py)?;
        Ok(rows(&deepmf::dense_matrix(&d).map_err(to_py)?))
    }

    #[getter]
    fn embedding_size(&self) -> usize {
        self.inner.embedding_size()
    }

    #[getter]
    fn rating_range(&self) -> (i32, i32) {
        let r = self.inner.codec().range();
        (r.min, r.max)
    }
}

/// Trained generator and discriminator plus the rating codec of their data.
#[pyclass(name = "Gan", module = "synthrec", skip_from_py_object)]
#[derive(Clone)]
struct PyGan {
    inner: GanCheckpoint,
    codec: RatingCodec,
}

#[pymethods]
impl PyGan {
    /// Trains on the dense samples of `dataset` under `model`; returns the GAN
    /// and its per-epoch loss history.
    #[staticmethod]
    #[pyo3(signature = (model, dataset, epochs = 20, batch_size = 64, seed = 0))]
    fn train<'py>(
        py: Python<'py>,
        model: &PyDeepMf,
        dataset: &PyDataset,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<(Self, Bound<'py, PyAny>)> {
        let (u, i) = deepmf::extract_embeddings(&model.inner);
        let codec = model.inner.codec();
        let dense = deepmf::dense_matrix(&deepmf::densify(&dataset.inner, &u, &i, &codec).map_err(to_py)?)
            .map_err(to_py)?;
        let cfg = GanTrainConfig {
            epochs,
            batch_size,
            ..GanTrainConfig::default()
        };
        let (g, d, h) = py
            .detach(move || gan::train_gan(&dense, &cfg, &mut Rng::new(seed)))
            .map_err(to_py)?;
        let history = json_to_py(py, &h.epochs)?;
        Ok((
            Self {
                inner: GanCheckpoint {
                    generator: g,
                    discriminator: d,
                },
                codec,
            },
            history,
        ))
    }

    /// `n` generated dense samples at noise std `std`.
    #[pyo3(signature = (n, std = 1.0, seed = 0))]
    fn generate(&self, n: usize, std: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let f = gan::generate(&self.inner.generator, n, std, &mut Rng::new(seed)).map_err(to_py)?;
        Ok(rows(&f.samples))
    }

    /// Discriminator scores in (0, 1).
    fn score(&self, samples: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let t = Tensor2::from_rows(&samples).map_err(to_py)?;
        self.inner.discriminator.score(&t).map_err(to_py)
    }

    #[pyo3(signature = (users, items, samples, std = 2.5, conflict_policy = "remove_all", seed = 0, cluster_sample = None))]
    #[allow(clippy::too_many_arguments)]
    fn synthesize<'py>(
        &self,
        py: Python<'py>,
        users: usize,
        items: usize,
        samples: usize,
        std: f64,
        conflict_policy: &str,
        seed: u64,
        cluster_sample: Option<usize>,
    ) -> PyResult<(PyDataset, Bound<'py, PyAny>)> {
        let spec = SynthesisSpec {
            users,
            items,
            samples,
            std,
            conflict_policy: conflict_policy.parse::<ConflictPolicy>().map_err(to_py)?,
            seed,
            cluster_sample,
            kmeans: KMeansConfig::default(),
        };
        let generator = self.inner.generator.clone();
        let codec = self.codec;
        let s = py
            .detach(move || discretize::synthesize(&generator, codec, &spec))
            .map_err(to_py)?;
        let provenance = json_to_py(py, &s.provenance)?;
        Ok((PyDataset { inner: s.dataset }, provenance))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (path, rating_min = 1, rating_max = 5))]
    fn load(path: PathBuf, rating_min: i32, rating_max: i32) -> PyResult<Self> {
        Ok(Self {
            inner: GanCheckpoint::load(path).map_err(to_py)?,
            codec: RatingCodec::new(RatingRange::new(rating_min, rating_max).map_err(to_py)?),
        })
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.generator.parameter_count()
    }
}

/// k-means++ seeded Lloyd fit; returns `(centroids, inertia, 1-based labels)`.
#[pyfunction]
#[pyo3(signature = (points, k, seed = 0, max_iters = 100, tol = 1e-4))]
fn kmeans(points: Vec<Vec<f64>>, k: usize, seed: u64, max_iters: usize, tol: f64) -> PyResult<(Vec<Vec<f64>>, f64, Vec<u32>)> {
    let x = Tensor2::from_rows(&points).map_err(to_py)?;
    let m = discretize::kmeans_fit(&x, k, &mut Rng::new(seed), &KMeansConfig { max_iters, tol }).map_err(to_py)?;
    let labels = discretize::assign_all(&m, &x).map_err(to_py)?;
    Ok((rows(m.centroids()), m.inertia(), labels))
}

/// MAE, accuracy and precision/recall/F1 with a freshly trained DeepMF.
#[pyfunction]
#[pyo3(signature = (dataset, seed = 0, test_fraction = 0.2))]
fn evaluate<'py>(py: Python<'py>, dataset: &PyDataset, seed: u64, test_fraction: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = EvalConfig {
        seed,
        test_fraction,
        ..EvalConfig::default()
    };
    let data = dataset.inner.clone();
    let q = py.detach(move || eval::evaluate_dataset(&data, &cfg)).map_err(to_py)?;
    json_to_py(py, &q)
}

/// Rating-distribution and activity comparison of two datasets.
#[pyfunction]
fn compare<'py>(py: Python<'py>, source: &PyDataset, synthetic: &PyDataset) -> PyResult<Bound<'py, PyAny>> {
    let c = eval::compare_distributions(&source.inner, &synthetic.inner).map_err(to_py)?;
    json_to_py(py, &c)
}

/// Runs the whole pipeline from a TOML config string.
#[pyfunction]
fn run_pipeline<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = PipelineConfig::from_toml(config_toml).map_err(to_py)?;
    let out = py.detach(move || cmd_pipeline(&cfg)).map_err(to_py)?;
    json_to_py(py, &out)
}

/// Default pipeline configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    PipelineConfig::default().to_toml()
}

#[pymodule]
fn synthrec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SynthrecError", m.py().get_type::<SynthrecError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyDeepMf>()?;
    m.add_class::<PyGan>()?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}

//! Python bindings: simulation archives, datasets, the classifier and the
//! signal and statistics helpers.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use socketvib::dsp::{self, PipelineConfig};
use socketvib::lstm::{self, reference_preset, ModelParams, NetworkSpec};
use socketvib::metrics;
use socketvib::report::{self, TransmissionReport};
use socketvib::signal::{self, AxisTraceSet, ReductionMethod};
use socketvib::sim::{self, HandArchetype, ImpactMode, ImpactorConfig};
use socketvib::workflow;

fn err(e: socketvib::Error) -> PyErr {
    let msg = format!("[{}] {e}", e.kind());
    match e {
        socketvib::Error::Io { .. } => PyIOError::new_err(msg),
        socketvib::Error::InvalidArgument(_) | socketvib::Error::Shape(_) | socketvib::Error::Empty(_) => {
            PyValueError::new_err(msg)
        }
        _ => PyRuntimeError::new_err(msg),
    }
}

fn hand(s: &str) -> PyResult<HandArchetype> {
    s.parse().map_err(err)
}

fn pipeline(reduction: &str) -> PyResult<PipelineConfig> {
    let reduction: ReductionMethod = reduction.parse().map_err(err)?;
    Ok(PipelineConfig {
        reduction,
        ..PipelineConfig::default()
    })
}

fn axes(ax: Vec<f64>, ay: Vec<f64>, az: Vec<f64>, sample_rate: f64) -> PyResult<AxisTraceSet> {
    AxisTraceSet::new(0, sample_rate, ax, ay, az).map_err(err)
}

/// Raw simulated impacts on one hand.
#[pyclass(module = "socketvib_py")]
struct SimArchive {
    inner: sim::SimArchive,
}

#[pymethods]
impl SimArchive {
    /// Simulates `n_per_finger` impacts on every finger of `hand`.
    #[new]
    #[pyo3(signature = (hand, n_per_finger, seed, impactor = "hammer", jitter = true, noise = true))]
    fn new(
        py: Python<'_>,
        hand: &str,
        n_per_finger: usize,
        seed: u64,
        impactor: &str,
        jitter: bool,
        noise: bool,
    ) -> PyResult<Self> {
        let archetype = self::hand(hand)?;
        let mode: ImpactMode = impactor.parse().map_err(err)?;
        let mut imp = ImpactorConfig::for_mode(mode);
        if !jitter {
            imp = imp.without_jitter();
        }
        let mut model = sim::build_hand_model(archetype);
        if !noise {
            model.sensor.noise_std = 0.0;
        }
        let outputs = py
            .detach(|| sim::batch_simulate(&model, &imp, n_per_finger, seed))
            .map_err(err)?;
        Ok(Self {
            inner: sim::SimArchive {
                archetype,
                seed,
                n_per_finger,
                impactor: imp,
                outputs,
            },
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: sim::SimArchive::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.outputs.len()
    }

    #[getter]
    fn hand(&self) -> &'static str {
        self.inner.archetype.code()
    }

    /// Finger names in batch order.
    fn fingers(&self) -> Vec<&'static str> {
        self.inner.outputs.iter().map(|o| o.finger.name()).collect()
    }

    /// Contact force along z for impact `i`.
    fn force(&self, i: usize) -> PyResult<Vec<f64>> {
        let o = self.inner.outputs.get(i).ok_or_else(|| PyValueError::new_err("impact index out of range"))?;
        Ok(o.output.force.fz.clone())
    }

    /// Per-sensor socket energies of every impact, rows in batch order.
    #[pyo3(signature = (reduction = "dft321"))]
    fn energies(&self, reduction: &str) -> PyResult<Vec<Vec<f64>>> {
        let cfg = pipeline(reduction)?;
        self.inner
            .outputs
            .iter()
            .map(|o| dsp::run_pipeline(&o.output, &cfg).map(|p| p.energies.to_vec()))
            .collect::<socketvib::Result<_>>()
            .map_err(err)
    }

    /// Mean energy per finger (rows) and sensor (columns), plus the hand mean.
    #[pyo3(signature = (reduction = "dft321"))]
    fn summary<'py>(&self, py: Python<'py>, reduction: &str) -> PyResult<Bound<'py, PyDict>> {
        let cfg = pipeline(reduction)?;
        let s = workflow::summarize_outputs(self.inner.archetype, &self.inner.outputs, &cfg).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("hand", s.archetype.code())?;
        d.set_item("matrix", s.rows())?;
        d.set_item("mean", s.mean)?;
        d.set_item("impacts", s.impacts)?;
        Ok(d)
    }

    /// Labeled dataset of reduced socket traces.
    #[pyo3(signature = (reduction = "dft321"))]
    fn to_dataset(&self, reduction: &str) -> PyResult<Dataset> {
        let cfg = pipeline(reduction)?;
        let a = &self.inner;
        let d = workflow::dataset_from_outputs(a.archetype, &a.outputs, &cfg, a.seed, Default::default()).map_err(err)?;
        Ok(Dataset { inner: d })
    }
}

/// Labeled samples of one hand.
#[pyclass(module = "socketvib_py")]
struct Dataset {
    inner: signal::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: signal::load_dataset(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        signal::save_dataset(&self.inner, &path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn hand(&self) -> &'static str {
        self.inner.manifest.archetype.code()
    }

    #[getter]
    fn role(&self) -> &'static str {
        self.inner.manifest.role.name()
    }

    /// Samples per finger, thumb first.
    fn counts(&self) -> Vec<usize> {
        self.inner.counts().to_vec()
    }

    /// Finger index of every sample.
    fn labels(&self) -> Vec<usize> {
        self.inner.samples.iter().map(|s| s.label.index()).collect()
    }

    /// Reduced traces of sample `i`, one per sensor.
    fn traces(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        let s = self.inner.samples.get(i).ok_or_else(|| PyValueError::new_err("sample index out of range"))?;
        Ok(s.traces.iter().map(|t| t.samples.clone()).collect())
    }

    /// Problems found by the dataset validator, as text.
    fn validate(&self) -> Vec<String> {
        signal::validate_dataset(&self.inner).iter().map(|v| v.to_string()).collect()
    }

    /// Stratified (train, validation, test) split.
    #[pyo3(signature = (fractions = (0.8, 0.1, 0.1), seed = 1))]
    fn split(&self, fractions: (f64, f64, f64), seed: u64) -> PyResult<(Dataset, Dataset, Dataset)> {
        let (a, b, c) = signal::split_dataset(&self.inner, [fractions.0, fractions.1, fractions.2], seed).map_err(err)?;
        Ok((Dataset { inner: a }, Dataset { inner: b }, Dataset { inner: c }))
    }
}

/// Trained or randomly initialized classifier.
#[pyclass(module = "socketvib_py")]
struct Model {
    inner: ModelParams,
    history_csv: Option<String>,
}

#[pymethods]
impl Model {
    /// Trains from the hand's tuned settings; keyword arguments override them.
    #[staticmethod]
    #[pyo3(signature = (train, val, preset = None, seed = 1, epochs = None, learning_rate = None, dense = None, hidden = None, batch_size = None))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        train: &Dataset,
        val: &Dataset,
        preset: Option<&str>,
        seed: u64,
        epochs: Option<usize>,
        learning_rate: Option<f64>,
        dense: Option<usize>,
        hidden: Option<usize>,
        batch_size: Option<usize>,
    ) -> PyResult<Self> {
        let h = match preset {
            Some(p) => hand(p)?,
            None => train.inner.manifest.archetype,
        };
        let (mut spec, mut cfg) = reference_preset(h, seed);
        spec.dense_units = dense.unwrap_or(spec.dense_units);
        spec.lstm_hidden = hidden.unwrap_or(spec.lstm_hidden);
        cfg.epochs = epochs.unwrap_or(cfg.epochs);
        cfg.learning_rate = learning_rate.unwrap_or(cfg.learning_rate);
        cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
        let (params, history) = py
            .detach(|| lstm::train(&spec, &cfg, &train.inner, &val.inner))
            .map_err(err)?;
        Ok(Self {
            inner: params,
            history_csv: Some(history.to_csv()),
        })
    }

    /// Untrained model with weights drawn uniformly from [-scale, scale].
    #[staticmethod]
    #[pyo3(signature = (dense, hidden, seed, scale = 0.5))]
    fn random(dense: usize, hidden: usize, seed: u64, scale: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::random(&NetworkSpec::new(dense, hidden), seed, scale).map_err(err)?,
            history_csv: None,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ModelParams::load(&path).map_err(err)?,
            history_csv: None,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    /// Per-epoch training log as CSV, when trained in this session.
    #[getter]
    fn history_csv(&self) -> Option<String> {
        self.history_csv.clone()
    }

    #[getter]
    fn val_accuracy(&self) -> Option<f64> {
        self.inner.provenance.val_accuracy
    }

    fn predict(&self, py: Python<'_>, data: &Dataset) -> PyResult<Vec<usize>> {
        let refs: Vec<_> = data.inner.samples.iter().collect();
        py.detach(|| lstm::predict(&self.inner, &refs)).map_err(err)
    }

    /// Accuracy, macro averages, confusion counts and provenance warnings.
    fn evaluate<'py>(&self, py: Python<'py>, test: &Dataset) -> PyResult<Bound<'py, PyDict>> {
        let r = py.detach(|| lstm::evaluate(&self.inner, &test.inner)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("accuracy", r.accuracy)?;
        d.set_item("macro_recall", r.macro_recall.value)?;
        d.set_item("macro_precision", r.macro_precision.value)?;
        d.set_item("thumb_vs_rest", r.thumb_vs_rest)?;
        d.set_item("index_vs_rest", r.index_vs_rest)?;
        d.set_item("confusion", r.confusion.counts().to_vec())?;
        d.set_item("warnings", r.warnings.clone())?;
        d.set_item("text", r.to_text())?;
        Ok(d)
    }
}

/// Magnitude-preserving DFT321 reduction of a 300-sample window.
#[pyfunction]
#[pyo3(signature = (ax, ay, az, sample_rate = 1000.0))]
fn dft321(ax: Vec<f64>, ay: Vec<f64>, az: Vec<f64>, sample_rate: f64) -> PyResult<Vec<f64>> {
    Ok(dsp::dft321(&axes(ax, ay, az, sample_rate)?).map_err(err)?.samples)
}

/// Projection of a 300-sample window onto its first principal component.
#[pyfunction]
#[pyo3(signature = (ax, ay, az, sample_rate = 1000.0))]
fn pca_reduce(ax: Vec<f64>, ay: Vec<f64>, az: Vec<f64>, sample_rate: f64) -> PyResult<Vec<f64>> {
    Ok(dsp::pca_reduce(&axes(ax, ay, az, sample_rate)?).map_err(err)?.samples)
}

/// Spearman rank correlation; None when either input has constant ranks.
#[pyfunction]
fn spearman_rho(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    metrics::spearman_rho(&x, &y).map_err(err)
}

/// Chance accuracy in percent for `k` balanced classes.
#[pyfunction]
fn chance_level(k: usize) -> PyResult<f64> {
    metrics::chance_level(k).map_err(err)
}

/// P(X >= k) for X ~ Binomial(n, p).
#[pyfunction]
fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    metrics::binomial_upper_tail(k, n, p)
}

/// Contact-cue recognition accuracy (percent) reported for a prosthesis user.
#[pyfunction]
fn perception_accuracy(hand: &str) -> PyResult<f64> {
    Ok(report::perception_accuracy(self::hand(hand)?))
}

/// Ranks mean socket energy of four archives (one per hand) against
/// perception. Returns the report text and the rank correlation.
#[pyfunction]
#[pyo3(signature = (archives, reduction = "dft321"))]
fn transmission_report(archives: Vec<PyRef<'_, SimArchive>>, reduction: &str) -> PyResult<(String, Option<f64>)> {
    let cfg = pipeline(reduction)?;
    let summaries = archives
        .iter()
        .map(|a| workflow::summarize_outputs(a.inner.archetype, &a.inner.outputs, &cfg))
        .collect::<socketvib::Result<Vec<_>>>()
        .map_err(err)?;
    let r = TransmissionReport::new(summaries).map_err(err)?;
    Ok((r.to_text(), r.rho))
}

#[pymodule]
fn socketvib_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SimArchive>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(dft321, m)?)?;
    m.add_function(wrap_pyfunction!(pca_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(chance_level, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_upper_tail, m)?)?;
    m.add_function(wrap_pyfunction!(perception_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(transmission_report, m)?)?;
    m.add("HANDS", HandArchetype::ALL.iter().map(|h| h.code()).collect::<Vec<_>>())?;
    Ok(())
}

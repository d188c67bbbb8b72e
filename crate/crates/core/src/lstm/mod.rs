//! Recurrent finger-contact classifier: stacked blocks of dense + ReLU,
//! per-timestep joint normalization, LSTM and dropout, followed by a
//! softmax read-out of the final hidden state. Gradients are computed by
//! hand (backpropagation through time) in double precision.

mod linalg;
mod net;
mod search;
mod train;

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Uniform};

use crate::container::{self, Manifest, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::signal::{N_FINGERS, N_SENSORS, WINDOW_LEN};
use crate::sim::HandArchetype;

pub use net::{backward, forward, loss, loss_and_gradient, Batch, ForwardCache, Gradients, LOSS_CLAMP};
pub use search::{hyper_search, SearchOutcome, SearchSpace, TrialRecord, TrialStatus};
pub use train::{evaluate, predict, provenance_warnings, train, EpochRecord, EvalReport, TrainHistory};

pub const MODEL_KIND: &str = "lstm-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Variance floor inside the normalization layer.
pub const NORM_EPS: f64 = 1e-5;
/// Weight of the newest batch in the running normalization statistics.
pub const NORM_MOMENTUM: f64 = 0.1;

/// Shape of the classifier. Every block shares `dense_units` and
/// `lstm_hidden`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSpec {
    pub input_features: usize,
    pub seq_len: usize,
    pub dense_units: usize,
    pub lstm_hidden: usize,
    pub dropout: f64,
    pub n_blocks: usize,
    pub n_classes: usize,
}

impl NetworkSpec {
    /// Five sensor traces of one window, five fingers, two blocks.
    pub fn new(dense_units: usize, lstm_hidden: usize) -> Self {
        Self {
            input_features: N_SENSORS,
            seq_len: WINDOW_LEN,
            dense_units,
            lstm_hidden,
            dropout: 0.2,
            n_blocks: 2,
            n_classes: N_FINGERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("input_features", self.input_features),
            ("seq_len", self.seq_len),
            ("dense_units", self.dense_units),
            ("lstm_hidden", self.lstm_hidden),
            ("n_blocks", self.n_blocks),
            ("n_classes", self.n_classes),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        Layout::of(self).total
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("input_features", self.input_features)
            .set("seq_len", self.seq_len)
            .set("dense_units", self.dense_units)
            .set("lstm_hidden", self.lstm_hidden)
            .set("dropout", self.dropout)
            .set("n_blocks", self.n_blocks)
            .set("n_classes", self.n_classes);
        m
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        let s = Self {
            input_features: m.parse("input_features")?,
            seq_len: m.parse("seq_len")?,
            dense_units: m.parse("dense_units")?,
            lstm_hidden: m.parse("lstm_hidden")?,
            dropout: m.parse("dropout")?,
            n_blocks: m.parse("n_blocks")?,
            n_classes: m.parse("n_classes")?,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Adam moment decay rates and denominator guard.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("learning_rate", self.learning_rate)
            .set("epochs", self.epochs)
            .set("batch_size", self.batch_size)
            .set("seed", self.seed)
            .set("optimizer", "adam")
            .set("adam_beta1", ADAM_BETA1)
            .set("adam_beta2", ADAM_BETA2)
            .set("adam_eps", ADAM_EPS);
        m
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        let c = Self {
            learning_rate: m.parse("learning_rate")?,
            epochs: m.parse("epochs")?,
            batch_size: m.parse("batch_size")?,
            seed: m.parse("seed")?,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Tuned per-hand settings of the reference study: learning rate, epochs,
/// dense units, hidden units and batch size.
pub fn reference_preset(archetype: HandArchetype, seed: u64) -> (NetworkSpec, TrainConfig) {
    let (learning_rate, epochs, dense, hidden, batch_size) = match archetype {
        HandArchetype::Vp => (0.0011, 68, 40, 40, 64),
        HandArchetype::Ch => (0.0016, 168, 37, 40, 32),
        HandArchetype::Il => (0.0027, 185, 21, 39, 64),
        HandArchetype::Sh => (0.0033, 82, 18, 39, 64),
    };
    (
        NetworkSpec::new(dense, hidden),
        TrainConfig {
            learning_rate,
            epochs,
            batch_size,
            seed,
        },
    )
}

/// Offsets of each tensor inside the flat parameter vector. Matrices are
/// column-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockLayout {
    pub f_in: usize,
    pub u: usize,
    pub h: usize,
    /// u × f_in
    pub wd: usize,
    pub bd: usize,
    pub gamma: usize,
    pub beta: usize,
    /// 4h × u, gate rows ordered input, forget, cell, output.
    pub wx: usize,
    /// 4h × h
    pub wh: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub blocks: Vec<BlockLayout>,
    /// n_classes × h
    pub wo: usize,
    pub bo: usize,
    pub total: usize,
}

impl Layout {
    pub fn of(spec: &NetworkSpec) -> Self {
        let (u, h) = (spec.dense_units, spec.lstm_hidden);
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let blocks = (0..spec.n_blocks)
            .map(|i| {
                let f_in = if i == 0 { spec.input_features } else { h };
                BlockLayout {
                    f_in,
                    u,
                    h,
                    wd: take(u * f_in),
                    bd: take(u),
                    gamma: take(u),
                    beta: take(u),
                    wx: take(4 * h * u),
                    wh: take(4 * h * h),
                    b: take(4 * h),
                }
            })
            .collect();
        let wo = take(spec.n_classes * h);
        let bo = take(spec.n_classes);
        Self {
            blocks,
            wo,
            bo,
            total: off,
        }
    }
}

/// Running per-timestep statistics of one normalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl NormStats {
    fn fresh(t: usize) -> Self {
        Self {
            mean: vec![0.0; t],
            var: vec![1.0; t],
        }
    }
}

/// Where the training data came from, for leakage checks at evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainProvenance {
    pub archetype: Option<HandArchetype>,
    pub dataset_seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub train_ids: Vec<u32>,
    /// Validation accuracy and epoch of the kept parameters.
    pub val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub spec: NetworkSpec,
    /// All weights and biases, laid out block by block.
    pub theta: Vec<f64>,
    pub norm: Vec<NormStats>,
    /// Multiplies raw inputs before the first layer.
    pub input_scale: f64,
    pub provenance: TrainProvenance,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases except a forget-gate bias of 1,
    /// unit normalization scale.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::of(spec);
        let mut theta = vec![0.0; layout.total];
        let mut r = rng::rng_from(seed, &[tag::INIT]);
        let mut glorot = |dst: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for v in dst {
                *v = dist.sample(&mut r);
            }
        };
        for b in &layout.blocks {
            let h = b.h;
            glorot(&mut theta[b.wd..b.wd + b.u * b.f_in], b.f_in, b.u);
            theta[b.gamma..b.gamma + b.u].fill(1.0);
            glorot(&mut theta[b.wx..b.wx + 4 * h * b.u], b.u, 4 * h);
            glorot(&mut theta[b.wh..b.wh + 4 * h * h], h, 4 * h);
            theta[b.b + h..b.b + 2 * h].fill(1.0);
        }
        let h = spec.lstm_hidden;
        glorot(&mut theta[layout.wo..layout.wo + spec.n_classes * h], h, spec.n_classes);
        Ok(Self {
            spec: *spec,
            theta,
            norm: (0..spec.n_blocks).map(|_| NormStats::fresh(spec.seq_len)).collect(),
            input_scale: 1.0,
            provenance: TrainProvenance::default(),
        })
    }

    /// Random draw from a wider range, used to probe untrained behavior.
    pub fn random(spec: &NetworkSpec, seed: u64, scale: f64) -> Result<Self> {
        let mut p = Self::init(spec, seed)?;
        let mut r = rng::rng_from(seed, &[tag::INIT, 1]);
        for v in &mut p.theta {
            *v = scale * r.random_range(-1.0..1.0);
        }
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        self.spec.validate()?;
        if self.theta.len() != self.spec.n_params() {
            return Err(Error::InvalidModel(format!(
                "expected {} parameters, found {}",
                self.spec.n_params(),
                self.theta.len()
            )));
        }
        if self.norm.len() != self.spec.n_blocks
            || self
                .norm
                .iter()
                .any(|n| n.mean.len() != self.spec.seq_len || n.var.len() != self.spec.seq_len)
        {
            return Err(Error::InvalidModel("normalization statistics do not match the spec".into()));
        }
        let stats = self.norm.iter().flat_map(|n| n.mean.iter().chain(&n.var));
        if self.theta.iter().chain(stats).any(|v| !v.is_finite()) || !self.input_scale.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.check()?;
        let mut h = Manifest::new();
        h.merge_prefixed("spec", &self.spec.to_manifest());
        h.set("input_scale", self.input_scale);
        h.set("n_params", self.theta.len());
        let p = &self.provenance;
        if let Some(a) = p.archetype {
            h.set("prov.archetype", a);
        }
        if let Some(s) = p.dataset_seed {
            h.set("prov.dataset_seed", s);
        }
        if let Some(s) = p.split_seed {
            h.set("prov.split_seed", s);
        }
        if let Some(v) = p.val_accuracy {
            h.set("prov.val_accuracy", v);
        }
        if let Some(e) = p.best_epoch {
            h.set("prov.best_epoch", e);
        }
        h.set("prov.n_train", p.train_ids.len());
        let mut w = PayloadWriter::new();
        w.f64s(&self.theta);
        for n in &self.norm {
            w.f64s(&n.mean);
            w.f64s(&n.var);
        }
        for &id in &p.train_ids {
            w.u64(id as u64);
        }
        container::write_file(path, MODEL_KIND, MODEL_FORMAT_VERSION, &h, &w.into_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (h, payload) = container::read_file(path, MODEL_KIND, MODEL_FORMAT_VERSION)?;
        let spec = NetworkSpec::from_manifest(&h.sub("spec"))?;
        let n_params: usize = h.parse("n_params")?;
        if n_params != spec.n_params() {
            return Err(Error::Format("parameter count does not match spec".into()));
        }
        let mut r = PayloadReader::new(&payload);
        let theta = r.f64s(n_params)?;
        let norm = (0..spec.n_blocks)
            .map(|_| {
                Ok(NormStats {
                    mean: r.f64s(spec.seq_len)?,
                    var: r.f64s(spec.seq_len)?,
                })
            })
            .collect::<Result<_>>()?;
        let n_train: usize = h.parse("prov.n_train")?;
        let train_ids = (0..n_train)
            .map(|_| {
                let v = r.u64()?;
                u32::try_from(v).map_err(|_| Error::Format(format!("train id {v} out of range")))
            })
            .collect::<Result<_>>()?;
        r.finish()?;
        let p = Self {
            spec,
            theta,
            norm,
            input_scale: h.parse("input_scale")?,
            provenance: TrainProvenance {
                archetype: h.parse_opt("prov.archetype")?,
                dataset_seed: h.parse_opt("prov.dataset_seed")?,
                split_seed: h.parse_opt("prov.split_seed")?,
                train_ids,
                val_accuracy: h.parse_opt("prov.val_accuracy")?,
                best_epoch: h.parse_opt("prov.best_epoch")?,
            },
        };
        p.check()?;
        Ok(p)
    }
}

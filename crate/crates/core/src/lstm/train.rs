//! Minibatch Adam training with best-epoch selection, and evaluation.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use super::net::{forward, loss_and_gradient, Batch};
use super::{ModelParams, NetworkSpec, TrainConfig, TrainProvenance, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, NORM_MOMENTUM};
use crate::error::{Error, Result};
use crate::metrics::{confusion_from_pairs, ConfusionMatrix, MacroAverage, Ratio};
use crate::rng::{self, tag};
use crate::signal::{Dataset, Finger, ImpactSample, SplitRole};

/// Sequences per forward call at inference time.
const PREDICT_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (first epoch reaching the best
    /// validation accuracy).
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_accuracy\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.12},{:.6}", e.epoch, e.train_loss, e.val_accuracy);
        }
        s
    }
}

fn check_set(spec: &NetworkSpec, d: &Dataset, what: &str) -> Result<()> {
    if d.is_empty() {
        return Err(Error::Empty(format!("{what} set has no samples")));
    }
    if !d.is_balanced() {
        return Err(Error::InvalidArgument(format!("{what} set is not balanced across fingers")));
    }
    for s in &d.samples {
        if s.traces.len() != spec.input_features || s.traces.iter().any(|t| t.samples.len() != spec.seq_len) {
            return Err(Error::Shape(format!(
                "{what} sample {} does not have {} traces of {} samples",
                s.meta.id, spec.input_features, spec.seq_len
            )));
        }
    }
    Ok(())
}

/// Reciprocal RMS of all training inputs (1 when they are all zero).
fn input_scale(d: &Dataset) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for s in &d.samples {
        for t in &s.traces {
            sum += t.samples.iter().map(|v| v * v).sum::<f64>();
            n += t.samples.len();
        }
    }
    let rms = (sum / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        1.0 / rms
    } else {
        1.0
    }
}

/// Most probable class per sample, in inference mode.
pub fn predict(params: &ModelParams, samples: &[&ImpactSample]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(PREDICT_CHUNK) {
        let batch = Batch::from_samples(chunk)?;
        out.extend(forward(params, &batch, false, 0)?.predictions());
    }
    Ok(out)
}

fn accuracy_on(params: &ModelParams, d: &Dataset) -> Result<f64> {
    let refs: Vec<&ImpactSample> = d.samples.iter().collect();
    let pred = predict(params, &refs)?;
    let hits = pred.iter().zip(&refs).filter(|(p, s)| **p == s.label.index()).count();
    Ok(hits as f64 / refs.len() as f64)
}

/// Trains with Adam on seeded minibatches and returns the parameters of the
/// epoch with the best validation accuracy.
pub fn train(spec: &NetworkSpec, cfg: &TrainConfig, train_set: &Dataset, val_set: &Dataset) -> Result<(ModelParams, TrainHistory)> {
    spec.validate()?;
    cfg.validate()?;
    check_set(spec, train_set, "training")?;
    check_set(spec, val_set, "validation")?;

    let mut params = ModelParams::init(spec, cfg.seed)?;
    params.input_scale = input_scale(train_set);
    params.provenance = TrainProvenance {
        archetype: Some(train_set.manifest.archetype),
        dataset_seed: Some(train_set.manifest.seed),
        split_seed: train_set.manifest.split_seed,
        train_ids: train_set.ids(),
        val_accuracy: None,
        best_epoch: None,
    };

    let n = params.theta.len();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut step = 0i32;
    let mut history = TrainHistory::default();
    let mut best: Option<ModelParams> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::rng_from(cfg.seed, &[tag::SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&ImpactSample> = idx.iter().map(|&i| &train_set.samples[i]).collect();
            let batch = Batch::from_samples(&refs)?;
            let drop_seed = rng::derive_seed(cfg.seed, &[tag::DROPOUT, epoch as u64, bi as u64]);
            let (l, g, cache) = match loss_and_gradient(&params, &batch, drop_seed) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if !l.is_finite() {
                return Err(Error::Diverged { epoch, loss: l });
            }
            loss_sum += l;
            batches += 1;

            let pooled = (spec.dense_units * batch.batch) as f64;
            let unbias = if pooled > 1.0 { pooled / (pooled - 1.0) } else { 1.0 };
            for (stats, (means, vars)) in params.norm.iter_mut().zip(&cache.batch_stats) {
                for t in 0..spec.seq_len {
                    stats.mean[t] += NORM_MOMENTUM * (means[t] - stats.mean[t]);
                    stats.var[t] += NORM_MOMENTUM * (vars[t] * unbias - stats.var[t]);
                }
            }

            step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(step);
            let c2 = 1.0 - ADAM_BETA2.powi(step);
            for i in 0..n {
                let gi = g.flat[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                params.theta[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
        let stats = params.norm.iter().flat_map(|s| s.mean.iter().chain(&s.var));
        if params.theta.iter().chain(stats).any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        let val_accuracy = accuracy_on(&params, val_set)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_accuracy,
        });
        if best.is_none() || val_accuracy > history.best_val_accuracy {
            history.best_val_accuracy = val_accuracy;
            history.best_epoch = epoch;
            best = Some(params.clone());
        }
    }
    let mut best = best.expect("at least one epoch");
    best.provenance.val_accuracy = Some(history.best_val_accuracy);
    best.provenance.best_epoch = Some(history.best_epoch);
    Ok((best, history))
}

/// Confusion matrix and summary metrics on a held-out set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_recall: MacroAverage,
    pub macro_precision: MacroAverage,
    pub recall: Vec<Ratio>,
    pub precision: Vec<Ratio>,
    pub thumb_vs_rest: f64,
    pub index_vs_rest: f64,
    /// Leakage and provenance problems found before evaluating.
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// Deterministic plain-text report.
    pub fn to_text(&self) -> String {
        let labels: Vec<&str> = Finger::ALL.iter().map(|f| f.name()).collect();
        let pct = |r: &Ratio| r.value().map_or("n/a".to_string(), |v| format!("{:.2}", v * 100.0));
        let mut s = String::new();
        let _ = writeln!(s, "samples={}", self.confusion.total());
        let _ = writeln!(s, "accuracy={:.4}", self.accuracy * 100.0);
        let _ = writeln!(
            s,
            "macro_recall={:.4} (undefined classes: {})",
            self.macro_recall.value * 100.0,
            self.macro_recall.undefined_classes
        );
        let _ = writeln!(
            s,
            "macro_precision={:.4} (undefined classes: {})",
            self.macro_precision.value * 100.0,
            self.macro_precision.undefined_classes
        );
        let _ = writeln!(s, "thumb_vs_rest={:.4}", self.thumb_vs_rest * 100.0);
        let _ = writeln!(s, "index_vs_rest={:.4}", self.index_vs_rest * 100.0);
        for (i, f) in Finger::ALL.iter().enumerate() {
            let _ = writeln!(s, "{}: recall={} precision={}", f.name(), pct(&self.recall[i]), pct(&self.precision[i]));
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s.push_str(&self.confusion.to_text(&labels));
        s
    }
}

/// Problems that make `test_set` unsuitable for judging `params`.
pub fn provenance_warnings(params: &ModelParams, test_set: &Dataset) -> Vec<String> {
    let mut w = Vec::new();
    let p = &params.provenance;
    if test_set.manifest.role == SplitRole::Train {
        w.push("evaluation set is a training split".to_string());
    }
    let same_source = p.dataset_seed == Some(test_set.manifest.seed) && p.archetype == Some(test_set.manifest.archetype);
    if same_source {
        let train: HashSet<u32> = p.train_ids.iter().copied().collect();
        let overlap = test_set.samples.iter().filter(|s| train.contains(&s.meta.id)).count();
        if overlap > 0 {
            w.push(format!("{overlap} evaluation samples were used for training"));
        }
    }
    w
}

pub fn evaluate(params: &ModelParams, test_set: &Dataset) -> Result<EvalReport> {
    if test_set.is_empty() {
        return Err(Error::Empty("test set has no samples".into()));
    }
    let warnings = provenance_warnings(params, test_set);
    let refs: Vec<&ImpactSample> = test_set.samples.iter().collect();
    let pred = predict(params, &refs)?;
    let pairs: Vec<(Finger, Finger)> = refs
        .iter()
        .zip(&pred)
        .map(|(s, &p)| (s.label, Finger::from_index(p).expect("class index is a finger")))
        .collect();
    let cm = confusion_from_pairs(&pairs)?;
    let k = cm.k();
    Ok(EvalReport {
        accuracy: cm.accuracy()?,
        macro_recall: cm.macro_recall()?,
        macro_precision: cm.macro_precision()?,
        recall: (0..k).map(|c| cm.recall(c)).collect::<Result<_>>()?,
        precision: (0..k).map(|c| cm.precision(c)).collect::<Result<_>>()?,
        thumb_vs_rest: cm.one_vs_rest_accuracy(Finger::Thumb.index())?,
        index_vs_rest: cm.one_vs_rest_accuracy(Finger::Index.index())?,
        confusion: cm,
        warnings,
    })
}

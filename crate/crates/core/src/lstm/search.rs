//! Seeded random hyperparameter search.

use std::fmt::Write as _;

use rand::Rng as _;
use rayon::prelude::*;

use super::train::train;
use super::{NetworkSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::signal::Dataset;

/// Bounds of the searched hyperparameters. Fields of `template` that are
/// not searched (input size, sequence length, dropout, depth, classes) are
/// copied into every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    /// Sampled log-uniformly.
    pub learning_rate: (f64, f64),
    pub epochs: (usize, usize),
    pub dense_units: (usize, usize),
    pub lstm_hidden: (usize, usize),
    pub batch_sizes: Vec<usize>,
    pub template: NetworkSpec,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-4, 1e-2),
            epochs: (50, 200),
            dense_units: (16, 48),
            lstm_hidden: (16, 48),
            batch_sizes: vec![32, 64],
            template: NetworkSpec::new(16, 16),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.learning_rate;
        if !(lo > 0.0) || !(lo <= hi) || !hi.is_finite() {
            return Err(Error::InvalidArgument("learning rate bounds must satisfy 0 < lower <= upper".into()));
        }
        for (name, (lo, hi)) in [
            ("epochs", self.epochs),
            ("dense_units", self.dense_units),
            ("lstm_hidden", self.lstm_hidden),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidArgument(format!("{name} bounds must satisfy 1 <= lower <= upper")));
            }
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::InvalidArgument("batch sizes must be a non-empty list of positive values".into()));
        }
        self.template.validate()
    }

    /// Configuration of trial `index`; depends only on (`seed`, `index`).
    pub fn sample(&self, seed: u64, index: usize) -> (NetworkSpec, TrainConfig) {
        let mut r = rng::rng_from(seed, &[tag::SEARCH, index as u64]);
        let (lo, hi) = self.learning_rate;
        let learning_rate = if lo < hi { r.random_range(lo.ln()..hi.ln()).exp() } else { lo };
        let epochs = r.random_range(self.epochs.0..=self.epochs.1);
        let dense = r.random_range(self.dense_units.0..=self.dense_units.1);
        let hidden = r.random_range(self.lstm_hidden.0..=self.lstm_hidden.1);
        let batch_size = self.batch_sizes[r.random_range(0..self.batch_sizes.len())];
        (
            NetworkSpec {
                dense_units: dense,
                lstm_hidden: hidden,
                ..self.template
            },
            TrainConfig {
                learning_rate,
                epochs,
                batch_size,
                seed: rng::derive_seed(seed, &[tag::TRIAL, index as u64]),
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialStatus {
    Completed { val_accuracy: f64, best_epoch: usize },
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub spec: NetworkSpec,
    pub config: TrainConfig,
    pub status: TrialStatus,
}

impl TrialRecord {
    pub fn val_accuracy(&self) -> Option<f64> {
        match self.status {
            TrialStatus::Completed { val_accuracy, .. } => Some(val_accuracy),
            TrialStatus::Diverged { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: TrialRecord,
    pub trials: Vec<TrialRecord>,
}

impl SearchOutcome {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "trial,learning_rate,epochs,dense_units,lstm_hidden,batch_size,seed,status,val_accuracy,epoch\n",
        );
        for t in &self.trials {
            let (status, acc, epoch) = match t.status {
                TrialStatus::Completed { val_accuracy, best_epoch } => ("ok", format!("{val_accuracy:.6}"), best_epoch),
                TrialStatus::Diverged { epoch } => ("diverged", String::new(), epoch),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                t.index,
                t.config.learning_rate,
                t.config.epochs,
                t.spec.dense_units,
                t.spec.lstm_hidden,
                t.config.batch_size,
                t.config.seed,
                status,
                acc,
                epoch
            );
        }
        s
    }
}

/// Trains `budget` sampled configurations and keeps the one with the best
/// validation accuracy (earliest trial on ties). Trials are independent, so
/// running them in parallel gives the same outcome.
pub fn hyper_search(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    train_set: &Dataset,
    val_set: &Dataset,
    parallel: bool,
) -> Result<SearchOutcome> {
    space.validate()?;
    if budget == 0 {
        return Err(Error::InvalidArgument("search budget must be at least 1".into()));
    }
    let run = |index: usize| -> Result<TrialRecord> {
        let (spec, config) = space.sample(seed, index);
        let status = match train(&spec, &config, train_set, val_set) {
            Ok((_, h)) => TrialStatus::Completed {
                val_accuracy: h.best_val_accuracy,
                best_epoch: h.best_epoch,
            },
            Err(Error::Diverged { epoch, .. }) => TrialStatus::Diverged { epoch },
            Err(e) => return Err(e),
        };
        Ok(TrialRecord {
            index,
            spec,
            config,
            status,
        })
    };
    let trials: Vec<TrialRecord> = if parallel {
        (0..budget).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..budget).map(run).collect::<Result<_>>()?
    };
    let best = trials
        .iter()
        .filter_map(|t| t.val_accuracy().map(|a| (a, t)))
        .fold(None::<(f64, &TrialRecord)>, |best, (a, t)| match best {
            Some((b, _)) if b >= a => best,
            _ => Some((a, t)),
        })
        .map(|(_, t)| t.clone())
        .ok_or(Error::SearchExhausted(budget))?;
    Ok(SearchOutcome { best, trials })
}

//! Compositions of simulator and pipeline: labeled datasets and per-hand
//! energy summaries.

use rayon::prelude::*;

use crate::container::Manifest;
use crate::dsp::{mean_hand_energy, run_pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::signal::{Dataset, DatasetManifest, ImpactSample, SampleMeta, N_FINGERS, N_SENSORS};
use crate::sim::{batch_simulate, HandArchetype, HandModel, ImpactorConfig, LabeledOutput};

/// Mean socket energy per contacted finger (rows) and sensor (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSummary {
    pub archetype: HandArchetype,
    pub matrix: [[f64; N_SENSORS]; N_FINGERS],
    pub mean: f64,
    pub impacts: usize,
}

impl TransmissionSummary {
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.iter().map(|r| r.to_vec()).collect()
    }
}

/// Runs the pipeline over labeled outputs and averages energies per
/// (finger, sensor) cell.
pub fn summarize_outputs(
    archetype: HandArchetype,
    outputs: &[LabeledOutput],
    cfg: &PipelineConfig,
) -> Result<TransmissionSummary> {
    if outputs.is_empty() {
        return Err(Error::Empty("no simulated impacts to summarize".into()));
    }
    let processed: Vec<_> = outputs
        .par_iter()
        .map(|o| run_pipeline(&o.output, cfg).map(|p| (o.finger, p.energies)))
        .collect::<Result<_>>()?;
    let mut sums = [[0.0; N_SENSORS]; N_FINGERS];
    let mut counts = [0usize; N_FINGERS];
    for (finger, energies) in processed {
        let row = &mut sums[finger.index()];
        for (s, e) in row.iter_mut().zip(energies) {
            *s += e;
        }
        counts[finger.index()] += 1;
    }
    if let Some(f) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("no impacts on finger {f}")));
    }
    for (row, &c) in sums.iter_mut().zip(&counts) {
        for v in row.iter_mut() {
            *v /= c as f64;
        }
    }
    let rows: Vec<Vec<f64>> = sums.iter().map(|r| r.to_vec()).collect();
    Ok(TransmissionSummary {
        archetype,
        matrix: sums,
        mean: mean_hand_energy(&rows)?,
        impacts: outputs.len(),
    })
}

pub fn transmission_summary(
    model: &HandModel,
    impactor: &ImpactorConfig,
    cfg: &PipelineConfig,
    n_per_finger: usize,
    seed: u64,
) -> Result<TransmissionSummary> {
    let outputs = batch_simulate(model, impactor, n_per_finger, seed)?;
    summarize_outputs(model.archetype, &outputs, cfg)
}

/// Converts labeled outputs to a dataset. Sample ids follow the batch order.
pub fn dataset_from_outputs(
    archetype: HandArchetype,
    outputs: &[LabeledOutput],
    cfg: &PipelineConfig,
    seed: u64,
    provenance: Manifest,
) -> Result<Dataset> {
    if outputs.is_empty() {
        return Err(Error::Empty("no simulated impacts".into()));
    }
    let samples = outputs
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            let p = run_pipeline(&o.output, cfg)?;
            Ok(ImpactSample {
                label: o.finger,
                traces: p.traces,
                hand: archetype,
                meta: SampleMeta {
                    id: i as u32,
                    amplitude: o.output.impact_speed,
                    seed: o.seed,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = DatasetManifest::new(archetype, seed);
    manifest.provenance = provenance;
    Ok(Dataset::new(manifest, samples))
}

/// Simulates `n_per_finger` impacts per finger and reduces each to five
/// sensor traces.
pub fn generate_dataset(
    model: &HandModel,
    impactor: &ImpactorConfig,
    cfg: &PipelineConfig,
    n_per_finger: usize,
    seed: u64,
) -> Result<Dataset> {
    let outputs = batch_simulate(model, impactor, n_per_finger, seed)?;
    let mut prov = Manifest::new();
    prov.set("n_per_finger", n_per_finger);
    prov.set("preset_version", model.preset_version);
    prov.merge_prefixed("impactor", &impactor.to_manifest());
    prov.merge_prefixed("pipeline", &cfg.to_manifest());
    dataset_from_outputs(model.archetype, &outputs, cfg, seed, prov)
}

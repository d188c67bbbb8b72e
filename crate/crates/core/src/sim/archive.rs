//! Simulation archives: labelled [`SimOutput`]s for one hand in the shared
//! container format.
//!
//! Payload, per output: `finger, repetition, seed (raw u64), impact_speed,
//! direction[3], fx[n], fy[n], fz[n]`, then per sensor `ax[n], ay[n], az[n],
//! valid[n]` (valid as 0.0 / 1.0). `n` is the manifest's `n_samples`.

use std::path::Path;

use crate::container::{self, Manifest, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::signal::{AxisTraceSet, Finger, ForceTrace, N_SENSORS};

use super::impact::{ImpactorConfig, LabeledOutput, SimOutput};
use super::model::HandArchetype;

const ARCHIVE_KIND: &str = "sim-archive";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SimArchive {
    pub archetype: HandArchetype,
    pub seed: u64,
    pub n_per_finger: usize,
    pub impactor: ImpactorConfig,
    pub outputs: Vec<LabeledOutput>,
}

impl SimArchive {
    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.outputs.first().map_or(0, |o| o.output.len());
        if self.outputs.iter().any(|o| o.output.len() != n) {
            return Err(Error::Shape("archive outputs differ in length".into()));
        }
        let first = self.outputs.first().map(|o| &o.output);
        let mut h = Manifest::new();
        h.set("archetype", self.archetype)
            .set("seed", self.seed)
            .set("n_per_finger", self.n_per_finger)
            .set("n_outputs", self.outputs.len())
            .set("n_samples", n)
            .set("sample_rate", first.map_or(0.0, |o| o.sample_rate()))
            .set("internal_step", first.map_or(0.0, |o| o.internal_step));
        h.merge_prefixed("impactor", &self.impactor.to_manifest());

        let mut w = PayloadWriter::new();
        for o in &self.outputs {
            w.f64(o.finger.index() as f64);
            w.f64(o.repetition as f64);
            w.u64(o.seed);
            w.f64(o.output.impact_speed);
            w.f64s(&o.output.direction);
            w.f64s(&o.output.force.fx);
            w.f64s(&o.output.force.fy);
            w.f64s(&o.output.force.fz);
            for t in &o.output.sensor_traces {
                w.f64s(&t.ax);
                w.f64s(&t.ay);
                w.f64s(&t.az);
                for &m in &t.valid_mask {
                    w.f64(if m { 1.0 } else { 0.0 });
                }
            }
        }
        container::write_file(path, ARCHIVE_KIND, ARCHIVE_VERSION, &h, &w.into_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (h, payload) = container::read_file(path, ARCHIVE_KIND, ARCHIVE_VERSION)?;
        let n_outputs: usize = h.parse("n_outputs")?;
        let n: usize = h.parse("n_samples")?;
        let fs: f64 = h.parse("sample_rate")?;
        let internal_step: f64 = h.parse("internal_step")?;
        let mut r = PayloadReader::new(&payload);
        let mut outputs = Vec::with_capacity(n_outputs);
        for _ in 0..n_outputs {
            let finger = Finger::from_index(r.index()?).ok_or_else(|| Error::Format("bad finger".into()))?;
            let repetition = r.index()?;
            let seed = r.u64()?;
            let impact_speed = r.f64()?;
            let direction = [r.f64()?, r.f64()?, r.f64()?];
            let force = ForceTrace::new(r.f64s(n)?, r.f64s(n)?, r.f64s(n)?, fs)?;
            let mut sensor_traces = Vec::with_capacity(N_SENSORS);
            for k in 0..N_SENSORS {
                let (ax, ay, az) = (r.f64s(n)?, r.f64s(n)?, r.f64s(n)?);
                let mask = r.f64s(n)?.into_iter().map(|v| v != 0.0).collect();
                sensor_traces.push(AxisTraceSet::with_mask(k, fs, ax, ay, az, mask)?);
            }
            outputs.push(LabeledOutput {
                finger,
                repetition,
                seed,
                output: SimOutput {
                    force,
                    sensor_traces,
                    internal_step,
                    impact_speed,
                    direction,
                },
            });
        }
        r.finish()?;
        Ok(SimArchive {
            archetype: h.parse("archetype")?,
            seed: h.parse("seed")?,
            n_per_finger: h.parse("n_per_finger")?,
            impactor: ImpactorConfig::from_manifest(&h.sub("impactor"))?,
            outputs,
        })
    }
}

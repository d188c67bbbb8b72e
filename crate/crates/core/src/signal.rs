//! Signal and dataset types shared by the simulator, the DSP pipeline and the
//! classifier, plus dataset validation, splitting and persistence.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::container::{self, Manifest, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::sim::HandArchetype;

/// Samples per reduced trace.
pub const WINDOW_LEN: usize = 300;
/// IMUs on the socket inner surface.
pub const N_SENSORS: usize = 5;
pub const N_FINGERS: usize = 5;
pub const DEFAULT_SAMPLE_RATE: f64 = 1000.0;
pub const DATASET_FORMAT_VERSION: u32 = 1;
const DATASET_KIND: &str = "dataset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; N_FINGERS] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Little,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Finger> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Finger {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Finger::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown finger {s:?}")))
    }
}

/// Raw three-axis acceleration from one socket sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisTraceSet {
    pub sensor_id: usize,
    pub sample_rate: f64,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub az: Vec<f64>,
    /// `false` marks a sample lost to a communication error.
    pub valid_mask: Vec<bool>,
}

impl AxisTraceSet {
    pub fn new(sensor_id: usize, sample_rate: f64, ax: Vec<f64>, ay: Vec<f64>, az: Vec<f64>) -> Result<Self> {
        let mask = vec![true; ax.len()];
        Self::with_mask(sensor_id, sample_rate, ax, ay, az, mask)
    }

    pub fn with_mask(
        sensor_id: usize,
        sample_rate: f64,
        ax: Vec<f64>,
        ay: Vec<f64>,
        az: Vec<f64>,
        valid_mask: Vec<bool>,
    ) -> Result<Self> {
        let t = Self {
            sensor_id,
            sample_rate,
            ax,
            ay,
            az,
            valid_mask,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        let n = self.ax.len();
        if n == 0 {
            return Err(Error::Shape("axis trace is empty".into()));
        }
        if self.ay.len() != n || self.az.len() != n || self.valid_mask.len() != n {
            return Err(Error::Shape(format!(
                "axis lengths differ: {}/{}/{} mask {}",
                n,
                self.ay.len(),
                self.az.len(),
                self.valid_mask.len()
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.sensor_id >= N_SENSORS {
            return Err(Error::InvalidArgument(format!(
                "sensor_id {} out of range",
                self.sensor_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ax.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ax.is_empty()
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.ax, &self.ay, &self.az]
    }

    pub fn axes_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.ax, &mut self.ay, &mut self.az]
    }

    /// Sum of squares over all three axes.
    pub fn energy(&self) -> f64 {
        self.axes().iter().flat_map(|a| a.iter()).map(|v| v * v).sum()
    }
}

/// Contact force in the load-cell frame; `fz` is along the nominal impact axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrace {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    pub sample_rate: f64,
}

impl ForceTrace {
    pub fn new(fx: Vec<f64>, fy: Vec<f64>, fz: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if fy.len() != fx.len() || fz.len() != fx.len() {
            return Err(Error::Shape("force component lengths differ".into()));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidArgument("force sample_rate must be positive".into()));
        }
        Ok(Self {
            fx,
            fy,
            fz,
            sample_rate,
        })
    }

    /// Force with only a z component.
    pub fn from_fz(fz: Vec<f64>, sample_rate: f64) -> Result<Self> {
        let n = fz.len();
        Self::new(vec![0.0; n], vec![0.0; n], fz, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.fz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fz.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionMethod {
    Dft321,
    Pca,
}

impl ReductionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReductionMethod::Dft321 => "DFT321",
            ReductionMethod::Pca => "PCA",
        }
    }

    fn code(self) -> f64 {
        match self {
            ReductionMethod::Dft321 => 0.0,
            ReductionMethod::Pca => 1.0,
        }
    }

    fn from_code(c: usize) -> Result<Self> {
        match c {
            0 => Ok(ReductionMethod::Dft321),
            1 => Ok(ReductionMethod::Pca),
            _ => Err(Error::Format(format!("unknown reduction code {c}"))),
        }
    }
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReductionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DFT321" => Ok(ReductionMethod::Dft321),
            "PCA" => Ok(ReductionMethod::Pca),
            _ => Err(Error::InvalidArgument(format!("unknown reduction method {s:?}"))),
        }
    }
}

/// One-dimensional signal obtained from a sensor window. Valid traces hold
/// exactly [`WINDOW_LEN`] samples; the field is public so malformed data
/// read from elsewhere can still be represented and reported by
/// [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    pub samples: Vec<f64>,
    pub method: ReductionMethod,
}

impl ReducedTrace {
    pub fn new(samples: Vec<f64>, method: ReductionMethod) -> Result<Self> {
        if samples.len() != WINDOW_LEN {
            return Err(Error::Shape(format!(
                "reduced trace must have {WINDOW_LEN} samples, got {}",
                samples.len()
            )));
        }
        Ok(Self { samples, method })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMeta {
    /// Position in the generating batch; survives splitting.
    pub id: u32,
    /// Impact speed actually drawn for this sample (m/s).
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactSample {
    pub label: Finger,
    /// One trace per sensor, indexed by sensor id.
    pub traces: Vec<ReducedTrace>,
    pub hand: HandArchetype,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRole {
    Full,
    Train,
    Validation,
    Test,
}

impl SplitRole {
    pub fn name(self) -> &'static str {
        match self {
            SplitRole::Full => "full",
            SplitRole::Train => "train",
            SplitRole::Validation => "validation",
            SplitRole::Test => "test",
        }
    }
}

impl FromStr for SplitRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SplitRole::Full),
            "train" => Ok(SplitRole::Train),
            "validation" => Ok(SplitRole::Validation),
            "test" => Ok(SplitRole::Test),
            _ => Err(Error::Format(format!("unknown split role {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub archetype: HandArchetype,
    /// Seed the samples were generated with.
    pub seed: u64,
    pub version: u32,
    pub role: SplitRole,
    pub split_seed: Option<u64>,
    /// Free-form generation settings (pipeline, impactor) kept for audits.
    pub provenance: Manifest,
}

impl DatasetManifest {
    pub fn new(archetype: HandArchetype, seed: u64) -> Self {
        Self {
            archetype,
            seed,
            version: DATASET_FORMAT_VERSION,
            role: SplitRole::Full,
            split_seed: None,
            provenance: Manifest::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<ImpactSample>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn new(manifest: DatasetManifest, samples: Vec<ImpactSample>) -> Self {
        Self { samples, manifest }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn counts(&self) -> [usize; N_FINGERS] {
        let mut c = [0; N_FINGERS];
        for s in &self.samples {
            c[s.label.index()] += 1;
        }
        c
    }

    pub fn is_balanced(&self) -> bool {
        let c = self.counts();
        c.iter().all(|&n| n == c[0])
    }

    pub fn ids(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.meta.id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Imbalance,
    TraceCount,
    WindowLength,
    MixedReduction,
    NonFinite,
    HandMismatch,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Imbalance => "imbalance",
            Rule::TraceCount => "trace count",
            Rule::WindowLength => "window length",
            Rule::MixedReduction => "mixed reduction",
            Rule::NonFinite => "non-finite",
            Rule::HandMismatch => "hand mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// `None` for dataset-level rules.
    pub sample: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sample {
            Some(i) => write!(f, "sample {i}: {}: {}", self.rule.name(), self.detail),
            None => write!(f, "dataset: {}: {}", self.rule.name(), self.detail),
        }
    }
}

pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, s) in d.samples.iter().enumerate() {
        if s.traces.len() != N_SENSORS {
            out.push(Violation {
                sample: Some(i),
                rule: Rule::TraceCount,
                detail: format!("expected {N_SENSORS} traces, found {}", s.traces.len()),
            });
        }
        for (k, t) in s.traces.iter().enumerate() {
            if t.samples.len() != WINDOW_LEN {
                out.push(Violation {
                    sample: Some(i),
                    rule: Rule::WindowLength,
                    detail: format!("trace {k} has {} samples, expected {WINDOW_LEN}", t.samples.len()),
                });
            }
            if t.samples.iter().any(|v| !v.is_finite()) {
                out.push(Violation {
                    sample: Some(i),
                    rule: Rule::NonFinite,
                    detail: format!("trace {k} contains non-finite values"),
                });
            }
        }
        if let Some(first) = s.traces.first() {
            if s.traces.iter().any(|t| t.method != first.method) {
                out.push(Violation {
                    sample: Some(i),
                    rule: Rule::MixedReduction,
                    detail: "traces use different reduction methods".into(),
                });
            }
        }
        if s.hand != d.manifest.archetype {
            out.push(Violation {
                sample: Some(i),
                rule: Rule::HandMismatch,
                detail: format!("sample hand {} differs from dataset {}", s.hand, d.manifest.archetype),
            });
        }
    }
    if !d.is_balanced() {
        out.push(Violation {
            sample: None,
            rule: Rule::Imbalance,
            detail: format!("per-finger counts {:?}", d.counts()),
        });
    }
    out
}

fn floor_count(fraction: f64, n: usize) -> usize {
    // Absorb representation error, e.g. 0.1 * 50 = 5.000000000000001.
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Stratified split into (train, validation, test). Per finger, validation and
/// test receive `floor(fraction * count)` samples and train the remainder.
pub fn split_dataset(d: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument(format!("fractions out of range: {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    if !d.is_balanced() {
        return Err(Error::InvalidArgument(format!(
            "cannot stratify an unbalanced dataset (counts {:?})",
            d.counts()
        )));
    }

    let mut parts: [Vec<usize>; 3] = Default::default();
    for finger in Finger::ALL {
        let mut idx: Vec<usize> = d
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == finger)
            .map(|(i, _)| i)
            .collect();
        let mut r = rng::rng_from(seed, &[tag::SPLIT, finger.index() as u64]);
        idx.shuffle(&mut r);
        let n = idx.len();
        let n_val = floor_count(fractions[1], n);
        let n_test = floor_count(fractions[2], n);
        let n_train = n - n_val - n_test;
        parts[0].extend_from_slice(&idx[..n_train]);
        parts[1].extend_from_slice(&idx[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&idx[n_train + n_val..]);
    }

    let roles = [SplitRole::Train, SplitRole::Validation, SplitRole::Test];
    let mut out = parts.into_iter().zip(roles).map(|(mut idx, role)| {
        idx.sort_unstable();
        let mut manifest = d.manifest.clone();
        manifest.role = role;
        manifest.split_seed = Some(seed);
        manifest.provenance.set("split.fractions", format!("{},{},{}", fractions[0], fractions[1], fractions[2]));
        Dataset::new(manifest, idx.into_iter().map(|i| d.samples[i].clone()).collect())
    });
    let train = out.next().expect("three parts");
    let val = out.next().expect("three parts");
    let test = out.next().expect("three parts");
    Ok((train, val, test))
}

fn dataset_header(d: &Dataset) -> Manifest {
    let m = &d.manifest;
    let mut h = Manifest::new();
    h.set("archetype", m.archetype.code())
        .set("seed", m.seed)
        .set("role", m.role.name());
    if let Some(s) = m.split_seed {
        h.set("split_seed", s);
    }
    h.set("n_samples", d.samples.len());
    let counts = d.counts();
    for f in Finger::ALL {
        h.set(&format!("count.{}", f.name()), counts[f.index()]);
    }
    h.merge_prefixed("prov", &m.provenance);
    h
}

/// Writes `d` as a manifest header plus binary payload.
///
/// Payload, per sample, as little-endian 8-byte words:
/// `label, hand, id, amplitude, seed (raw u64), n_traces`, then per trace
/// `method, len, samples[len]`. Integer-valued fields other than the seed are
/// stored as exact f64.
pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = PayloadWriter::new();
    for s in &d.samples {
        w.f64(s.label.index() as f64);
        w.f64(s.hand.index() as f64);
        w.f64(s.meta.id as f64);
        w.f64(s.meta.amplitude);
        w.u64(s.meta.seed);
        w.f64(s.traces.len() as f64);
        for t in &s.traces {
            w.f64(t.method.code());
            w.f64(t.samples.len() as f64);
            w.f64s(&t.samples);
        }
    }
    container::write_file(
        path,
        DATASET_KIND,
        d.manifest.version,
        &dataset_header(d),
        &w.into_bytes(),
    )
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (h, payload) = container::read_file(path, DATASET_KIND, DATASET_FORMAT_VERSION)?;
    let archetype: HandArchetype = h.parse("archetype")?;
    let n: usize = h.parse("n_samples")?;
    let mut r = PayloadReader::new(&payload);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let label = Finger::from_index(r.index()?)
            .ok_or_else(|| Error::Format("bad finger label".into()))?;
        let hand = HandArchetype::from_index(r.index()?)
            .ok_or_else(|| Error::Format("bad hand code".into()))?;
        let id = r.index()? as u32;
        let amplitude = r.f64()?;
        let seed = r.u64()?;
        let n_traces = r.index()?;
        let mut traces = Vec::with_capacity(n_traces);
        for _ in 0..n_traces {
            let method = ReductionMethod::from_code(r.index()?)?;
            let len = r.index()?;
            traces.push(ReducedTrace {
                samples: r.f64s(len)?,
                method,
            });
        }
        samples.push(ImpactSample {
            label,
            traces,
            hand,
            meta: SampleMeta { id, amplitude, seed },
        });
    }
    r.finish()?;

    let manifest = DatasetManifest {
        archetype,
        seed: h.parse("seed")?,
        version: DATASET_FORMAT_VERSION,
        role: h.parse("role")?,
        split_seed: h.parse_opt("split_seed")?,
        provenance: h.sub("prov"),
    };
    let d = Dataset::new(manifest, samples);
    let counts = d.counts();
    for f in Finger::ALL {
        let declared: usize = h.parse(&format!("count.{}", f.name()))?;
        if declared != counts[f.index()] {
            return Err(Error::Format(format!(
                "header count for {f} is {declared}, payload has {}",
                counts[f.index()]
            )));
        }
    }
    Ok(d)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn synthetic_dataset(per_finger: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut r = rng::rng_from(seed, &[99]);
        let mut samples = Vec::new();
        for f in Finger::ALL {
            for k in 0..per_finger {
                let traces = (0..N_SENSORS)
                    .map(|_| ReducedTrace {
                        samples: (0..WINDOW_LEN).map(|_| r.random_range(-1.0..1.0)).collect(),
                        method: ReductionMethod::Dft321,
                    })
                    .collect();
                samples.push(ImpactSample {
                    label: f,
                    traces,
                    hand: HandArchetype::Ch,
                    meta: SampleMeta {
                        id: (f.index() * per_finger + k) as u32,
                        amplitude: 0.5,
                        seed: r.random(),
                    },
                });
            }
        }
        Dataset::new(DatasetManifest::new(HandArchetype::Ch, seed), samples)
    }

    #[test]
    fn balanced_dataset_has_no_violations() {
        assert!(validate_dataset(&synthetic_dataset(100, 1)).is_empty());
    }

    #[test]
    fn imbalance_is_one_violation() {
        let mut d = synthetic_dataset(100, 1);
        let pos = d.samples.iter().position(|s| s.label == Finger::Thumb).unwrap();
        d.samples[pos].label = Finger::Index;
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Imbalance);
        assert_eq!(v[0].sample, None);
    }

    #[test]
    fn short_trace_is_one_violation() {
        let mut d = synthetic_dataset(2, 1);
        d.samples[3].traces[2].samples.pop();
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::WindowLength);
        assert_eq!(v[0].sample, Some(3));
    }

    #[test]
    fn split_is_stratified_80_10_10() {
        let d = synthetic_dataset(100, 3);
        let (tr, va, te) = split_dataset(&d, [0.8, 0.1, 0.1], 11).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (400, 50, 50));
        assert_eq!(tr.counts(), [80; 5]);
        assert_eq!(va.counts(), [10; 5]);
        assert_eq!(te.counts(), [10; 5]);
        assert_eq!(te.manifest.role, SplitRole::Test);
    }

    #[test]
    fn identity_split_and_bad_fractions() {
        let d = synthetic_dataset(3, 3);
        let (tr, va, te) = split_dataset(&d, [1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(tr.len(), 15);
        assert!(va.is_empty() && te.is_empty());
        assert!(split_dataset(&d, [0.8, 0.1, 0.2], 1).is_err());
    }

    #[test]
    fn split_rounds_down_val_and_test() {
        let d = synthetic_dataset(7, 3);
        let (tr, va, te) = split_dataset(&d, [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!(va.counts(), [0; 5]);
        assert_eq!(te.counts(), [0; 5]);
        assert_eq!(tr.len(), 35);
        let (tr, va, te) = split_dataset(&d, [0.4, 0.3, 0.3], 1).unwrap();
        assert_eq!((tr.counts()[0], va.counts()[0], te.counts()[0]), (3, 2, 2));
    }

    #[test]
    fn unbalanced_input_rejected() {
        let mut d = synthetic_dataset(3, 3);
        d.samples.pop();
        assert!(split_dataset(&d, [0.8, 0.1, 0.1], 1).is_err());
    }
}

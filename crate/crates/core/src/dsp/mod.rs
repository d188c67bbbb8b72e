//! Socket-signal processing: gap repair, zero-phase high-pass, alignment on
//! the force peak, reduction to one dimension and energy.

pub mod filter;
mod reduce;

use crate::container::Manifest;
use crate::error::{Error, Result};
use crate::signal::{AxisTraceSet, ForceTrace, ReducedTrace, ReductionMethod, N_SENSORS, WINDOW_LEN};
use crate::sim::SimOutput;

pub use reduce::{dft321, pca_reduce, reduce};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub highpass_cutoff: f64,
    /// Design order of each pass; forward-backward doubles the attenuation.
    pub highpass_order: usize,
    pub window_len: usize,
    /// Samples kept before the force peak.
    pub pre_peak_offset: usize,
    pub reduction: ReductionMethod,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            highpass_cutoff: 20.0,
            highpass_order: 4,
            window_len: WINDOW_LEN,
            pre_peak_offset: 50,
            reduction: ReductionMethod::Dft321,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.window_len != WINDOW_LEN {
            return Err(Error::InvalidArgument(format!("window_len is fixed at {WINDOW_LEN}")));
        }
        if self.pre_peak_offset >= self.window_len {
            return Err(Error::InvalidArgument(format!(
                "pre_peak_offset {} must be below the window length",
                self.pre_peak_offset
            )));
        }
        if !(self.highpass_cutoff > 0.0 && self.highpass_cutoff < sample_rate / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff {} Hz must lie below Nyquist ({} Hz)",
                self.highpass_cutoff,
                sample_rate / 2.0
            )));
        }
        if self.highpass_order == 0 || !self.highpass_order.is_multiple_of(2) {
            return Err(Error::InvalidArgument("highpass_order must be even".into()));
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("highpass_cutoff", self.highpass_cutoff)
            .set("highpass_order", self.highpass_order)
            .set("window_len", self.window_len)
            .set("pre_peak_offset", self.pre_peak_offset)
            .set("reduction", self.reduction);
        m
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            highpass_cutoff: m.parse_opt("highpass_cutoff")?.unwrap_or(d.highpass_cutoff),
            highpass_order: m.parse_opt("highpass_order")?.unwrap_or(d.highpass_order),
            window_len: m.parse_opt("window_len")?.unwrap_or(d.window_len),
            pre_peak_offset: m.parse_opt("pre_peak_offset")?.unwrap_or(d.pre_peak_offset),
            reduction: m.parse_opt("reduction")?.unwrap_or(d.reduction),
        })
    }
}

/// Replaces samples lost to communication errors by linear interpolation
/// between the nearest valid neighbours; leading and trailing gaps hold the
/// nearest valid value.
pub fn repair_gaps(t: &AxisTraceSet) -> Result<AxisTraceSet> {
    t.check()?;
    let valid: Vec<usize> = (0..t.len()).filter(|&i| t.valid_mask[i]).collect();
    if valid.is_empty() {
        return Err(Error::AllInvalid);
    }
    let mut out = t.clone();
    if valid.len() == t.len() {
        return Ok(out);
    }
    for axis in out.axes_mut() {
        let src = axis.clone();
        let mut next = 0;
        for i in 0..src.len() {
            while next < valid.len() && valid[next] < i {
                next += 1;
            }
            if next < valid.len() && valid[next] == i {
                continue;
            }
            axis[i] = match (next.checked_sub(1).map(|p| valid[p]), valid.get(next)) {
                (Some(lo), Some(&hi)) => {
                    let w = (i - lo) as f64 / (hi - lo) as f64;
                    src[lo] + w * (src[hi] - src[lo])
                }
                (Some(lo), None) => src[lo],
                (None, Some(&hi)) => src[hi],
                (None, None) => unreachable!("at least one valid sample"),
            };
        }
    }
    out.valid_mask.iter_mut().for_each(|m| *m = true);
    Ok(out)
}

/// Per-axis zero-phase Butterworth high-pass.
pub fn highpass(t: &AxisTraceSet, cfg: &PipelineConfig) -> Result<AxisTraceSet> {
    t.check()?;
    let sections = filter::butterworth_highpass(cfg.highpass_order, cfg.highpass_cutoff, t.sample_rate)?;
    if t.len() <= 3 * cfg.highpass_order {
        return Err(Error::Shape(format!(
            "trace of {} samples is too short for an order-{} filter",
            t.len(),
            cfg.highpass_order
        )));
    }
    let mut out = t.clone();
    for axis in out.axes_mut() {
        *axis = filter::filtfilt(&sections, axis);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedWindow {
    pub trace: AxisTraceSet,
    /// Index of the force peak in the source trace.
    pub peak: usize,
    /// First source index of the window (may be negative).
    pub start: isize,
    /// Some of the window fell outside the source and was zero-filled.
    pub padded: bool,
}

/// Index of the largest |F_z|, earliest on ties.
pub fn force_peak(f: &ForceTrace) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in f.fz.iter().map(|v| v.abs()).enumerate() {
        if v > best.map_or(0.0, |b| b.1) {
            best = Some((i, v));
        }
    }
    best.map(|b| b.0).ok_or(Error::ForceAllZero)
}

fn cut(t: &AxisTraceSet, start: isize, len: usize) -> (AxisTraceSet, bool) {
    let mut padded = false;
    let mut take = |src: &[f64]| -> Vec<f64> {
        (0..len as isize)
            .map(|j| {
                let i = start + j;
                if i < 0 || i as usize >= src.len() {
                    padded = true;
                    0.0
                } else {
                    src[i as usize]
                }
            })
            .collect()
    };
    let ax = take(&t.ax);
    let ay = take(&t.ay);
    let az = take(&t.az);
    let out = AxisTraceSet {
        sensor_id: t.sensor_id,
        sample_rate: t.sample_rate,
        ax,
        ay,
        az,
        valid_mask: vec![true; len],
    };
    (out, padded)
}

/// Cuts `[p - offset, p - offset + window_len)` around the force peak `p`,
/// zero-filling whatever falls outside the trace.
pub fn align_window(t: &AxisTraceSet, f: &ForceTrace, cfg: &PipelineConfig) -> Result<AlignedWindow> {
    t.check()?;
    if f.len() != t.len() {
        return Err(Error::Shape(format!(
            "force has {} samples, acceleration {}",
            f.len(),
            t.len()
        )));
    }
    let peak = force_peak(f)?;
    let start = peak as isize - cfg.pre_peak_offset as isize;
    let (trace, padded) = cut(t, start, cfg.window_len);
    Ok(AlignedWindow {
        trace,
        peak,
        start,
        padded,
    })
}

/// Sum of squares.
pub fn energy(r: &ReducedTrace) -> f64 {
    r.samples.iter().map(|v| v * v).sum()
}

/// Mean over a sensors × fingers (or fingers × sensors) energy table.
pub fn mean_hand_energy(energies: &[Vec<f64>]) -> Result<f64> {
    if energies.len() != N_SENSORS || energies.iter().any(|row| row.len() != N_SENSORS) {
        return Err(Error::Shape("energy table must be 5 x 5".into()));
    }
    if energies.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("energy table".into()));
    }
    Ok(energies.iter().flatten().sum::<f64>() / (N_SENSORS * N_SENSORS) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub traces: Vec<ReducedTrace>,
    pub energies: [f64; N_SENSORS],
    pub peak: usize,
    pub padded: bool,
    /// The force never rose above zero; the window was taken from the start
    /// of the recording.
    pub no_contact: bool,
}

/// repair → high-pass → align → reduce → energy, for each sensor.
pub fn run_pipeline(sim: &SimOutput, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate(sim.sample_rate())?;
    if sim.sensor_traces.len() != N_SENSORS {
        return Err(Error::Shape(format!("expected {N_SENSORS} sensor traces")));
    }
    let (peak, no_contact) = match force_peak(&sim.force) {
        Ok(p) => (p, false),
        Err(Error::ForceAllZero) => (cfg.pre_peak_offset, true),
        Err(e) => return Err(e),
    };
    let start = peak as isize - cfg.pre_peak_offset as isize;
    let mut traces = Vec::with_capacity(N_SENSORS);
    let mut energies = [0.0; N_SENSORS];
    let mut padded = false;
    for (k, raw) in sim.sensor_traces.iter().enumerate() {
        if raw.len() != sim.force.len() {
            return Err(Error::Shape("sensor and force traces differ in length".into()));
        }
        let filtered = highpass(&repair_gaps(raw)?, cfg)?;
        let (window, pad) = cut(&filtered, start, cfg.window_len);
        padded |= pad;
        let reduced = reduce(&window, cfg.reduction)?;
        energies[k] = energy(&reduced);
        traces.push(reduced);
    }
    Ok(PipelineOutput {
        traces,
        energies,
        peak,
        padded,
        no_contact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn trace(ax: Vec<f64>) -> AxisTraceSet {
        let n = ax.len();
        AxisTraceSet::new(0, 1000.0, ax, vec![0.0; n], vec![0.0; n]).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn sine(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / 1000.0).sin()).collect()
    }

    #[test]
    fn repair_identity_midpoint_and_edges() {
        let t = trace(vec![1.0, 2.0, 3.0]);
        assert_eq!(repair_gaps(&t).unwrap(), t);

        let mut t = trace(vec![1.0, 99.0, 3.0]);
        t.valid_mask[1] = false;
        assert_eq!(repair_gaps(&t).unwrap().ax, vec![1.0, 2.0, 3.0]);

        let mut t = trace(vec![0.0, 0.0, 0.0, 5.0, 6.0, 0.0]);
        t.valid_mask = vec![false, false, false, true, true, false];
        let r = repair_gaps(&t).unwrap();
        assert_eq!(r.ax, vec![5.0, 5.0, 5.0, 5.0, 6.0, 6.0]);
        assert!(r.valid_mask.iter().all(|&m| m));
        assert_eq!(repair_gaps(&r).unwrap(), r);

        let mut t = trace(vec![1.0, 2.0]);
        t.valid_mask = vec![false, false];
        assert!(matches!(repair_gaps(&t), Err(Error::AllInvalid)));
    }

    #[test]
    fn highpass_removes_dc() {
        let c = 3.7;
        let out = highpass(&trace(vec![c; 500]), &PipelineConfig::default()).unwrap();
        let worst = out.ax.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-9 * c, "{worst}");
    }

    #[test]
    fn highpass_passband_and_stopband() {
        let cfg = PipelineConfig::default();
        let pass = highpass(&trace(sine(200.0, 2000)), &cfg).unwrap();
        let x = sine(200.0, 2000);
        assert!((rms(&pass.ax) / rms(&x) - 1.0).abs() < 0.01);
        let stop = highpass(&trace(sine(2.0, 2000)), &cfg).unwrap();
        assert!(rms(&stop.ax) < 0.01, "{}", rms(&stop.ax));
    }

    #[test]
    fn highpass_rejects_nyquist_cutoff() {
        let cfg = PipelineConfig {
            highpass_cutoff: 500.0,
            ..Default::default()
        };
        assert!(highpass(&trace(vec![0.0; 100]), &cfg).is_err());
        assert!(highpass(&trace(vec![0.0; 12]), &PipelineConfig::default()).is_err());
    }

    #[test]
    fn highpass_is_linear() {
        let cfg = PipelineConfig::default();
        let x: Vec<f64> = (0..600).map(|i| ((i * 37 % 101) as f64 - 50.0) / 13.0).collect();
        let y: Vec<f64> = (0..600).map(|i| ((i * i) % 97) as f64 / 7.0).collect();
        let (a, b) = (1.7, -0.4);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fm = highpass(&trace(mix), &cfg).unwrap().ax;
        let fx = highpass(&trace(x), &cfg).unwrap().ax;
        let fy = highpass(&trace(y), &cfg).unwrap().ax;
        for i in 0..600 {
            assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }

    fn force_with_peak(n: usize, peaks: &[usize]) -> ForceTrace {
        let mut fz = vec![0.0; n];
        for &p in peaks {
            fz[p] = 10.0;
        }
        ForceTrace::from_fz(fz, 1000.0).unwrap()
    }

    #[test]
    fn window_indices() {
        let t = trace((0..500).map(|i| i as f64).collect());
        let cfg = PipelineConfig::default();
        let w = align_window(&t, &force_with_peak(500, &[100]), &cfg).unwrap();
        assert_eq!(w.trace.ax.first(), Some(&50.0));
        assert_eq!(w.trace.ax.last(), Some(&349.0));
        assert!(!w.padded);

        let w = align_window(&t, &force_with_peak(500, &[10]), &cfg).unwrap();
        assert!(w.padded);
        assert!(w.trace.ax[..40].iter().all(|&v| v == 0.0));
        assert_eq!(w.trace.ax[40], 0.0);
        assert_eq!(w.trace.ax[41], 1.0);

        let w = align_window(&t, &force_with_peak(500, &[120, 200]), &cfg).unwrap();
        assert_eq!(w.peak, 120);

        assert!(matches!(
            align_window(&t, &force_with_peak(500, &[]), &cfg),
            Err(Error::ForceAllZero)
        ));
    }

    #[test]
    fn energy_closed_forms() {
        let r = |s: Vec<f64>| ReducedTrace::new(s, ReductionMethod::Dft321).unwrap();
        assert_eq!(energy(&r(vec![0.0; WINDOW_LEN])), 0.0);
        let mut imp = vec![0.0; WINDOW_LEN];
        imp[17] = 1.0;
        assert_eq!(energy(&r(imp)), 1.0);
        // 10 full periods: Σ sin² = N/2.
        let s: Vec<f64> = (0..WINDOW_LEN)
            .map(|i| (2.0 * PI * 10.0 * i as f64 / WINDOW_LEN as f64).sin())
            .collect();
        assert!((energy(&r(s)) - 150.0).abs() < 1e-9);
    }

    #[test]
    fn mean_hand_energy_arithmetic() {
        let constant = vec![vec![2.5; 5]; 5];
        assert_eq!(mean_hand_energy(&constant).unwrap(), 2.5);
        let mut one = vec![vec![0.0; 5]; 5];
        one[2][3] = 25.0;
        assert_eq!(mean_hand_energy(&one).unwrap(), 1.0);
        assert!(mean_hand_energy(&one[..4]).is_err());
    }

    #[test]
    fn config_manifest_round_trip() {
        let cfg = PipelineConfig {
            highpass_cutoff: 12.5,
            reduction: ReductionMethod::Pca,
            ..Default::default()
        };
        assert_eq!(PipelineConfig::from_manifest(&cfg.to_manifest()).unwrap(), cfg);
    }
}

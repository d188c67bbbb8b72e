use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::container::Manifest;
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::signal::{AxisTraceSet, Finger, ForceTrace, N_SENSORS};

use super::model::HandModel;
use super::network::{dot, normalize, Body, Contact, Integrator, Network, Vec3};

const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpactMode {
    Hammer,
    Pendulum,
}

impl fmt::Display for ImpactMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImpactMode::Hammer => "hammer",
            ImpactMode::Pendulum => "pendulum",
        })
    }
}

impl FromStr for ImpactMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hammer" => Ok(ImpactMode::Hammer),
            "pendulum" => Ok(ImpactMode::Pendulum),
            _ => Err(Error::InvalidArgument(format!("unknown impact mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactorConfig {
    pub mode: ImpactMode,
    /// Effective striking mass, kg.
    pub mass: f64,
    /// Hammer speed at contact, m/s.
    pub hammer_speed: f64,
    /// Pendulum release angle, degrees.
    pub release_angle: f64,
    /// Pendulum arm length, m.
    pub arm_length: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    /// Relative standard deviation of the impact speed.
    pub velocity_jitter: f64,
    /// Standard deviation of the impact direction tilt, degrees.
    pub direction_jitter: f64,
    /// Free flight before nominal contact, s.
    pub pre_roll: f64,
    /// Recording length after nominal contact, s.
    pub record: f64,
}

impl ImpactorConfig {
    pub fn hammer() -> Self {
        Self {
            mode: ImpactMode::Hammer,
            mass: 0.13,
            hammer_speed: 0.5,
            release_angle: 3.0,
            arm_length: 0.3,
            contact_stiffness: 1.0e4,
            contact_damping: 2.0,
            velocity_jitter: 0.05,
            direction_jitter: 3.0,
            pre_roll: 0.06,
            record: 0.42,
        }
    }

    pub fn pendulum() -> Self {
        Self {
            mode: ImpactMode::Pendulum,
            mass: 0.25,
            velocity_jitter: 0.01,
            direction_jitter: 0.5,
            ..Self::hammer()
        }
    }

    pub fn for_mode(mode: ImpactMode) -> Self {
        match mode {
            ImpactMode::Hammer => Self::hammer(),
            ImpactMode::Pendulum => Self::pendulum(),
        }
    }

    pub fn without_jitter(mut self) -> Self {
        self.velocity_jitter = 0.0;
        self.direction_jitter = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if !(self.mass > 0.0) {
            return fail(format!("impactor mass must be positive, got {}", self.mass));
        }
        if self.mode == ImpactMode::Pendulum && !(self.release_angle > 0.0 && self.release_angle < 90.0) {
            return fail(format!("release angle must be in (0, 90) degrees, got {}", self.release_angle));
        }
        if !(self.arm_length > 0.0) {
            return fail("pendulum arm length must be positive".into());
        }
        if !(self.hammer_speed >= 0.0) {
            return fail("hammer speed must be non-negative".into());
        }
        if !(self.velocity_jitter >= 0.0) || !(self.direction_jitter >= 0.0) {
            return fail("jitters must be non-negative".into());
        }
        if !(self.contact_stiffness >= 0.0) || !(self.contact_damping >= 0.0) {
            return fail("contact coefficients must be non-negative".into());
        }
        if !(self.pre_roll > 0.0) || !(self.record > 0.0) {
            return fail("pre-roll and record durations must be positive".into());
        }
        Ok(())
    }

    /// Speed at contact before jitter.
    pub fn nominal_speed(&self) -> f64 {
        match self.mode {
            ImpactMode::Hammer => self.hammer_speed,
            ImpactMode::Pendulum => {
                let theta = self.release_angle.to_radians();
                (2.0 * GRAVITY * self.arm_length * (1.0 - theta.cos())).sqrt()
            }
        }
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.set("mode", self.mode)
            .set("mass", self.mass)
            .set("hammer_speed", self.hammer_speed)
            .set("release_angle", self.release_angle)
            .set("arm_length", self.arm_length)
            .set("contact_stiffness", self.contact_stiffness)
            .set("contact_damping", self.contact_damping)
            .set("velocity_jitter", self.velocity_jitter)
            .set("direction_jitter", self.direction_jitter)
            .set("pre_roll", self.pre_roll)
            .set("record", self.record);
        m
    }

    /// Reads fields present in `m`, taking the rest from the mode's defaults.
    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        let mode = m.parse_opt("mode")?.unwrap_or(ImpactMode::Hammer);
        let mut c = Self::for_mode(mode);
        let fields: [(&str, &mut f64); 10] = [
            ("mass", &mut c.mass),
            ("hammer_speed", &mut c.hammer_speed),
            ("release_angle", &mut c.release_angle),
            ("arm_length", &mut c.arm_length),
            ("contact_stiffness", &mut c.contact_stiffness),
            ("contact_damping", &mut c.contact_damping),
            ("velocity_jitter", &mut c.velocity_jitter),
            ("direction_jitter", &mut c.direction_jitter),
            ("pre_roll", &mut c.pre_roll),
            ("record", &mut c.record),
        ];
        for (key, slot) in fields {
            if let Some(v) = m.parse_opt(key)? {
                *slot = v;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl Default for ImpactorConfig {
    fn default() -> Self {
        Self::hammer()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Contact force on the fingertip, world axes.
    pub force: ForceTrace,
    pub sensor_traces: Vec<AxisTraceSet>,
    pub internal_step: f64,
    /// Speed actually drawn for this impact, m/s.
    pub impact_speed: f64,
    pub direction: Vec3,
}

impl SimOutput {
    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.force.sample_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOutput {
    pub finger: Finger,
    pub repetition: usize,
    pub seed: u64,
    pub output: SimOutput,
}

fn decimation(model: &HandModel) -> Result<usize> {
    let ratio = 1.0 / (model.sensor.sample_rate * model.internal_step);
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-6 {
        return Err(Error::InvalidModel(format!(
            "sample period must be an integer multiple of the internal step (ratio {ratio})"
        )));
    }
    Ok(n as usize)
}

/// Unit vector `axis` tilted by two small rotations about x and y.
fn tilted(axis: Vec3, about_x: f64, about_y: f64) -> Vec3 {
    let (sx, cx) = about_x.sin_cos();
    let (sy, cy) = about_y.sin_cos();
    let r1 = [axis[0], cx * axis[1] - sx * axis[2], sx * axis[1] + cx * axis[2]];
    normalize([cy * r1[0] + sy * r1[2], r1[1], -sy * r1[0] + cy * r1[2]])
}

/// The model's network with the impactor appended as the last body, resting
/// `gap` metres from the fingertip along `direction`, and its contact.
pub fn impact_network(model: &HandModel, impactor: &ImpactorConfig, finger: Finger, direction: Vec3, gap: f64) -> Network {
    let tip = model.finger_tips[finger.index()];
    let mut net = model.network.clone();
    let tip_rest = net.bodies[tip].rest;
    let striker = net.bodies.len();
    net.bodies.push(Body {
        name: "impactor".into(),
        mass: impactor.mass,
        rest: std::array::from_fn(|i| tip_rest[i] - direction[i] * gap),
    });
    let (stiffness, damping) = model.pad.combine(impactor.contact_stiffness, impactor.contact_damping);
    net.contacts.push(Contact {
        striker,
        target: tip,
        direction,
        gap,
        stiffness,
        damping,
    });
    net
}

/// Simulates one impact on `finger`.
///
/// The impactor starts `speed * pre_roll` away from the fingertip along the
/// (jittered) impact direction and flies freely until the one-sided contact
/// closes. Sensor accelerations are point-sampled at the model's sample rate,
/// rotated into each sensor's frame, and corrupted with Gaussian noise and
/// optional clipping.
pub fn simulate_impact(model: &HandModel, impactor: &ImpactorConfig, finger: Finger, seed: u64) -> Result<SimOutput> {
    model.validate()?;
    impactor.validate()?;
    let decim = decimation(model)?;
    let fs = model.sensor.sample_rate;
    let dt = model.internal_step;

    let mut draw = rng::rng_from(seed, &[tag::IMPACT]);
    let z: f64 = StandardNormal.sample(&mut draw);
    let speed = (impactor.nominal_speed() * (1.0 + impactor.velocity_jitter * z)).max(0.0);
    let ax: f64 = StandardNormal.sample(&mut draw);
    let ay: f64 = StandardNormal.sample(&mut draw);
    let jitter = impactor.direction_jitter.to_radians();
    let direction = tilted([0.0, 0.0, 1.0], jitter * ax, jitter * ay);

    let gap = (speed * impactor.pre_roll).max(1e-3);
    let net = impact_network(model, impactor, finger, direction, gap);
    let striker = net.bodies.len() - 1;

    let n_bodies = net.bodies.len();
    let mut v0 = vec![[0.0; 3]; n_bodies];
    v0[striker] = direction.map(|d| d * speed);
    let mut it = Integrator::new(&net, dt, vec![[0.0; 3]; n_bodies], v0)?;

    let n_samples = ((impactor.pre_roll + impactor.record) * fs).round() as usize;
    let mut force = [vec![0.0; n_samples], vec![0.0; n_samples], vec![0.0; n_samples]];
    let mut acc = vec![[vec![0.0; n_samples], vec![0.0; n_samples], vec![0.0; n_samples]]; N_SENSORS];
    for s in 0..n_samples {
        let f = it.contact_force(0);
        for (r, axis) in force.iter_mut().enumerate() {
            axis[s] = f * direction[r];
        }
        for (k, &node) in model.sensor_nodes.iter().enumerate() {
            let a = it.acceleration(node);
            for (r, frame_axis) in model.sensor_frames[k].iter().enumerate() {
                acc[k][r][s] = dot(a, *frame_axis);
            }
        }
        if s + 1 < n_samples {
            for _ in 0..decim {
                it.step()?;
            }
        }
    }

    let noise_std = model.sensor.noise_std;
    let mut noise = rng::rng_from(seed, &[tag::SENSOR_NOISE]);
    let sensor_traces = acc
        .into_iter()
        .enumerate()
        .map(|(k, mut axes)| {
            for axis in axes.iter_mut() {
                for v in axis.iter_mut() {
                    if noise_std > 0.0 {
                        let n: f64 = StandardNormal.sample(&mut noise);
                        *v += noise_std * n;
                    }
                    if let Some(fsc) = model.sensor.full_scale {
                        *v = v.clamp(-fsc, fsc);
                    }
                }
            }
            let [ax, ay, az] = axes;
            AxisTraceSet::new(k, fs, ax, ay, az)
        })
        .collect::<Result<Vec<_>>>()?;
    let [fx, fy, fz] = force;
    Ok(SimOutput {
        force: ForceTrace::new(fx, fy, fz, fs)?,
        sensor_traces,
        internal_step: dt,
        impact_speed: speed,
        direction,
    })
}

/// Seed used by [`batch_simulate`] for one (finger, repetition) impact.
pub fn impact_seed(seed: u64, finger: Finger, repetition: usize) -> u64 {
    rng::derive_seed(seed, &[tag::IMPACT, finger.index() as u64, repetition as u64])
}

/// `n_per_finger` impacts on each finger, ordered by (finger, repetition).
/// Impacts run in parallel; each draws from its own derived seed.
pub fn batch_simulate(
    model: &HandModel,
    impactor: &ImpactorConfig,
    n_per_finger: usize,
    seed: u64,
) -> Result<Vec<LabeledOutput>> {
    if n_per_finger == 0 {
        return Err(Error::InvalidArgument("n_per_finger must be at least 1".into()));
    }
    let jobs: Vec<(Finger, usize)> = Finger::ALL
        .iter()
        .flat_map(|&f| (0..n_per_finger).map(move |r| (f, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(finger, repetition)| {
            let s = impact_seed(seed, finger, repetition);
            Ok(LabeledOutput {
                finger,
                repetition,
                seed: s,
                output: simulate_impact(model, impactor, finger, s)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceShape {
    /// Global peak of |F_z|, N.
    pub peak: f64,
    /// Full width at half maximum of the first contact episode, s.
    pub width: f64,
}

/// Peak |F_z| and FWHM of the first contact episode. Half-maximum crossings
/// are located by linear interpolation between samples.
pub fn impact_force_shape_stats(out: &SimOutput) -> Result<ForceShape> {
    let fz: Vec<f64> = out.force.fz.iter().map(|v| v.abs()).collect();
    let peak = fz.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NoContact);
    }
    let start = fz.iter().position(|&v| v > 0.0).expect("peak > 0");
    let end = fz[start..].iter().position(|&v| v == 0.0).map_or(fz.len(), |e| start + e);
    let episode_peak = fz[start..end].iter().cloned().fold(0.0, f64::max);
    let half = episode_peak / 2.0;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= fz.len() {
            0.0
        } else {
            fz[i as usize]
        }
    };
    let first = (start..end).find(|&i| fz[i] >= half).expect("episode reaches its peak");
    let last = (start..end).rev().find(|&i| fz[i] >= half).expect("episode reaches its peak");
    let cross = |lo: f64, hi: f64| if hi == lo { 0.0 } else { (half - lo) / (hi - lo) };
    let (l0, l1) = (at(first as isize - 1), at(first as isize));
    let left = if first == 0 { 0.0 } else { first as f64 - 1.0 + cross(l0, l1) };
    let (r0, r1) = (at(last as isize), at(last as isize + 1));
    let right = if last + 1 >= fz.len() { last as f64 } else { last as f64 + 1.0 - cross(r1, r0) };
    Ok(ForceShape {
        peak,
        width: (right - left) / out.force.sample_rate,
    })
}

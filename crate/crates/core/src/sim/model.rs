//! Prosthetic hand archetypes and their lumped-parameter models.
//!
//! Every preset shares the same 18-body layout (5 fingertips, 5 proximal
//! phalanges, palm, wrist, 5 socket shell nodes, socket base) and the same
//! socket; the archetypes differ in joint stiffness, damping and mass.
//!
//! World frame: x runs along the forearm towards the fingers, y is lateral
//! (towards the thumb), z is the impact axis, perpendicular to the coronal
//! plane of the hand.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::container::{self, Manifest, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::signal::{Finger, DEFAULT_SAMPLE_RATE, N_FINGERS, N_SENSORS};

use super::network::{Body, GroundLink, Link, Network, Vec3};

pub const PRESET_SOURCE: &str = include_str!("../../presets/hands-v1.txt");
pub const PRESET_VERSION: u32 = 1;
pub const DEFAULT_INTERNAL_STEP: f64 = 5e-5;
pub const DEFAULT_NOISE_STD: f64 = 0.02;
/// ±16 g.
pub const DEFAULT_FULL_SCALE: f64 = 156.9;
const MODEL_KIND: &str = "hand-model";

pub const PALM: usize = 10;
pub const WRIST: usize = 11;
pub const SOCKET_BASE: usize = 17;
pub const N_HAND_BODIES: usize = 18;

pub fn tip_body(f: Finger) -> usize {
    f.index()
}

pub fn proximal_body(f: Finger) -> usize {
    N_FINGERS + f.index()
}

pub fn shell_body(sensor: usize) -> usize {
    12 + sensor
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HandArchetype {
    /// Cosmetic passive hand.
    Ch,
    /// VariPlus tridigital hand.
    Vp,
    /// I-Limb articulated hand.
    Il,
    /// SoftHand adaptive hand.
    Sh,
}

impl HandArchetype {
    pub const ALL: [HandArchetype; 4] = [
        HandArchetype::Ch,
        HandArchetype::Vp,
        HandArchetype::Il,
        HandArchetype::Sh,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            HandArchetype::Ch => "CH",
            HandArchetype::Vp => "VP",
            HandArchetype::Il => "IL",
            HandArchetype::Sh => "SH",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            HandArchetype::Ch => "Cosmetic",
            HandArchetype::Vp => "VariPlus",
            HandArchetype::Il => "I-Limb",
            HandArchetype::Sh => "SoftHand",
        }
    }
}

impl fmt::Display for HandArchetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for HandArchetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        HandArchetype::ALL
            .into_iter()
            .find(|h| {
                h.code().eq_ignore_ascii_case(s)
                    || h.long_name().eq_ignore_ascii_case(s)
                    || h.long_name().replace('-', "").eq_ignore_ascii_case(s)
            })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown hand archetype {s:?} (expected CH, VP, IL or SH)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkRole {
    /// Fingertip to proximal phalanx.
    Distal(Finger),
    /// Proximal phalanx to palm.
    Metacarpal(Finger),
    /// Between neighbouring proximal phalanges.
    Web,
    Wrist,
    /// Socket shell, ring and base links; identical for all hands.
    Socket,
}

impl LinkRole {
    pub fn is_hand_joint(self) -> bool {
        !matches!(self, LinkRole::Socket)
    }

    fn encode(self) -> (f64, f64) {
        match self {
            LinkRole::Distal(f) => (0.0, f.index() as f64),
            LinkRole::Metacarpal(f) => (1.0, f.index() as f64),
            LinkRole::Web => (2.0, 0.0),
            LinkRole::Wrist => (3.0, 0.0),
            LinkRole::Socket => (4.0, 0.0),
        }
    }

    fn decode(code: usize, finger: usize) -> Result<Self> {
        let f = || Finger::from_index(finger).ok_or_else(|| Error::Format("bad finger in link role".into()));
        Ok(match code {
            0 => LinkRole::Distal(f()?),
            1 => LinkRole::Metacarpal(f()?),
            2 => LinkRole::Web,
            3 => LinkRole::Wrist,
            4 => LinkRole::Socket,
            _ => return Err(Error::Format(format!("bad link role {code}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub sample_rate: f64,
    /// Additive Gaussian noise per axis, m/s².
    pub noise_std: f64,
    /// Symmetric clipping level, m/s²; `None` disables clipping.
    pub full_scale: Option<f64>,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            noise_std: DEFAULT_NOISE_STD,
            full_scale: None,
        }
    }
}

/// Fingertip cover met by the impactor. It acts in series with the
/// impactor's own contact spring and adds its loss to the contact damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingertipPad {
    /// N/m; `f64::INFINITY` for a bare rigid fingertip.
    pub stiffness: f64,
    /// N·s/m.
    pub damping: f64,
}

impl FingertipPad {
    pub const RIGID: FingertipPad = FingertipPad {
        stiffness: f64::INFINITY,
        damping: 0.0,
    };

    /// Contact (stiffness, damping) seen by an impactor with the given
    /// contact spring and damper.
    pub fn combine(&self, stiffness: f64, damping: f64) -> (f64, f64) {
        let k = if self.stiffness.is_infinite() {
            stiffness
        } else if stiffness + self.stiffness > 0.0 {
            stiffness * self.stiffness / (stiffness + self.stiffness)
        } else {
            0.0
        };
        (k, damping + self.damping)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub archetype: HandArchetype,
    pub network: Network,
    /// Parallel to `network.links`.
    pub link_roles: Vec<LinkRole>,
    pub sensor_nodes: [usize; N_SENSORS],
    /// Sensor axes (radial, tangential, axial) expressed in world coordinates.
    pub sensor_frames: [[Vec3; 3]; N_SENSORS],
    pub finger_tips: [usize; N_FINGERS],
    pub pad: FingertipPad,
    pub sensor: SensorSpec,
    pub internal_step: f64,
    pub preset_version: u32,
}

impl HandModel {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.link_roles.len() != self.network.links.len() {
            return Err(Error::InvalidModel("link role table does not match links".into()));
        }
        let n = self.network.n_bodies();
        if self.sensor_nodes.iter().chain(&self.finger_tips).any(|&i| i >= n) {
            return Err(Error::InvalidModel("sensor or fingertip index out of range".into()));
        }
        let mut all: Vec<usize> = (0..n).collect();
        all.sort_unstable();
        if !self.network.is_connected(&all) {
            return Err(Error::InvalidModel("link graph is not connected".into()));
        }
        if !(self.sensor.sample_rate > 0.0) || !(self.internal_step > 0.0) {
            return Err(Error::InvalidModel("sample rate and internal step must be positive".into()));
        }
        if !(self.pad.stiffness > 0.0) || !(self.pad.damping >= 0.0) {
            return Err(Error::InvalidModel("fingertip pad needs positive stiffness and non-negative damping".into()));
        }
        if !(self.sensor.noise_std >= 0.0) {
            return Err(Error::InvalidModel("noise std must be non-negative".into()));
        }
        Ok(())
    }

    fn link_of(&self, role: LinkRole) -> Option<&Link> {
        self.link_roles
            .iter()
            .position(|r| *r == role)
            .map(|i| &self.network.links[i])
    }

    /// (axial, lateral, normal) stiffness of a finger's metacarpal joint.
    pub fn joint_stiffness(&self, finger: Finger) -> Vec3 {
        self.link_of(LinkRole::Metacarpal(finger))
            .map(|l| l.stiffness)
            .unwrap_or([0.0; 3])
    }

    /// Stiffness of the finger joint along the impact axis.
    pub fn impact_axis_stiffness(&self, finger: Finger) -> f64 {
        self.joint_stiffness(finger)[2]
    }

    pub fn wrist_stiffness(&self) -> Vec3 {
        self.link_of(LinkRole::Wrist).map(|l| l.stiffness).unwrap_or([0.0; 3])
    }

    /// Copy with every hand joint (everything but the socket) scaled in stiffness.
    pub fn with_joint_stiffness_scaled(&self, s: f64) -> HandModel {
        let mut m = self.clone();
        for (l, role) in m.network.links.iter_mut().zip(&m.link_roles) {
            if role.is_hand_joint() {
                l.stiffness = l.stiffness.map(|k| k * s);
            }
        }
        m
    }

    /// Copy with all link and suspension damping removed.
    pub fn without_damping(&self) -> HandModel {
        let mut m = self.clone();
        for l in &mut m.network.links {
            l.damping = [0.0; 3];
        }
        for g in &mut m.network.ground_links {
            g.damping = [0.0; 3];
        }
        m
    }

    pub fn total_mass(&self) -> f64 {
        self.network.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (h, payload) = self.encode();
        container::write_file(path, MODEL_KIND, PRESET_VERSION, &h, &payload)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (h, payload) = container::read_file(path, MODEL_KIND, PRESET_VERSION)?;
        Self::decode(&h, &payload)
    }

    fn encode(&self) -> (Manifest, Vec<u8>) {
        let net = &self.network;
        let mut h = Manifest::new();
        h.set("archetype", self.archetype)
            .set("preset_version", self.preset_version)
            .set("sample_rate", self.sensor.sample_rate)
            .set("noise_std", self.sensor.noise_std)
            .set(
                "full_scale",
                self.sensor.full_scale.map_or("off".to_string(), |v| v.to_string()),
            )
            .set("internal_step", self.internal_step)
            .set("pad_stiffness", self.pad.stiffness)
            .set("pad_damping", self.pad.damping)
            .set("n_bodies", net.bodies.len())
            .set("n_links", net.links.len())
            .set("n_ground_links", net.ground_links.len())
            .set("sensor_nodes", join(&self.sensor_nodes))
            .set("finger_tips", join(&self.finger_tips))
            .set(
                "body_names",
                net.bodies.iter().map(|b| b.name.as_str()).collect::<Vec<_>>().join(","),
            );
        let mut w = PayloadWriter::new();
        for b in &net.bodies {
            w.f64(b.mass);
            w.f64s(&b.rest);
        }
        for (l, role) in net.links.iter().zip(&self.link_roles) {
            let (code, finger) = role.encode();
            w.f64s(&[l.a as f64, l.b as f64, code, finger]);
            w.f64s(&l.stiffness);
            w.f64s(&l.damping);
        }
        for g in &net.ground_links {
            w.f64(g.body as f64);
            w.f64s(&g.stiffness);
            w.f64s(&g.damping);
        }
        for frame in &self.sensor_frames {
            for axis in frame {
                w.f64s(axis);
            }
        }
        (h, w.into_bytes())
    }

    fn decode(h: &Manifest, payload: &[u8]) -> Result<Self> {
        let n_bodies: usize = h.parse("n_bodies")?;
        let n_links: usize = h.parse("n_links")?;
        let n_ground: usize = h.parse("n_ground_links")?;
        let names: Vec<String> = h.require("body_names")?.split(',').map(str::to_owned).collect();
        if names.len() != n_bodies {
            return Err(Error::Format("body name count mismatch".into()));
        }
        let mut r = PayloadReader::new(payload);
        let vec3 = |r: &mut PayloadReader| -> Result<Vec3> { Ok([r.f64()?, r.f64()?, r.f64()?]) };
        let mut bodies = Vec::with_capacity(n_bodies);
        for name in names {
            let mass = r.f64()?;
            bodies.push(Body { name, mass, rest: vec3(&mut r)? });
        }
        let mut links = Vec::with_capacity(n_links);
        let mut roles = Vec::with_capacity(n_links);
        for _ in 0..n_links {
            let a = r.index()?;
            let b = r.index()?;
            let code = r.index()?;
            let finger = r.index()?;
            roles.push(LinkRole::decode(code, finger)?);
            links.push(Link {
                a,
                b,
                stiffness: vec3(&mut r)?,
                damping: vec3(&mut r)?,
            });
        }
        let mut ground_links = Vec::with_capacity(n_ground);
        for _ in 0..n_ground {
            ground_links.push(GroundLink {
                body: r.index()?,
                stiffness: vec3(&mut r)?,
                damping: vec3(&mut r)?,
            });
        }
        let mut sensor_frames = [[[0.0; 3]; 3]; N_SENSORS];
        for frame in &mut sensor_frames {
            for axis in frame.iter_mut() {
                *axis = vec3(&mut r)?;
            }
        }
        r.finish()?;
        let full_scale = match h.require("full_scale")? {
            "off" => None,
            v => Some(v.parse().map_err(|_| Error::Format("bad full_scale".into()))?),
        };
        let model = HandModel {
            archetype: h.parse("archetype")?,
            network: Network {
                bodies,
                links,
                ground_links,
                contacts: Vec::new(),
            },
            link_roles: roles,
            sensor_nodes: split_indices(h.require("sensor_nodes")?)?,
            sensor_frames,
            finger_tips: split_indices(h.require("finger_tips")?)?,
            pad: FingertipPad {
                stiffness: h.parse("pad_stiffness")?,
                damping: h.parse("pad_damping")?,
            },
            sensor: SensorSpec {
                sample_rate: h.parse("sample_rate")?,
                noise_std: h.parse("noise_std")?,
                full_scale,
            },
            internal_step: h.parse("internal_step")?,
            preset_version: h.parse("preset_version")?,
        };
        model.validate()?;
        Ok(model)
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn split_indices<const N: usize>(s: &str) -> Result<[usize; N]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Format(format!("bad index list {s:?}"))))
        .collect::<Result<_>>()?;
    v.try_into()
        .map_err(|_| Error::Format(format!("expected {N} indices in {s:?}")))
}

fn pair_of(m: &Manifest, key: &str) -> Result<[f64; 2]> {
    let v: Vec<f64> = m
        .require(key)?
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Format(format!("bad number in {key}"))))
        .collect::<Result<_>>()?;
    v.try_into()
        .map_err(|_| Error::Format(format!("{key} needs two values")))
}

fn vec3_of(m: &Manifest, key: &str) -> Result<Vec3> {
    let raw = m.require(key)?;
    let v: Vec<f64> = raw
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Format(format!("bad number in {key}"))))
        .collect::<Result<_>>()?;
    v.try_into()
        .map_err(|_| Error::Format(format!("{key} needs three values")))
}

/// Rest positions (m) and base masses (kg) of the 18 hand bodies.
fn layout() -> Vec<Body> {
    let b = |name: &str, mass: f64, rest: Vec3| Body {
        name: name.to_owned(),
        mass,
        rest,
    };
    let mut bodies = vec![
        b("tip_thumb", 0.014, [0.045, 0.085, -0.015]),
        b("tip_index", 0.010, [0.150, 0.040, 0.012]),
        b("tip_middle", 0.011, [0.160, 0.012, 0.012]),
        b("tip_ring", 0.009, [0.152, -0.014, 0.010]),
        b("tip_little", 0.007, [0.130, -0.040, 0.008]),
        b("prox_thumb", 0.024, [0.010, 0.050, -0.010]),
        b("prox_index", 0.020, [0.090, 0.032, 0.004]),
        b("prox_middle", 0.021, [0.095, 0.011, 0.004]),
        b("prox_ring", 0.018, [0.090, -0.011, 0.004]),
        b("prox_little", 0.014, [0.080, -0.031, 0.003]),
        b("palm", 0.120, [0.030, 0.000, 0.000]),
        b("wrist", 0.060, [-0.030, 0.000, 0.000]),
    ];
    let radius = 0.035;
    for k in 0..N_SENSORS {
        let theta = socket_angle(k);
        bodies.push(b(
            &format!("shell_{k}"),
            0.0,
            [-0.110, radius * theta.cos(), radius * theta.sin()],
        ));
    }
    bodies.push(b("socket_base", 0.0, [-0.220, 0.0, 0.0]));
    bodies
}

/// Angular position of sensor `k` around the forearm axis.
pub fn socket_angle(k: usize) -> f64 {
    std::f64::consts::TAU * k as f64 / N_SENSORS as f64 + std::f64::consts::FRAC_PI_2
}

fn sensor_frame(k: usize) -> [Vec3; 3] {
    let t = socket_angle(k);
    [
        [0.0, t.cos(), t.sin()],
        [0.0, -t.sin(), t.cos()],
        [1.0, 0.0, 0.0],
    ]
}

/// Parsed preset table.
#[derive(Debug, Clone)]
pub struct PresetTable {
    table: Manifest,
}

impl PresetTable {
    pub fn shipped() -> Self {
        Self::parse(PRESET_SOURCE).expect("shipped preset table parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table = Manifest::from_text(text)?;
        let version: u32 = table.parse("version")?;
        if version != PRESET_VERSION {
            return Err(Error::Version {
                found: version,
                expected: PRESET_VERSION,
            });
        }
        Ok(Self { table })
    }

    pub fn build(&self, archetype: HandArchetype) -> Result<HandModel> {
        let t = &self.table;
        let code = archetype.code();
        let hand = t.sub(code);
        let mass_scale: f64 = hand.parse("mass_scale")?;
        let hand_beta: f64 = hand.parse("damping_coeff")?;
        let socket_beta: f64 = t.parse("socket.damping_coeff")?;
        let pad = pair_of(&hand, "pad")?;

        let mut bodies = layout();
        for (i, body) in bodies.iter_mut().enumerate() {
            match i {
                i if i <= WRIST => body.mass *= mass_scale,
                SOCKET_BASE => body.mass = t.parse("socket.base_mass")?,
                _ => body.mass = t.parse("socket.shell_mass")?,
            }
        }

        let mut links = Vec::new();
        let mut roles = Vec::new();
        let mut push = |a: usize, b: usize, k: Vec3, beta: f64, role: LinkRole| {
            links.push(Link {
                a,
                b,
                stiffness: k,
                damping: k.map(|v| v * beta),
            });
            roles.push(role);
        };

        for f in Finger::ALL {
            let k = vec3_of(&hand, f.name())?;
            push(tip_body(f), proximal_body(f), k, hand_beta, LinkRole::Distal(f));
            push(proximal_body(f), PALM, k, hand_beta, LinkRole::Metacarpal(f));
        }
        let web = vec3_of(&hand, "web")?;
        for pair in [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little].windows(2) {
            push(proximal_body(pair[0]), proximal_body(pair[1]), web, hand_beta, LinkRole::Web);
        }
        push(proximal_body(Finger::Thumb), WRIST, vec3_of(&hand, "palm")?, hand_beta, LinkRole::Web);
        push(PALM, WRIST, vec3_of(&hand, "wrist")?, hand_beta, LinkRole::Wrist);

        let attach = vec3_of(t, "socket.attach")?;
        let attach_scale: Vec<f64> = t
            .require("socket.attach_scale")?
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| Error::Format("bad socket.attach_scale".into())))
            .collect::<Result<_>>()?;
        if attach_scale.len() != N_SENSORS {
            return Err(Error::Format("socket.attach_scale needs five values".into()));
        }
        let ring = vec3_of(t, "socket.ring")?;
        let base = vec3_of(t, "socket.base_link")?;
        for k in 0..N_SENSORS {
            let s = attach_scale[k];
            push(WRIST, shell_body(k), attach.map(|v| v * s), socket_beta, LinkRole::Socket);
            push(shell_body(k), shell_body((k + 1) % N_SENSORS), ring, socket_beta, LinkRole::Socket);
            push(shell_body(k), SOCKET_BASE, base, socket_beta, LinkRole::Socket);
        }

        let susp_damping: f64 = t.parse("suspension.damping")?;
        let ground_links = vec![
            GroundLink {
                body: SOCKET_BASE,
                stiffness: vec3_of(t, "suspension.base")?,
                damping: [susp_damping; 3],
            },
            GroundLink {
                body: WRIST,
                stiffness: vec3_of(t, "suspension.wrist")?,
                damping: [susp_damping; 3],
            },
        ];

        let model = HandModel {
            archetype,
            network: Network {
                bodies,
                links,
                ground_links,
                contacts: Vec::new(),
            },
            link_roles: roles,
            sensor_nodes: std::array::from_fn(shell_body),
            sensor_frames: std::array::from_fn(sensor_frame),
            finger_tips: Finger::ALL.map(tip_body),
            pad: FingertipPad {
                stiffness: pad[0],
                damping: pad[1],
            },
            sensor: SensorSpec::default(),
            internal_step: DEFAULT_INTERNAL_STEP,
            preset_version: PRESET_VERSION,
        };
        model.validate()?;
        Ok(model)
    }
}

/// The shipped calibrated preset for `archetype`.
pub fn build_hand_model(archetype: HandArchetype) -> HandModel {
    PresetTable::shipped()
        .build(archetype)
        .expect("shipped presets are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archetype_parsing() {
        assert_eq!("vp".parse::<HandArchetype>().unwrap(), HandArchetype::Vp);
        assert_eq!("SoftHand".parse::<HandArchetype>().unwrap(), HandArchetype::Sh);
        assert_eq!("ilimb".parse::<HandArchetype>().unwrap(), HandArchetype::Il);
        assert!("XX".parse::<HandArchetype>().is_err());
    }

    #[test]
    fn every_preset_has_eighteen_connected_bodies() {
        for a in HandArchetype::ALL {
            let m = build_hand_model(a);
            assert_eq!(m.network.n_bodies(), N_HAND_BODIES);
            m.validate().unwrap();
        }
    }

    #[test]
    fn vp_index_stiffer_than_ring() {
        let m = build_hand_model(HandArchetype::Vp);
        assert!(m.impact_axis_stiffness(Finger::Index) > m.impact_axis_stiffness(Finger::Ring));
    }

    #[test]
    fn il_thumb_stiffer_than_index() {
        let m = build_hand_model(HandArchetype::Il);
        assert!(m.impact_axis_stiffness(Finger::Thumb) > m.impact_axis_stiffness(Finger::Index));
    }

    #[test]
    fn sh_wrist_softer_than_ch() {
        let sh = build_hand_model(HandArchetype::Sh).wrist_stiffness();
        let ch = build_hand_model(HandArchetype::Ch).wrist_stiffness();
        assert!((0..3).all(|i| sh[i] < ch[i]));
    }

    #[test]
    fn ch_joints_uniformly_stiff() {
        let m = build_hand_model(HandArchetype::Ch);
        let ks: Vec<f64> = Finger::ALL.iter().map(|&f| m.impact_axis_stiffness(f)).collect();
        let (lo, hi) = ks.iter().fold((f64::MAX, 0.0f64), |(l, h), &k| (l.min(k), h.max(k)));
        assert!(hi / lo < 1.5);
        let sh = build_hand_model(HandArchetype::Sh);
        assert!(Finger::ALL.iter().all(|&f| sh.impact_axis_stiffness(f) < lo));
    }

    #[test]
    fn preset_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vp.svb");
        let m = build_hand_model(HandArchetype::Vp);
        m.save(&path).unwrap();
        assert_eq!(HandModel::load(&path).unwrap(), m);
    }

    #[test]
    fn wrong_preset_version_rejected() {
        let text = PRESET_SOURCE.replace("version=1", "version=2");
        assert!(matches!(PresetTable::parse(&text), Err(Error::Version { .. })));
    }
}

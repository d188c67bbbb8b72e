//! Lumped mass–spring–damper network and its fixed-step integrator.
//!
//! Bodies are point masses with three translational degrees of freedom,
//! tracked as displacements from their rest positions. Links are linear
//! spring-dampers whose stiffness and damping are diagonal in a link-local
//! frame (axial, lateral, normal), so geometry couples the world axes.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

const INSTABILITY_LIMIT: f64 = 1e9;

#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

#[inline]
fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Orthonormal (axial, lateral, normal) frame for a link from `a` to `b`.
/// The normal axis is world z made perpendicular to the link; for links
/// parallel to z, world x is used instead.
pub fn link_frame(a: Vec3, b: Vec3) -> [Vec3; 3] {
    let axial = normalize(sub(b, a));
    let reference = if dot(axial, [0.0, 0.0, 1.0]).abs() > 0.95 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let normal = normalize(sub(reference, scale(axial, dot(reference, axial))));
    let lateral = cross(normal, axial);
    [axial, lateral, normal]
}

/// Σ_i coeff_i · e_i e_iᵀ
fn frame_tensor(frame: &[Vec3; 3], coeffs: Vec3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for (e, c) in frame.iter().zip(coeffs) {
        for r in 0..3 {
            for col in 0..3 {
                m[r][col] += c * e[r] * e[col];
            }
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    pub mass: f64,
    pub rest: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// (axial, lateral, normal) stiffness, N/m.
    pub stiffness: Vec3,
    /// (axial, lateral, normal) damping, N·s/m.
    pub damping: Vec3,
}

/// Spring-damper from a body to a fixed anchor at its rest position,
/// diagonal in world axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundLink {
    pub body: usize,
    pub stiffness: Vec3,
    pub damping: Vec3,
}

/// One-sided contact between `striker` and `target` along `direction`.
/// Penetration is `(x_striker - x_target)·direction - gap`; the contact
/// pushes only, never pulls.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub striker: usize,
    pub target: usize,
    pub direction: Vec3,
    pub gap: f64,
    pub stiffness: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub bodies: Vec<Body>,
    pub links: Vec<Link>,
    pub ground_links: Vec<GroundLink>,
    pub contacts: Vec<Contact>,
}

impl Network {
    pub fn n_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.bodies.len();
        if n == 0 {
            return Err(Error::InvalidModel("network has no bodies".into()));
        }
        for b in &self.bodies {
            if !(b.mass > 0.0) || !b.mass.is_finite() {
                return Err(Error::InvalidModel(format!("body {} has mass {}", b.name, b.mass)));
            }
        }
        let bad = |v: &Vec3| v.iter().any(|x| !(*x >= 0.0) || !x.is_finite());
        for l in &self.links {
            if l.a >= n || l.b >= n || l.a == l.b {
                return Err(Error::InvalidModel(format!("link {}-{} has bad endpoints", l.a, l.b)));
            }
            if bad(&l.stiffness) || bad(&l.damping) {
                return Err(Error::InvalidModel(format!("link {}-{} has negative coefficients", l.a, l.b)));
            }
            if norm(sub(self.bodies[l.b].rest, self.bodies[l.a].rest)) == 0.0 {
                return Err(Error::InvalidModel(format!("link {}-{} has zero length", l.a, l.b)));
            }
        }
        for g in &self.ground_links {
            if g.body >= n || bad(&g.stiffness) || bad(&g.damping) {
                return Err(Error::InvalidModel(format!("bad ground link on body {}", g.body)));
            }
        }
        for c in &self.contacts {
            if c.striker >= n || c.target >= n || c.striker == c.target {
                return Err(Error::InvalidModel("bad contact endpoints".into()));
            }
            if !(c.stiffness >= 0.0) || !(c.damping >= 0.0) {
                return Err(Error::InvalidModel("negative contact coefficients".into()));
            }
        }
        Ok(())
    }

    /// True when links (not ground links or contacts) join every body in `subset`.
    pub fn is_connected(&self, subset: &[usize]) -> bool {
        let n = self.bodies.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for l in &self.links {
            let (ra, rb) = (find(&mut parent, l.a), find(&mut parent, l.b));
            parent[ra] = rb;
        }
        match subset.first() {
            None => true,
            Some(&first) => {
                let root = find(&mut parent, first);
                subset.iter().all(|&i| find(&mut parent, i) == root)
            }
        }
    }

    fn assemble_stiffness(&self) -> DMatrix<f64> {
        let n = self.bodies.len() * 3;
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut stamp = |i: usize, j: usize, m: &Mat3| {
            for r in 0..3 {
                for c in 0..3 {
                    k[(3 * i + r, 3 * i + c)] += m[r][c];
                    k[(3 * j + r, 3 * j + c)] += m[r][c];
                    k[(3 * i + r, 3 * j + c)] -= m[r][c];
                    k[(3 * j + r, 3 * i + c)] -= m[r][c];
                }
            }
        };
        for l in &self.links {
            let frame = link_frame(self.bodies[l.a].rest, self.bodies[l.b].rest);
            stamp(l.a, l.b, &frame_tensor(&frame, l.stiffness));
        }
        for c in &self.contacts {
            let d = normalize(c.direction);
            let m: Mat3 = std::array::from_fn(|r| std::array::from_fn(|col| c.stiffness * d[r] * d[col]));
            stamp(c.striker, c.target, &m);
        }
        for g in &self.ground_links {
            for r in 0..3 {
                k[(3 * g.body + r, 3 * g.body + r)] += g.stiffness[r];
            }
        }
        k
    }

    /// Highest undamped natural frequency (rad/s) with every contact closed.
    pub fn max_angular_frequency(&self) -> f64 {
        let k = self.assemble_stiffness();
        let n = k.nrows();
        let inv_sqrt_m: Vec<f64> = self
            .bodies
            .iter()
            .flat_map(|b| [1.0 / b.mass.sqrt(); 3])
            .collect();
        let a = DMatrix::from_fn(n, n, |r, c| k[(r, c)] * inv_sqrt_m[r] * inv_sqrt_m[c]);
        let eig = SymmetricEigen::new(a);
        eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
struct CompiledLink {
    a: usize,
    b: usize,
    k: Mat3,
    c: Mat3,
}

/// Fixed-step semi-implicit (symplectic) Euler:
///
/// ```text
/// a_n       = F(x_n, v_{n-1/2}) / m
/// v_{n+1/2} = v_{n-1/2} + dt a_n
/// x_{n+1}   = x_n + dt v_{n+1/2}
/// ```
///
/// Velocities are kept half a step behind positions; construction applies a
/// backward half kick so the scheme coincides with leapfrog, which keeps the
/// phase of an undamped oscillator second-order accurate.
pub struct Integrator<'a> {
    net: &'a Network,
    links: Vec<CompiledLink>,
    dt: f64,
    x: Vec<Vec3>,
    v: Vec<Vec3>,
    acc: Vec<Vec3>,
    contact_force: Vec<f64>,
    steps: u64,
}

impl<'a> Integrator<'a> {
    pub fn new(net: &'a Network, dt: f64, x0: Vec<Vec3>, v0: Vec<Vec3>) -> Result<Self> {
        net.validate()?;
        let n = net.n_bodies();
        if x0.len() != n || v0.len() != n {
            return Err(Error::Shape(format!("initial state for {} bodies, network has {n}", x0.len())));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("internal step must be positive, got {dt}")));
        }
        let links = net
            .links
            .iter()
            .map(|l| {
                let frame = link_frame(net.bodies[l.a].rest, net.bodies[l.b].rest);
                CompiledLink {
                    a: l.a,
                    b: l.b,
                    k: frame_tensor(&frame, l.stiffness),
                    c: frame_tensor(&frame, l.damping),
                }
            })
            .collect();
        let mut it = Self {
            net,
            links,
            dt,
            x: x0,
            v: v0,
            acc: vec![[0.0; 3]; n],
            contact_force: vec![0.0; net.contacts.len()],
            steps: 0,
        };
        it.evaluate();
        for i in 0..n {
            it.v[i] = sub(it.v[i], scale(it.acc[i], 0.5 * dt));
        }
        it.evaluate();
        Ok(it)
    }

    /// Starts every body at rest in its rest position.
    pub fn at_rest(net: &'a Network, dt: f64) -> Result<Self> {
        let n = net.n_bodies();
        Self::new(net, dt, vec![[0.0; 3]; n], vec![[0.0; 3]; n])
    }

    fn penetration(&self, c: &Contact) -> (f64, f64) {
        let d = normalize(c.direction);
        let delta = dot(sub(self.x[c.striker], self.x[c.target]), d) - c.gap;
        let rate = dot(sub(self.v[c.striker], self.v[c.target]), d);
        (delta, rate)
    }

    /// Recomputes accelerations (and contact forces) at the current state.
    fn evaluate(&mut self) {
        let net = self.net;
        for f in self.acc.iter_mut() {
            *f = [0.0; 3];
        }
        for l in &self.links {
            let dx = sub(self.x[l.b], self.x[l.a]);
            let dv = sub(self.v[l.b], self.v[l.a]);
            let f = add(mat_vec(&l.k, dx), mat_vec(&l.c, dv));
            self.acc[l.a] = add(self.acc[l.a], f);
            self.acc[l.b] = sub(self.acc[l.b], f);
        }
        for g in &net.ground_links {
            let (x, v) = (self.x[g.body], self.v[g.body]);
            let f: Vec3 = std::array::from_fn(|r| -g.stiffness[r] * x[r] - g.damping[r] * v[r]);
            self.acc[g.body] = add(self.acc[g.body], f);
        }
        for (ci, c) in net.contacts.iter().enumerate() {
            let (delta, rate) = self.penetration(c);
            let f = if delta > 0.0 {
                (c.stiffness * delta + c.damping * rate).max(0.0)
            } else {
                0.0
            };
            self.contact_force[ci] = f;
            if f > 0.0 {
                let d = normalize(c.direction);
                self.acc[c.target] = add(self.acc[c.target], scale(d, f));
                self.acc[c.striker] = sub(self.acc[c.striker], scale(d, f));
            }
        }
        for (a, b) in self.acc.iter_mut().zip(&net.bodies) {
            *a = scale(*a, 1.0 / b.mass);
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        for i in 0..self.x.len() {
            self.v[i] = add(self.v[i], scale(self.acc[i], dt));
            self.x[i] = add(self.x[i], scale(self.v[i], dt));
        }
        self.steps += 1;
        self.evaluate();
        let worst = self
            .x
            .iter()
            .chain(&self.v)
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, &s| if s.is_finite() { m.max(s.abs()) } else { f64::INFINITY });
        if worst > INSTABILITY_LIMIT {
            return Err(Error::Unstable {
                time: self.time(),
                magnitude: worst,
            });
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn displacement(&self, body: usize) -> Vec3 {
        self.x[body]
    }

    /// Acceleration at the current time step.
    pub fn acceleration(&self, body: usize) -> Vec3 {
        self.acc[body]
    }

    /// Velocity synchronized with positions (mean of the two staggered half-step velocities).
    pub fn velocity(&self, body: usize) -> Vec3 {
        add(self.v[body], scale(self.acc[body], 0.5 * self.dt))
    }

    /// Current compressive force of contact `i` (N).
    pub fn contact_force(&self, i: usize) -> f64 {
        self.contact_force[i]
    }

    pub fn in_contact(&self) -> bool {
        self.net.contacts.iter().any(|c| self.penetration(c).0 > 0.0)
    }

    /// Kinetic plus elastic energy (links, ground links and closed contacts), J.
    pub fn mechanical_energy(&self) -> f64 {
        let net = self.net;
        let kinetic: f64 = net
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let v = self.velocity(i);
                0.5 * b.mass * dot(v, v)
            })
            .sum();
        let links: f64 = self
            .links
            .iter()
            .map(|l| {
                let d = sub(self.x[l.b], self.x[l.a]);
                0.5 * dot(d, mat_vec(&l.k, d))
            })
            .sum();
        let ground: f64 = net
            .ground_links
            .iter()
            .map(|g| {
                let x = self.x[g.body];
                0.5 * (0..3).map(|r| g.stiffness[r] * x[r] * x[r]).sum::<f64>()
            })
            .sum();
        let contact: f64 = net
            .contacts
            .iter()
            .map(|c| {
                let (delta, _) = self.penetration(c);
                if delta > 0.0 {
                    0.5 * c.stiffness * delta * delta
                } else {
                    0.0
                }
            })
            .sum();
        kinetic + links + ground + contact
    }
}

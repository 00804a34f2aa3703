//! Articulated planar rigid-body dynamics with penalty contact.
//!
//! Equations of motion are assembled per substep in generalized coordinates
//! `q = [x, z, pitch, joints...]`: `M(q) q'' = tau + sum J^T (F - m a_bias)`,
//! where `a_bias` is the centre-of-mass acceleration at zero `q''`. In the plane
//! all angular velocity products vanish from the rotational part, so only the
//! centripetal translation terms appear.
//!
//! Integration is semi-implicit Euler with staggered velocities: the first
//! substep after a state is (re)initialised applies half a velocity kick, which
//! makes positions exact under constant acceleration (leapfrog start-up).

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::model::RobotModel;
use crate::error::{Error, Result};

pub const MAX_DOF: usize = 11;
const MAX_BODIES: usize = 9;
const JOINT_LIMIT_STIFFNESS: f64 = 200.0;
const JOINT_LIMIT_DAMPING: f64 = 5.0;
const BLOWUP_VELOCITY: f64 = 1.0e3;
const BLOWUP_POSITION: f64 = 1.0e4;

type Vec2 = [f64; 2];

#[inline]
fn rot(phi: f64, v: Vec2) -> Vec2 {
    let (s, c) = phi.sin_cos();
    [v[0] * c + v[1] * s, -v[0] * s + v[1] * c]
}

/// Velocity contribution `omega x r` for a rotation about +y, in (x, z).
#[inline]
fn cross(omega: f64, r: Vec2) -> Vec2 {
    [omega * r[1], -omega * r[0]]
}

#[derive(Debug, Clone)]
struct Body {
    parent: Option<usize>,
    /// Coordinate driving this body's joint (2 for the torso pitch).
    coord: usize,
    /// Joint location in the parent frame.
    offset: Vec2,
    com: Vec2,
    mass: f64,
    inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactKind {
    Heel(usize),
    Toe(usize),
    Knee(usize),
    Hip,
    Head,
}

impl ContactKind {
    pub fn foot(&self) -> Option<usize> {
        match self {
            ContactKind::Heel(f) | ContactKind::Toe(f) => Some(*f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct ContactPoint {
    body: usize,
    local: Vec2,
    kind: ContactKind,
}

/// Force applied at a point fixed to a body, world frame (x, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalForce {
    pub body: usize,
    pub local: Vec2,
    pub force: Vec2,
}

pub const TORSO: usize = 0;

/// Contact force at one point after the last substep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactForce {
    pub kind: ContactKind,
    pub normal: f64,
    pub tangential: f64,
    /// Coulomb coefficient in effect.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    /// Stick anchor (world x) per contact point while it is penetrating.
    pub anchors: Vec<Option<f64>>,
    pub time: f64,
    pub step: u64,
    /// Running sum of `max(0, tau * qdot) * dt` over actuators, J.
    pub positive_work: f64,
    /// Running sum of `tau * qdot * dt`, J.
    pub actuator_work: f64,
    /// Set whenever velocities were assigned externally; the next substep applies a half kick.
    #[serde(default)]
    pub half_kick_pending: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub kinetic: f64,
    pub potential: f64,
    /// Contact and joint-limit springs.
    pub elastic: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.elastic
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BodyKin {
    phi: f64,
    omega: f64,
    pos: Vec2,
    vel: Vec2,
    abias: Vec2,
}

/// Per-joint servo parameters after randomization.
#[derive(Debug, Clone, PartialEq)]
pub struct Servo {
    pub kp: f64,
    pub kd: f64,
    pub t_max: f64,
    pub lower: f64,
    pub upper: f64,
    pub armature: f64,
}

/// Scale factors drawn by domain randomization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsScales {
    /// One per body, in body order.
    pub mass: Vec<f64>,
    pub friction: f64,
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
}

impl PhysicsScales {
    pub fn unit(model: &RobotModel) -> Self {
        let nb = if model.has_arms() { 9 } else { 7 };
        let na = model.num_actuators();
        Self {
            mass: vec![1.0; nb],
            friction: 1.0,
            kp: vec![1.0; na],
            kd: vec![1.0; na],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dynamics {
    n: usize,
    nact: usize,
    bodies: Vec<Body>,
    /// Rotational coordinates (pitch and joints) that move each body.
    chains: Vec<Vec<usize>>,
    contacts: Vec<ContactPoint>,
    servos: Vec<Servo>,
    gravity: f64,
    dt: f64,
    k_n: f64,
    c_n: f64,
    k_t: f64,
    c_t: f64,
    mu: f64,
    kin: [BodyKin; MAX_BODIES],
    pivots: [Vec2; MAX_DOF],
    last_contacts: Vec<ContactForce>,
    last_torque: Vec<f64>,
}

impl Dynamics {
    pub fn new(model: &RobotModel, cfg: &SimConfig, scales: &PhysicsScales) -> Self {
        let nact = model.num_actuators();
        let n = 3 + nact;
        let mut bodies = Vec::new();
        bodies.push(Body {
            parent: None,
            coord: 2,
            offset: [0.0, 0.0],
            com: [0.0, model.torso.com],
            mass: model.torso.mass,
            inertia: model.torso.inertia,
        });
        for leg in 0..2 {
            let base = 3 + 3 * leg;
            let thigh = bodies.len();
            bodies.push(Body {
                parent: Some(TORSO),
                coord: base,
                offset: [0.0, 0.0],
                com: [0.0, -model.thigh.com],
                mass: model.thigh.mass,
                inertia: model.thigh.inertia,
            });
            bodies.push(Body {
                parent: Some(thigh),
                coord: base + 1,
                offset: [0.0, -model.thigh.length],
                com: [0.0, -model.shank.com],
                mass: model.shank.mass,
                inertia: model.shank.inertia,
            });
            bodies.push(Body {
                parent: Some(thigh + 1),
                coord: base + 2,
                offset: [0.0, -model.shank.length],
                com: model.foot.com,
                mass: model.foot.mass,
                inertia: model.foot.inertia,
            });
        }
        if let Some(arm) = &model.arms {
            for side in 0..2 {
                bodies.push(Body {
                    parent: Some(TORSO),
                    coord: 9 + side,
                    offset: [0.0, arm.shoulder_height],
                    com: [0.0, -arm.link.com],
                    mass: arm.link.mass,
                    inertia: arm.link.inertia,
                });
            }
        }
        for (b, s) in bodies.iter_mut().zip(&scales.mass) {
            b.mass *= s;
            b.inertia *= s;
        }
        let mut chains: Vec<Vec<usize>> = Vec::with_capacity(bodies.len());
        for b in 0..bodies.len() {
            let mut chain = match bodies[b].parent {
                Some(p) => chains[p].clone(),
                None => Vec::new(),
            };
            chain.push(bodies[b].coord);
            chains.push(chain);
        }
        let fh = model.foot.ankle_height;
        let mut contacts = Vec::new();
        for leg in 0..2 {
            let foot = 3 + 3 * leg;
            contacts.push(ContactPoint {
                body: foot,
                local: [-model.foot.heel, -fh],
                kind: ContactKind::Heel(leg),
            });
            contacts.push(ContactPoint {
                body: foot,
                local: [model.foot.toe, -fh],
                kind: ContactKind::Toe(leg),
            });
        }
        for leg in 0..2 {
            contacts.push(ContactPoint {
                body: 2 + 3 * leg,
                local: [0.0, 0.0],
                kind: ContactKind::Knee(leg),
            });
        }
        contacts.push(ContactPoint {
            body: TORSO,
            local: [0.0, 0.0],
            kind: ContactKind::Hip,
        });
        contacts.push(ContactPoint {
            body: TORSO,
            local: [0.0, model.torso.length],
            kind: ContactKind::Head,
        });

        let servos = (0..nact)
            .map(|i| {
                let j = model.joint(i);
                Servo {
                    kp: j.kp * scales.kp[i],
                    kd: j.kd * scales.kd[i],
                    t_max: j.t_max,
                    lower: j.lower,
                    upper: j.upper,
                    armature: j.armature,
                }
            })
            .collect();
        let nc = contacts.len();
        Self {
            n,
            nact,
            bodies,
            chains,
            contacts,
            servos,
            gravity: cfg.gravity,
            dt: cfg.physics_dt,
            k_n: cfg.contact.stiffness,
            c_n: cfg.contact.damping,
            k_t: cfg.contact.tangential_stiffness,
            c_t: cfg.contact.tangential_damping,
            mu: cfg.contact.friction * scales.friction,
            kin: [BodyKin::default(); MAX_BODIES],
            pivots: [[0.0; 2]; MAX_DOF],
            last_contacts: vec![
                ContactForce {
                    kind: ContactKind::Hip,
                    normal: 0.0,
                    tangential: 0.0,
                    mu: 0.0
                };
                nc
            ],
            last_torque: vec![0.0; nact],
        }
    }

    pub fn num_dof(&self) -> usize {
        self.n
    }

    pub fn num_actuators(&self) -> usize {
        self.nact
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn servos(&self) -> &[Servo] {
        &self.servos
    }

    pub fn friction(&self) -> f64 {
        self.mu
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn num_contacts(&self) -> usize {
        self.contacts.len()
    }

    /// State at rest with the given joint angles, torso upright at the given pose.
    pub fn state_from_pose(&self, x: f64, z: f64, pitch: f64, joints: &[f64]) -> SimState {
        let mut q = vec![0.0; self.n];
        q[0] = x;
        q[1] = z;
        q[2] = pitch;
        q[3..].copy_from_slice(&joints[..self.nact]);
        SimState {
            q,
            qd: vec![0.0; self.n],
            anchors: vec![None; self.contacts.len()],
            time: 0.0,
            step: 0,
            positive_work: 0.0,
            actuator_work: 0.0,
            half_kick_pending: true,
        }
    }

    fn kinematics(&mut self, q: &[f64], qd: &[f64]) {
        for b in 0..self.bodies.len() {
            let body = &self.bodies[b];
            let k = match body.parent {
                None => BodyKin {
                    phi: q[2],
                    omega: qd[2],
                    pos: [q[0], q[1]],
                    vel: [qd[0], qd[1]],
                    abias: [0.0, 0.0],
                },
                Some(p) => {
                    let pk = self.kin[p];
                    let r = rot(pk.phi, body.offset);
                    let w = cross(pk.omega, r);
                    let w2 = pk.omega * pk.omega;
                    BodyKin {
                        phi: pk.phi + q[body.coord],
                        omega: pk.omega + qd[body.coord],
                        pos: [pk.pos[0] + r[0], pk.pos[1] + r[1]],
                        vel: [pk.vel[0] + w[0], pk.vel[1] + w[1]],
                        abias: [pk.abias[0] - w2 * r[0], pk.abias[1] - w2 * r[1]],
                    }
                }
            };
            self.pivots[body.coord] = k.pos;
            self.kin[b] = k;
        }
    }

    /// World position, velocity and bias acceleration of a body-fixed point.
    #[inline]
    fn point(&self, body: usize, local: Vec2) -> (Vec2, Vec2, Vec2) {
        let k = &self.kin[body];
        let r = rot(k.phi, local);
        let w = cross(k.omega, r);
        let w2 = k.omega * k.omega;
        (
            [k.pos[0] + r[0], k.pos[1] + r[1]],
            [k.vel[0] + w[0], k.vel[1] + w[1]],
            [k.abias[0] - w2 * r[0], k.abias[1] - w2 * r[1]],
        )
    }

    /// Accumulate `J(p)^T F` into `g`.
    #[inline]
    fn apply_point_force(&self, g: &mut [f64; MAX_DOF], body: usize, p: Vec2, f: Vec2) {
        g[0] += f[0];
        g[1] += f[1];
        for &j in &self.chains[body] {
            let piv = self.pivots[j];
            g[j] += (p[1] - piv[1]) * f[0] - (p[0] - piv[0]) * f[1];
        }
    }

    fn mass_matrix(&self, m: &mut [[f64; MAX_DOF]; MAX_DOF], g: &mut [f64; MAX_DOF]) {
        for row in m.iter_mut().take(self.n) {
            row[..self.n].fill(0.0);
        }
        for (b, body) in self.bodies.iter().enumerate() {
            let (c, _, ab) = self.point(b, body.com);
            let chain = &self.chains[b];
            // Jacobian columns of the COM: translation coords then rotations
            let mut cols = [[0.0; 2]; 6];
            let mut idx = [0usize; 6];
            cols[0] = [1.0, 0.0];
            cols[1] = [0.0, 1.0];
            idx[0] = 0;
            idx[1] = 1;
            let mut len = 2;
            for &j in chain {
                let piv = self.pivots[j];
                cols[len] = [c[1] - piv[1], -(c[0] - piv[0])];
                idx[len] = j;
                len += 1;
            }
            for a in 0..len {
                for bb in 0..len {
                    let mut v = body.mass * (cols[a][0] * cols[bb][0] + cols[a][1] * cols[bb][1]);
                    if a >= 2 && bb >= 2 {
                        v += body.inertia;
                    }
                    m[idx[a]][idx[bb]] += v;
                }
            }
            let f = [-body.mass * ab[0], -body.mass * (ab[1] + self.gravity)];
            self.apply_point_force(g, b, c, f);
        }
        for (i, s) in self.servos.iter().enumerate() {
            m[3 + i][3 + i] += s.armature;
        }
    }

    /// PD torque for one actuator, saturated at its limit.
    pub fn pd_torque(servo: &Servo, setpoint: f64, q: f64, qd: f64) -> f64 {
        let target = setpoint.clamp(servo.lower, servo.upper);
        (servo.kp * (target - q) - servo.kd * qd).clamp(-servo.t_max, servo.t_max)
    }

    fn limit_torque(servo: &Servo, q: f64, qd: f64) -> f64 {
        if q < servo.lower {
            (JOINT_LIMIT_STIFFNESS * (servo.lower - q) - JOINT_LIMIT_DAMPING * qd).max(0.0)
        } else if q > servo.upper {
            (-JOINT_LIMIT_STIFFNESS * (q - servo.upper) - JOINT_LIMIT_DAMPING * qd).min(0.0)
        } else {
            0.0
        }
    }

    /// Advance one physics substep. `setpoints` are PD targets per actuator; `None`
    /// leaves the actuators limp (zero torque).
    pub fn step(
        &mut self,
        state: &mut SimState,
        setpoints: Option<&[f64]>,
        external: &[ExternalForce],
    ) -> Result<()> {
        let n = self.n;
        self.kinematics(&state.q, &state.qd);
        let mut m = [[0.0; MAX_DOF]; MAX_DOF];
        let mut g = [0.0; MAX_DOF];
        self.mass_matrix(&mut m, &mut g);

        for i in 0..self.nact {
            let j = 3 + i;
            let s = &self.servos[i];
            let tau = match setpoints {
                Some(sp) => Self::pd_torque(s, sp[i], state.q[j], state.qd[j]),
                None => 0.0,
            };
            self.last_torque[i] = tau;
            g[j] += tau + Self::limit_torque(s, state.q[j], state.qd[j]);
            let p = tau * state.qd[j] * self.dt;
            state.actuator_work += p;
            if p > 0.0 {
                state.positive_work += p;
            }
        }

        for ci in 0..self.contacts.len() {
            let cp = &self.contacts[ci];
            let (p, v, _) = self.point(cp.body, cp.local);
            let mut out = ContactForce {
                kind: cp.kind,
                normal: 0.0,
                tangential: 0.0,
                mu: self.mu,
            };
            if p[1] < 0.0 {
                let depth = -p[1];
                let fn_ = (self.k_n * depth - self.c_n * v[1]).max(0.0);
                let anchor = *state.anchors[ci].get_or_insert(p[0]);
                let mut ft = -self.k_t * (p[0] - anchor) - self.c_t * v[0];
                let limit = self.mu * fn_;
                if ft.abs() > limit {
                    ft = ft.clamp(-limit, limit);
                    state.anchors[ci] = Some(p[0] + ft / self.k_t);
                }
                out.normal = fn_;
                out.tangential = ft;
                self.apply_point_force(&mut g, cp.body, p, [ft, fn_]);
            } else {
                state.anchors[ci] = None;
            }
            self.last_contacts[ci] = out;
        }

        for e in external {
            let (p, _, _) = self.point(e.body, e.local);
            self.apply_point_force(&mut g, e.body, p, e.force);
        }

        let qdd = solve_spd(&mut m, &mut g, n).ok_or_else(|| Error::SimulationBlowup {
            step: state.step,
            detail: "mass matrix is not positive definite".into(),
        })?;
        let kick = if state.half_kick_pending {
            0.5 * self.dt
        } else {
            self.dt
        };
        state.half_kick_pending = false;
        for i in 0..n {
            state.qd[i] += kick * qdd[i];
            state.q[i] += self.dt * state.qd[i];
        }
        state.time += self.dt;
        state.step += 1;

        for i in 0..n {
            if !state.q[i].is_finite()
                || !state.qd[i].is_finite()
                || state.qd[i].abs() > BLOWUP_VELOCITY
                || state.q[i].abs() > BLOWUP_POSITION
            {
                return Err(Error::SimulationBlowup {
                    step: state.step,
                    detail: format!("coordinate {i}: q={} qd={}", state.q[i], state.qd[i]),
                });
            }
        }
        Ok(())
    }

    pub fn last_contacts(&self) -> &[ContactForce] {
        &self.last_contacts
    }

    pub fn last_torque(&self) -> &[f64] {
        &self.last_torque
    }

    /// Sole centre (x, z) and pitch of each foot.
    pub fn feet(&mut self, state: &SimState) -> [(Vec2, f64); 2] {
        self.kinematics(&state.q, &state.qd);
        let mut out = [([0.0; 2], 0.0); 2];
        for (leg, o) in out.iter_mut().enumerate() {
            let foot = 3 + 3 * leg;
            let (p, _, _) = self.point(foot, [self.sole_mid(leg), -self.sole_depth(leg)]);
            *o = (p, self.kin[foot].phi);
        }
        out
    }

    fn sole_depth(&self, leg: usize) -> f64 {
        -self.contacts[2 * leg].local[1]
    }

    fn sole_mid(&self, leg: usize) -> f64 {
        0.5 * (self.contacts[2 * leg].local[0] + self.contacts[2 * leg + 1].local[0])
    }

    /// A foot is in contact while its heel or toe penetrates the ground.
    pub fn foot_contact(&mut self, state: &SimState) -> [bool; 2] {
        self.kinematics(&state.q, &state.qd);
        let mut c = [false; 2];
        for cp in &self.contacts {
            if let Some(f) = cp.kind.foot() {
                let (p, _, _) = self.point(cp.body, cp.local);
                if p[1] < 0.0 {
                    c[f] = true;
                }
            }
        }
        c
    }

    /// Lowest contact-point height, m.
    pub fn lowest_point(&mut self, state: &SimState) -> f64 {
        self.kinematics(&state.q, &state.qd);
        self.contacts
            .iter()
            .map(|cp| self.point(cp.body, cp.local).0[1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn linear_momentum(&mut self, state: &SimState) -> Vec2 {
        self.kinematics(&state.q, &state.qd);
        let mut p = [0.0; 2];
        for (b, body) in self.bodies.iter().enumerate() {
            let (_, v, _) = self.point(b, body.com);
            p[0] += body.mass * v[0];
            p[1] += body.mass * v[1];
        }
        p
    }

    pub fn center_of_mass(&mut self, state: &SimState) -> Vec2 {
        self.kinematics(&state.q, &state.qd);
        let mut c = [0.0; 2];
        let mut mass = 0.0;
        for (b, body) in self.bodies.iter().enumerate() {
            let (p, _, _) = self.point(b, body.com);
            c[0] += body.mass * p[0];
            c[1] += body.mass * p[1];
            mass += body.mass;
        }
        [c[0] / mass, c[1] / mass]
    }

    /// Mechanical energy including armature, contact and joint-limit springs.
    pub fn energy(&mut self, state: &SimState) -> Energy {
        self.kinematics(&state.q, &state.qd);
        let mut m = [[0.0; MAX_DOF]; MAX_DOF];
        let mut g = [0.0; MAX_DOF];
        self.mass_matrix(&mut m, &mut g);
        let mut ke = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                ke += 0.5 * state.qd[i] * m[i][j] * state.qd[j];
            }
        }
        let mut pe = 0.0;
        for (b, body) in self.bodies.iter().enumerate() {
            let (c, _, _) = self.point(b, body.com);
            pe += body.mass * self.gravity * c[1];
        }
        let mut el = 0.0;
        for (ci, cp) in self.contacts.iter().enumerate() {
            let (p, _, _) = self.point(cp.body, cp.local);
            if p[1] < 0.0 {
                el += 0.5 * self.k_n * p[1] * p[1];
                if let Some(a) = state.anchors[ci] {
                    let s = p[0] - a;
                    el += 0.5 * self.k_t * s * s;
                }
            }
        }
        for (i, s) in self.servos.iter().enumerate() {
            let q = state.q[3 + i];
            let over = if q < s.lower {
                s.lower - q
            } else if q > s.upper {
                q - s.upper
            } else {
                0.0
            };
            el += 0.5 * JOINT_LIMIT_STIFFNESS * over * over;
        }
        Energy {
            kinetic: ke,
            potential: pe,
            elastic: el,
        }
    }
}

/// In-place Cholesky solve of `M x = b` for the leading `n x n` block.
fn solve_spd(
    m: &mut [[f64; MAX_DOF]; MAX_DOF],
    b: &mut [f64; MAX_DOF],
    n: usize,
) -> Option<[f64; MAX_DOF]> {
    for j in 0..n {
        let mut d = m[j][j];
        for k in 0..j {
            d -= m[j][k] * m[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        m[j][j] = d;
        for i in (j + 1)..n {
            let mut s = m[i][j];
            for k in 0..j {
                s -= m[i][k] * m[j][k];
            }
            m[i][j] = s / d;
        }
    }
    let mut y = [0.0; MAX_DOF];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= m[i][k] * y[k];
        }
        y[i] = s / m[i][i];
    }
    let mut x = [0.0; MAX_DOF];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= m[k][i] * x[k];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(gravity: f64) -> (RobotModel, Dynamics, SimState) {
        let model = RobotModel::default();
        let cfg = SimConfig {
            gravity,
            ..SimConfig::default()
        };
        let dynamics = Dynamics::new(&model, &cfg, &PhysicsScales::unit(&model));
        let state = dynamics.state_from_pose(0.0, 2.0, 0.0, &model.nominal_pose());
        (model, dynamics, state)
    }

    #[test]
    fn spd_solver_matches_direct() {
        let mut m = [[0.0; MAX_DOF]; MAX_DOF];
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for i in 0..3 {
            m[i][..3].copy_from_slice(&a[i]);
        }
        let mut b = [0.0; MAX_DOF];
        b[..3].copy_from_slice(&[1.0, 2.0, 3.0]);
        let x = solve_spd(&mut m, &mut b, 3).unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn free_fall_with_held_joints_is_ballistic() {
        let (model, mut dynamics, mut state) = setup(9.81);
        let sp = model.nominal_pose();
        let z0 = dynamics.center_of_mass(&state)[1];
        let steps = 200;
        for _ in 0..steps {
            dynamics.step(&mut state, Some(&sp), &[]).unwrap();
        }
        let t = steps as f64 * dynamics.dt();
        let z = dynamics.center_of_mass(&state)[1];
        assert!((z - (z0 - 0.5 * 9.81 * t * t)).abs() < 1e-9);
    }

    fn momentum_drift(refine: f64) -> f64 {
        let model = RobotModel::default();
        let cfg = SimConfig {
            gravity: 0.0,
            physics_dt: 1.0 / 2000.0 / refine,
            ..SimConfig::default()
        };
        let mut d = Dynamics::new(&model, &cfg, &PhysicsScales::unit(&model));
        let mut s = d.state_from_pose(0.0, 2.0, 0.0, &model.nominal_pose());
        let mut sp = model.nominal_pose();
        sp[0] += 0.4;
        sp[4] += 0.3;
        for _ in 0..(400.0 * refine) as usize {
            d.step(&mut s, Some(&sp), &[]).unwrap();
        }
        let p = d.linear_momentum(&s);
        p[0].hypot(p[1])
    }

    #[test]
    fn zero_gravity_momentum_drift_is_first_order_in_dt() {
        // internal torques conserve momentum; the only drift is integrator error
        let e1 = momentum_drift(1.0);
        let e2 = momentum_drift(2.0);
        let e4 = momentum_drift(4.0);
        assert!(e1 < 5e-3, "{e1}");
        assert!(
            (e1 / e2 - 2.0).abs() < 0.05 && (e2 / e4 - 2.0).abs() < 0.05,
            "{e1} {e2} {e4}"
        );
    }

    #[test]
    fn pd_torque_zero_at_setpoint() {
        let s = Servo {
            kp: 100.0,
            kd: 5.0,
            t_max: 10.0,
            lower: -1.0,
            upper: 1.0,
            armature: 0.0,
        };
        assert_eq!(Dynamics::pd_torque(&s, 0.3, 0.3, 0.0), 0.0);
        assert_eq!(Dynamics::pd_torque(&s, 1.0, -1.0, 0.0), 10.0);
    }
}

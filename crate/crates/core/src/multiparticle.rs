//! Retarded particle-particle forces and coupled multiparticle stepping.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::{retarded_kernel, FieldParams, KernelTable, Method};
use crate::numerics::{bracketed_root, integrate_vec, QuadratureSpec};
use crate::par::Exec;
use crate::semiclassical::{
    heun_step, push_node, start_worldline, unit_velocity, ExternalPotential, ExtraForce, Formulation, IntegratorConfig, LocalDynamics,
    NodeState,
};
use crate::stochastic::{assemble, covariance_block, Kinematics, NoiseCovariance};
use crate::worldline::{mdot, FourVector, Jet, Worldline};

/// Crossing times closer than this many 1/Λ to the source's first event
/// use the regulated history integral.
pub const WAVEFRONT_WINDOW: f64 = 5.0;

/// Smallest invariant separation, in units of 1/Λ, accepted by the
/// closed-form pair force.
pub const COLLISION_GUARD: f64 = 10.0;

/// Where a source worldline crosses the past light cone of an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetardedEvent {
    pub tau: f64,
    /// Source jet at the crossing.
    pub source: Jet,
    /// Event minus source position; null.
    pub separation: FourVector,
    /// separation · ż_source; positive for a past crossing.
    pub denominator: f64,
}

fn spatial_norm(y: FourVector) -> f64 {
    (y[1] * y[1] + y[2] * y[2] + y[3] * y[3]).sqrt()
}

fn cone_gap(event: FourVector, z: FourVector) -> f64 {
    let y = event - z;
    y[0] - spatial_norm(y)
}

/// Past light-cone crossing of `source` as seen from `event`.
///
/// The bracketing interval is found from node signs alone, so history after
/// the interval containing the crossing is never read.
pub fn retarded_time(source: &Worldline, event: FourVector) -> Result<RetardedEvent> {
    let pos = source.positions();
    let tau = source.tau();
    let n = pos.len();
    if cone_gap(event, pos[0]) < 0.0 {
        return Err(Error::HistoryUnderflow { tau: source.start() });
    }
    if cone_gap(event, pos[n - 1]) > 0.0 {
        return Err(Error::NoIntersection);
    }
    // first node on or outside the past cone
    let k = pos.partition_point(|&z| cone_gap(event, z) > 0.0);
    let t = if cone_gap(event, pos[k]) == 0.0 {
        tau[k]
    } else {
        let f = |t: f64| source.interpolate(t).map(|j| cone_gap(event, j.pos())).unwrap_or(f64::NAN);
        let span = source.end() - source.start();
        bracketed_root(f, tau[k - 1], tau[k], 1e-12 * span.max(f64::MIN_POSITIVE))?
    };
    let jet = source.interpolate(t)?;
    let y = event - jet.pos();
    let scale = 1.0 + event.norm();
    if y[0] <= 1e-12 * scale {
        return Err(Error::CoincidentParticle);
    }
    Ok(RetardedEvent {
        tau: t,
        source: jet,
        separation: y,
        denominator: mdot(y, jet.vel()),
    })
}

/// d/dτ of y/(y·ż) along the source, which is the gradient of the
/// retarded time-integral weight.
fn cone_derivative(y: FourVector, v: FourVector, a: FourVector) -> FourVector {
    let rho = mdot(y, v);
    v * (-1.0 / rho) + y * ((1.0 - mdot(y, a)) / (rho * rho))
}

/// Retarded potential 1/(4πρ) and its gradient (raised) in the sharp limit.
fn closed_potential(ret: &RetardedEvent) -> (f64, FourVector) {
    let rho = ret.denominator;
    let d = cone_derivative(ret.separation, ret.source.vel(), ret.source.acc());
    let w = 1.0 / (4.0 * PI * rho);
    (w, d * w)
}

fn pair_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-15,
        rel_tol: 1e-11,
        max_subdivisions: 4000,
    }
}

/// Retarded potential ∫G dτ and its gradient with the regulated kernel,
/// integrating source history from its first event up to `t_star`.
fn regulated_potential(z: FourVector, source: &Worldline, t_star: f64, cutoff: f64) -> Result<(f64, FourVector)> {
    let z0 = source.positions()[0];
    let y0 = z - z0;
    let sigma0 = mdot(y0, y0);
    let rho0 = mdot(y0, source.velocities()[0]);
    let mut grad = y0 * (retarded_kernel(sigma0, y0[0], cutoff) / rho0);
    let mut value = 0.0;
    let start = source.start();
    if t_star <= start {
        return Ok((value, grad));
    }
    let integrand = |t: f64| {
        let jet = match source.interpolate(t) {
            Ok(j) => j,
            Err(_) => return [f64::NAN; 5],
        };
        let y = z - jet.pos();
        let g = retarded_kernel(mdot(y, y), y[0], cutoff);
        if g == 0.0 {
            return [0.0; 5];
        }
        let d = cone_derivative(y, jet.vel(), jet.acc()) * g;
        [g, d[0], d[1], d[2], d[3]]
    };
    // the kernel lives within Λ²σ ≲ 9 of the cone; march back from the
    // crossing in doubling panels until σ is past that
    let sigma_edge = 9.0 / (cutoff * cutoff);
    let rho = {
        let j = source.interpolate(t_star)?;
        mdot(z - j.pos(), j.vel()).max(1.0 / cutoff)
    };
    let mut width = 1.0 / (cutoff * cutoff * rho);
    let mut hi = t_star;
    loop {
        let lo = (hi - width).max(start);
        let part = integrate_vec(integrand, lo, hi, &pair_spec())?;
        if part.iter().any(|x| !x.is_finite()) {
            return Err(Error::HistoryUnderflow { tau: lo });
        }
        value += part[0];
        grad += FourVector::new(part[1], part[2], part[3], part[4]);
        let y = z - source.interpolate(lo)?.pos();
        if lo <= start || mdot(y, y) > sigma_edge {
            break;
        }
        hi = lo;
        width *= 2.0;
    }
    Ok((value, grad))
}

/// Retarded potential of a unit source at `z` and its raised gradient; zero
/// before the source's switch-on reaches `z`.
pub fn pair_potential(z: FourVector, source: &Worldline, cutoff: f64) -> Result<(f64, FourVector)> {
    let y0 = z - source.positions()[0];
    if !(y0[0] > 0.0) || mdot(y0, y0) < 0.0 {
        return Ok((0.0, FourVector::ZERO));
    }
    let ret = retarded_time(source, z)?;
    if ret.tau - source.start() <= WAVEFRONT_WINDOW / cutoff {
        return regulated_potential(z, source, ret.tau, cutoff);
    }
    check_separation(&ret, cutoff)?;
    Ok(closed_potential(&ret))
}

fn check_separation(ret: &RetardedEvent, cutoff: f64) -> Result<()> {
    let guard = COLLISION_GUARD / cutoff;
    if !(ret.denominator >= guard) {
        return Err(Error::NearCollision {
            separation: ret.denominator,
            guard,
        });
    }
    Ok(())
}

fn force_from_potential(acc: FourVector, vel: FourVector, value: f64, grad: FourVector, coupling: f64) -> FourVector {
    let perp = grad - vel * (mdot(vel, grad) / vel.square());
    (acc * value - perp) * coupling
}

/// Closed-form retarded pair force on `observer` from the source event
/// `ret`, scaled by the product of charges.
pub fn lw_force(observer: &Jet, ret: &RetardedEvent, coupling: f64, cutoff: f64) -> Result<FourVector> {
    check_separation(ret, cutoff)?;
    let (value, grad) = closed_potential(ret);
    Ok(force_from_potential(observer.acc(), observer.vel(), value, grad, coupling))
}

/// Directional derivative of the closed-form pair force along a fluctuation
/// (dz, dv) of the observer, holding its acceleration fixed.
pub fn linearized_pair_term(
    observer: &Jet,
    source: &Worldline,
    dz: FourVector,
    dv: FourVector,
    coupling: f64,
    cutoff: f64,
) -> Result<FourVector> {
    linearized_with_step(observer, source, dz, dv, coupling, cutoff, 1e-6)
}

fn linearized_with_step(
    observer: &Jet,
    source: &Worldline,
    dz: FourVector,
    dv: FourVector,
    coupling: f64,
    cutoff: f64,
    rel_step: f64,
) -> Result<FourVector> {
    let size = dz.norm().max(dv.norm());
    if size == 0.0 {
        return Ok(FourVector::ZERO);
    }
    let rho = retarded_time(source, observer.pos())?.denominator;
    let eps = rel_step * rho / size;
    let force = |sign: f64| -> Result<FourVector> {
        let jet = Jet::new(
            observer.pos() + dz * (sign * eps),
            observer.vel() + dv * (sign * eps),
            observer.acc(),
            observer.r,
        );
        lw_force(&jet, &retarded_time(source, jet.pos())?, coupling, cutoff)
    };
    Ok((force(1.0)? - force(-1.0)?) * (0.5 / eps))
}

/// Initial condition of one particle at the shared start time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleInit {
    pub position: FourVector,
    pub velocity: FourVector,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub label: usize,
    pub charge: f64,
    pub worldline: Worldline,
}

/// Worldlines of interacting particles sharing cutoff and bare mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub params: FieldParams,
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    /// Worldline CSV with a leading `particle` column.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("particle,tau,t,x,y,z,vt,vx,vy,vz\n");
        for p in &self.particles {
            p.worldline.write_rows(&mut s, Some(&p.label.to_string()));
        }
        s
    }
}

/// Sum of pair terms on particle `n` at (z, v) from every other history.
fn interaction(
    n: usize,
    z: FourVector,
    v: FourVector,
    charges: &[f64],
    histories: &[Worldline],
    cutoff: f64,
) -> Result<Option<ExtraForce>> {
    let mut extra: Option<ExtraForce> = None;
    for (m, w) in histories.iter().enumerate() {
        if m == n {
            continue;
        }
        let (value, grad) = pair_potential(z, w, cutoff)?;
        if value == 0.0 && grad == FourVector::ZERO {
            continue;
        }
        let coupling = charges[n] * charges[m];
        let e = extra.get_or_insert(ExtraForce {
            force: FourVector::ZERO,
            mass_shift: 0.0,
        });
        e.force += force_from_potential(FourVector::ZERO, v, value, grad, coupling);
        e.mass_shift += coupling * value;
    }
    Ok(extra)
}

/// Step all particles in their own proper time, always advancing the one
/// furthest behind in coordinate time (ties by index).
pub fn integrate_multiparticle(
    p: &FieldParams,
    init: &[ParticleInit],
    potential: &ExternalPotential,
    cfg: &IntegratorConfig,
    exec: Exec,
) -> Result<ParticleSet> {
    cfg.validate(p.cutoff)?;
    if init.is_empty() {
        return Err(Error::Config("particle set is empty".into()));
    }
    if cfg.formulation != Formulation::Local {
        return Err(Error::Config("multiparticle runs use the local formulation".into()));
    }
    let t0 = init[0].position[0];
    for (i, q) in init.iter().enumerate() {
        unit_velocity(q.velocity).map_err(|e| Error::Constraint(format!("particle {i}: {e}")))?;
        if q.position[0] != t0 {
            return Err(Error::Config(format!("particle {i} does not start at the shared time {t0}")));
        }
        if init[..i].iter().any(|o| o.position == q.position) {
            return Err(Error::CoincidentParticle);
        }
    }
    let params: Vec<FieldParams> = init.iter().map(|q| FieldParams { charge: q.charge, ..*p }).collect();
    let mut tables: BTreeMap<u64, KernelTable> = BTreeMap::new();
    for q in &params {
        if let std::collections::btree_map::Entry::Vacant(e) = tables.entry(q.charge.to_bits()) {
            e.insert(KernelTable::build(q, Method::ClosedForm, exec)?);
        }
    }
    let dynamics: Vec<LocalDynamics> = params
        .iter()
        .map(|q| LocalDynamics {
            params: q,
            table: &tables[&q.charge.to_bits()],
            potential,
            order: cfg.order,
        })
        .collect();
    let charges: Vec<f64> = init.iter().map(|q| q.charge).collect();

    let mut states = Vec::with_capacity(init.len());
    let mut histories = Vec::with_capacity(init.len());
    for (d, q) in dynamics.iter().zip(init) {
        let (a, j) = d.accel(0.0, q.position, q.velocity, None)?;
        let s = NodeState {
            z: q.position,
            v: q.velocity,
            a,
            j,
        };
        histories.push(start_worldline(&s)?);
        states.push(s);
    }
    let h = cfg.step;
    let mut done = vec![0usize; init.len()];
    loop {
        let next = (0..init.len())
            .filter(|&i| done[i] < cfg.steps)
            .min_by(|&i, &j| states[i].z[0].total_cmp(&states[j].z[0]).then(i.cmp(&j)));
        let Some(n) = next else { break };
        let r = done[n] as f64 * h;
        let hist = &histories;
        let cutoff = p.cutoff;
        let s = heun_step(&states[n], r, h, cfg.shell_projection, |rr, z, v| {
            let extra = if hist.len() > 1 {
                interaction(n, z, v, &charges, hist, cutoff)?
            } else {
                None
            };
            dynamics[n].accel(rr, z, v, extra)
        })?;
        done[n] += 1;
        push_node(&mut histories[n], done[n] as f64 * h, &s);
        states[n] = s;
    }
    let particles = histories
        .into_iter()
        .enumerate()
        .map(|(label, worldline)| Particle {
            label,
            charge: charges[label],
            worldline,
        })
        .collect();
    Ok(ParticleSet { params: *p, particles })
}

/// Noise covariance over (particle, node, component); blocks between
/// particles n and m carry q_n q_m ħ.
pub fn cross_noise_covariance(set: &ParticleSet, nodes: &[Vec<usize>], exec: Exec) -> Result<NoiseCovariance> {
    if nodes.len() != set.particles.len() {
        return Err(Error::Config("one node list per particle is required".into()));
    }
    let mut kin = Vec::new();
    let mut owner = Vec::new();
    let mut flat = Vec::new();
    let mut tau = Vec::new();
    for (n, (part, list)) in set.particles.iter().zip(nodes).enumerate() {
        let w = &part.worldline;
        if list.is_empty() || list.windows(2).any(|p| p[1] <= p[0]) || *list.last().unwrap() >= w.len() {
            return Err(Error::Config(format!(
                "node list of particle {n} must be increasing indices into its worldline"
            )));
        }
        for &i in list {
            kin.push(Kinematics::from(w.node(i)));
            owner.push(n);
            flat.push(i);
            tau.push(w.tau()[i]);
        }
    }
    let charges: Vec<f64> = set.particles.iter().map(|p| p.charge).collect();
    let (cutoff, hbar) = (set.params.cutoff, set.params.hbar);
    let (matrix, floor) = assemble(
        &kin,
        |j, k| covariance_block(&kin[j], &kin[k], cutoff, charges[owner[j]] * charges[owner[k]] * hbar, false),
        exec,
    );
    Ok(NoiseCovariance {
        matrix,
        particle: owner,
        nodes: flat,
        tau,
        velocities: kin.iter().map(|k| k.v).collect(),
        floor,
    })
}

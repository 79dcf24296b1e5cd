//! Mean-trajectory dynamics: the local radiation-reaction form with
//! time-dependent coefficients and the nonlocal history-integral form.
//!
//! Sign conventions: the potential gradient is a covariant vector and the
//! Newtonian force is its raised, velocity-projected form, so a linear
//! potential increasing along +x pushes toward −x.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{kernel_support, mass_curvature, mass_rate, retarded_kernel, retarded_kernel_sigma_deriv, FieldParams, KernelTable};
use crate::numerics::{integrate_vec, QuadratureSpec};
use crate::worldline::{contract, mdot, shell_project, FourVector, Jet, Worldline, DEFAULT_SHELL_TOL};

/// External scalar potential V(z).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ExternalPotential {
    #[default]
    None,
    /// V = ∂V·z with a constant covariant gradient.
    Linear { gradient: FourVector },
    /// V = k/2·|x − c|² in the spatial components.
    Harmonic { center: FourVector, stiffness: f64 },
}

impl ExternalPotential {
    pub fn value(&self, z: FourVector) -> f64 {
        match *self {
            ExternalPotential::None => 0.0,
            ExternalPotential::Linear { gradient } => contract(z, gradient),
            ExternalPotential::Harmonic { center, stiffness } => {
                let d = z - center;
                0.5 * stiffness * (d[1] * d[1] + d[2] * d[2] + d[3] * d[3])
            }
        }
    }

    /// Covariant gradient ∂_μV.
    pub fn gradient(&self, z: FourVector) -> FourVector {
        match *self {
            ExternalPotential::None => FourVector::ZERO,
            ExternalPotential::Linear { gradient } => gradient,
            ExternalPotential::Harmonic { center, stiffness } => {
                let d = z - center;
                FourVector::new(0.0, stiffness * d[1], stiffness * d[2], stiffness * d[3])
            }
        }
    }

    /// ∂_μ∂_νV. Both supported potentials have a constant Hessian.
    pub fn hessian(&self, _z: FourVector) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        if let ExternalPotential::Harmonic { stiffness, .. } = *self {
            for (i, row) in h.iter_mut().enumerate().skip(1) {
                row[i] = stiffness;
            }
        }
        h
    }

    /// Covariant H_μν x^ν.
    pub fn hessian_apply(&self, z: FourVector, x: FourVector) -> FourVector {
        let h = self.hessian(z);
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(&h) {
            *o = row.iter().zip(&x.0).map(|(a, b)| a * b).sum();
        }
        FourVector(out)
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ExternalPotential::None)
    }
}

/// Newtonian force of the potential, projected orthogonal to `v`.
pub fn potential_force(v: FourVector, gradient: FourVector) -> FourVector {
    gradient.raise() - v * contract(v, gradient)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Local,
    Nonlocal,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Local => "local",
            Formulation::Nonlocal => "nonlocal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub steps: usize,
    /// Highest expansion order kept in the local force (2 or 3).
    pub order: usize,
    /// Lookback of the history integral.
    pub window: f64,
    pub formulation: Formulation,
    pub shell_projection: bool,
}

impl IntegratorConfig {
    /// Largest admissible step in units of 1/Λ.
    pub const MAX_STEP: f64 = 0.05;

    /// Defaults for a given cutoff: step 0.02/Λ, window 8/Λ, order 2, local.
    pub fn for_cutoff(cutoff: f64, steps: usize) -> Self {
        IntegratorConfig {
            step: 0.02 / cutoff,
            steps,
            order: 2,
            window: 8.0 / cutoff,
            formulation: Formulation::Local,
            shell_projection: true,
        }
    }

    pub fn validate(&self, cutoff: f64) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        // small slack so that step = 0.05/Λ itself is accepted
        if self.step * cutoff > Self::MAX_STEP * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "step {} does not resolve the cutoff: step·Λ = {} > {}",
                self.step,
                self.step * cutoff,
                Self::MAX_STEP
            )));
        }
        if !(self.window > 0.0) {
            return Err(Error::Config(format!("history window must be positive, got {}", self.window)));
        }
        if !(2..=3).contains(&self.order) {
            return Err(Error::UnsupportedOrder(self.order));
        }
        Ok(())
    }
}

/// Structure multiplying the order-n coefficient in the local expansion.
///
/// n = 1: z̈; n = 2: ż z̈² + z⃛; n = 3: d⁴z + 3(z̈·z⃛)ż + (3/2)z̈² z̈.
pub fn u_term(n: usize, jet: &Jet) -> Result<FourVector> {
    let (v, a, j) = (jet.vel(), jet.acc(), jet.jerk());
    match n {
        1 => Ok(a),
        2 => Ok(v * a.square() + j),
        3 => Ok(jet.snap() + v * (3.0 * mdot(a, j)) + a * (1.5 * a.square())),
        _ => Err(Error::UnsupportedOrder(n)),
    }
}

/// Coefficient of u⁽²⁾ in the force, oriented so that it is positive at
/// late times.
pub fn dissipation_coefficient(g2: f64) -> f64 {
    -g2
}

/// Local radiation-reaction force e²(κ₂(r)u⁽²⁾ + g⁽³⁾(r)u⁽³⁾), truncated at
/// `order` and projected orthogonal to ż.
pub fn rr_force_local(jet: &Jet, p: &FieldParams, table: &KernelTable, order: usize) -> Result<FourVector> {
    if !(2..=3).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(jet.r >= 0.0) {
        return Err(Error::InvalidParameter(format!("elapsed time must be nonnegative, got {}", jet.r)));
    }
    let c = table.at(jet.r);
    let mut f = u_term(2, jet)? * dissipation_coefficient(c.g2);
    if order == 3 {
        f += u_term(3, jet)? * c.g3;
    }
    Ok((f * p.e2()).orthogonal_to(jet.vel()))
}

/// Order-4 structure of the local expansion, which needs the fifth
/// derivative `fifth` besides the jet:
/// −[d⁵z + (3z⃛² + 4z̈·d⁴z + 5z̈⁴)ż + 5z̈²z⃛ + 10(z̈·z⃛)z̈].
pub fn u4_term(jet: &Jet, fifth: FourVector) -> FourVector {
    let (v, a, j, q) = (jet.vel(), jet.acc(), jet.jerk(), jet.snap());
    let a2 = a.square();
    -(fifth + v * (3.0 * j.square() + 4.0 * mdot(a, q) + 5.0 * a2 * a2) + j * (5.0 * a2) + a * (10.0 * mdot(a, j)))
}

/// Bound on the error of the order-3 local force once the coefficients
/// have saturated: twice the first omitted term, e²|g⁽⁴⁾(∞)|·‖u⁽⁴⁾‖.
pub fn truncation_bound(jet: &Jet, fifth: FourVector, p: &FieldParams) -> Result<f64> {
    let g4 = crate::kernels::g_saturation(4, p.cutoff)?;
    Ok(2.0 * p.e2() * g4.abs() * u4_term(jet, fifth).norm())
}

fn history_spec(cutoff: f64) -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-14 * cutoff,
        rel_tol: 1e-12,
        max_subdivisions: 4000,
    }
}

/// Position at `t` using only nodes up to `last`; beyond that node the
/// stored jet is extended by its Taylor polynomial.
fn causal_position(w: &Worldline, last: usize, t: f64) -> Result<FourVector> {
    let tl = w.tau()[last];
    if t <= tl {
        return Ok(w.interpolate(t)?.pos());
    }
    let jet = w.node(last);
    let dt = t - tl;
    Ok(jet.pos() + jet.vel() * dt + jet.acc() * (0.5 * dt * dt) + jet.jerk() * (dt * dt * dt / 6.0))
}

/// The two pieces of the history integral at proper time `tau` for a
/// particle currently at `z` with velocity `v`:
/// Φ = ∫G(σ)ds and K = ∫−2G'(σ)y⊥ ds over the lag s.
pub(crate) fn history_terms(
    w: &Worldline,
    last: usize,
    tau: f64,
    z: FourVector,
    v: FourVector,
    p: &FieldParams,
    window: f64,
) -> Result<(f64, FourVector)> {
    let r = tau - w.start();
    let span = r.min(window).min(kernel_support(p.cutoff));
    if span <= 0.0 {
        return Ok((0.0, FourVector::ZERO));
    }
    let l = p.cutoff;
    let vv = v.square();
    let out = integrate_vec(
        |s| {
            let zp = match causal_position(w, last, tau - s) {
                Ok(x) => x,
                Err(_) => return [f64::NAN; 5],
            };
            let y = z - zp;
            let sigma = mdot(y, y);
            let g = retarded_kernel(sigma, s, l);
            let dg = retarded_kernel_sigma_deriv(sigma, s, l);
            let yp = y - v * (mdot(v, y) / vv);
            let k = yp * (-2.0 * dg);
            [g, k[0], k[1], k[2], k[3]]
        },
        0.0,
        span,
        &history_spec(l),
    )?;
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::HistoryUnderflow { tau: tau - span });
    }
    Ok((out[0], FourVector::new(out[1], out[2], out[3], out[4])))
}

/// Radiation-reaction force from the regulated history integral,
/// e²∫(z̈G + ż^ν ż_[μ ∂_ν] G)dτ′, using only history at or before `tau`.
pub fn rr_force_history(w: &Worldline, tau: f64, p: &FieldParams, window: f64) -> Result<FourVector> {
    if !(tau >= w.start()) || !(tau <= w.end()) {
        return Err(Error::HistoryUnderflow { tau });
    }
    if !(window > 0.0) {
        return Err(Error::InvalidParameter(format!("history window must be positive, got {window}")));
    }
    let last = w.tau().partition_point(|&t| t <= tau) - 1;
    let node = w.node(last);
    let dt = tau - w.tau()[last];
    let (z, v, a) = if dt == 0.0 {
        (node.pos(), node.vel(), node.acc())
    } else {
        (
            causal_position(w, last, tau)?,
            node.vel() + node.acc() * dt + node.jerk() * (0.5 * dt * dt),
            node.acc() + node.jerk() * dt,
        )
    };
    let (phi, k) = history_terms(w, last, tau, z, v, p, window)?;
    Ok((a * phi + k) * p.e2())
}

pub(crate) fn unit_velocity(v0: FourVector) -> Result<()> {
    if !v0.is_finite() || (v0.square() - 1.0).abs() > DEFAULT_SHELL_TOL || !(v0.t() > 0.0) {
        return Err(Error::Constraint(format!(
            "initial velocity {:?} is not unit future-timelike (v² = {})",
            v0.0,
            v0.square()
        )));
    }
    Ok(())
}

/// Initial derivatives from the Newtonian equation m z̈ = F(z, ż) and its
/// proper-time derivatives, up to `order` (2..=4).
pub fn initial_jets(potential: &ExternalPotential, z0: FourVector, v0: FourVector, m: f64, order: usize) -> Result<Jet> {
    unit_velocity(v0)?;
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {m}")));
    }
    if !(2..=4).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let g = potential.gradient(z0);
    let a = potential_force(v0, g) * (1.0 / m);
    let mut jet = Jet::new(z0, v0, a, 0.0);
    if order >= 3 {
        let d = force_derivatives(potential, z0, v0, a, None);
        jet = jet.with_jerk(d.first * (1.0 / m));
        if order == 4 {
            let d = force_derivatives(potential, z0, v0, a, Some(jet.jerk()));
            jet = jet.with_snap(d.second * (1.0 / m));
        }
    }
    Ok(jet)
}

struct ForceDerivatives {
    force: FourVector,
    first: FourVector,
    second: FourVector,
}

/// F, dF/dτ and d²F/dτ² along the path; `jerk` enables the second derivative.
fn force_derivatives(
    potential: &ExternalPotential,
    z: FourVector,
    v: FourVector,
    a: FourVector,
    jerk: Option<FourVector>,
) -> ForceDerivatives {
    let g = potential.gradient(z);
    let force = potential_force(v, g);
    let hv = potential.hessian_apply(z, v);
    let s = contract(v, g);
    let s1 = contract(a, g) + contract(v, hv);
    let first = hv.raise() - a * s - v * s1;
    let second = match jerk {
        Some(j) => {
            let ha = potential.hessian_apply(z, a);
            let s2 = contract(j, g) + 3.0 * contract(a, hv);
            ha.raise() - j * s - a * (2.0 * s1) - v * s2
        }
        None => FourVector::ZERO,
    };
    ForceDerivatives { force, first, second }
}

/// State at one grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NodeState {
    pub z: FourVector,
    pub v: FourVector,
    pub a: FourVector,
    pub j: FourVector,
}

impl NodeState {
    pub fn jet(&self, r: f64) -> Jet {
        Jet::new(self.z, self.v, self.a, r).with_jerk(self.j)
    }
}

/// An additional force acting alongside the self-force: its value and
/// the part of the mass it renormalizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ExtraForce {
    pub force: FourVector,
    pub mass_shift: f64,
}

/// Everything the local acceleration needs besides the state.
pub(crate) struct LocalDynamics<'a> {
    pub params: &'a FieldParams,
    pub table: &'a KernelTable,
    pub potential: &'a ExternalPotential,
    pub order: usize,
}

impl LocalDynamics<'_> {
    /// Forces at a state by reduction of order: the Newtonian acceleration
    /// and its derivatives feed u⁽²⁾ (and u⁽³⁾).
    pub fn forces(&self, r: f64, z: FourVector, v: FourVector, extra: Option<ExtraForce>) -> Result<Forces> {
        let c = self.table.at(r);
        let mut mass = c.m;
        let mut external = force_derivatives(self.potential, z, v, FourVector::ZERO, None).force;
        if let Some(x) = extra {
            mass -= x.mass_shift;
            external += x.force;
        }
        if !(mass > 0.0) {
            return Err(Error::Stability { r, mass });
        }
        let a0 = external * (1.0 / mass);
        let d = force_derivatives(self.potential, z, v, a0, None);
        let m1 = mass_rate(r, self.params);
        let jerk = (d.first - a0 * m1) * (1.0 / mass);
        if self.params.charge == 0.0 {
            return Ok(Forces {
                mass,
                external,
                reaction: FourVector::ZERO,
                jerk,
            });
        }
        let mut jet = Jet::new(z, v, a0, r).with_jerk(jerk);
        if self.order == 3 {
            let d2 = force_derivatives(self.potential, z, v, a0, Some(jerk)).second;
            let q = (d2 - jerk * (2.0 * m1) - a0 * mass_curvature(r, self.params)) * (1.0 / mass);
            jet = jet.with_snap(q);
        }
        let reaction = rr_force_local(&jet, self.params, self.table, self.order)?;
        Ok(Forces {
            mass,
            external,
            reaction,
            jerk,
        })
    }

    /// Acceleration and jerk solving m(r)z̈ = F + f once.
    pub fn accel(&self, r: f64, z: FourVector, v: FourVector, extra: Option<ExtraForce>) -> Result<(FourVector, FourVector)> {
        let f = self.forces(r, z, v, extra)?;
        if self.params.charge == 0.0 {
            return Ok((f.external * (1.0 / f.mass), f.jerk));
        }
        Ok((((f.external + f.reaction) * (1.0 / f.mass)).orthogonal_to(v), f.jerk))
    }
}

pub(crate) struct Forces {
    pub mass: f64,
    pub external: FourVector,
    pub reaction: FourVector,
    pub jerk: FourVector,
}

/// One predictor-corrector step of size `h` from elapsed time `r`.
pub(crate) fn heun_step<A>(s: &NodeState, r: f64, h: f64, projection: bool, mut accel: A) -> Result<NodeState>
where
    A: FnMut(f64, FourVector, FourVector) -> Result<(FourVector, FourVector)>,
{
    let zp = s.z + s.v * h + s.a * (0.5 * h * h);
    let mut vp = s.v + s.a * h;
    if projection {
        vp = shell_project(vp, s.v)?;
    }
    let (ap, _) = accel(r + h, zp, vp)?;
    let mut v = s.v + (s.a + ap) * (0.5 * h);
    let z = s.z + s.v * h + (s.a * (1.0 / 3.0) + ap * (1.0 / 6.0)) * (h * h);
    if projection {
        v = shell_project(v, s.v)?;
    }
    let (a, j) = accel(r + h, z, v)?;
    if !a.is_finite() || !z.is_finite() {
        return Err(Error::Stability { r: r + h, mass: f64::NAN });
    }
    Ok(NodeState { z, v, a, j })
}

/// Start the history of a particle at proper time zero.
pub(crate) fn start_worldline(s: &NodeState) -> Result<Worldline> {
    Worldline::new(vec![0.0], vec![s.z], vec![s.v], vec![s.a])?.with_jerk(vec![s.j])
}

pub(crate) fn push_node(w: &mut Worldline, tau: f64, s: &NodeState) {
    w.push(tau, &s.jet(tau));
}

fn nonlocal_accel(
    w: &Worldline,
    tau: f64,
    z: FourVector,
    v: FourVector,
    p: &FieldParams,
    potential: &ExternalPotential,
    window: f64,
) -> Result<FourVector> {
    let last = w.len() - 1;
    let (phi, k) = history_terms(w, last, tau, z, v, p, window)?;
    let m = p.bare_mass - p.e2() * phi;
    if !(m > 0.0) {
        return Err(Error::Stability {
            r: tau - w.start(),
            mass: m,
        });
    }
    let f = potential_force(v, potential.gradient(z));
    Ok(((f + k * p.e2()) * (1.0 / m)).orthogonal_to(v))
}

/// Integrate the mean trajectory from (z0, v0) at proper time 0.
pub fn integrate_semiclassical(
    p: &FieldParams,
    table: &KernelTable,
    potential: &ExternalPotential,
    z0: FourVector,
    v0: FourVector,
    cfg: &IntegratorConfig,
) -> Result<Worldline> {
    cfg.validate(p.cutoff)?;
    unit_velocity(v0)?;
    if table.params != *p {
        return Err(Error::Config("kernel table was built for different parameters".into()));
    }
    let h = cfg.step;
    match cfg.formulation {
        Formulation::Local => {
            let dyn_ = LocalDynamics {
                params: p,
                table,
                potential,
                order: cfg.order,
            };
            let (a, j) = dyn_.accel(0.0, z0, v0, None)?;
            let mut s = NodeState { z: z0, v: v0, a, j };
            let mut w = start_worldline(&s)?;
            for n in 0..cfg.steps {
                let r = n as f64 * h;
                s = heun_step(&s, r, h, cfg.shell_projection, |rr, z, v| dyn_.accel(rr, z, v, None))?;
                push_node(&mut w, (n + 1) as f64 * h, &s);
            }
            Ok(w)
        }
        Formulation::Nonlocal => {
            let a = potential_force(v0, potential.gradient(z0)) * (1.0 / p.bare_mass);
            let s0 = NodeState {
                z: z0,
                v: v0,
                a,
                j: FourVector::ZERO,
            };
            let mut w = Worldline::new(vec![0.0], vec![z0], vec![v0], vec![a])?;
            let mut s = s0;
            for n in 0..cfg.steps {
                let r = n as f64 * h;
                let tau_next = (n + 1) as f64 * h;
                let hist = &w;
                s = heun_step(&s, r, h, cfg.shell_projection, |_, z, v| {
                    Ok((nonlocal_accel(hist, tau_next, z, v, p, potential, cfg.window)?, FourVector::ZERO))
                })?;
                w.push(tau_next, &s.jet(tau_next));
            }
            Ok(w)
        }
    }
}

/// Projection of the equation of motion onto ż at a node of a local run:
/// ż·(m(r)z̈ − F − f).
pub fn equation_residual(jet: &Jet, p: &FieldParams, table: &KernelTable, potential: &ExternalPotential, order: usize) -> Result<f64> {
    let dyn_ = LocalDynamics {
        params: p,
        table,
        potential,
        order,
    };
    let f = dyn_.forces(jet.r, jet.pos(), jet.vel(), None)?;
    Ok(mdot(jet.vel(), jet.acc() * f.mass - f.external - f.reaction))
}

//! Minkowski kinematics and gridded particle histories.
//!
//! Signature is (+,−,−,−) with c = 1. [`FourVector`] holds contravariant
//! components; gradients of scalar fields are passed around as covariant
//! components in the same container and turned into vectors with
//! [`FourVector::raise`].

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

pub const DEFAULT_SHELL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    pub fn t(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    /// Minkowski square v·v.
    pub fn square(&self) -> f64 {
        mdot(*self, *self)
    }

    /// Flip the spatial signs (index raising or lowering with the metric).
    pub fn raise(&self) -> FourVector {
        FourVector([self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }

    /// Euclidean norm of the components, used for tolerances.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Component orthogonal to the timelike vector `v`.
    pub fn orthogonal_to(&self, v: FourVector) -> FourVector {
        *self - v * (mdot(v, *self) / v.square())
    }
}

/// Contraction of a vector with a covector: Σ v^μ w_μ, no metric.
pub fn contract(v: FourVector, w: FourVector) -> f64 {
    v.0.iter().zip(&w.0).map(|(a, b)| a * b).sum()
}

/// Minkowski inner product a⁰b⁰ − a·b.
pub fn mdot(a: FourVector, b: FourVector) -> f64 {
    a.0[0] * b.0[0] - a.0[1] * b.0[1] - a.0[2] * b.0[2] - a.0[3] * b.0[3]
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl AddAssign for FourVector {
    fn add_assign(&mut self, o: FourVector) {
        *self = *self + o;
    }
}

impl SubAssign for FourVector {
    fn sub_assign(&mut self, o: FourVector) {
        *self = *self - o;
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector(self.0.map(|c| c * s))
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        v * self
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector(self.0.map(|c| -c))
    }
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Derivatives d⁰..d⁴ of a worldline at one proper time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub d: [FourVector; 5],
    /// Elapsed proper time since switch-on.
    pub r: f64,
}

impl Jet {
    pub fn new(pos: FourVector, vel: FourVector, acc: FourVector, r: f64) -> Self {
        Jet {
            d: [pos, vel, acc, FourVector::ZERO, FourVector::ZERO],
            r,
        }
    }

    pub fn pos(&self) -> FourVector {
        self.d[0]
    }
    pub fn vel(&self) -> FourVector {
        self.d[1]
    }
    pub fn acc(&self) -> FourVector {
        self.d[2]
    }
    pub fn jerk(&self) -> FourVector {
        self.d[3]
    }
    pub fn snap(&self) -> FourVector {
        self.d[4]
    }

    pub fn with_jerk(mut self, j: FourVector) -> Self {
        self.d[3] = j;
        self
    }

    pub fn with_snap(mut self, q: FourVector) -> Self {
        self.d[4] = q;
        self
    }

    /// Largest of |ż²−1| and |ż·z̈|.
    pub fn shell_error(&self) -> f64 {
        (self.vel().square() - 1.0).abs().max(mdot(self.vel(), self.acc()).abs())
    }
}

/// A proper-time-gridded particle history.
#[derive(Debug, Clone, PartialEq)]
pub struct Worldline {
    tau: Vec<f64>,
    pos: Vec<FourVector>,
    vel: Vec<FourVector>,
    acc: Vec<FourVector>,
    jerk: Option<Vec<FourVector>>,
}

// Quintic Hermite basis on [0, 1]: value, slope and curvature at each end.
const HERMITE: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
];

fn poly_derivs(c: &[f64; 6], t: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    let mut coef = *c;
    for k in 0..5 {
        let mut v = 0.0;
        for i in (0..6).rev() {
            v = v * t + coef[i];
        }
        out[k] = v;
        for i in 0..5 {
            coef[i] = coef[i + 1] * (i + 1) as f64;
        }
        coef[5] = 0.0;
    }
    out
}

impl Worldline {
    pub fn new(tau: Vec<f64>, pos: Vec<FourVector>, vel: Vec<FourVector>, acc: Vec<FourVector>) -> Result<Self> {
        let n = tau.len();
        if n == 0 {
            return Err(Error::InvalidParameter("worldline needs at least one node".into()));
        }
        if pos.len() != n || vel.len() != n || acc.len() != n {
            return Err(Error::InvalidParameter("worldline columns differ in length".into()));
        }
        if tau.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("proper-time grid must be strictly increasing".into()));
        }
        if pos.iter().chain(&vel).chain(&acc).any(|v| !v.is_finite()) || tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("worldline has non-finite entries".into()));
        }
        Ok(Worldline {
            tau,
            pos,
            vel,
            acc,
            jerk: None,
        })
    }

    /// Attach third derivatives at the nodes.
    pub fn with_jerk(mut self, jerk: Vec<FourVector>) -> Result<Self> {
        if jerk.len() != self.tau.len() {
            return Err(Error::InvalidParameter("jerk column length mismatch".into()));
        }
        self.jerk = Some(jerk);
        Ok(self)
    }

    /// Sample an analytic trajectory `f(τ) -> (z, ż, z̈)` on the given grid.
    pub fn from_fn<F>(tau: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> (FourVector, FourVector, FourVector),
    {
        let (mut p, mut v, mut a) = (Vec::new(), Vec::new(), Vec::new());
        for &t in &tau {
            let (z, u, w) = f(t);
            p.push(z);
            v.push(u);
            a.push(w);
        }
        Worldline::new(tau, p, v, a)
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }
    pub fn positions(&self) -> &[FourVector] {
        &self.pos
    }
    pub fn velocities(&self) -> &[FourVector] {
        &self.vel
    }
    pub fn accelerations(&self) -> &[FourVector] {
        &self.acc
    }
    pub fn jerks(&self) -> Option<&[FourVector]> {
        self.jerk.as_deref()
    }

    pub fn start(&self) -> f64 {
        self.tau[0]
    }

    pub fn end(&self) -> f64 {
        self.tau[self.tau.len() - 1]
    }

    /// Stored jet at node `i`; the jerk slot is filled when available.
    pub fn node(&self, i: usize) -> Jet {
        let j = Jet::new(self.pos[i], self.vel[i], self.acc[i], self.tau[i] - self.tau[0]);
        match &self.jerk {
            Some(k) => j.with_jerk(k[i]),
            None => j,
        }
    }

    /// Interpolated jet at `tau`.
    ///
    /// Uses quintic Hermite interpolation of the stored position, velocity
    /// and acceleration; orders three and four come from differentiating
    /// the interpolant. Node points return stored values exactly.
    pub fn interpolate(&self, tau: f64) -> Result<Jet> {
        let (start, end) = (self.start(), self.end());
        if !(tau >= start && tau <= end) {
            return Err(Error::OutOfRange { tau, start, end });
        }
        let k = self.tau.partition_point(|&t| t <= tau);
        let i = k.saturating_sub(1);
        if self.tau[i] == tau || self.len() == 1 {
            let mut jet = self.node(i);
            if self.len() > 1 {
                // higher orders from the interpolant on the adjacent interval
                let h = self.hermite(i.min(self.len() - 2), tau);
                if self.jerk.is_none() {
                    jet.d[3] = h.d[3];
                }
                jet.d[4] = h.d[4];
            }
            return Ok(jet);
        }
        Ok(self.hermite(i, tau))
    }

    fn hermite(&self, i: usize, tau: f64) -> Jet {
        let (t0, t1) = (self.tau[i], self.tau[i + 1]);
        let h = t1 - t0;
        let t = (tau - t0) / h;
        let coef = [
            self.pos[i],
            self.vel[i] * h,
            self.acc[i] * (h * h),
            self.pos[i + 1],
            self.vel[i + 1] * h,
            self.acc[i + 1] * (h * h),
        ];
        let mut d = [FourVector::ZERO; 5];
        for (b, c) in HERMITE.iter().zip(coef) {
            let vals = poly_derivs(b, t);
            for k in 0..5 {
                d[k] += c * vals[k];
            }
        }
        let mut hk = 1.0;
        for dk in d.iter_mut() {
            *dk = *dk * (1.0 / hk);
            hk *= h;
        }
        Jet { d, r: tau - self.tau[0] }
    }

    /// Worldline restricted to nodes `0..=last`.
    pub fn prefix(&self, last: usize) -> Worldline {
        let n = last + 1;
        Worldline {
            tau: self.tau[..n].to_vec(),
            pos: self.pos[..n].to_vec(),
            vel: self.vel[..n].to_vec(),
            acc: self.acc[..n].to_vec(),
            jerk: self.jerk.as_ref().map(|j| j[..n].to_vec()),
        }
    }

    pub(crate) fn push(&mut self, tau: f64, jet: &Jet) {
        self.tau.push(tau);
        self.pos.push(jet.pos());
        self.vel.push(jet.vel());
        self.acc.push(jet.acc());
        if let Some(j) = self.jerk.as_mut() {
            j.push(jet.jerk());
        }
    }

    /// Worldline CSV with header `tau,t,x,y,z,vt,vx,vy,vz`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,t,x,y,z,vt,vx,vy,vz\n");
        self.write_rows(&mut s, None);
        s
    }

    pub(crate) fn write_rows(&self, s: &mut String, prefix: Option<&str>) {
        for i in 0..self.len() {
            if let Some(p) = prefix {
                let _ = write!(s, "{p},");
            }
            let (z, v) = (self.pos[i], self.vel[i]);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                self.tau[i], z[0], z[1], z[2], z[3], v[0], v[1], v[2], v[3]
            );
        }
    }
}

/// Largest |ż²−1| over the nodes.
pub fn shell_residual(w: &Worldline) -> f64 {
    w.vel.iter().map(|v| (v.square() - 1.0).abs()).fold(0.0, f64::max)
}

/// Rescale `v` to unit Minkowski norm.
///
/// `reference` fixes the time orientation: the result must lie in the same
/// light cone as `reference`.
pub fn shell_project(v: FourVector, reference: FourVector) -> Result<FourVector> {
    let n2 = v.square();
    if !(n2 > 0.0) || !v.is_finite() {
        return Err(Error::Constraint(format!("velocity {:?} is not timelike (v² = {n2:e})", v.0)));
    }
    if !(reference.square() > 0.0) {
        return Err(Error::Constraint("reference velocity is not timelike".into()));
    }
    if mdot(v, reference) <= 0.0 {
        return Err(Error::Constraint("velocity is not future-directed".into()));
    }
    // v² is a difference of squares; a residual below its rounding error
    // carries no information and renormalizing would only add noise
    let resolution = 4.0 * f64::EPSILON * v.0.iter().map(|c| c * c).sum::<f64>();
    if (n2 - 1.0).abs() <= resolution {
        return Ok(v);
    }
    Ok(v * (1.0 / n2.sqrt()))
}

/// Analytic hyperbolic worldline with proper acceleration `alpha` along x.
pub fn hyperbolic(alpha: f64) -> impl Fn(f64) -> (FourVector, FourVector, FourVector) {
    move |tau| {
        let (s, c) = ((alpha * tau).sinh(), (alpha * tau).cosh());
        (
            FourVector::new(s / alpha, c / alpha, 0.0, 0.0),
            FourVector::new(c, s, 0.0, 0.0),
            FourVector::new(alpha * s, alpha * c, 0.0, 0.0),
        )
    }
}

/// Analytic straight line through `z0` with unit velocity `v`.
pub fn inertial(z0: FourVector, v: FourVector) -> impl Fn(f64) -> (FourVector, FourVector, FourVector) {
    move |tau| (z0 + v * tau, v, FourVector::ZERO)
}

/// Uniform grid of `n` points starting at `start`.
pub fn uniform_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circular(r: f64, om: f64) -> impl Fn(f64) -> (FourVector, FourVector, FourVector) {
        let g = 1.0 / (1.0 - r * r * om * om).sqrt();
        move |tau| {
            let th = om * g * tau;
            (
                FourVector::new(g * tau, r * th.cos(), r * th.sin(), 0.0),
                FourVector::new(g, -r * om * g * th.sin(), r * om * g * th.cos(), 0.0),
                FourVector::new(0.0, -r * (om * g).powi(2) * th.cos(), -r * (om * g).powi(2) * th.sin(), 0.0),
            )
        }
    }

    #[test]
    fn metric_products() {
        let e = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(mdot(e, e), 1.0);
        let n = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(mdot(n, n), 0.0);
        assert_eq!(mdot(FourVector::new(2.0, 1.0, 0.0, 0.0), FourVector::new(3.0, 1.0, 0.0, 0.0)), 5.0);
    }

    #[test]
    fn node_values_are_exact() {
        let w = Worldline::from_fn(uniform_grid(0.0, 0.1, 20), hyperbolic(0.7)).unwrap();
        for i in 0..w.len() {
            let j = w.interpolate(w.tau()[i]).unwrap();
            assert_eq!(j.pos(), w.positions()[i]);
            assert_eq!(j.vel(), w.velocities()[i]);
            assert_eq!(j.acc(), w.accelerations()[i]);
        }
    }

    #[test]
    fn straight_line_has_no_acceleration() {
        let v = FourVector::new(1.25, 0.75, 0.0, 0.0);
        let w = Worldline::from_fn(uniform_grid(0.0, 0.3, 10), inertial(FourVector::ZERO, v)).unwrap();
        for k in 0..50 {
            let j = w.interpolate(0.05 * k as f64).unwrap();
            assert!(j.acc().max_abs() < 1e-12);
        }
    }

    #[test]
    fn hyperbolic_acceleration_norm() {
        let w = Worldline::from_fn(uniform_grid(0.0, 0.05, 30), hyperbolic(1.0)).unwrap();
        let j = w.interpolate(0.5).unwrap();
        assert!((j.acc().square() + 1.0).abs() < 1e-6);
        assert!((j.jerk() - j.vel()).max_abs() < 1e-5);
    }

    #[test]
    fn out_of_range() {
        let w = Worldline::from_fn(uniform_grid(0.0, 0.1, 5), hyperbolic(1.0)).unwrap();
        assert!(matches!(w.interpolate(0.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(w.interpolate(-0.01), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn shell_residual_examples() {
        let line = Worldline::from_fn(
            uniform_grid(0.0, 1.0, 4),
            inertial(FourVector::ZERO, FourVector::new(1.0, 0.0, 0.0, 0.0)),
        )
        .unwrap();
        assert_eq!(shell_residual(&line), 0.0);
        let hyp = Worldline::from_fn(uniform_grid(-2.0, 0.1, 40), hyperbolic(1.3)).unwrap();
        assert!(shell_residual(&hyp) < 1e-12);
        let off = Worldline::from_fn(vec![0.0], |_| {
            (FourVector::ZERO, FourVector::new(1.1, 0.0, 0.0, 0.0), FourVector::ZERO)
        })
        .unwrap();
        assert!((shell_residual(&off) - 0.21).abs() < 1e-12);
    }

    #[test]
    fn projection() {
        let u = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(shell_project(u, u).unwrap(), u);
        let v = FourVector::new(1.0005, 0.001, 0.0, 0.0);
        let p = shell_project(v, u).unwrap();
        assert!((p.square() - 1.0).abs() < 1e-15);
        assert!((p.square() - 1.0).abs() < (v.square() - 1.0).abs());
        assert!(shell_project(FourVector::new(0.0, 1.0, 0.0, 0.0), u).is_err());
        assert!(shell_project(-u, u).is_err());
    }

    #[test]
    fn csv_header() {
        let w = Worldline::from_fn(uniform_grid(0.0, 0.5, 2), hyperbolic(1.0)).unwrap();
        let csv = w.to_csv();
        assert!(csv.starts_with("tau,t,x,y,z,vt,vx,vy,vz\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn rejects_non_increasing_grid() {
        let z = vec![FourVector::ZERO; 2];
        assert!(Worldline::new(vec![0.0, 0.0], z.clone(), z.clone(), z).is_err());
    }

    proptest! {
        #[test]
        fn cubic_polynomials_reproduced(c in proptest::collection::vec(-1.0f64..1.0, 16), tau in 0.0f64..2.0) {
            let coef = |k: usize| FourVector::new(c[4 * k], c[4 * k + 1], c[4 * k + 2], c[4 * k + 3]);
            let f = |t: f64| {
                let p = coef(0) + coef(1) * t + coef(2) * (t * t) + coef(3) * (t * t * t);
                let v = coef(1) + coef(2) * (2.0 * t) + coef(3) * (3.0 * t * t);
                let a = coef(2) * 2.0 + coef(3) * (6.0 * t);
                (p, v, a)
            };
            let w = Worldline::from_fn(uniform_grid(0.0, 0.25, 9), f).unwrap();
            let j = w.interpolate(tau).unwrap();
            let (p, v, a) = f(tau);
            prop_assert!((j.pos() - p).max_abs() < 1e-12);
            prop_assert!((j.vel() - v).max_abs() < 1e-12);
            prop_assert!((j.acc() - a).max_abs() < 1e-11);
            prop_assert!((j.jerk() - coef(3) * 6.0).max_abs() < 1e-9);
        }

        #[test]
        fn projection_idempotent(vx in -0.9f64..0.9, eps in -1e-3f64..1e-3) {
            let g = 1.0 / (1.0 - vx * vx).sqrt();
            let v = FourVector::new(g * (1.0 + eps), g * vx, 0.0, 0.0);
            let once = shell_project(v, v).unwrap();
            let twice = shell_project(once, v).unwrap();
            prop_assert!((once - twice).max_abs() < 4.0 * f64::EPSILON * once.max_abs());
        }

        #[test]
        fn circular_motion_is_on_shell(r in 0.1f64..2.0, om in 0.05f64..0.4, tau in 0.0f64..5.0) {
            let (_, v, a) = circular(r, om)(tau);
            prop_assert!((v.square() - 1.0).abs() < 1e-12);
            prop_assert!(mdot(v, a).abs() < 1e-12);
        }
    }
}

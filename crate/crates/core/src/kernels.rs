//! Regulated field kernels and the time-dependent coefficients h(r),
//! g⁽ⁿ⁾(r) and m(r).

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::numerics::{gamma, gamma_lower, integrate, regularized_lower, QuadratureSpec};
use crate::par::Exec;
use crate::worldline::{mdot, FourVector};

/// Field and particle parameters shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    /// Cutoff Λ (inverse time).
    pub cutoff: f64,
    /// Coupling e.
    pub charge: f64,
    /// Bare mass m₀.
    pub bare_mass: f64,
    /// Overall noise strength ħ.
    pub hbar: f64,
}

impl FieldParams {
    pub fn new(cutoff: f64, charge: f64, bare_mass: f64) -> Result<Self> {
        Self::with_hbar(cutoff, charge, bare_mass, 1.0)
    }

    pub fn with_hbar(cutoff: f64, charge: f64, bare_mass: f64, hbar: f64) -> Result<Self> {
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
        }
        if !(bare_mass > 0.0) || !bare_mass.is_finite() {
            return Err(Error::InvalidParameter(format!("bare mass must be positive, got {bare_mass}")));
        }
        if !charge.is_finite() {
            return Err(Error::InvalidParameter("charge must be finite".into()));
        }
        if !(hbar >= 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be nonnegative, got {hbar}")));
        }
        Ok(FieldParams {
            cutoff,
            charge,
            bare_mass,
            hbar,
        })
    }

    pub fn e2(&self) -> f64 {
        self.charge * self.charge
    }
}

/// How a coefficient is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
        })
    }
}

fn pi32() -> f64 {
    PI * PI.sqrt()
}

/// Peak value of the regulated retarded kernel, Λ²/√(2π³).
pub fn kernel_peak(cutoff: f64) -> f64 {
    cutoff * cutoff / (2.0 * PI * PI * PI).sqrt()
}

/// Lag beyond which the on-trajectory kernel is below 1e-14 of its peak.
pub fn kernel_support(cutoff: f64) -> f64 {
    (2.0 * 1e14f64.ln()).powf(0.25) / cutoff
}

/// Regulated retarded kernel along a timelike trajectory, as a function of
/// the proper-time lag `s`.
pub fn retarded_kernel_s(s: f64, cutoff: f64) -> f64 {
    let x = cutoff * s;
    let x2 = x * x;
    kernel_peak(cutoff) * (-0.5 * x2 * x2).exp()
}

/// d/ds of [`retarded_kernel_s`].
pub fn retarded_kernel_s_deriv(s: f64, cutoff: f64) -> f64 {
    let l4 = cutoff.powi(4);
    -2.0 * l4 * s * s * s * retarded_kernel_s(s, cutoff)
}

/// Regulated retarded kernel of the invariant interval σ, supported on
/// and inside the future light cone (Δt > 0, σ ≥ 0).
pub fn retarded_kernel(sigma: f64, dt: f64, cutoff: f64) -> f64 {
    if dt <= 0.0 || sigma < 0.0 {
        return 0.0;
    }
    let x = cutoff * cutoff * sigma;
    kernel_peak(cutoff) * (-0.5 * x * x).exp()
}

/// d/dσ of [`retarded_kernel`] inside its support.
pub fn retarded_kernel_sigma_deriv(sigma: f64, dt: f64, cutoff: f64) -> f64 {
    -cutoff.powi(4) * sigma * retarded_kernel(sigma, dt, cutoff)
}

/// The coefficient a = 3Γ(5/4)/(2^{1/4}π^{3/2}) ≈ 0.41 entering the mass
/// shift and the cutoff bound.
pub fn cutoff_coefficient() -> f64 {
    3.0 * gamma(1.25).expect("positive shape") / (2f64.powf(0.25) * pi32())
}

/// Late-time value h(∞) of the integral of the retarded kernel.
pub fn h_saturation(cutoff: f64) -> f64 {
    cutoff * gamma(1.25).expect("positive shape") / (2f64.powf(0.25) * pi32())
}

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("elapsed time must be nonnegative, got {r}")));
    }
    Ok(())
}

/// h(r) = ∫₀^r G(s) ds.
pub fn h_coeff(r: f64, p: &FieldParams, method: Method) -> Result<f64> {
    check_r(r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let l = p.cutoff;
    match method {
        Method::ClosedForm => {
            let x = 0.5 * (l * r).powi(4);
            Ok(h_saturation(l) * regularized_lower(0.25, x)?)
        }
        Method::Quadrature => {
            let upper = r.min(8.0 / l);
            integrate(|s| retarded_kernel_s(s, l), 0.0, upper, &quad_spec())
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn g_closed(n: usize, r: f64, cutoff: f64) -> Result<f64> {
    let nf = n as f64;
    let x = 0.5 * (cutoff * r).powi(4);
    let pref = 2f64.powf((nf - 2.0) / 4.0) * cutoff.powf(2.0 - nf) / (pi32() * factorial(n + 1));
    Ok(-pref * gamma_lower(1.0 + nf / 4.0, x)?)
}

/// g⁽ⁿ⁾(r) = ∫₀^r sⁿ/(n+1)! · dG/ds ds for n ∈ {1, 2, 3}.
pub fn g_coeff(n: usize, r: f64, p: &FieldParams, method: Method) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedOrder(n));
    }
    check_r(r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let l = p.cutoff;
    match method {
        Method::ClosedForm => g_closed(n, r, l),
        Method::Quadrature => {
            let w = 1.0 / factorial(n + 1);
            let upper = r.min(8.0 / l);
            integrate(|s| s.powi(n as i32) * w * retarded_kernel_s_deriv(s, l), 0.0, upper, &quad_spec())
        }
    }
}

/// Late-time value of g⁽ⁿ⁾ for any order n ≥ 1.
pub fn g_saturation(n: usize, cutoff: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    g_closed(n, f64::INFINITY, cutoff)
}

/// The alternative closed form with prefactor 32^{−(n−2)/4}/(π^{3/2}(n+1)!Λ^{n−2}),
/// kept only for the convention report.
pub fn g_coeff_printed(n: usize, r: f64, cutoff: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    check_r(r)?;
    let nf = n as f64;
    let x = 0.5 * (cutoff * r).powi(4);
    let pref = 32f64.powf(-(nf - 2.0) / 4.0) / (pi32() * factorial(n + 1) * cutoff.powf(nf - 2.0));
    Ok(pref * gamma_lower(1.0 + nf / 4.0, x)?)
}

/// m(r) = m₀ − e²h(r) − e²g⁽¹⁾(r).
pub fn renormalized_mass(r: f64, p: &FieldParams) -> Result<f64> {
    Ok(p.bare_mass - p.e2() * (h_coeff(r, p, Method::ClosedForm)? + g_coeff(1, r, p, Method::ClosedForm)?))
}

/// dm/dr = −e² G(r)(1 − Λ⁴r⁴).
pub fn mass_rate(r: f64, p: &FieldParams) -> f64 {
    let x4 = (p.cutoff * r).powi(4);
    -p.e2() * retarded_kernel_s(r, p.cutoff) * (1.0 - x4)
}

/// d²m/dr² = e² G(r) Λ⁴r³ (6 − 2Λ⁴r⁴).
pub fn mass_curvature(r: f64, p: &FieldParams) -> f64 {
    let l4 = p.cutoff.powi(4);
    let x4 = l4 * r.powi(4);
    p.e2() * retarded_kernel_s(r, p.cutoff) * l4 * r.powi(3) * (6.0 - 2.0 * x4)
}

/// Cutoff bound 2m₀/(a e²); +∞ for a neutral particle.
pub fn stability_bound(p: &FieldParams) -> f64 {
    if p.charge == 0.0 {
        return f64::INFINITY;
    }
    2.0 * p.bare_mass / (cutoff_coefficient() * p.e2())
}

/// Value of the regulated Hadamard kernel at coincidence, in units of Λ²/(4π²).
pub const HADAMARD_COINCIDENCE: f64 = 1.0;

/// Regulated vacuum Hadamard kernel and its first two σ-derivatives.
///
/// For σ ≥ 0 this is −(σ − ε²)/(4π²(σ + ε²)²) with ε = 1/Λ, the real part
/// of the iε-regulated Wightman function along a straight timelike line.
/// For σ < 0 it continues as a rational function matching value, slope and
/// curvature at σ = 0 and decaying as −1/(4π²σ).
pub fn hadamard_sigma(sigma: f64, cutoff: f64) -> (f64, f64, f64) {
    let l2 = cutoff * cutoff;
    let x = l2 * sigma;
    let (f, f1, f2) = if x >= 0.0 {
        let d = x + 1.0;
        let d2 = d * d;
        (-(x - 1.0) / d2, (x - 3.0) / (d2 * d), (10.0 - 2.0 * x) / (d2 * d2))
    } else {
        let u = -x;
        let num = 1.0 + 3.0 * u + 5.0 * u * u;
        let dn = 3.0 + 10.0 * u;
        let den = 1.0 + 5.0 * u * u * u;
        let dd = 15.0 * u * u;
        let ddd = 30.0 * u;
        let r = num / den;
        let r1 = (dn * den - num * dd) / (den * den);
        let r2 = (10.0 * den - num * ddd) / (den * den) - 2.0 * dd * r1 / den;
        (r, -r1, r2)
    };
    let c = l2 / (4.0 * PI * PI);
    (c * f, c * l2 * f1, c * l2 * l2 * f2)
}

/// Regulated Hadamard kernel between two events.
pub fn hadamard_kernel(z: FourVector, zp: FourVector, p: &FieldParams) -> f64 {
    let y = z - zp;
    hadamard_sigma(mdot(y, y), p.cutoff).0
}

/// Covariant gradient ∂_μ G^H with respect to the first event: 2 y_μ dG^H/dσ.
pub fn hadamard_gradient(z: FourVector, zp: FourVector, p: &FieldParams) -> FourVector {
    let y = z - zp;
    let (_, d1, _) = hadamard_sigma(mdot(y, y), p.cutoff);
    y.raise() * (2.0 * d1)
}

/// Signed ratios between the implemented coefficients and alternative
/// normalizations, reported alongside every run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConventionReport {
    /// Late-time g⁽²⁾ from quadrature.
    pub g2_saturation: f64,
    /// The reference value 1/(4π).
    pub g2_reference: f64,
    /// g2_reference / g2_saturation.
    pub g2_factor: f64,
    /// Ratio of the alternative closed form to quadrature, n = 1..3.
    pub printed_ratio: [f64; 3],
    /// a / (h(∞)/Λ).
    pub h_factor: f64,
}

impl ConventionReport {
    pub fn compute(p: &FieldParams) -> Result<Self> {
        let far = 20.0 / p.cutoff;
        let g2 = g_coeff(2, far, p, Method::Quadrature)?;
        let reference = 1.0 / (4.0 * PI);
        let mut printed_ratio = [0.0; 3];
        for n in 1..=3 {
            printed_ratio[n - 1] = g_coeff_printed(n, far, p.cutoff)? / g_coeff(n, far, p, Method::Quadrature)?;
        }
        let h = h_coeff(far, p, Method::Quadrature)?;
        Ok(ConventionReport {
            g2_saturation: g2,
            g2_reference: reference,
            g2_factor: reference / g2,
            printed_ratio,
            h_factor: cutoff_coefficient() * p.cutoff / h,
        })
    }

    /// `key = value` lines for metadata files.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "convention.g2_saturation = {}", self.g2_saturation);
        let _ = writeln!(s, "convention.g2_reference = {}", self.g2_reference);
        let _ = writeln!(s, "convention.g2_factor = {}", self.g2_factor);
        for (n, r) in self.printed_ratio.iter().enumerate() {
            let _ = writeln!(s, "convention.g{}_printed_ratio = {}", n + 1, r);
        }
        let _ = writeln!(s, "convention.h_factor = {}", self.h_factor);
        s
    }
}

/// Coefficients at one elapsed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub h: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub m: f64,
}

/// Tabulated coefficients for fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub params: FieldParams,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    pub m: Vec<f64>,
    pub method: Method,
}

impl KernelTable {
    pub const NODES: usize = 2048;
    /// Grid extent in units of 1/Λ.
    pub const SPAN: f64 = 20.0;
    const FIRST: f64 = 1e-4;

    /// Node 0 at r = 0, the rest geometric from 10⁻⁴/Λ to 20/Λ.
    pub fn grid(cutoff: f64) -> Vec<f64> {
        let n = Self::NODES - 1;
        let ratio = (Self::SPAN / Self::FIRST).ln() / (n - 1) as f64;
        std::iter::once(0.0)
            .chain((0..n).map(|k| Self::FIRST * (ratio * k as f64).exp() / cutoff))
            .collect()
    }

    pub fn build(p: &FieldParams, method: Method, exec: Exec) -> Result<Self> {
        let r = Self::grid(p.cutoff);
        let rows = exec.try_map_range(r.len(), |i| -> Result<[f64; 4]> {
            let ri = r[i];
            Ok([
                h_coeff(ri, p, method)?,
                g_coeff(1, ri, p, method)?,
                g_coeff(2, ri, p, method)?,
                g_coeff(3, ri, p, method)?,
            ])
        })?;
        let mut t = KernelTable {
            params: *p,
            r: r.clone(),
            h: Vec::with_capacity(r.len()),
            g1: Vec::with_capacity(r.len()),
            g2: Vec::with_capacity(r.len()),
            g3: Vec::with_capacity(r.len()),
            m: Vec::with_capacity(r.len()),
            method,
        };
        for row in rows {
            t.h.push(row[0]);
            t.g1.push(row[1]);
            t.g2.push(row[2]);
            t.g3.push(row[3]);
            t.m.push(p.bare_mass - p.e2() * (row[0] + row[1]));
        }
        Ok(t)
    }

    /// Linear interpolation in r; saturated beyond the grid.
    pub fn at(&self, r: f64) -> Coefficients {
        let last = self.r.len() - 1;
        let pick = |i: usize| Coefficients {
            h: self.h[i],
            g1: self.g1[i],
            g2: self.g2[i],
            g3: self.g3[i],
            m: self.m[i],
        };
        if r <= 0.0 {
            return pick(0);
        }
        if r >= self.r[last] {
            return pick(last);
        }
        let k = self.r.partition_point(|&x| x <= r);
        let (i, j) = (k - 1, k);
        let w = (r - self.r[i]) / (self.r[j] - self.r[i]);
        let lerp = |v: &[f64]| v[i] + w * (v[j] - v[i]);
        Coefficients {
            h: lerp(&self.h),
            g1: lerp(&self.g1),
            g2: lerp(&self.g2),
            g3: lerp(&self.g3),
            m: lerp(&self.m),
        }
    }

    /// `r,h,g1,g2,g3,m` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,h,g1,g2,g3,m\n");
        for i in 0..self.r.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.r[i], self.h[i], self.g1[i], self.g2[i], self.g3[i], self.m[i]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> FieldParams {
        FieldParams::new(1.0, 1.0, 1.0).unwrap()
    }

    // Simpson oracles (10⁶ panels) of the defining integrals at Λ = 1.
    const H_AT_ONE: f64 = 0.115_866_733_311_130_16;
    const G_SAT: [f64; 3] = [-0.068_439_807_619_694_13, -0.026_525_823_848_649_217, -0.008_178_365_336_079_834];

    #[test]
    fn retarded_kernel_values() {
        assert!((retarded_kernel_s(0.0, 1.0) - 0.126_987_271_868_481_94).abs() < 1e-16);
        assert!(retarded_kernel_s(6.0, 1.0) < 1e-282);
        assert!(retarded_kernel_s(6.1, 1.0) < 1e-300);
        for s in [0.0, 0.3, 1.1] {
            let l = 2.7;
            assert!((retarded_kernel_s(s, l) - l * l * retarded_kernel_s(l * s, 1.0)).abs() < 1e-15);
        }
        assert_eq!(retarded_kernel(1.0, -1.0, 1.0), 0.0);
        assert_eq!(retarded_kernel(-0.5, 1.0, 1.0), 0.0);
    }

    #[test]
    fn kernel_integrates_to_inverse_two_pi() {
        for l in [5.0, 10.0] {
            let v = integrate(|s| retarded_kernel(s, 1.0, l), 0.0, 10.0 / (l * l), &QuadratureSpec::default()).unwrap();
            assert!((v * 2.0 * PI - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn h_matches_oracle() {
        for m in [Method::ClosedForm, Method::Quadrature] {
            assert_eq!(h_coeff(0.0, &unit(), m).unwrap(), 0.0);
            assert!((h_coeff(1.0, &unit(), m).unwrap() - H_AT_ONE).abs() < 1e-12);
        }
        let far = h_coeff(30.0, &unit(), Method::ClosedForm).unwrap();
        assert!((far - cutoff_coefficient() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn g_saturation_matches_oracle() {
        for n in 1..=3 {
            for m in [Method::ClosedForm, Method::Quadrature] {
                let v = g_coeff(n, 20.0, &unit(), m).unwrap();
                assert!((v - G_SAT[n - 1]).abs() < 1e-12, "n={n} {m}: {v}");
            }
        }
        assert!((G_SAT[1] + 1.0 / (12.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(
            g_coeff(4, 1.0, &unit(), Method::ClosedForm),
            Err(Error::UnsupportedOrder(4))
        ));
        assert!(matches!(
            g_coeff(0, 1.0, &unit(), Method::Quadrature),
            Err(Error::UnsupportedOrder(0))
        ));
    }

    #[test]
    fn cutoff_coefficient_value() {
        assert!((cutoff_coefficient() - 0.410_638_845_718_164_9).abs() < 1e-14);
        let p = unit();
        assert!((stability_bound(&p) - 4.870_459_823_405_666).abs() < 1e-12);
        let neutral = FieldParams::new(1.0, 0.0, 1.0).unwrap();
        assert!(stability_bound(&neutral).is_infinite());
    }

    #[test]
    fn mass_starts_bare_and_overshoots() {
        let p = FieldParams::new(1.0, 0.5, 1.0).unwrap();
        assert_eq!(renormalized_mass(0.0, &p).unwrap(), 1.0);
        let late = renormalized_mass(20.0, &p).unwrap();
        assert!((late - (1.0 - p.e2() * h_saturation(1.0) / 2.0)).abs() < 1e-14);
        let peak = renormalized_mass(1.0, &p).unwrap();
        assert!((peak - 1.0).abs() > (late - 1.0).abs());
    }

    #[test]
    fn mass_rate_matches_differences() {
        let p = FieldParams::new(1.3, 0.7, 1.0).unwrap();
        for r in [0.1, 0.5, 0.9, 1.4] {
            let h = 1e-5;
            let fd = (renormalized_mass(r + h, &p).unwrap() - renormalized_mass(r - h, &p).unwrap()) / (2.0 * h);
            assert!((fd - mass_rate(r, &p)).abs() < 1e-9);
            let fd2 = (mass_rate(r + h, &p) - mass_rate(r - h, &p)) / (2.0 * h);
            assert!((fd2 - mass_curvature(r, &p)).abs() < 1e-8);
        }
    }

    #[test]
    fn hadamard_properties() {
        let p = FieldParams::new(2.0, 1.0, 1.0).unwrap();
        let z = FourVector::new(0.3, 0.1, -0.2, 0.05);
        let zp = FourVector::new(-1.0, 0.4, 0.2, 0.0);
        assert_eq!(hadamard_kernel(z, zp, &p), hadamard_kernel(zp, z, &p));
        let c = hadamard_kernel(z, z, &p);
        assert!((c - HADAMARD_COINCIDENCE * 4.0 / (4.0 * PI * PI)).abs() < 1e-15);
        assert_eq!(hadamard_gradient(z, z, &p), FourVector::ZERO);
        let g = hadamard_gradient(z, zp, &p) + hadamard_gradient(zp, z, &p);
        assert!(g.max_abs() < 1e-15);
        // far field approaches the bare vacuum form −1/(4π²σ)
        let far = FourVector::new(10.0, 0.0, 0.0, 0.0);
        let sigma = 100.0;
        let bare = -1.0 / (4.0 * PI * PI * sigma);
        assert!((hadamard_kernel(far, FourVector::ZERO, &p) / bare - 1.0).abs() < 0.02);
    }

    #[test]
    fn hadamard_is_c2_across_light_cone() {
        let l = 1.5;
        let (a, b) = (hadamard_sigma(1e-9, l), hadamard_sigma(-1e-9, l));
        assert!((a.0 - b.0).abs() < 1e-8);
        assert!((a.1 - b.1).abs() < 1e-7);
        assert!((a.2 - b.2).abs() < 1e-6 * a.2.abs().max(1.0));
    }

    #[test]
    fn inertial_gradient_is_along_velocity() {
        let p = unit();
        let v = FourVector::new(1.25, 0.75, 0.0, 0.0);
        let g = hadamard_gradient(v * 2.0, v * 0.5, &p).raise();
        let cross = g[0] * v[1] - g[1] * v[0];
        assert!(cross.abs() < 1e-15);
    }

    #[test]
    fn convention_report() {
        let r = ConventionReport::compute(&unit()).unwrap();
        assert!((r.g2_factor + 3.0).abs() < 1e-9);
        assert!((r.h_factor - 3.0).abs() < 1e-9);
        assert!((r.printed_ratio[1] + 1.0).abs() < 1e-9);
        assert!((r.printed_ratio[0] + 8f64.sqrt()).abs() < 1e-9);
        assert!(r.to_lines().contains("convention.g2_factor = "));
    }

    #[test]
    fn table_grid_and_lookup() {
        let p = FieldParams::new(2.0, 0.3, 1.0).unwrap();
        let t = KernelTable::build(&p, Method::ClosedForm, Exec::Sequential).unwrap();
        assert_eq!(t.r.len(), KernelTable::NODES);
        assert_eq!(t.r[0], 0.0);
        assert!((t.r[KernelTable::NODES - 1] - 10.0).abs() < 1e-12);
        assert_eq!(t.h[0], 0.0);
        assert_eq!(t.m[0], 1.0);
        let c = t.at(0.5);
        assert!((c.h - h_coeff(0.5, &p, Method::ClosedForm).unwrap()).abs() < 1e-5);
        assert_eq!(t.at(1e3).g2, t.g2[KernelTable::NODES - 1]);
        assert!(t.to_csv().starts_with("r,h,g1,g2,g3,m\n"));
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            t in -3.0f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0, l in 0.5f64..3.0, mu in 0usize..4
        ) {
            let p = FieldParams::new(l, 1.0, 1.0).unwrap();
            let z = FourVector::new(t, x, y, 0.2);
            let zp = FourVector::new(0.1, -0.3, 0.4, -0.1);
            let eps = 1e-5 / l;
            let mut e = FourVector::ZERO;
            e.0[mu] = eps;
            let fd = (hadamard_kernel(z + e, zp, &p) - hadamard_kernel(z - e, zp, &p)) / (2.0 * eps);
            let g = hadamard_gradient(z, zp, &p)[mu];
            prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-3 * l * l * l));
        }

        #[test]
        fn closed_form_h_matches_quadrature(lr in 0.0f64..10.0, l in 0.5f64..4.0) {
            let p = FieldParams::new(l, 1.0, 1.0).unwrap();
            let r = lr / l;
            let a = h_coeff(r, &p, Method::ClosedForm).unwrap();
            let b = h_coeff(r, &p, Method::Quadrature).unwrap();
            prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }

        #[test]
        fn g_scaling_law(n in 1usize..4, lr in 0.0f64..12.0, l in 0.3f64..5.0) {
            let p = FieldParams::new(l, 1.0, 1.0).unwrap();
            let a = g_coeff(n, lr / l, &p, Method::ClosedForm).unwrap();
            let b = l.powf(2.0 - n as f64) * g_coeff(n, lr, &FieldParams::new(1.0, 1.0, 1.0).unwrap(), Method::ClosedForm).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
        }

        #[test]
        fn g_bounded_by_saturation(n in 1usize..4, lr in 0.0f64..15.0) {
            let p = unit();
            let v = g_coeff(n, lr, &p, Method::Quadrature).unwrap();
            prop_assert!(v.abs() <= 1.01 * g_saturation(n, 1.0).unwrap().abs());
        }

        #[test]
        fn h_monotone(r in 0.0f64..8.0, dr in 0.0f64..1.0) {
            let p = unit();
            prop_assert!(h_coeff(r + dr, &p, Method::ClosedForm).unwrap() >= h_coeff(r, &p, Method::ClosedForm).unwrap());
        }

        #[test]
        fn below_bound_mass_stays_positive(e in 0.05f64..2.0, frac in 0.0f64..0.999) {
            let probe = FieldParams::new(1.0, e, 1.0).unwrap();
            let l = frac * stability_bound(&probe);
            prop_assume!(l > 0.0);
            let p = FieldParams::new(l, e, 1.0).unwrap();
            for k in 0..40 {
                prop_assert!(renormalized_mass(k as f64 * 0.25 / l, &p).unwrap() > 0.0);
            }
        }
    }
}

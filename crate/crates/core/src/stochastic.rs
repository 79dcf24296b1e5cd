//! Vacuum noise along a mean trajectory and the linearized Langevin
//! equation for fluctuations about it.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::{hadamard_sigma, mass_rate, FieldParams, KernelTable};
use crate::numerics::{psd_factor_with_floor, psd_project, SpectralFactor};
use crate::par::Exec;
use crate::semiclassical::{dissipation_coefficient, ExternalPotential, IntegratorConfig};
use crate::worldline::{contract, mdot, shell_project, FourVector, Jet, Worldline};

/// The operator w acting on a scalar f with covariant gradient ∂f:
/// z̈ f + ż^ν(ż_μ∂_ν − ż_ν∂_μ)f, returned with a raised index.
pub fn w_apply(jet: &Jet, value: f64, gradient: FourVector) -> FourVector {
    let v = jet.vel();
    jet.acc() * value + v * contract(v, gradient) - gradient.raise() * v.square()
}

/// Position, velocity and acceleration at one covariance node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Kinematics {
    pub z: FourVector,
    pub v: FourVector,
    pub a: FourVector,
}

impl From<Jet> for Kinematics {
    fn from(j: Jet) -> Self {
        Kinematics {
            z: j.pos(),
            v: j.vel(),
            a: j.acc(),
        }
    }
}

pub(crate) type Block = [[f64; 4]; 4];

/// One 4×4 block w_j^μ w_k^ν G^H between two nodes, scaled by `coupling`,
/// with a bound on its rounding error.
///
/// The gradient of G^H(σ) enters only through ∂ = 2y d/dσ. With `contact`
/// the term from differentiating y itself, −2G^H′(P_j P_k), is included.
pub(crate) fn covariance_block(j: &Kinematics, k: &Kinematics, cutoff: f64, coupling: f64, contact: bool) -> (Block, f64) {
    let y = j.z - k.z;
    let sigma = mdot(y, y);
    let (h0, h1, h2) = hadamard_sigma(sigma, cutoff);
    let yj = y - j.v * (mdot(j.v, y) / j.v.square());
    let yk = y - k.v * (mdot(k.v, y) / k.v.square());
    let mut c = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            let t = j.a[mu] * k.a[nu] * h0 + 2.0 * h1 * (j.a[mu] * yk[nu] - yj[mu] * k.a[nu]) - 4.0 * h2 * yj[mu] * yk[nu];
            c[mu][nu] = coupling * t;
        }
    }
    if contact {
        let metric = [1.0, -1.0, -1.0, -1.0];
        let proj = |v: FourVector, mu: usize, nu: usize| {
            let g = if mu == nu { metric[mu] } else { 0.0 };
            g - v[mu] * v[nu] / v.square()
        };
        for mu in 0..4 {
            for nu in 0..4 {
                let pp: f64 = (0..4).map(|l| proj(j.v, mu, l) * metric[l] * proj(k.v, l, nu)).sum();
                c[mu][nu] -= coupling * 2.0 * h1 * pp;
            }
        }
    }
    // rounding: y⊥ carries an absolute error of order ε|y|(1 + |v|²)
    let (aj, ak) = (j.a.norm(), k.a.norm());
    let yerr = |v: FourVector| y.norm() * (1.0 + v.norm().powi(2));
    let (pj, pk) = (yj.norm() + yerr(j.v), yk.norm() + yerr(k.v));
    let scale = aj * ak * h0.abs() + 2.0 * h1.abs() * (aj * pk + pj * ak) + 4.0 * h2.abs() * pj * pk;
    (c, 16.0 * f64::EPSILON * coupling.abs() * scale)
}

/// Covariance of the noise at selected nodes of a mean worldline.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    /// 4N×4N matrix indexed by (node, component).
    pub matrix: DMatrix<f64>,
    /// Particle owning each node; all zero for a single particle.
    pub particle: Vec<usize>,
    /// Worldline node indices.
    pub nodes: Vec<usize>,
    pub tau: Vec<f64>,
    pub velocities: Vec<FourVector>,
    /// Eigenvalues below this are rounding noise.
    pub floor: f64,
}

impl NoiseCovariance {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block(&self, j: usize, k: usize) -> Block {
        let mut b = [[0.0; 4]; 4];
        for (mu, row) in b.iter_mut().enumerate() {
            for (nu, x) in row.iter_mut().enumerate() {
                *x = self.matrix[(4 * j + mu, 4 * k + nu)];
            }
        }
        b
    }
}

/// Every `stride`-th node plus the last one.
pub fn stride_nodes(len: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 || len == 0 {
        return Err(Error::Config("noise stride and worldline length must be positive".into()));
    }
    let mut nodes: Vec<usize> = (0..len).step_by(stride).collect();
    if *nodes.last().unwrap() != len - 1 {
        nodes.push(len - 1);
    }
    Ok(nodes)
}

/// Assemble a symmetric block matrix from a node list; blocks on and
/// above the diagonal are computed, the rest mirrored.
pub(crate) fn assemble(kin: &[Kinematics], block: impl Fn(usize, usize) -> (Block, f64) + Sync, exec: Exec) -> (DMatrix<f64>, f64) {
    let n = kin.len();
    let rows = exec.map_range(n, |j| (j..n).map(|k| block(j, k)).collect::<Vec<_>>());
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    let mut bound = 0.0f64;
    for (j, row) in rows.into_iter().enumerate() {
        for (off, (b, e)) in row.into_iter().enumerate() {
            let k = j + off;
            bound = bound.max(e);
            for mu in 0..4 {
                for nu in 0..4 {
                    m[(4 * j + mu, 4 * k + nu)] = b[mu][nu];
                    m[(4 * k + nu, 4 * j + mu)] = b[mu][nu];
                }
            }
        }
    }
    (m, (4 * n) as f64 * bound)
}

/// Noise covariance e²ħ w^μ(z_j) w^ν(z_k) G^H on the given nodes.
pub fn noise_covariance(mean: &Worldline, nodes: &[usize], p: &FieldParams, exec: Exec) -> Result<NoiseCovariance> {
    covariance_with(mean, nodes, p, exec, false)
}

/// As [`noise_covariance`], also keeping the contact term from
/// differentiating the separation vector a second time.
pub fn noise_covariance_with_contact(mean: &Worldline, nodes: &[usize], p: &FieldParams, exec: Exec) -> Result<NoiseCovariance> {
    covariance_with(mean, nodes, p, exec, true)
}

fn covariance_with(mean: &Worldline, nodes: &[usize], p: &FieldParams, exec: Exec, contact: bool) -> Result<NoiseCovariance> {
    if nodes.is_empty() {
        return Err(Error::Config("covariance needs at least one node".into()));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) || *nodes.last().unwrap() >= mean.len() {
        return Err(Error::Config("covariance nodes must be increasing mean-worldline indices".into()));
    }
    let kin: Vec<Kinematics> = nodes.iter().map(|&i| mean.node(i).into()).collect();
    let coupling = p.e2() * p.hbar;
    let (matrix, floor) = assemble(&kin, |j, k| covariance_block(&kin[j], &kin[k], p.cutoff, coupling, contact), exec);
    Ok(NoiseCovariance {
        matrix,
        particle: vec![0; nodes.len()],
        nodes: nodes.to_vec(),
        tau: nodes.iter().map(|&i| mean.tau()[i]).collect(),
        velocities: kin.iter().map(|k| k.v).collect(),
        floor,
    })
}

/// How indefinite covariances are handled before sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsdMode {
    /// Reject negative eigenvalues beyond the clip tolerance.
    #[default]
    Strict,
    /// Drop the negative part of the spectrum.
    Project,
}

impl fmt::Display for PsdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsdMode::Strict => "strict",
            PsdMode::Project => "project",
        })
    }
}

/// Noise values on a subset of mean-worldline nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    pub nodes: Vec<usize>,
    pub tau: Vec<f64>,
    pub eta: Vec<FourVector>,
}

impl NoiseGrid {
    pub fn zeros(nodes: Vec<usize>, tau: Vec<f64>) -> Self {
        let eta = vec![FourVector::ZERO; nodes.len()];
        NoiseGrid { nodes, tau, eta }
    }

    /// Linear interpolation at proper time `t`; zero outside the grid.
    pub fn at(&self, t: f64) -> FourVector {
        let n = self.tau.len();
        if n == 0 || t < self.tau[0] || t > self.tau[n - 1] {
            return FourVector::ZERO;
        }
        let k = self.tau.partition_point(|&x| x <= t);
        if k == 0 || k == n {
            return self.eta[k.min(n) - 1];
        }
        let (i, j) = (k - 1, k);
        if self.tau[i] == t {
            return self.eta[i];
        }
        let w = (t - self.tau[i]) / (self.tau[j] - self.tau[i]);
        self.eta[i] * (1.0 - w) + self.eta[j] * w
    }
}

/// Spectral factor of a covariance, ready to draw samples.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    factor: SpectralFactor,
    nodes: Vec<usize>,
    tau: Vec<f64>,
    velocities: Vec<FourVector>,
}

impl NoiseSampler {
    pub fn new(c: &NoiseCovariance, clip_tol: f64, mode: PsdMode) -> Result<Self> {
        let factor = match mode {
            PsdMode::Strict => psd_factor_with_floor(&c.matrix, clip_tol, c.floor)?,
            PsdMode::Project => psd_project(&c.matrix, clip_tol, c.floor)?,
        };
        Ok(NoiseSampler {
            factor,
            nodes: c.nodes.clone(),
            tau: c.tau.clone(),
            velocities: c.velocities.clone(),
        })
    }

    pub fn factor(&self) -> &SpectralFactor {
        &self.factor
    }

    /// Sample `index` of the ensemble seeded by `seed`: a ChaCha20 stream
    /// keyed by the seed with the sample index as stream number.
    pub fn sample(&self, seed: u64, index: u64) -> NoiseGrid {
        let mut grid = NoiseGrid::zeros(self.nodes.clone(), self.tau.clone());
        let rank = self.factor.rank();
        if rank == 0 {
            return grid;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let xi: Vec<f64> = (0..rank).map(|_| rng.sample(StandardNormal)).collect();
        let x: DVector<f64> = self.factor.apply(&xi);
        for (j, (eta, v)) in grid.eta.iter_mut().zip(&self.velocities).enumerate() {
            let e = FourVector::new(x[4 * j], x[4 * j + 1], x[4 * j + 2], x[4 * j + 3]);
            // remove the rounding-level component along ż
            *eta = e - *v * (mdot(*v, e) / v.square());
        }
        grid
    }
}

/// Draw `count` samples with seed-derived streams.
pub fn sample_noise(c: &NoiseCovariance, seed: u64, count: usize, clip_tol: f64, mode: PsdMode, exec: Exec) -> Result<Vec<NoiseGrid>> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let sampler = NoiseSampler::new(c, clip_tol, mode)?;
    Ok(exec.map_range(count, |i| sampler.sample(seed, i as u64)))
}

fn node_velocity(mean: &Worldline, grid: &NoiseGrid, j: usize) -> Result<FourVector> {
    let i = grid.nodes[j];
    if i >= mean.len() {
        return Err(Error::Config(format!("noise node {i} outside the mean worldline")));
    }
    Ok(mean.velocities()[i])
}

/// Largest |ż·η| over samples and nodes.
pub fn ward_residual(samples: &[NoiseGrid], mean: &Worldline) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in samples {
        for (j, eta) in s.eta.iter().enumerate() {
            worst = worst.max(mdot(node_velocity(mean, s, j)?, *eta).abs());
        }
    }
    Ok(worst)
}

/// Largest |ż·η|/‖η‖ over samples and nonzero nodes.
pub fn ward_relative(samples: &[NoiseGrid], mean: &Worldline) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in samples {
        for (j, eta) in s.eta.iter().enumerate() {
            let n = eta.norm();
            if n > 0.0 {
                worst = worst.max(mdot(node_velocity(mean, s, j)?, *eta).abs() / n);
            }
        }
    }
    Ok(worst)
}

/// The empirical two-point function contracted with ż on its first index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorWard {
    /// Largest |ż_j·C(j, ·)| entry.
    pub max_contracted: f64,
    /// Largest ratio of a contracted entry to its Monte-Carlo standard error.
    pub max_ratio: f64,
}

/// Empirical covariance Σηηᵀ/N of zero-mean samples.
pub fn empirical_covariance(samples: &[NoiseGrid]) -> Result<DMatrix<f64>> {
    let first = samples.first().ok_or_else(|| Error::Config("no samples".into()))?;
    let dim = 4 * first.eta.len();
    let mut c = DMatrix::zeros(dim, dim);
    for s in samples {
        if s.eta.len() * 4 != dim {
            return Err(Error::Config("samples live on different grids".into()));
        }
        let x = DVector::from_iterator(dim, s.eta.iter().flat_map(|e| e.0));
        c.ger(1.0, &x, &x, 1.0);
    }
    Ok(c / samples.len() as f64)
}

/// Contract the empirical correlator with ż and compare each entry with
/// its standard error √((C_aa C_bb + C_ab²)/N), combined over the
/// contracted index.
pub fn correlator_ward(samples: &[NoiseGrid], mean: &Worldline) -> Result<CorrelatorWard> {
    let c = empirical_covariance(samples)?;
    let count = samples.len() as f64;
    let nodes = samples[0].eta.len();
    let metric = [1.0, -1.0, -1.0, -1.0];
    let mut out = CorrelatorWard {
        max_contracted: 0.0,
        max_ratio: 0.0,
    };
    for j in 0..nodes {
        let v = node_velocity(mean, &samples[0], j)?;
        for b in 0..4 * nodes {
            let mut value = 0.0;
            let mut var = 0.0;
            for mu in 0..4 {
                let a = 4 * j + mu;
                let w = metric[mu] * v[mu];
                value += w * c[(a, b)];
                var += w * w * (c[(a, a)] * c[(b, b)] + c[(a, b)] * c[(a, b)]) / count;
            }
            out.max_contracted = out.max_contracted.max(value.abs());
            let se = var.sqrt();
            if se > 0.0 {
                out.max_ratio = out.max_ratio.max(value.abs() / se);
            } else if value != 0.0 {
                out.max_ratio = f64::INFINITY;
            }
        }
    }
    Ok(out)
}

/// Coefficients of the linearized dissipation term at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoefficients {
    /// z̈² of the mean trajectory.
    pub accel_square: f64,
    /// g_μν − ż_μ z⃛_ν, both indices down.
    pub h1: Block,
    /// g_μν − ż_μ ż_ν, both indices down.
    pub h2: Block,
    pub g2: f64,
}

pub fn linearized_coefficients(jet: &Jet, table: &KernelTable, _p: &FieldParams) -> LinearCoefficients {
    let metric = [1.0, -1.0, -1.0, -1.0];
    let (vl, jl) = (jet.vel().raise(), jet.jerk().raise());
    let mut h1 = [[0.0; 4]; 4];
    let mut h2 = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            let g = if mu == nu { metric[mu] } else { 0.0 };
            h1[mu][nu] = g - vl[mu] * jl[nu];
            h2[mu][nu] = g - vl[mu] * vl[nu];
        }
    }
    LinearCoefficients {
        accel_square: jet.acc().square(),
        h1,
        h2,
        g2: table.at(jet.r).g2,
    }
}

/// Initial fluctuation at switch-on.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluctuationStart {
    pub dz: FourVector,
    pub dv: FourVector,
}

/// Fluctuation history on the mean-worldline grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluctuation {
    pub tau: Vec<f64>,
    pub dz: Vec<FourVector>,
    pub dv: Vec<FourVector>,
    pub da: Vec<FourVector>,
    /// Noise interpolated onto the grid.
    pub eta: Vec<FourVector>,
}

impl Fluctuation {
    /// Mean trajectory displaced by the fluctuation.
    pub fn perturbed(&self, mean: &Worldline) -> Result<Worldline> {
        let pos = mean.positions().iter().zip(&self.dz).map(|(z, d)| *z + *d).collect();
        let vel = mean.velocities().iter().zip(&self.dv).map(|(v, d)| *v + *d).collect();
        let acc = mean.accelerations().iter().zip(&self.da).map(|(a, d)| *a + *d).collect();
        Worldline::new(self.tau.clone(), pos, vel, acc)
    }
}

struct Linearized<'a> {
    mean: &'a Worldline,
    eta: &'a [FourVector],
    eta_rate: &'a [FourVector],
    potential: &'a ExternalPotential,
    params: &'a FieldParams,
    table: &'a KernelTable,
}

impl Linearized<'_> {
    /// Fluctuation acceleration at mean node `n`.
    fn accel(&self, n: usize, dz: FourVector, dv: FourVector) -> Result<FourVector> {
        let tau = self.mean.tau()[n];
        let jet = self.mean.interpolate(tau)?;
        let r = jet.r;
        let z = jet.pos();
        let m = self.table.at(r).m;
        if !(m > 0.0) {
            return Err(Error::Stability { r, mass: m });
        }
        let drive = self.potential.hessian_apply(z, dz).raise() + self.eta[n];
        if self.params.charge == 0.0 {
            return Ok((drive * (1.0 / m)).orthogonal_to(jet.vel()));
        }
        let b0 = drive * (1.0 / m);
        let third = (self.potential.hessian_apply(z, dv).raise() + self.eta_rate[n] - b0 * mass_rate(r, self.params)) * (1.0 / m);
        let c = linearized_coefficients(&jet, self.table, self.params);
        let v = jet.vel();
        let h1dv = dv - v * mdot(jet.jerk(), dv);
        let h2third = third - v * mdot(v, third);
        let kappa = dissipation_coefficient(c.g2);
        let diss = (h1dv * c.accel_square + h2third) * (0.5 * self.params.e2() * kappa);
        Ok(((drive + diss) * (1.0 / m)).orthogonal_to(v))
    }
}

/// Integrate the linearized Langevin equation along `mean`, driven by `noise`.
pub fn integrate_langevin(
    mean: &Worldline,
    noise: &NoiseGrid,
    potential: &ExternalPotential,
    p: &FieldParams,
    table: &KernelTable,
    cfg: &IntegratorConfig,
    start: FluctuationStart,
) -> Result<Fluctuation> {
    let n = mean.len();
    if noise.tau.is_empty() || noise.tau[0] != mean.start() || *noise.tau.last().unwrap() != mean.end() {
        return Err(Error::Config("noise grid does not span the mean worldline".into()));
    }
    if noise.nodes.iter().zip(&noise.tau).any(|(&i, &t)| i >= n || mean.tau()[i] != t) {
        return Err(Error::Config("noise grid nodes do not match the mean worldline".into()));
    }
    let tau = mean.tau();
    let eta: Vec<FourVector> = tau.iter().map(|&t| noise.at(t)).collect();
    let eta_rate: Vec<FourVector> = (0..n)
        .map(|i| {
            if n == 1 {
                return FourVector::ZERO;
            }
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (eta[b] - eta[a]) * (1.0 / (tau[b] - tau[a]))
        })
        .collect();
    let lin = Linearized {
        mean,
        eta: &eta,
        eta_rate: &eta_rate,
        potential,
        params: p,
        table,
    };
    let mut dz = vec![start.dz];
    let mut dv = vec![start.dv];
    let mut da = vec![lin.accel(0, start.dz, start.dv)?];
    for i in 0..n - 1 {
        let h = tau[i + 1] - tau[i];
        let (x, u, b) = (dz[i], dv[i], da[i]);
        let xp = x + u * h + b * (0.5 * h * h);
        let up = u + b * h;
        let bp = lin.accel(i + 1, xp, up)?;
        let mut un = u + (b + bp) * (0.5 * h);
        let xn = x + u * h + (b * (1.0 / 3.0) + bp * (1.0 / 6.0)) * (h * h);
        if cfg.shell_projection && un != FourVector::ZERO {
            let v = mean.velocities()[i + 1];
            un = shell_project(v + un, v)? - v;
        }
        let bn = lin.accel(i + 1, xn, un)?;
        if !xn.is_finite() || !un.is_finite() {
            return Err(Error::Stability {
                r: tau[i + 1] - tau[0],
                mass: f64::NAN,
            });
        }
        dz.push(xn);
        dv.push(un);
        da.push(bn);
    }
    Ok(Fluctuation {
        tau: tau.to_vec(),
        dz,
        dv,
        da,
        eta,
    })
}

/// Per-node ensemble statistics of noise and displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub count: usize,
    pub tau: Vec<f64>,
    pub mean_eta: Vec<FourVector>,
    pub var_eta: Vec<FourVector>,
    pub mean_dz: Vec<FourVector>,
    pub var_dz: Vec<FourVector>,
    /// Largest |ż·η|/‖η‖ over samples and noise nodes.
    pub ward_max: f64,
}

/// A Langevin ensemble: samples in index order and their statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub noise: Vec<NoiseGrid>,
    pub fluctuations: Vec<Fluctuation>,
    pub stats: EnsembleStats,
}

/// Sample noise and integrate the fluctuation for every ensemble member.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    mean: &Worldline,
    sampler: &NoiseSampler,
    potential: &ExternalPotential,
    p: &FieldParams,
    table: &KernelTable,
    cfg: &IntegratorConfig,
    seed: u64,
    count: usize,
    exec: Exec,
) -> Result<Ensemble> {
    if count == 0 {
        return Err(Error::Config("ensemble count must be at least 1".into()));
    }
    let members = exec.try_map_range(count, |i| {
        let noise = sampler.sample(seed, i as u64);
        let fl = integrate_langevin(mean, &noise, potential, p, table, cfg, FluctuationStart::default())?;
        Ok::<_, Error>((noise, fl))
    })?;
    let (noise, fluctuations): (Vec<_>, Vec<_>) = members.into_iter().unzip();
    let stats = ensemble_stats(mean, &noise, &fluctuations)?;
    Ok(Ensemble {
        noise,
        fluctuations,
        stats,
    })
}

fn moments(rows: impl Iterator<Item = FourVector> + Clone, count: f64) -> (FourVector, FourVector) {
    let mut m = FourVector::ZERO;
    for x in rows.clone() {
        m += x;
    }
    m = m * (1.0 / count);
    let mut v = FourVector::ZERO;
    for x in rows {
        let d = x - m;
        v += FourVector([d[0] * d[0], d[1] * d[1], d[2] * d[2], d[3] * d[3]]);
    }
    (m, v * (1.0 / count))
}

/// Statistics accumulated in sample-index order.
pub fn ensemble_stats(mean: &Worldline, noise: &[NoiseGrid], fl: &[Fluctuation]) -> Result<EnsembleStats> {
    let count = fl.len();
    if count == 0 || noise.len() != count {
        return Err(Error::Config("ensemble is empty or inconsistent".into()));
    }
    let n = mean.len();
    let c = count as f64;
    let mut s = EnsembleStats {
        count,
        tau: mean.tau().to_vec(),
        mean_eta: Vec::with_capacity(n),
        var_eta: Vec::with_capacity(n),
        mean_dz: Vec::with_capacity(n),
        var_dz: Vec::with_capacity(n),
        ward_max: ward_relative(noise, mean)?,
    };
    for i in 0..n {
        let (me, ve) = moments(fl.iter().map(|f| f.eta[i]), c);
        let (mz, vz) = moments(fl.iter().map(|f| f.dz[i]), c);
        s.mean_eta.push(me);
        s.var_eta.push(ve);
        s.mean_dz.push(mz);
        s.var_dz.push(vz);
    }
    Ok(s)
}

/// `sample,tau,eta_t,eta_x,eta_y,eta_z,dz_t,dz_x,dz_y,dz_z` rows.
pub fn ensemble_csv(e: &Ensemble) -> String {
    let mut s = String::from("sample,tau,eta_t,eta_x,eta_y,eta_z,dz_t,dz_x,dz_y,dz_z\n");
    for (k, f) in e.fluctuations.iter().enumerate() {
        for i in 0..f.tau.len() {
            let (h, d) = (f.eta[i], f.dz[i]);
            let _ = writeln!(
                s,
                "{k},{},{},{},{},{},{},{},{},{}",
                f.tau[i], h[0], h[1], h[2], h[3], d[0], d[1], d[2], d[3]
            );
        }
    }
    s
}

/// Per-node means and variances.
pub fn stats_csv(st: &EnsembleStats) -> String {
    let mut s = String::from("tau");
    for name in ["mean_eta", "var_eta", "mean_dz", "var_dz"] {
        for c in ["t", "x", "y", "z"] {
            let _ = write!(s, ",{name}_{c}");
        }
    }
    s.push('\n');
    for i in 0..st.tau.len() {
        let _ = write!(s, "{}", st.tau[i]);
        for col in [&st.mean_eta, &st.var_eta, &st.mean_dz, &st.var_dz] {
            for c in col[i].0 {
                let _ = write!(s, ",{c}");
            }
        }
        s.push('\n');
    }
    s
}

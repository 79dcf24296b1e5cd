//! Scenario files, validation, and run orchestration.
//!
//! A scenario is a UTF-8 text of `key = value` lines with dotted keys.
//! `#` starts a comment and `[section]` lines prefix the keys below them.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::checks::{format_table, invariant_suite, CheckOutcome};
use crate::error::{Error, Result};
use crate::kernels::{stability_bound, ConventionReport, FieldParams, KernelTable, Method};
use crate::multiparticle::{integrate_multiparticle, ParticleInit};
use crate::par::{with_threads, Exec};
use crate::semiclassical::{integrate_semiclassical, ExternalPotential, Formulation, IntegratorConfig};
use crate::stochastic::{ensemble_csv, noise_covariance, run_ensemble, stats_csv, stride_nodes, NoiseSampler, PsdMode};
use crate::worldline::FourVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Coeffs,
    Semiclassical,
    Langevin,
    Multiparticle,
    Check,
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunKind::Coeffs => "coeffs",
            RunKind::Semiclassical => "semiclassical",
            RunKind::Langevin => "langevin",
            RunKind::Multiparticle => "multiparticle",
            RunKind::Check => "check",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleConfig {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Every `stride`-th mean node carries a noise value.
    pub stride: usize,
    /// Relative eigenvalue clip tolerance for the spectral factor.
    pub clip: f64,
    pub psd: PsdMode,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: RunKind,
    pub params: FieldParams,
    pub method: Method,
    pub allow_unstable: bool,
    pub integrator: IntegratorConfig,
    pub potential: ExternalPotential,
    pub particles: Vec<ParticleInit>,
    pub ensemble: EnsembleConfig,
    pub noise: NoiseConfig,
    pub output_dir: PathBuf,
}

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::Scenario {
        key: key.to_string(),
        reason: reason.into(),
    }
}

struct Doc {
    entries: BTreeMap<String, String>,
}

impl Doc {
    fn parse(text: &str) -> Result<Doc> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| bad(&format!("line {}", n + 1), "malformed section header"))?;
                section = format!("{name}.");
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(&format!("line {}", n + 1), "expected `key = value`"))?;
            let key = format!("{section}{}", k.trim());
            if k.trim().is_empty() {
                return Err(bad(&format!("line {}", n + 1), "empty key"));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(bad(&key, "duplicate key"));
            }
        }
        Ok(Doc { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T> {
        match self.take(key) {
            Some(v) => v.parse().map_err(|_| bad(key, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| bad(key, "required key is missing")),
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(bad(key, format!("expected true or false, got `{v}`"))),
        }
    }

    fn vector(&mut self, key: &str, default: Option<FourVector>) -> Result<FourVector> {
        match self.take(key) {
            None => default.ok_or_else(|| bad(key, "required key is missing")),
            Some(v) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(bad(key, format!("expected four comma-separated components, got `{v}`")));
                }
                let mut out = FourVector::ZERO;
                for (slot, p) in out.0.iter_mut().zip(parts) {
                    *slot = p.parse().map_err(|_| bad(key, format!("cannot parse component `{p}`")))?;
                    if !slot.is_finite() {
                        return Err(bad(key, "components must be finite"));
                    }
                }
                Ok(out)
            }
        }
    }
}

fn fmt_vec(v: FourVector) -> String {
    format!("{},{},{},{}", v[0], v[1], v[2], v[3])
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    Scenario::parse(text, false)
}

impl Scenario {
    /// Parse and validate; `allow_unstable` overrides the document's flag.
    pub fn parse(text: &str, allow_unstable: bool) -> Result<Scenario> {
        let mut d = Doc::parse(text)?;
        let kind = match d.take("kind").as_deref() {
            Some("coeffs") => RunKind::Coeffs,
            Some("semiclassical") => RunKind::Semiclassical,
            Some("langevin") => RunKind::Langevin,
            Some("multiparticle") => RunKind::Multiparticle,
            Some("check") => RunKind::Check,
            Some(v) => return Err(bad("kind", format!("unknown run kind `{v}`"))),
            None => return Err(bad("kind", "required key is missing")),
        };
        let cutoff: f64 = d.num("field.cutoff", None)?;
        let charge: f64 = d.num("field.charge", None)?;
        let bare_mass: f64 = d.num("field.bare_mass", None)?;
        let hbar: f64 = d.num("field.hbar", Some(1.0))?;
        let params = FieldParams::with_hbar(cutoff, charge, bare_mass, hbar).map_err(|e| bad("field", e.to_string()))?;
        let method = match d.take("field.method").as_deref() {
            None | Some("closed-form") => Method::ClosedForm,
            Some("quadrature") => Method::Quadrature,
            Some(v) => return Err(bad("field.method", format!("expected closed-form or quadrature, got `{v}`"))),
        };
        let allow_unstable = d.boolean("field.allow_unstable", false)? || allow_unstable;
        let bound = stability_bound(&params);
        if !allow_unstable && cutoff >= bound {
            return Err(bad(
                "field.cutoff",
                format!("cutoff {cutoff} is at or above the stability bound 2m0/(a e^2) = {bound}; set field.allow_unstable to override"),
            ));
        }

        let defaults = IntegratorConfig::for_cutoff(cutoff, 1000);
        let step: f64 = d.num("grid.step", Some(defaults.step))?;
        let steps: usize = d.num("grid.steps", Some(defaults.steps))?;
        let order: usize = d.num("integrator.order", Some(defaults.order))?;
        let window: f64 = d.num("integrator.window", Some(defaults.window))?;
        let formulation = match d.take("integrator.formulation").as_deref() {
            None | Some("local") => Formulation::Local,
            Some("nonlocal") => Formulation::Nonlocal,
            Some(v) => return Err(bad("integrator.formulation", format!("expected local or nonlocal, got `{v}`"))),
        };
        let shell_projection = d.boolean("integrator.shell_projection", true)?;
        let integrator = IntegratorConfig {
            step,
            steps,
            order,
            window,
            formulation,
            shell_projection,
        };
        if !(step > 0.0) || step * cutoff > IntegratorConfig::MAX_STEP {
            return Err(bad(
                "grid.step",
                format!("step {step} must be positive with step x cutoff <= {}", IntegratorConfig::MAX_STEP),
            ));
        }
        if steps == 0 {
            return Err(bad("grid.steps", "at least one step is required"));
        }
        integrator.validate(cutoff).map_err(|e| bad("integrator", e.to_string()))?;

        let potential = match d.take("potential.kind").as_deref() {
            None | Some("none") => ExternalPotential::None,
            Some("linear") => ExternalPotential::Linear {
                gradient: d.vector("potential.gradient", None)?,
            },
            Some("harmonic") => {
                let center = d.vector("potential.center", Some(FourVector::ZERO))?;
                let stiffness: f64 = d.num("potential.stiffness", None)?;
                if !stiffness.is_finite() {
                    return Err(bad("potential.stiffness", "must be finite"));
                }
                ExternalPotential::Harmonic { center, stiffness }
            }
            Some(v) => return Err(bad("potential.kind", format!("expected none, linear or harmonic, got `{v}`"))),
        };

        let mut labels: Vec<usize> = Vec::new();
        for key in d.entries.keys() {
            if let Some(rest) = key.strip_prefix("particle.") {
                let (n, _) = rest.split_once('.').ok_or_else(|| bad(key, "expected particle.N.field"))?;
                let n: usize = n
                    .parse()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| bad(key, "particle index must be a positive integer"))?;
                if !labels.contains(&n) {
                    labels.push(n);
                }
            }
        }
        labels.sort_unstable();
        if labels.iter().enumerate().any(|(i, &n)| n != i + 1) {
            return Err(bad("particle", "particles must be numbered 1, 2, 3, ... without gaps"));
        }
        let mut particles = Vec::new();
        for n in labels {
            let key = |f: &str| format!("particle.{n}.{f}");
            let position = d.vector(&key("position"), Some(FourVector::ZERO))?;
            let velocity = d.vector(&key("velocity"), Some(FourVector::new(1.0, 0.0, 0.0, 0.0)))?;
            let q: f64 = d.num(&key("charge"), Some(charge))?;
            if (velocity.square() - 1.0).abs() > 1e-9 || !(velocity[0] > 0.0) {
                return Err(bad(
                    &key("velocity"),
                    format!(
                        "particle {n}: velocity {} is not unit future-timelike (v^2 = {})",
                        fmt_vec(velocity),
                        velocity.square()
                    ),
                ));
            }
            if !q.is_finite() {
                return Err(bad(&key("charge"), "must be finite"));
            }
            particles.push(ParticleInit {
                position,
                velocity,
                charge: q,
            });
        }
        let count: usize = d.num("ensemble.count", Some(1))?;
        let seed: u64 = d.num("ensemble.seed", Some(0))?;
        if count == 0 {
            return Err(bad("ensemble.count", "ensemble count must be at least 1"));
        }
        let stride: usize = d.num("noise.stride", Some(5))?;
        let clip: f64 = d.num("noise.clip", Some(crate::numerics::DEFAULT_CLIP_TOL))?;
        let psd = match d.take("noise.psd").as_deref() {
            None | Some("strict") => PsdMode::Strict,
            Some("project") => PsdMode::Project,
            Some(v) => return Err(bad("noise.psd", format!("expected strict or project, got `{v}`"))),
        };
        if stride == 0 {
            return Err(bad("noise.stride", "stride must be at least 1"));
        }
        if !(clip >= 0.0) || !clip.is_finite() {
            return Err(bad("noise.clip", "clip tolerance must be a nonnegative number"));
        }
        let output_dir = PathBuf::from(d.take("output.dir").unwrap_or_else(|| "out".into()));

        if let Some(key) = d.entries.keys().next() {
            return Err(bad(key, "unknown key"));
        }
        let needs_one = matches!(kind, RunKind::Semiclassical | RunKind::Langevin);
        if needs_one && particles.len() != 1 {
            return Err(bad(
                "particle",
                format!("{kind} runs need exactly one particle, got {}", particles.len()),
            ));
        }
        if kind == RunKind::Multiparticle && particles.is_empty() {
            return Err(bad("particle", "multiparticle runs need at least one particle"));
        }
        if kind == RunKind::Multiparticle && formulation != Formulation::Local {
            return Err(bad("integrator.formulation", "multiparticle runs use the local formulation"));
        }

        Ok(Scenario {
            kind,
            params,
            method,
            allow_unstable,
            integrator,
            potential,
            particles,
            ensemble: EnsembleConfig { count, seed },
            noise: NoiseConfig { stride, clip, psd },
            output_dir,
        })
    }

    /// Canonical document with every default written out.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let c = &self.integrator;
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "field.cutoff = {}", p.cutoff);
        let _ = writeln!(s, "field.charge = {}", p.charge);
        let _ = writeln!(s, "field.bare_mass = {}", p.bare_mass);
        let _ = writeln!(s, "field.hbar = {}", p.hbar);
        let _ = writeln!(s, "field.method = {}", self.method);
        let _ = writeln!(s, "field.allow_unstable = {}", self.allow_unstable);
        let _ = writeln!(s, "grid.step = {}", c.step);
        let _ = writeln!(s, "grid.steps = {}", c.steps);
        let _ = writeln!(s, "integrator.order = {}", c.order);
        let _ = writeln!(s, "integrator.window = {}", c.window);
        let _ = writeln!(s, "integrator.formulation = {}", c.formulation);
        let _ = writeln!(s, "integrator.shell_projection = {}", c.shell_projection);
        match self.potential {
            ExternalPotential::None => {
                let _ = writeln!(s, "potential.kind = none");
            }
            ExternalPotential::Linear { gradient } => {
                let _ = writeln!(s, "potential.kind = linear");
                let _ = writeln!(s, "potential.gradient = {}", fmt_vec(gradient));
            }
            ExternalPotential::Harmonic { center, stiffness } => {
                let _ = writeln!(s, "potential.kind = harmonic");
                let _ = writeln!(s, "potential.center = {}", fmt_vec(center));
                let _ = writeln!(s, "potential.stiffness = {stiffness}");
            }
        }
        for (i, q) in self.particles.iter().enumerate() {
            let n = i + 1;
            let _ = writeln!(s, "particle.{n}.position = {}", fmt_vec(q.position));
            let _ = writeln!(s, "particle.{n}.velocity = {}", fmt_vec(q.velocity));
            let _ = writeln!(s, "particle.{n}.charge = {}", q.charge);
        }
        let _ = writeln!(s, "ensemble.count = {}", self.ensemble.count);
        let _ = writeln!(s, "ensemble.seed = {}", self.ensemble.seed);
        let _ = writeln!(s, "noise.stride = {}", self.noise.stride);
        let _ = writeln!(s, "noise.clip = {}", self.noise.clip);
        let _ = writeln!(s, "noise.psd = {}", self.noise.psd);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        s
    }

    /// SHA-256 of the canonical echo without the output location, hex encoded.
    pub fn hash(&self) -> String {
        let echo = self.echo();
        let body: String = echo
            .lines()
            .filter(|l| !l.starts_with("output."))
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(body.as_bytes()))
    }
}

/// Overrides applied at run time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; the global pool when unset.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub kind: RunKind,
    pub files: Vec<PathBuf>,
    pub checks: Vec<CheckOutcome>,
    pub summary: String,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

/// Execute a scenario and write its outputs. Identical scenarios and seeds
/// produce byte-identical CSVs at any thread count.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let mut s = scenario.clone();
    if let Some(seed) = opts.seed {
        s.ensemble.seed = seed;
    }
    if let Some(dir) = &opts.out_dir {
        s.output_dir = dir.clone();
    }
    match opts.threads {
        Some(n) => with_threads(n, || execute(&s)),
        None => execute(&s),
    }
    .map_err(|e| e.context(format!("{} run {}", s.kind, &s.hash()[..12])))
}

fn metadata(s: &Scenario, extra: &[(String, String)]) -> Result<String> {
    let mut m = String::new();
    let p = &s.params;
    let _ = writeln!(m, "artifact = {}", env!("CARGO_PKG_NAME"));
    let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "scenario_hash = {}", s.hash());
    let _ = writeln!(m, "kind = {}", s.kind);
    let _ = writeln!(m, "seed = {}", s.ensemble.seed);
    let _ = writeln!(m, "seed_streams = chacha20 keyed by seed, stream number = sample index");
    let _ = writeln!(m, "step = {}", s.integrator.step);
    let _ = writeln!(m, "steps = {}", s.integrator.steps);
    let _ = writeln!(m, "cutoff = {}", p.cutoff);
    let _ = writeln!(m, "bare_mass = {}", p.bare_mass);
    let _ = writeln!(m, "charge = {}", p.charge);
    let _ = writeln!(m, "hbar = {}", p.hbar);
    let _ = writeln!(m, "formulation = {}", s.integrator.formulation);
    let _ = writeln!(m, "order = {}", s.integrator.order);
    let _ = writeln!(m, "method = {}", s.method);
    let _ = writeln!(m, "stability_bound = {}", stability_bound(p));
    for (k, v) in extra {
        let _ = writeln!(m, "{k} = {v}");
    }
    m.push_str(&ConventionReport::compute(p)?.to_lines());
    Ok(m)
}

fn execute(s: &Scenario) -> Result<RunReport> {
    let exec = Exec::Parallel;
    fs::create_dir_all(&s.output_dir).map_err(|e| Error::Io(format!("{}: {e}", s.output_dir.display())))?;
    let mut out = Writer {
        dir: &s.output_dir,
        files: Vec::new(),
    };
    let mut extra = Vec::new();
    let mut checks = Vec::new();
    let p = &s.params;
    let summary = match s.kind {
        RunKind::Coeffs => {
            let t = KernelTable::build(p, s.method, exec)?;
            out.write("coeffs.csv", &t.to_csv())?;
            format!("{} coefficient rows", t.r.len())
        }
        RunKind::Semiclassical => {
            let table = KernelTable::build(p, s.method, exec)?;
            let q = s.particles[0];
            let pp = FieldParams { charge: q.charge, ..*p };
            let table = if pp == *p {
                table
            } else {
                KernelTable::build(&pp, s.method, exec)?
            };
            let w = integrate_semiclassical(&pp, &table, &s.potential, q.position, q.velocity, &s.integrator)?;
            out.write("worldline.csv", &w.to_csv())?;
            format!("{} worldline nodes", w.len())
        }
        RunKind::Langevin => {
            let q = s.particles[0];
            let pp = FieldParams { charge: q.charge, ..*p };
            let table = KernelTable::build(&pp, s.method, exec)?;
            let mean = integrate_semiclassical(&pp, &table, &s.potential, q.position, q.velocity, &s.integrator)?;
            let nodes = stride_nodes(mean.len(), s.noise.stride)?;
            let cov = noise_covariance(&mean, &nodes, &pp, exec)?;
            let sampler = NoiseSampler::new(&cov, s.noise.clip, s.noise.psd)?;
            let e = run_ensemble(
                &mean,
                &sampler,
                &s.potential,
                &pp,
                &table,
                &s.integrator,
                s.ensemble.seed,
                s.ensemble.count,
                exec,
            )?;
            out.write("mean.csv", &mean.to_csv())?;
            out.write("ensemble.csv", &ensemble_csv(&e))?;
            out.write("stats.csv", &stats_csv(&e.stats))?;
            extra.push(("samples".into(), s.ensemble.count.to_string()));
            extra.push(("noise_nodes".into(), nodes.len().to_string()));
            extra.push(("noise_rank".into(), sampler.factor().rank().to_string()));
            extra.push(("noise_psd".into(), s.noise.psd.to_string()));
            extra.push(("ward_max".into(), format!("{:e}", e.stats.ward_max)));
            format!(
                "{} samples on {} noise nodes, Ward residual {:e}",
                s.ensemble.count,
                nodes.len(),
                e.stats.ward_max
            )
        }
        RunKind::Multiparticle => {
            let set = integrate_multiparticle(p, &s.particles, &s.potential, &s.integrator, exec)?;
            out.write("particles.csv", &set.to_csv())?;
            format!("{} particles", set.particles.len())
        }
        RunKind::Check => {
            checks = invariant_suite(p, s.ensemble.seed, exec);
            let table = format_table(&checks);
            out.write("check.txt", &table)?;
            table
        }
    };
    out.write("metadata.txt", &metadata(s, &extra)?)?;
    Ok(RunReport {
        kind: s.kind,
        files: out.files,
        checks,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "kind = semiclassical\nfield.cutoff = 1\nfield.bare_mass = 1\nfield.charge = 0.1\nparticle.1.velocity = 1,0,0,0\n";

    #[test]
    fn minimal_document_echoes_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.kind, RunKind::Semiclassical);
        assert_eq!(s.integrator.step, 0.02);
        let echo = s.echo();
        for key in [
            "grid.steps = 1000",
            "integrator.order = 2",
            "noise.psd = strict",
            "particle.1.position = 0,0,0,0",
            "ensemble.seed = 0",
        ] {
            assert!(echo.contains(key), "{key} missing from\n{echo}");
        }
        // the echo is itself a valid document with the same meaning
        assert_eq!(parse_scenario(&echo).unwrap(), s);
        assert_eq!(s.hash().len(), 64);
    }

    #[test]
    fn sections_and_comments() {
        let text = "kind = coeffs # table only\n[field]\ncutoff = 2\ncharge = 0.2\nbare_mass = 1\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.params.cutoff, 2.0);
    }

    #[test]
    fn null_velocity_names_the_particle() {
        let text = MINIMAL.replace("1,0,0,0", "1,1,0,0");
        match parse_scenario(&text) {
            Err(Error::Scenario { key, reason }) => {
                assert_eq!(key, "particle.1.velocity");
                assert!(reason.contains("particle 1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cutoff_above_bound() {
        let text = "kind = coeffs\nfield.cutoff = 10\nfield.bare_mass = 1\nfield.charge = 1\n";
        match parse_scenario(text) {
            Err(Error::Scenario { key, reason }) => {
                assert_eq!(key, "field.cutoff");
                assert!(reason.contains("4.87"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        assert!(Scenario::parse(text, true).unwrap().allow_unstable);
        assert!(parse_scenario(&format!("{text}field.allow_unstable = true\n")).is_ok());
    }

    #[test]
    fn rejections() {
        let cases = [
            (format!("{MINIMAL}color = red\n"), "color"),
            (format!("{MINIMAL}field.cutoff = 2\n"), "field.cutoff"),
            (MINIMAL.replace("kind = semiclassical", "kind = dance"), "kind"),
            (format!("{MINIMAL}grid.step = 0.1\n"), "grid.step"),
            (format!("{MINIMAL}particle.3.charge = 1\n"), "particle"),
            (format!("{MINIMAL}particle.2.charge = 1\n"), "particle"),
            (format!("{MINIMAL}potential.kind = linear\n"), "potential.gradient"),
            (format!("{MINIMAL}potential.gradient = 0,1,0,0\n"), "potential.gradient"),
            (format!("{MINIMAL}ensemble.count = 0\n"), "ensemble.count"),
            (format!("{MINIMAL}noise.psd = loose\n"), "noise.psd"),
            (
                format!("{MINIMAL}potential.kind = linear\npotential.gradient = 0,1,0\n"),
                "potential.gradient",
            ),
            ("kind = coeffs\nfield.cutoff = 1\n".to_string(), "field.charge"),
            ("kind = coeffs\nnot a pair\n".to_string(), "line 2"),
            // a section keeps prefixing until the next one
            (
                MINIMAL.replace("kind = semiclassical\n", "kind = semiclassical\n[grid]\nsteps = 10\n"),
                "field.cutoff",
            ),
        ];
        for (text, want) in cases {
            match parse_scenario(&text) {
                Err(Error::Scenario { key, .. }) => assert_eq!(key, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn coeffs_run_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let s = parse_scenario("kind = coeffs\nfield.cutoff = 1\nfield.charge = 0.3\nfield.bare_mass = 1\n").unwrap();
        let r = run(
            &s,
            &RunOptions {
                out_dir: Some(dir.path().to_path_buf()),
                ..Default::default()
            },
        )
        .unwrap();
        let csv = fs::read_to_string(dir.path().join("coeffs.csv")).unwrap();
        assert!(csv.starts_with("r,h,g1,g2,g3,m\n"));
        assert_eq!(csv.lines().count(), 1 + KernelTable::NODES);
        let meta = fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
        assert!(meta.contains(&format!("scenario_hash = {}", s.hash())));
        assert!(meta.contains("convention.g2_factor = "));
        assert_eq!(r.files.len(), 2);
    }

    #[test]
    fn langevin_runs_repeat_exactly() {
        let text = "kind = langevin\nfield.cutoff = 1\nfield.charge = 0.5\nfield.bare_mass = 1\ngrid.steps = 100\n\
                    potential.kind = linear\npotential.gradient = 0,0.05,0,0\nparticle.1.velocity = 1,0,0,0\nensemble.count = 2\nensemble.seed = 9\n";
        let s = parse_scenario(text).unwrap();
        let read = |threads: usize| {
            let dir = tempfile::tempdir().unwrap();
            run(
                &s,
                &RunOptions {
                    out_dir: Some(dir.path().to_path_buf()),
                    threads: Some(threads),
                    ..Default::default()
                },
            )
            .unwrap();
            ["mean.csv", "ensemble.csv", "stats.csv"].map(|f| fs::read(dir.path().join(f)).unwrap())
        };
        let a = read(1);
        assert_eq!(a, read(1));
        assert_eq!(a, read(4));
        let dir = tempfile::tempdir().unwrap();
        run(
            &s,
            &RunOptions {
                seed: Some(10),
                out_dir: Some(dir.path().to_path_buf()),
                threads: Some(1),
            },
        )
        .unwrap();
        assert_ne!(fs::read(dir.path().join("ensemble.csv")).unwrap(), a[1]);
    }

    #[test]
    fn run_errors_carry_context() {
        let text = "kind = semiclassical\nfield.cutoff = 1\nfield.charge = 0.5\nfield.bare_mass = 1\nparticle.1.velocity = 1,0,0,0\n";
        let mut s = parse_scenario(text).unwrap();
        s.output_dir = PathBuf::from("/proc/definitely/not/writable");
        let e = run(&s, &RunOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Context { .. }));
        assert!(!e.is_validation());
        assert!(e.to_string().starts_with("semiclassical run "));
    }
}

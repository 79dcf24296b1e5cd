use scalar_ald::kernels::{FieldParams, KernelTable, Method};
use scalar_ald::multiparticle::{integrate_multiparticle, ParticleInit};
use scalar_ald::par::Exec;
use scalar_ald::semiclassical::{integrate_semiclassical, ExternalPotential, Formulation, IntegratorConfig};
use scalar_ald::stochastic::{noise_covariance, run_ensemble, stride_nodes, NoiseSampler, PsdMode};
use scalar_ald::worldline::{shell_residual, FourVector};

fn setup(charge: f64) -> (FieldParams, KernelTable) {
    let p = FieldParams::new(1.0, charge, 1.0).unwrap();
    let t = KernelTable::build(&p, Method::ClosedForm, Exec::Sequential).unwrap();
    (p, t)
}

#[test]
fn local_and_nonlocal_runs_track_each_other() {
    let (p, table) = setup(0.3);
    let pot = ExternalPotential::Linear {
        gradient: FourVector::new(0.0, 0.02, 0.0, 0.0),
    };
    let rest = FourVector::new(1.0, 0.0, 0.0, 0.0);
    let mut cfg = IntegratorConfig::for_cutoff(1.0, 600);
    let local = integrate_semiclassical(&p, &table, &pot, FourVector::ZERO, rest, &cfg).unwrap();
    cfg.formulation = Formulation::Nonlocal;
    let history = integrate_semiclassical(&p, &table, &pot, FourVector::ZERO, rest, &cfg).unwrap();
    let last = local.len() - 1;
    let gap = (local.positions()[last] - history.positions()[last]).max_abs();
    let travelled = local.positions()[last][1].abs();
    assert!(travelled > 1e-2, "{travelled}");
    assert!(gap < 1e-2 * travelled, "gap {gap} after moving {travelled}");
    assert!(shell_residual(&history) < 1e-9 * history.len() as f64);
}

#[test]
fn sequential_and_parallel_ensembles_agree() {
    let (p, table) = setup(0.5);
    let pot = ExternalPotential::Harmonic {
        center: FourVector::ZERO,
        stiffness: 0.02,
    };
    let cfg = IntegratorConfig::for_cutoff(1.0, 200);
    let mean = integrate_semiclassical(
        &p,
        &table,
        &pot,
        FourVector::new(0.0, 1.0, 0.0, 0.0),
        FourVector::new(1.0, 0.0, 0.0, 0.0),
        &cfg,
    )
    .unwrap();
    let nodes = stride_nodes(mean.len(), 5).unwrap();
    let run = |exec| {
        let c = noise_covariance(&mean, &nodes, &p, exec).unwrap();
        let s = NoiseSampler::new(&c, 1e-12, PsdMode::Project).unwrap();
        run_ensemble(&mean, &s, &pot, &p, &table, &cfg, 3, 6, exec).unwrap()
    };
    let a = run(Exec::Sequential);
    let b = run(Exec::Parallel);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.noise.len(), 6);
    assert!(a.stats.ward_max < 1e-10);
}

#[test]
fn single_particle_set_matches_semiclassical() {
    let (p, table) = setup(0.4);
    let pot = ExternalPotential::Linear {
        gradient: FourVector::new(0.0, 0.0, 0.03, 0.0),
    };
    let cfg = IntegratorConfig::for_cutoff(1.0, 300);
    let v = FourVector::new(1.25, 0.75, 0.0, 0.0);
    let one = integrate_semiclassical(&p, &table, &pot, FourVector::ZERO, v, &cfg).unwrap();
    let set = integrate_multiparticle(
        &p,
        &[ParticleInit {
            position: FourVector::ZERO,
            velocity: v,
            charge: 0.4,
        }],
        &pot,
        &cfg,
        Exec::Parallel,
    )
    .unwrap();
    assert_eq!(set.particles[0].worldline.positions(), one.positions());
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sqsdp::outer::{self, HessianMode, SolveStatus, SolverConfig};
use sqsdp::problems;

#[test]
fn equality_problem_converges_within_six_iterations() {
    let spec = problems::builtin("nondegenerate-2x2").unwrap();
    let vstar = spec.reference_point().unwrap();
    let cfg = SolverConfig {
        tol_sigma: 1e-12,
        ..Default::default()
    };
    for seed in 0..20 {
        let v0 = outer::perturb(vstar, 1e-2, &mut ChaCha8Rng::seed_from_u64(seed));
        let rep = outer::run(&spec, &v0, &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::KktReached);
        assert!(rep.iterations() <= 6, "seed {seed}: {} iterations", rep.iterations());
        assert!(rep.final_sigma() <= 1e-12);
    }
}

#[test]
fn starting_at_the_reference_stops_immediately() {
    for spec in problems::registry() {
        let vstar = spec.reference_point().unwrap();
        let rep = outer::run(&spec, vstar, &SolverConfig::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::KktReached);
        assert_eq!(rep.history.len(), 1);
        assert_eq!(rep.iterations(), 0);
    }
}

#[test]
fn finite_difference_hessian_tracks_the_exact_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for spec in problems::registry() {
        let vstar = spec.reference_point().unwrap();
        for _ in 0..5 {
            let v = outer::perturb(vstar, 0.5, &mut rng);
            let exact = outer::hessian(&spec, &v, 1.0, HessianMode::Exact);
            let fd = outer::hessian(&spec, &v, 1.0, HessianMode::FiniteDifference);
            let zero = outer::hessian(&spec, &v, 1.0, HessianMode::Perturbed { exponent: 1.0, scale: 0.0 });
            assert!((&fd - &exact).norm() <= 1e-4 * (1.0 + exact.norm()), "{}", spec.id);
            assert_eq!(zero, exact);
        }
    }
}

#[test]
fn degenerate_problems_converge_under_every_hessian_mode() {
    let modes = [
        HessianMode::Exact,
        HessianMode::FiniteDifference,
        HessianMode::Perturbed { exponent: 0.5, scale: 1.0 },
    ];
    for id in ["scalar-degenerate", "beta-2x2", "nonlinear-3x3"] {
        let spec = problems::builtin(id).unwrap();
        let vstar = spec.reference_point().unwrap();
        for mode in modes {
            let v0 = outer::perturb(vstar, 1e-2, &mut ChaCha8Rng::seed_from_u64(3));
            let cfg = SolverConfig {
                hessian: mode,
                ..Default::default()
            };
            let rep = outer::run_with_reference(&spec, &v0, &cfg, Some(vstar)).unwrap();
            assert_eq!(rep.status, SolveStatus::KktReached, "{id} {mode:?}");
            assert!(rep.final_point.dist(vstar) <= 1e-8, "{id} {mode:?}");
        }
    }
}

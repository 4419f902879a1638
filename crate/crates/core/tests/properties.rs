use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sqsdp::model::{self, PrimalDualPoint};
use sqsdp::problems;
use sqsdp::subqp::StabilizedSubproblem;
use sqsdp::symkernel::{self, SymMat};

fn sym(d: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| SymMat::new(DMatrix::from_vec(d, d, v)))
}

fn vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(DVector::from_vec)
}

proptest! {
    #[test]
    fn projection_is_a_moreau_split(m in (1usize..=5).prop_flat_map(sym)) {
        let p = symkernel::proj_psd(&m).unwrap();
        let q = symkernel::proj_psd(&m.scale(-1.0)).unwrap();
        let scale = 1.0 + m.frob_norm();
        prop_assert!((&(&p - &q) - &m).frob_norm() <= 1e-12 * scale);
        prop_assert!(p.inner(&q).abs() <= 1e-12 * scale * scale);
        prop_assert!(symkernel::min_eigenvalue(&p).unwrap() >= -1e-12 * scale);
        prop_assert!((&symkernel::proj_psd(&p).unwrap() - &p).frob_norm() <= 1e-12 * scale);
    }

    #[test]
    fn svec_preserves_inner_products(a in (1usize..=5).prop_flat_map(|d| (sym(d), sym(d)))) {
        let (a, b) = a;
        let lhs = a.svec().dot(&b.svec());
        prop_assert!((lhs - a.inner(&b)).abs() <= 1e-12 * (1.0 + a.frob_norm() * b.frob_norm()));
        prop_assert!((&SymMat::from_svec(a.dim(), a.svec().as_slice()) - &a).frob_norm() <= 1e-14 * (1.0 + a.frob_norm()));
    }

    #[test]
    fn registry_operators_satisfy_the_adjoint_identity(
        idx in 0usize..6,
        seed in any::<u64>(),
    ) {
        let spec = &problems::registry()[idx % problems::registry_ids().len()];
        let dims = spec.dims;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        use rand::Rng;
        let x = DVector::from_fn(dims.n, |_, _| rng.random_range(-1.0..1.0));
        let u = DVector::from_fn(dims.n, |_, _| rng.random_range(-1.0..1.0));
        let w = SymMat::new(DMatrix::from_fn(dims.d, dims.d, |_, _| rng.random_range(-1.0..1.0)));
        let au = model::apply_a(spec, &x, &u).unwrap();
        let atw = model::apply_a_adjoint(spec, &x, &w).unwrap();
        prop_assert!((au.inner(&w) - u.dot(&atw)).abs() <= 1e-12 * (1.0 + au.frob_norm() * w.frob_norm()));
    }

    #[test]
    fn stabilized_point_is_feasible_for_any_sigma(
        x in (1usize..=4).prop_flat_map(|d| (sym(d), sym(d))),
        g in vector(2),
        log_sigma in -10.0f64..2.0,
    ) {
        let (xv, z) = x;
        let d = xv.dim();
        let sp = StabilizedSubproblem {
            grad_f: DVector::zeros(1),
            h: DMatrix::identity(1, 1),
            g_val: g.clone(),
            jac_g: DMatrix::zeros(1, 2),
            x_val: xv,
            a_ops: vec![SymMat::zeros(d)],
            sigma: 10f64.powf(log_sigma),
            y_ref: DVector::zeros(2),
            z_ref: z,
            nu: None,
        }
        .validated()
        .unwrap();
        let w = sp.feasible_point().unwrap();
        let r = sp.constraint_residuals(&w).unwrap();
        let scale = 1.0 + g.norm() + sp.x_val.frob_norm() + sp.z_ref.frob_norm();
        prop_assert!(r.equality <= 1e-12 * scale, "equality {}", r.equality);
        prop_assert!(r.conic <= 1e-12 * scale, "conic {}", r.conic);
    }

    #[test]
    fn kkt_residual_vanishes_at_the_reference_but_not_nearby(seed in any::<u64>(), radius in 1e-6f64..1e-1) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for spec in problems::registry() {
            let vstar = spec.reference_point().unwrap();
            prop_assert!(model::kkt_residual(&spec, vstar).unwrap() <= 1e-12);
            let v = sqsdp::outer::perturb(vstar, radius, &mut rng);
            prop_assert!((v.dist(vstar) - radius).abs() <= 1e-12 * radius.max(1.0));
            prop_assert!(model::kkt_residual(&spec, &v).unwrap() > 0.0);
        }
    }
}

#[test]
fn sum_norm_is_a_norm_on_points() {
    let a = PrimalDualPoint::new(
        DVector::from_vec(vec![3.0, 4.0]),
        DVector::from_vec(vec![-1.0]),
        SymMat::from_diagonal(&[0.0, 2.0]),
    );
    assert_eq!(a.norm(), 5.0 + 1.0 + 2.0);
    assert_eq!(a.dist(&a), 0.0);
}

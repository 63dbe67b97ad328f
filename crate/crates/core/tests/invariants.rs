//! Property tests of module invariants on small random instances.

use std::sync::{Arc, OnceLock};

use faer::{c64, Mat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hallcond::config::RunConfig;
use hallcond::fock::{FockOperator, FockSpace};
use hallcond::interaction::{commutator_interaction, Interaction};
use hallcond::lattice::{Axis, Boundary, Lattice, Region, Site};
use hallcond::lga::{random_circuit, tracial_defect, GateKind};
use hallcond::models::{build_interaction, quadratic_kernel, ModelKind, ModelSpec};
use hallcond::neass::{linear_response_scan_free, switching_integral, SwitchingFunction};
use hallcond::odmap::{od_observable_spectral, OdContext};
use hallcond::properties::{conditional_expectation_checks, disjoint_commutation_check, local_samples};
use hallcond::spectral::{fermi_sea, ground_state};
use hallcond::weightfn::{build_weight, WeightParams};

fn cluster() -> &'static OdContext {
    static CTX: OnceLock<OdContext> = OnceLock::new();
    CTX.get_or_init(|| {
        let lat = Lattice::new(3, 2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 0.5, mu: 0.3 }), &space)
            .unwrap();
        let gs = ground_state(&h, Default::default()).unwrap();
        let w = Arc::new(build_weight(WeightParams::new(gs.gap.min(1.0))).unwrap());
        OdContext::many_body(&h, w, 1e-8).unwrap()
    })
}

fn total_number(space: &Arc<FockSpace>) -> FockOperator {
    (0..space.n_modes()).fold(FockOperator::zero(space), |acc, m| acc.add(&FockOperator::mode_number(space, m)))
}

fn arb_model() -> impl Strategy<Value = (ModelSpec, usize)> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|u| (ModelSpec::new(ModelKind::QiWuZhang { u }), 2)),
        (0.5f64..1.5, 0.0f64..0.5, 0.0f64..std::f64::consts::PI, -1.0f64..1.0)
            .prop_map(|(t1, t2, phi, m)| (ModelSpec::new(ModelKind::Haldane { t1, t2, phi, m }), 2)),
        (1i64..3, 3i64..5).prop_map(|(p, q)| (ModelSpec::new(ModelKind::Hofstadter { p, q }), 1)),
        (0.5f64..1.5, 0.0f64..1.0, -0.5f64..0.5)
            .prop_map(|(t, v, mu)| (ModelSpec::new(ModelKind::InteractingCluster { t, v, mu }), 1)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn model_terms_commute_with_particle_number((spec, n_orb) in arb_model(), w in 0.0f64..0.5, seed in 0u64..1000) {
        let lat = Lattice::new(2, 2, Boundary::Open, n_orb).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&spec.with_disorder(w, seed), &space).unwrap();
        let n = total_number(&space);
        for (_, op) in h.terms() {
            prop_assert_eq!(op.commutator_full(&n).max_abs(), 0.0);
            prop_assert!(op.hermiticity_defect() <= 1e-14);
        }
    }

    #[test]
    fn conditional_expectation_suite(seed in 0u64..10_000) {
        let lat = Lattice::new(3, 2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        for c in conditional_expectation_checks(&space, 2, seed).unwrap() {
            prop_assert!(c.pass, "{} = {:e}", c.name, c.value);
        }
        let d = disjoint_commutation_check(&space, 4, seed);
        prop_assert!(d.pass, "disjoint commutator {:e}", d.value);
    }

    #[test]
    fn liouvillian_is_sum_of_local_terms(seed in 0u64..10_000) {
        let h = cluster().hamiltonian();
        for a in local_samples(h.space(), 3, false, seed) {
            let direct = h.liouvillian(&a);
            let summed = h.local_terms().iter().fold(FockOperator::zero(h.space()), |acc, t| acc.add(&t.commutator_full(&a)));
            prop_assert!(direct.sub(&summed).opnorm() <= 1e-12 * (1.0 + direct.opnorm()));
        }
    }

    #[test]
    fn commutator_interaction_is_gauge_invariant(shift in 0i64..=1, axis in 0usize..2) {
        let h = cluster().hamiltonian();
        let lam = Interaction::switch(h.space(), Axis::from_index(axis + 1).unwrap(), if axis == 1 { shift - 1 } else { shift }).unwrap();
        let c = commutator_interaction(h, &lam).unwrap();
        let n = total_number(h.space());
        for (_, op) in c.terms() {
            prop_assert!(op.commutator_full(&n).max_abs() <= 1e-14);
            prop_assert!(op.hermiticity_defect() <= 1e-14);
        }
    }

    #[test]
    fn ground_state_is_invariant(seed in 0u64..10_000) {
        let ctx = cluster();
        let gs = ctx.ground_state().unwrap();
        for a in local_samples(ctx.space(), 4, false, seed) {
            let v = ctx.hamiltonian().liouvillian(&a).expectation(&gs.state).norm();
            prop_assert!(v <= 1e-10 * (1.0 + a.opnorm()), "{v:e}");
        }
    }

    #[test]
    fn off_diagonal_property(seed in 0u64..10_000) {
        let ctx = cluster();
        let gs = ctx.ground_state().unwrap();
        let s = local_samples(ctx.space(), 4, false, seed);
        for pair in s.chunks(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let od = od_observable_spectral(ctx, a).unwrap();
            let lhs = a.commutator_full(b).expectation(&gs.state);
            let rhs = od.commutator_full(b).expectation(&gs.state);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + a.opnorm() * b.opnorm()));
            // the diagonal remainder has the same expectation and no commutator response
            let di = a.sub(&od);
            prop_assert!((di.expectation(&gs.state) - a.expectation(&gs.state)).norm() <= 1e-12);
            prop_assert!(di.commutator_full(b).expectation(&gs.state).norm() <= 1e-12 * (1.0 + a.opnorm() * b.opnorm()));
        }
    }

    #[test]
    fn fermi_sea_matches_ground_state(u in 0.3f64..1.7, seed in 0u64..10_000) {
        let lat = Lattice::new(2, 2, Boundary::Open, 2).unwrap();
        let spec = ModelSpec::new(ModelKind::QiWuZhang { u }).with_fermi_level(0.05);
        let space = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&spec, &space).unwrap();
        let kernel = quadratic_kernel(&spec, &lat).unwrap();
        let sea = fermi_sea(&kernel, 0.0).unwrap();
        let gs = ground_state(&h, Default::default()).unwrap();
        prop_assert_eq!(gs.particle_number, sea.filled);
        let p = &sea.projection;
        prop_assert!((p * p - p).norm_max() <= 1e-10);
        prop_assert!((p - p.adjoint()).norm_max() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = lat.n_modes();
        let a = Mat::from_fn(d, d, |_, _| c64::new(rand::Rng::random::<f64>(&mut rng) - 0.5, rand::Rng::random::<f64>(&mut rng) - 0.5));
        let k = Mat::from_fn(d, d, |i, j| a[(i, j)] + a[(j, i)].conj());
        let modes: Vec<usize> = (0..d).collect();
        let mb = FockOperator::quadratic(&space, &modes, &k).expectation(&gs.state);
        prop_assert!((mb - sea.expectation(&k)).norm() <= 1e-9);
    }

    #[test]
    fn automorphism_preserves_products_adjoints_and_trace(seed in 0u64..10_000) {
        let space = cluster().space().clone();
        let u = random_circuit(&space, 2, 0.8, GateKind::Generic, seed).unwrap().unitary().unwrap();
        let s = local_samples(&space, 2, false, seed ^ 0x5eed);
        let (x, y) = (&s[0], &s[1]);
        let al = |z: &FockOperator| z.conjugate_by(&u);
        prop_assert!(al(&x.mul(y)).sub(&al(x).mul(&al(y))).max_abs() <= 1e-12);
        prop_assert!(al(&x.adjoint()).sub(&al(x).adjoint()).max_abs() <= 1e-12);
        prop_assert!(tracial_defect(&u, &[x.clone(), y.clone(), x.mul(y)]) <= 1e-12);
    }

    #[test]
    fn switching_functions_stay_in_range(s in 0.0f64..=1.0) {
        let ne = SwitchingFunction::ne().value(s);
        let cp = SwitchingFunction::cp().value(s);
        prop_assert!((0.0..=1.0).contains(&ne));
        prop_assert!(cp >= 0.0);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), u in 0.1f64..3.0, l in 4usize..40, gap in 1e-6f64..1.0, order in 2usize..9) {
        let src = format!(
            "rng_seed = {seed}\n[model]\nkind = \"qi_wu_zhang\"\nu = {u}\n[lattice]\nl1 = {l}\nl2 = {l}\nn_orb = 2\n\
             [weight]\nsmoothness_order = {order}\n[tolerances]\ngap = {gap}\n"
        );
        let cfg = RunConfig::from_toml(&src).unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(cfg, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn filter_identity_on_resolved_transitions(g in 0.3f64..3.0, x in 1.0f64..40.0) {
        let w = build_weight(WeightParams::new(g)).unwrap();
        prop_assert!((w.phi_quad(x * g) - 1.0).abs() <= 1e-6);
        prop_assert!((w.phi_quad(-x * g) - 1.0).abs() <= 1e-6);
        prop_assert_eq!(w.phi(0.0), 0.0);
        prop_assert_eq!(w.phi_quad(0.0), 0.0);
    }
}

#[test]
fn switching_function_endpoints() {
    let (ne, cp) = (SwitchingFunction::ne(), SwitchingFunction::cp());
    assert_eq!(ne.value(0.0), 0.0);
    assert_eq!(ne.value(1.0), 1.0);
    assert_eq!(cp.value(0.0), 0.0);
    assert_eq!(cp.value(1.0), 0.0);
    assert!((switching_integral(cp, 4000) - 1.0).abs() < 1e-9);
}

#[test]
fn zero_eps_gives_zero_response() {
    let lat = Lattice::new(10, 10, Boundary::Open, 2).unwrap();
    let k = quadratic_kernel(&ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }), &lat).unwrap();
    let scan = linear_response_scan_free(&k, &lat, 0.0, Site::new(0, 0), &[0.0, 0.01], 3).unwrap();
    assert_eq!(scan.delta_j[0], 0.0);
    assert!(scan.delta_j[1] != 0.0);
}

#[test]
fn circuit_support_stays_within_depth() {
    let lat = Lattice::new(4, 2, Boundary::Open, 1).unwrap();
    let space = FockSpace::new(&lat).unwrap();
    let c = random_circuit(&space, 2, 0.8, GateKind::Generic, 11).unwrap();
    let u = c.unitary().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in [0, 6] {
        let a = FockOperator::random_local(&space, &Region::from_indices([i]), true, &mut rng);
        let grown = lat.box_region(lat.site(i), c.support_growth());
        assert!(a.conjugate_by(&u).with_support(lat.whole()).is_supported_in(&grown, 1e-12));
    }
}

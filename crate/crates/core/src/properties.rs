//! The property suite behind `verify_all`: conditional expectations,
//! commutator bounds, resummation identities, the gap inequality, the weight
//! function, the off-diagonal maps and invariance under automorphisms.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conductance::ConductanceOptions;
use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockSpace};
use crate::interaction::{commutator_interaction, Builtin, Interaction};
use crate::lattice::{Axis, Region, Site};
use crate::lga::{
    build_lga, conductance_invariance_test, gauge_circuit, random_circuit, tracial_defect, GateKind, Generator, LgaSpec,
};
use crate::linalg;
use crate::odmap::{
    diagonal_part, od_interaction, od_observable_quadrature, od_observable_spectral, shells, OdContext,
};
use crate::spectral::verify_gap_inequality;
use crate::weightfn::{verify_weight, WeightFunction};

/// Largest many-body cluster the suite accepts.
pub const MAX_SUITE_SITES: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tol: f64,
}

fn check(group: &str, name: &str, value: f64, tol: f64) -> Check {
    Check { group: group.into(), name: name.into(), pass: value <= tol, value, tol }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    /// Group name to PASS/FAIL.
    pub matrix: BTreeMap<String, bool>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn from_checks(checks: Vec<Check>) -> Self {
        let mut matrix: BTreeMap<String, bool> = BTreeMap::new();
        for c in &checks {
            let e = matrix.entry(c.group.clone()).or_insert(true);
            *e &= c.pass;
        }
        let pass = checks.iter().all(|c| c.pass);
        SuiteReport { checks, matrix, pass }
    }

    pub fn group(&self, name: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.group == name).collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random instances for the conditional-expectation properties.
    pub expectation_instances: usize,
    /// Random instances for the commutator bound.
    pub bound_instances: usize,
    /// Random local observables for the state-dependent checks.
    pub samples: usize,
    pub quad_tol: f64,
    pub degeneracy_tol: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            expectation_instances: 16,
            bound_instances: 200,
            samples: 8,
            quad_tol: 1e-6,
            degeneracy_tol: 1e-8,
        }
    }
}

fn random_site(space: &FockSpace, rng: &mut impl Rng) -> Site {
    let lat = space.lattice();
    lat.site(rng.random_range(0..lat.n_sites()))
}

/// Random local observables on boxes of radius 1 around random sites.
pub fn local_samples(space: &Arc<FockSpace>, n: usize, gauge_invariant: bool, seed: u64) -> Vec<FockOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = space.lattice().clone();
    (0..n)
        .map(|_| {
            let x = random_site(space, &mut rng);
            FockOperator::random_local(space, &lat.box_region(x, 1), gauge_invariant, &mut rng)
        })
        .collect()
}

/// Unitality, positivity, the module property, composition, gauge
/// preservation and contraction of `E_M`, as worst relative deviations.
pub fn conditional_expectation_checks(space: &Arc<FockSpace>, instances: usize, seed: u64) -> Result<Vec<Check>> {
    let lat = space.lattice().clone();
    if lat.n_sites() < 3 {
        return Err(Error::Param("conditional-expectation checks need at least 3 sites".into()));
    }
    let m = Region::from_indices([0, 1]);
    let m2 = Region::from_indices([1, 2]);
    let id = FockOperator::identity(space);
    let total_n = Interaction::builtin(Builtin::Number, space)?.total();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 6];
    for _ in 0..instances {
        let a = FockOperator::random_local(space, &m, true, &mut rng);
        let b = FockOperator::random_local(space, &lat.whole(), true, &mut rng);
        let c = FockOperator::random_local(space, &m, true, &mut rng);
        let nb = b.opnorm();
        let eb = b.conditional_expectation(&m)?;

        worst[0] = worst[0].max(id.conditional_expectation(&m)?.sub(&id).opnorm());

        let pos = b.adjoint().mul(&b);
        let (vals, _) = linalg::eigh(pos.conditional_expectation(&m)?.to_dense().as_ref())?;
        worst[1] = worst[1].max((-vals[0]).max(0.0) / pos.opnorm());

        let lhs = a.mul(&b).mul(&c).conditional_expectation(&m)?;
        let rhs = a.mul(&eb).mul(&c);
        worst[2] = worst[2].max(lhs.sub(&rhs).opnorm() / (a.opnorm() * nb * c.opnorm()));

        let comp = b.conditional_expectation(&m2)?.conditional_expectation(&m)?;
        let direct = b.conditional_expectation(&m.intersection(&m2))?;
        worst[3] = worst[3].max(comp.sub(&direct).opnorm() / nb);

        worst[4] = worst[4].max(eb.commutator_full(&total_n).opnorm() / nb);
        worst[5] = worst[5].max((eb.opnorm() - nb).max(0.0) / nb);
    }
    let names = ["unitality", "positivity", "module", "composition", "gauge", "contraction"];
    Ok(names.iter().zip(worst).map(|(n, v)| check("conditional_expectation", n, v, 1e-12)).collect())
}

/// `||[A,B]||_{nu,x} <= 4^(nu+m+3) ||A||_{nu+m,y} ||B||_{nu+m,x} / (1+|x-y|)^m`
/// for `(nu, m)` in `{0,1,2}^2`; the value is the worst ratio of the two
/// sides.
pub fn commutator_bound_checks(space: &Arc<FockSpace>, instances: usize, seed: u64) -> Result<Vec<Check>> {
    let lat = space.lattice().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [[0.0f64; 3]; 3];
    for _ in 0..instances {
        let x = random_site(space, &mut rng);
        let y = random_site(space, &mut rng);
        let ra = rng.random_range(0..=1);
        let rb = rng.random_range(0..=1);
        let a = FockOperator::random_local(space, &lat.box_region(y, ra), true, &mut rng);
        let b = FockOperator::random_local(space, &lat.box_region(x, rb), true, &mut rng);
        let c = a.commutator_full(&b);
        let na: Vec<f64> = (0..=4).map(|n| a.local_norm(n, y)).collect::<Result<_>>()?;
        let nb: Vec<f64> = (0..=4).map(|n| b.local_norm(n, x)).collect::<Result<_>>()?;
        let nc: Vec<f64> = (0..=2).map(|n| c.local_norm(n, x)).collect::<Result<_>>()?;
        let d = lat.dist(x, y) as f64;
        for nu in 0..3 {
            for m in 0..3 {
                let rhs = 4f64.powi((nu + m + 3) as i32) * na[nu + m] * nb[nu + m] / (1.0 + d).powi(m as i32);
                worst[nu][m] = worst[nu][m].max(nc[nu] / rhs);
            }
        }
    }
    let mut out = Vec::new();
    for (nu, row) in worst.iter().enumerate() {
        for (m, v) in row.iter().enumerate() {
            out.push(check("commutator_bound", &format!("nu{nu}_m{m}"), *v, 1.0));
        }
    }
    Ok(out)
}

/// `[A, B] = 0` for gauge-invariant `A` and arbitrary `B` on disjoint
/// regions, relative to `||A|| ||B||`.
pub fn disjoint_commutation_check(space: &Arc<FockSpace>, instances: usize, seed: u64) -> Check {
    let lat = space.lattice().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let mut m1 = Vec::new();
        let mut m2 = Vec::new();
        for i in 0..lat.n_sites() {
            match rng.random_range(0..3) {
                0 => m1.push(i),
                1 => m2.push(i),
                _ => {}
            }
        }
        if m1.is_empty() || m2.is_empty() {
            continue;
        }
        let a = FockOperator::random_local(space, &Region::from_indices(m1), true, &mut rng);
        let b = FockOperator::random_local(space, &Region::from_indices(m2), false, &mut rng);
        worst = worst.max(a.commutator_full(&b).max_abs() / (a.max_abs() * b.max_abs()));
    }
    check("disjoint_commutation", "commutator", worst, 1e-14)
}

/// The Liouvillian as a sum over terms, over local terms and without the
/// disjoint-support shortcut, and the switch-current identity
/// `L_{i[H, Lambda_j]} A = sum_{x_j >= 0} [i L_H n_x, A]`.
pub fn resummation_checks(h: &Interaction, samples: &[FockOperator]) -> Result<Vec<Check>> {
    let space = h.space().clone();
    let lat = space.lattice().clone();
    let mut local: f64 = 0.0;
    let mut unskipped: f64 = 0.0;
    let mut current: f64 = 0.0;
    let switched: Vec<(Interaction, Vec<FockOperator>)> = [Axis::One, Axis::Two]
        .into_iter()
        .map(|axis| {
            let lj = Interaction::builtin(Builtin::Switch(axis), &space)?;
            let c = commutator_interaction(h, &lj)?;
            let currents = lat
                .half_plane(axis, 0)?
                .sites(&lat)
                .map(|x| Ok(h.liouvillian(&FockOperator::number(&space, x)?).scale(linalg::I)))
                .collect::<Result<Vec<_>>>()?;
            Ok((c, currents))
        })
        .collect::<Result<_>>()?;
    for a in samples {
        let l = h.liouvillian(a);
        let scale = 1.0 + l.max_abs();
        local = local.max(l.sub(&h.liouvillian_local(a)).max_abs() / scale);
        let mut full = FockOperator::zero(&space);
        for (_, t) in h.terms() {
            full = full.add(&t.commutator_full(a));
        }
        unskipped = unskipped.max(l.sub(&full).max_abs() / scale);
        for (c, currents) in &switched {
            let lhs = c.liouvillian(a);
            let mut rhs = FockOperator::zero(&space);
            for j in currents {
                rhs = rhs.add(&j.commutator_full(a));
            }
            current = current.max(lhs.sub(&rhs).max_abs() / (1.0 + lhs.max_abs()));
        }
    }
    Ok(vec![
        check("resummation", "local_terms", local, 1e-12),
        check("resummation", "term_sum", unskipped, 1e-12),
        check("resummation", "switch_current", current, 1e-10),
    ])
}

/// Oddness, the Fourier constraint, the filter identity, `phi(0) = 0` and
/// decay of the weight function.
pub fn weight_checks(w: &WeightFunction, fourier_tol: f64) -> Vec<Check> {
    let g = w.g();
    let ks: Vec<f64> =
        [0.5, 1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 40.0].iter().flat_map(|&c| [c * g, -c * g]).collect();
    verify_weight(w, &ks, fourier_tol)
        .items
        .into_iter()
        .map(|i| Check { group: "weight_function".into(), name: i.name, pass: i.pass, value: i.value, tol: i.tol })
        .collect()
}

/// The off-diagonal property on both paths, the diagonal remainder, the
/// Liouvillian of the OD interaction in the state, shell-sum closure and
/// quadrature against the spectral filter.
pub fn off_diagonal_checks(ctx: &OdContext, opts: &SuiteOptions) -> Result<Vec<Check>> {
    let space = ctx.space().clone();
    let lat = space.lattice().clone();
    let xs = local_samples(&space, opts.samples, true, opts.seed ^ 0x0d);
    let ys = local_samples(&space, opts.samples, false, opts.seed ^ 0x0e);
    let mut od_spec: f64 = 0.0;
    let mut od_quad: f64 = 0.0;
    let mut di_mean: f64 = 0.0;
    let mut di_comm: f64 = 0.0;
    let mut quad_vs_spec: f64 = 0.0;
    for (i, (a, b)) in xs.iter().zip(&ys).enumerate() {
        let scale = 1.0 + a.opnorm() * b.opnorm();
        let od = od_observable_spectral(ctx, a)?;
        let lhs = ctx.expectation(&a.commutator_full(b))?;
        od_spec = od_spec.max((lhs - ctx.expectation(&od.commutator_full(b))?).norm() / scale);
        let di = diagonal_part(a, &od);
        di_mean = di_mean.max((ctx.expectation(&di)? - ctx.expectation(a)?).norm() / scale);
        di_comm = di_comm.max(ctx.expectation(&di.commutator_full(b))?.norm() / scale);
        // the quadrature path costs a time integral per transition; a few
        // samples suffice
        if i < 3 {
            let q = od_observable_quadrature(ctx, a, opts.quad_tol)?.op;
            od_quad = od_quad.max((lhs - ctx.expectation(&q.commutator_full(b))?).norm() / scale);
            quad_vs_spec = quad_vs_spec.max(q.sub(&od).opnorm() / (1.0 + a.opnorm()));
        }
    }

    let mut liou: f64 = 0.0;
    let mut closure: f64 = 0.0;
    for axis in [Axis::One, Axis::Two] {
        let lam = Interaction::builtin(Builtin::Switch(axis), &space)?;
        for k_max in [Some(0), Some(1)] {
            let od = od_interaction(ctx, &lam, k_max)?;
            for (i, loc) in od.local.iter().enumerate() {
                let (terms, _) = shells(ctx, lat.site(i), loc, k_max)?;
                let mut sum = FockOperator::zero(&space);
                for (_, t) in &terms {
                    sum = sum.add(t);
                }
                closure = closure.max(sum.sub(loc).max_abs() / (1.0 + loc.max_abs()));
            }
            for a in &ys {
                let lhs = ctx.expectation(&lam.liouvillian(a))?;
                let rhs = ctx.expectation(&od.interaction.liouvillian(a))?;
                liou = liou.max((lhs - rhs).norm() / (1.0 + a.opnorm()));
            }
        }
    }
    Ok(vec![
        check("off_diagonal", "property_spectral", od_spec, 1e-12),
        check("off_diagonal", "property_quadrature", od_quad, 1e-8),
        check("off_diagonal", "remainder_mean", di_mean, 1e-8),
        check("off_diagonal", "remainder_commutator", di_comm, 1e-8),
        check("off_diagonal", "interaction_liouvillian", liou, 1e-8),
        check("off_diagonal", "shell_closure", closure, 1e-8),
        check("off_diagonal", "quadrature_vs_spectral", quad_vs_spec, 1e-6),
    ])
}

/// `w0(A* L_H A) >= g (w0(A* A) - |w0(A)|^2)`; the value is the largest
/// violation.
pub fn gap_inequality_check(ctx: &OdContext, n: usize, seed: u64) -> Result<Check> {
    let space = ctx.space().clone();
    let samples: Vec<FockOperator> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = space.lattice().clone();
        (0..n)
            .map(|i| {
                let x = random_site(&space, &mut rng);
                FockOperator::random_local(&space, &lat.box_region(x, 1), i % 3 != 0, &mut rng)
            })
            .collect()
    };
    let r = verify_gap_inequality(ctx.ground_state()?, ctx.hamiltonian(), &samples);
    Ok(check("gap_inequality", "min_slack", (-r.min_slack).max(0.0), 1e-10))
}

/// Automorphism property, cocycle composition, and invariance of the
/// conductance under a depth-2 random circuit and a random gauge circuit.
pub fn automorphism_checks(ctx: &OdContext, opts: &SuiteOptions) -> Result<Vec<Check>> {
    let space = ctx.space().clone();
    let c1 = random_circuit(&space, 2, 0.6, GateKind::Generic, opts.seed ^ 0xb1)?;
    let c2 = random_circuit(&space, 2, 0.4, GateKind::Generic, opts.seed ^ 0xb2)?;
    let u = c1.unitary()?;

    let xs = local_samples(&space, 4, false, opts.seed ^ 0xb3);
    let mut hom: f64 = 0.0;
    for w in xs.windows(2) {
        let (x, y) = (&w[0], &w[1]);
        let s = x.max_abs() * y.max_abs();
        hom = hom.max(x.mul(y).conjugate_by(&u).sub(&x.conjugate_by(&u).mul(&y.conjugate_by(&u))).max_abs() / s);
        hom = hom.max(x.adjoint().conjugate_by(&u).sub(&x.conjugate_by(&u).adjoint()).max_abs() / x.max_abs());
    }
    let trace = tracial_defect(&u, &xs);

    let spec = LgaSpec::new(Generator::Linear(c1.layers[0].clone(), c2.layers[1].clone()), 2)?;
    let u01 = build_lga(&spec, 0.0, 1.0)?;
    let split = build_lga(&spec, 0.5, 1.0)?.mul(&build_lga(&spec, 0.0, 0.5)?);
    let cocycle = u01.sub(&split).max_abs();

    let copts = ConductanceOptions::small_cluster();
    let origin = Site::new(0, 0);
    let circuit = conductance_invariance_test(ctx, &u, c1.support_growth(), origin, &copts, true, opts.degeneracy_tol)?;
    let g = gauge_circuit(&space, opts.seed ^ 0xb4)?;
    let gauge = conductance_invariance_test(ctx, &g.unitary()?, 0, origin, &copts, true, opts.degeneracy_tol)?;
    let worst = |r: &crate::lga::InvarianceReport| r.delta_alpha.max(r.delta_rebuilt.unwrap_or(0.0));
    Ok(vec![
        check("automorphism_invariance", "homomorphism", hom, 1e-12),
        check("automorphism_invariance", "tracial", trace, 1e-12),
        check("automorphism_invariance", "cocycle", cocycle, 1e-9),
        check("automorphism_invariance", "circuit_invariance", worst(&circuit), 1e-6),
        check("automorphism_invariance", "gauge_invariance", worst(&gauge), 1e-10),
    ])
}

/// The whole suite on a many-body cluster of at most 8 sites.
pub fn verify_all(ctx: &OdContext, opts: &SuiteOptions) -> Result<SuiteReport> {
    let space = ctx.space().clone();
    let n = space.lattice().n_sites();
    if n > MAX_SUITE_SITES {
        return Err(Error::Size(format!("property suite runs on at most {MAX_SUITE_SITES} sites, got {n}")));
    }
    let mut checks = conditional_expectation_checks(&space, opts.expectation_instances, opts.seed)?;
    checks.extend(commutator_bound_checks(&space, opts.bound_instances, opts.seed ^ 1)?);
    checks.push(disjoint_commutation_check(&space, 50, opts.seed ^ 2));
    let samples = local_samples(&space, opts.samples, true, opts.seed ^ 3);
    checks.extend(resummation_checks(ctx.hamiltonian(), &samples)?);
    checks.push(gap_inequality_check(ctx, 100, opts.seed ^ 4)?);
    checks.extend(weight_checks(ctx.weight(), 1e-6));
    checks.extend(off_diagonal_checks(ctx, opts)?);
    checks.extend(automorphism_checks(ctx, opts)?);
    Ok(SuiteReport::from_checks(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, Lattice};
    use crate::models::{build_interaction, ModelKind, ModelSpec};
    use crate::weightfn::{build_weight, WeightParams};

    fn cluster_ctx(scale: f64) -> OdContext {
        let lat = Lattice::new(3, 2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let spec = ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 0.5, mu: 0.3 });
        let h = build_interaction(&spec, &space).unwrap();
        let gs = crate::spectral::ground_state(&h, Default::default()).unwrap();
        let mut p = WeightParams::new(gs.gap.min(1.0));
        p.scale = scale;
        OdContext::many_body(&h, Arc::new(build_weight(p).unwrap()), 1e-8).unwrap()
    }

    #[test]
    fn suite_passes_on_default_cluster() {
        let r = verify_all(&cluster_ctx(1.0), &SuiteOptions::default()).unwrap();
        for c in r.checks.iter().filter(|c| !c.pass) {
            eprintln!("{} {} {:e} > {:e}", c.group, c.name, c.value, c.tol);
        }
        assert!(r.pass);
        assert_eq!(r.matrix.len(), 8);
    }

    #[test]
    fn doubled_weight_fails_weight_checks() {
        let ctx = cluster_ctx(2.0);
        let r = SuiteReport::from_checks(weight_checks(ctx.weight(), 1e-6));
        assert!(!r.matrix["weight_function"]);
        let c = r.checks.iter().find(|c| c.name == "phi_at_zero").unwrap();
        assert!(c.pass);
    }

    #[test]
    fn bound_fails_when_scaled_down() {
        // the checks report ratios, so a tighter constant must eventually fail
        let lat = Lattice::new(3, 1, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let r = commutator_bound_checks(&space, 20, 1).unwrap();
        assert!(r.iter().all(|c| c.pass && c.value > 0.0));
        assert!(r.iter().any(|c| c.value * 4f64.powi(6) > 1.0));
    }
}

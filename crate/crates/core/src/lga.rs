//! Locally generated automorphisms on a finite lattice: time-ordered
//! exponentials of interaction families, finite-depth local circuits, and
//! the invariance of the Hall conductance under them.

use std::sync::Arc;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conductance::{
    common_radius_difference, hall_conductance_free, hall_conductance_mb, ConductanceOptions, ConductanceReport,
};
use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockSpace};
use crate::interaction::Interaction;
use crate::lattice::{Lattice, Region, Site};
use crate::linalg::{self, ZERO};
use crate::odmap::OdContext;
use crate::spectral::FermiSea;

/// `v -> Phi^v` on `[0, 1]`.
#[derive(Clone, Debug)]
pub enum Generator {
    /// `Phi^v = pieces[k]` for `v` in `[k/n, (k+1)/n)`.
    Piecewise(Vec<Interaction>),
    /// `Phi^v = (1 - v) a + v b`.
    Linear(Interaction, Interaction),
}

#[derive(Clone, Debug)]
pub struct LgaSpec {
    generator: Generator,
    space: Arc<FockSpace>,
    /// `sup_v ||Phi^v||_nu` over the sample points used at construction.
    pub norm_budget: f64,
    pub nu: u32,
}

impl LgaSpec {
    pub fn new(generator: Generator, nu: u32) -> Result<Self> {
        let parts: Vec<&Interaction> = match &generator {
            Generator::Piecewise(v) => v.iter().collect(),
            Generator::Linear(a, b) => vec![a, b],
        };
        let first = parts.first().ok_or_else(|| Error::Param("empty generator family".into()))?;
        let space = first.space().clone();
        if parts.iter().any(|p| !Arc::ptr_eq(p.space(), &space)) {
            return Err(Error::Param("generator family mixes Fock spaces".into()));
        }
        let mut spec = LgaSpec { generator, space, norm_budget: 0.0, nu };
        spec.norm_budget = (0..=16).map(|i| spec.at(i as f64 / 16.0).norm(nu)).fold(0.0, f64::max);
        Ok(spec)
    }

    pub fn constant(phi: Interaction) -> Result<Self> {
        Self::new(Generator::Piecewise(vec![phi]), 2)
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn at(&self, v: f64) -> Interaction {
        match &self.generator {
            Generator::Piecewise(p) => {
                let k = ((v.clamp(0.0, 1.0) * p.len() as f64) as usize).min(p.len() - 1);
                p[k].clone()
            }
            Generator::Linear(a, b) => a.scale(1.0 - v).add_scaled(b, v),
        }
    }
}

fn identity_like(space: &Arc<FockSpace>) -> FockOperator {
    FockOperator::identity(space)
}

/// The unitary `U_{u,v}` solving `d/dv U = -i Phi^v U`, `U_{u,u} = 1`, so
/// that `A -> U* A U` is the automorphism from `u` to `v` and
/// `U_{u,w} = U_{v,w} U_{u,v}`.
pub fn build_lga(spec: &LgaSpec, u: f64, v: f64) -> Result<FockOperator> {
    let space = spec.space();
    if space.dim() > 1 << 14 {
        return Err(Error::Size(format!("Fock dimension {} exceeds 2^14", space.dim())));
    }
    if v < u {
        return Ok(build_lga(spec, v, u)?.adjoint());
    }
    let mut acc = identity_like(space);
    if v == u {
        return Ok(acc);
    }
    match &spec.generator {
        Generator::Piecewise(pieces) => {
            let n = pieces.len() as f64;
            for (k, phi) in pieces.iter().enumerate() {
                let (a, b) = (k as f64 / n, (k + 1) as f64 / n);
                let tau = b.min(v) - a.max(u);
                if tau <= 0.0 {
                    continue;
                }
                acc = phi.total().exp_herm(tau)?.mul(&acc);
            }
        }
        Generator::Linear(a, b) => {
            let (ta, tb) = (a.total(), b.total());
            let run = |steps: usize| -> Result<FockOperator> {
                let h = (v - u) / steps as f64;
                let r = 3f64.sqrt() / 6.0;
                let (w1, w2) = (0.25 + r, 0.25 - r);
                let mut acc = identity_like(space);
                for i in 0..steps {
                    let t = u + i as f64 * h;
                    let (s1, s2) = (t + (0.5 - r) * h, t + (0.5 + r) * h);
                    // Phi(s) = ta + s (tb - ta); combine the two nodes linearly
                    let mix = |c1: f64, c2: f64| {
                        let s = c1 * s1 + c2 * s2;
                        ta.scale_re(c1 + c2 - s).add(&tb.scale_re(s))
                    };
                    let first = mix(w1, w2).exp_herm(h)?;
                    let second = mix(w2, w1).exp_herm(h)?;
                    acc = second.mul(&first).mul(&acc);
                }
                Ok(acc)
            };
            let mut steps = 4;
            let mut prev = run(steps)?;
            loop {
                steps *= 2;
                let next = run(steps)?;
                let change = next.sub(&prev).max_abs();
                prev = next;
                if change <= 1e-11 {
                    break;
                }
                if steps > 1 << 14 {
                    return Err(Error::Integration(format!("propagator did not settle (last change {change:.2e})")));
                }
            }
            acc = prev;
        }
    }
    Ok(acc.with_support(space.lattice().whole()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// Generic particle-number-conserving two-site gates.
    Generic,
    /// Gates generated by quadratic hermitian operators.
    Quadratic,
}

/// Layers of commuting gates, each given by its hermitian generator:
/// the layer unitary is `exp(-i sum of generators)`.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub layers: Vec<Interaction>,
    /// Support growth per layer, in lattice steps.
    pub reach: usize,
}

/// Bonds of layer `k`: horizontal on even `k`, vertical on odd `k`, with
/// the bond parity alternating every two layers.
fn layer_bonds(lat: &Lattice, k: usize) -> Vec<(usize, usize)> {
    let (o1, o2) = lat.origin();
    let horizontal = k % 2 == 0;
    let parity = ((k / 2) % 2) as i64;
    let mut out = Vec::new();
    for i in 0..lat.n_sites() {
        let x = lat.site(i);
        let (col, row) = (x.x1 + o1 as i64, x.x2 + o2 as i64);
        let (coord, d) = if horizontal { (col, Site::new(1, 0)) } else { (row, Site::new(0, 1)) };
        if coord.rem_euclid(2) != parity {
            continue;
        }
        if let Ok(j) = lat.index(x + d) {
            out.push((i, j));
        }
    }
    out
}

fn random_hermitian(n: usize, strength: f64, rng: &mut impl Rng) -> Mat<c64> {
    let a = Mat::from_fn(n, n, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let nrm = linalg::spectral_norm(h.as_ref()).max(1e-300);
    Mat::from_fn(n, n, |i, j| h[(i, j)] * (strength / nrm))
}

/// Depth-`depth` brickwork of random gauge-invariant two-site gates with
/// generators of operator norm `strength`.
pub fn random_circuit(
    space: &Arc<FockSpace>,
    depth: usize,
    strength: f64,
    kind: GateKind,
    seed: u64,
) -> Result<Circuit> {
    let lat = space.lattice().clone();
    let no = lat.n_orb();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(depth);
    for k in 0..depth {
        let mut layer = Interaction::new(format!("layer{k}"), space);
        for (i, j) in layer_bonds(&lat, k) {
            let region = Region::from_indices([i, j]);
            let gen = match kind {
                GateKind::Quadratic => {
                    let modes: Vec<usize> = (0..no).map(|a| i * no + a).chain((0..no).map(|a| j * no + a)).collect();
                    FockOperator::quadratic(space, &modes, &random_hermitian(2 * no, strength, &mut rng))
                }
                GateKind::Generic => {
                    let a = FockOperator::random_local(space, &region, true, &mut rng);
                    let h = a.add(&a.adjoint());
                    let nrm = h.opnorm().max(1e-300);
                    h.scale_re(strength / nrm)
                }
            };
            layer.add_term(region, gen)?;
        }
        layers.push(layer);
    }
    Ok(Circuit { layers, reach: 1 })
}

/// One layer `exp(-i sum_x theta_x n_x)` with random phases.
pub fn gauge_circuit(space: &Arc<FockSpace>, seed: u64) -> Result<Circuit> {
    let lat = space.lattice().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = Interaction::new("gauge", space);
    for i in 0..lat.n_sites() {
        let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        layer.add_term(Region::from_indices([i]), FockOperator::number(space, lat.site(i))?.scale_re(theta))?;
    }
    Ok(Circuit { layers: vec![layer], reach: 0 })
}

/// `exp(-i theta N)`, which fixes every particle-number-conserving operator.
pub fn global_gauge(space: &Arc<FockSpace>, theta: f64) -> Result<Circuit> {
    let lat = space.lattice().clone();
    let mut layer = Interaction::new("global-gauge", space);
    for i in 0..lat.n_sites() {
        layer.add_term(Region::from_indices([i]), FockOperator::number(space, lat.site(i))?.scale_re(theta))?;
    }
    Ok(Circuit { layers: vec![layer], reach: 0 })
}

impl Circuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// The circuit as a piecewise-constant generator family on `[0, 1]`.
    pub fn as_lga_spec(&self) -> Result<LgaSpec> {
        let n = self.layers.len() as f64;
        LgaSpec::new(Generator::Piecewise(self.layers.iter().map(|l| l.scale(n)).collect()), 2)
    }

    /// `U = U_depth ... U_1`.
    pub fn unitary(&self) -> Result<FockOperator> {
        build_lga(&self.as_lga_spec()?, 0.0, 1.0)
    }

    /// Support growth of `A -> U* A U` in lattice steps.
    pub fn support_growth(&self) -> usize {
        self.reach * self.layers.len()
    }

    /// One-body unitary of a circuit of quadratic gates, `exp(-i g)` per
    /// gate, in the mode basis of `lat`.
    pub fn one_body(lat: &Lattice, depth: usize, strength: f64, seed: u64) -> Result<Mat<c64>> {
        let no = lat.n_orb();
        let d = lat.n_modes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = Mat::<c64>::identity(d, d);
        for k in 0..depth {
            for (i, j) in layer_bonds(lat, k) {
                let modes: Vec<usize> = (0..no).map(|a| i * no + a).chain((0..no).map(|a| j * no + a)).collect();
                let g = linalg::expm_herm(random_hermitian(2 * no, strength, &mut rng).as_ref(), 1.0)?;
                let rows: Vec<Vec<c64>> = modes.iter().map(|&m| (0..d).map(|c| u[(m, c)]).collect()).collect();
                for (a, &m) in modes.iter().enumerate() {
                    for c in 0..d {
                        u[(m, c)] = (0..modes.len()).fold(ZERO, |s, b| s + g[(a, b)] * rows[b][c]);
                    }
                }
            }
        }
        Ok(u)
    }
}

/// Box of radius `r` around a region.
fn grow(lat: &Lattice, m: &Region, r: usize) -> Region {
    m.iter().fold(Region::empty(), |acc, i| acc.union(&lat.box_region(lat.site(i), r)))
}

/// `U H U*` as an interaction, each term's region grown by `reach`.
pub fn conjugate_interaction(h: &Interaction, u: &FockOperator, reach: usize) -> Result<Interaction> {
    let lat = h.space().lattice().clone();
    let ud = u.adjoint();
    let mut out = Interaction::new(format!("alpha({})", h.name()), h.space());
    for (m, op) in h.terms() {
        let region = grow(&lat, m, reach);
        out.add_term(region.clone(), op.conjugate_by(&ud).with_support(region))?;
    }
    Ok(out)
}

/// `H + c (H - E0)^2` as an interaction; it has the ground state of `H`
/// and a different spectrum.
pub fn squared_parent(h: &Interaction, e0: f64, c: f64) -> Result<Interaction> {
    let terms: Vec<(Region, FockOperator)> = h.terms().map(|(m, op)| (m.clone(), op.clone())).collect();
    let mut out = h.clone().renamed(format!("{}+{c}(H-E0)^2", h.name()));
    for (i, (mi, a)) in terms.iter().enumerate() {
        out = out.add_scaled(&single(h, mi, &a.mul(a))?, c);
        out = out.add_scaled(&single(h, mi, a)?, -2.0 * c * e0);
        for (mj, b) in &terms[i + 1..] {
            let sym = a.mul(b).add(&b.mul(a));
            out = out.add_scaled(&single(h, &mi.union(mj), &sym)?, c);
        }
    }
    let lat = h.space().lattice();
    let anchor = Region::from_indices([lat.index(Site::new(0, 0))?]);
    out = out
        .add_scaled(&single(h, &anchor, &FockOperator::identity(h.space()).with_support(anchor.clone()))?, c * e0 * e0);
    Ok(out)
}

fn single(h: &Interaction, m: &Region, op: &FockOperator) -> Result<Interaction> {
    let mut one = Interaction::new("term", h.space());
    one.add_term(m.clone(), op.clone().with_support(m.clone()))?;
    Ok(one)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub before: ConductanceReport,
    /// Twisted state `omega o alpha` with OD maps taken through `alpha`.
    pub via_alpha: ConductanceReport,
    /// Rebuilt Hamiltonian `U H U*` with its own spectrum and OD maps.
    pub rebuilt: Option<ConductanceReport>,
    /// Change of the whole-lattice value `omega(i[Lambda2^OD, Lambda1^OD])`.
    pub delta_alpha: f64,
    pub delta_rebuilt: Option<f64>,
    /// Largest change of the box series, a finite-size diagnostic.
    pub series_delta: f64,
    pub gap_after: Option<f64>,
}

fn series_delta(a: &ConductanceReport, b: &ConductanceReport) -> f64 {
    a.convergence.iter().filter_map(|p| b.value_at(p.radius).map(|v| (v - p.value).abs())).fold(0.0, f64::max)
}

/// Many-body conductance before and after the automorphism `A -> U* A U`.
/// The rebuilt route diagonalizes `U H U*` afresh and checks its gap.
pub fn conductance_invariance_test(
    ctx: &OdContext,
    u: &FockOperator,
    reach: usize,
    origin: Site,
    opts: &ConductanceOptions,
    rebuild: bool,
    degeneracy_tol: f64,
) -> Result<InvarianceReport> {
    let before = hall_conductance_mb(ctx, origin, opts)?;
    let twisted = ctx.clone().with_alpha(u.clone())?;
    let via_alpha = hall_conductance_mb(&twisted, origin, opts)?;
    let (rebuilt, gap_after) = if rebuild {
        let h2 = conjugate_interaction(ctx.hamiltonian(), u, reach)?;
        let ctx2 = OdContext::many_body(&h2, ctx.weight().clone(), degeneracy_tol)?;
        let gap = ctx2.ground_state()?.gap;
        (Some(hall_conductance_mb(&ctx2, origin, opts)?), Some(gap))
    } else {
        (None, None)
    };
    let global = |r: &ConductanceReport| r.global.unwrap_or(r.sigma);
    let delta_alpha = (global(&via_alpha) - global(&before)).abs();
    let delta_rebuilt = rebuilt.as_ref().map(|r| (global(r) - global(&before)).abs());
    let series_delta = series_delta(&before, &via_alpha);
    Ok(InvarianceReport { before, via_alpha, rebuilt, delta_alpha, delta_rebuilt, series_delta, gap_after })
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeInvarianceReport {
    pub before: ConductanceReport,
    pub after: ConductanceReport,
    /// Difference at the largest common box radius.
    pub radius: usize,
    pub delta: f64,
}

/// Free-fermion conductance of `p` and of the transformed state `u p u*`.
pub fn free_invariance_test(
    sea: &FermiSea,
    lat: &Lattice,
    u: &Mat<c64>,
    origin: Site,
    opts: &ConductanceOptions,
) -> Result<FreeInvarianceReport> {
    let before = hall_conductance_free(sea, lat, origin, opts)?;
    let p2 = u * &sea.projection * u.adjoint();
    let mut sea2 = sea.clone();
    sea2.projection = p2;
    let after = hall_conductance_free(&sea2, lat, origin, opts)?;
    let (radius, delta) = common_radius_difference(&before, &after)
        .ok_or_else(|| Error::Numerical("conductance series share no radius".into()))?;
    Ok(FreeInvarianceReport { before, after, radius, delta })
}

/// `max |tr(alpha(A)) - tr(A)|` (normalized trace) over the samples.
pub fn tracial_defect(u: &FockOperator, samples: &[FockOperator]) -> f64 {
    samples.iter().map(|a| (a.conjugate_by(u).tracial_state() - a.tracial_state()).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::lattice::Boundary;
    use crate::models::{build_interaction, ModelKind, ModelSpec};

    fn small_space() -> Arc<FockSpace> {
        FockSpace::new(&Lattice::new(3, 2, Boundary::Open, 1).unwrap()).unwrap()
    }

    #[test]
    fn zero_generator_is_identity() {
        let space = small_space();
        let spec = LgaSpec::constant(Interaction::new("zero", &space)).unwrap();
        let u = build_lga(&spec, 0.0, 1.0).unwrap();
        assert!(u.sub(&FockOperator::identity(&space)).max_abs() < 1e-14);
        assert_eq!(spec.norm_budget, 0.0);
    }

    #[test]
    fn gauge_unitary_fixes_gauge_invariant_operators() {
        let space = small_space();
        let u = global_gauge(&space, 1.3).unwrap().unitary().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = FockOperator::random_local(&space, &space.lattice().whole(), true, &mut rng);
        assert!(a.conjugate_by(&u).sub(&a).max_abs() < 1e-12);
    }

    #[test]
    fn cocycle_and_automorphism() {
        let space = small_space();
        let c1 = random_circuit(&space, 2, 0.6, GateKind::Generic, 1).unwrap();
        let c2 = random_circuit(&space, 2, 0.4, GateKind::Generic, 2).unwrap();
        let a: Interaction = c1.layers[0].clone();
        let b: Interaction = c2.layers[1].clone();
        let spec = LgaSpec::new(Generator::Linear(a, b), 2).unwrap();
        let u01 = build_lga(&spec, 0.0, 1.0).unwrap();
        let u0h = build_lga(&spec, 0.0, 0.5).unwrap();
        let uh1 = build_lga(&spec, 0.5, 1.0).unwrap();
        assert!(u01.sub(&uh1.mul(&u0h)).max_abs() <= 1e-9);
        let id = FockOperator::identity(&space);
        assert!(u01.adjoint().mul(&u01).sub(&id).max_abs() < 1e-12);

        let u = c1.unitary().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lat = space.lattice().clone();
        let x = FockOperator::random_local(&space, &lat.box_region(lat.site(0), 0), false, &mut rng);
        let y = FockOperator::random_local(&space, &lat.box_region(lat.site(5), 0), false, &mut rng);
        let al = |z: &FockOperator| z.conjugate_by(&u);
        assert!(al(&x.mul(&y)).sub(&al(&x).mul(&al(&y))).max_abs() < 1e-12);
        assert!(al(&x.adjoint()).sub(&al(&x).adjoint()).max_abs() < 1e-12);
        assert!(tracial_defect(&u, &[x.clone(), y.clone(), x.mul(&y)]) < 1e-12);
    }

    #[test]
    fn support_grows_by_depth() {
        let lat = Lattice::new(4, 2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let c = random_circuit(&space, 2, 0.8, GateKind::Generic, 5).unwrap();
        let u = c.unitary().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in [0, 3, 5] {
            let m = Region::from_indices([i]);
            let a = FockOperator::random_local(&space, &m, true, &mut rng);
            let b = a.conjugate_by(&u).with_support(lat.whole());
            assert!(b.is_supported_in(&grow(&lat, &m, c.support_growth()), 1e-12));
        }
    }

    #[test]
    fn squared_parent_shares_the_ground_state() {
        let lat = Lattice::new(3, 2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 0.5, mu: 0.3 }), &space)
            .unwrap();
        let gs = crate::spectral::ground_state(&h, Default::default()).unwrap();
        let h2 = squared_parent(&h, gs.energy, 0.7).unwrap();
        // oracle: the dense operator H + c (H - E0)^2
        let t = h.total();
        let shifted = t.sub(&FockOperator::identity(&space).scale_re(gs.energy));
        let want = t.add(&shifted.mul(&shifted).scale_re(0.7));
        assert!(h2.total().sub(&want).max_abs() < 1e-11);
        let gs2 = crate::spectral::ground_state(&h2, Default::default()).unwrap();
        assert!(gs2.state.fidelity(&gs.state) > 1.0 - 1e-12);
        assert!((gs2.energy - gs.energy).abs() < 1e-10);
    }
}

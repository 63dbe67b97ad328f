//! Off-diagonal maps for observables and interactions.
//!
//! In the eigenbasis of `H`, element `(m, n)` of `A^OD` is `phi(E_m - E_n) A_mn`
//! with `phi` the weight-function filter, and element `(m, n)` of
//! `(Psi^OD)_{x,*}` is `-phi(D)/D ([Psi, h_x])_mn`. A twist `alpha(A) = U* A U`
//! conjugates on the way in and out.

use std::sync::Arc;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockSpace, SectorState};
use crate::interaction::Interaction;
use crate::lattice::{Region, Site};
use crate::linalg::{cr, ZERO};
use crate::spectral::{FermiSea, GroundState, ManyBodySpectrum};
use crate::weightfn::WeightFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    ManyBody,
    FreeFermion,
}

/// Allowed excess of `W.g` over the ground-state gap.
pub const GAP_SLACK: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct OdContext {
    h: Interaction,
    w: Arc<WeightFunction>,
    engine: Engine,
    spectrum: Option<Arc<ManyBodySpectrum>>,
    ground: Option<GroundState>,
    sea: Option<FermiSea>,
    alpha: Option<FockOperator>,
}

impl OdContext {
    /// Diagonalizes `h` completely and checks `W.g` against the gap.
    pub fn many_body(h: &Interaction, w: Arc<WeightFunction>, degeneracy_tol: f64) -> Result<Self> {
        let spectrum = ManyBodySpectrum::compute(h)?;
        let gs = GroundState::from_spectrum(&spectrum, h.name(), degeneracy_tol)?;
        Self::from_parts(h, w, Arc::new(spectrum), gs)
    }

    pub fn from_parts(
        h: &Interaction,
        w: Arc<WeightFunction>,
        spectrum: Arc<ManyBodySpectrum>,
        gs: GroundState,
    ) -> Result<Self> {
        if w.g() > gs.gap * (1.0 + GAP_SLACK) {
            return Err(Error::Param(format!(
                "weight function built for g = {} exceeds the ground-state gap {}",
                w.g(),
                gs.gap
            )));
        }
        Ok(OdContext {
            h: h.clone(),
            w,
            engine: Engine::ManyBody,
            spectrum: Some(spectrum),
            ground: Some(gs),
            sea: None,
            alpha: None,
        })
    }

    /// Free-fermion context; only the one-body routes are available.
    pub fn free(h: &Interaction, sea: FermiSea, w: Arc<WeightFunction>) -> Result<Self> {
        if w.g() > sea.one_body_gap * (1.0 + GAP_SLACK) {
            return Err(Error::Param(format!(
                "weight function built for g = {} exceeds the one-body gap {}",
                w.g(),
                sea.one_body_gap
            )));
        }
        Ok(OdContext {
            h: h.clone(),
            w,
            engine: Engine::FreeFermion,
            spectrum: None,
            ground: None,
            sea: Some(sea),
            alpha: None,
        })
    }

    /// The same context twisted by `alpha(A) = U* A U`.
    pub fn with_alpha(mut self, u: FockOperator) -> Result<Self> {
        let space = self.h.space();
        if !Arc::ptr_eq(u.space(), space) {
            return Err(Error::Param("automorphism lives on a different Fock space".into()));
        }
        let defect = u.adjoint().mul(&u).sub(&FockOperator::identity(space)).max_abs();
        if defect > 1e-9 {
            return Err(Error::Param(format!("automorphism generator is not unitary (defect {defect:.2e})")));
        }
        self.alpha = Some(u);
        Ok(self)
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn hamiltonian(&self) -> &Interaction {
        &self.h
    }

    pub fn weight(&self) -> &Arc<WeightFunction> {
        &self.w
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        self.h.space()
    }

    pub fn alpha(&self) -> Option<&FockOperator> {
        self.alpha.as_ref()
    }

    pub fn spectrum(&self) -> Result<&Arc<ManyBodySpectrum>> {
        self.spectrum.as_ref().ok_or_else(|| Error::State("no many-body eigensystem in this context".into()))
    }

    pub fn ground_state(&self) -> Result<&GroundState> {
        self.ground.as_ref().ok_or_else(|| Error::State("no many-body ground state in this context".into()))
    }

    pub fn fermi_sea(&self) -> Result<&FermiSea> {
        self.sea.as_ref().ok_or_else(|| Error::State("no Fermi sea in this context".into()))
    }

    /// The vector of `omega_alpha = omega_0 o alpha`.
    pub fn state(&self) -> Result<SectorState> {
        let gs = &self.ground_state()?.state;
        match &self.alpha {
            None => Ok(gs.clone()),
            Some(u) => u.apply(gs).ok_or_else(|| Error::Numerical("automorphism annihilates the ground state".into())),
        }
    }

    /// `omega_alpha(A)`.
    pub fn expectation(&self, a: &FockOperator) -> Result<c64> {
        Ok(a.expectation(&self.state()?))
    }

    fn twist(&self, a: &FockOperator) -> FockOperator {
        match &self.alpha {
            None => a.clone(),
            Some(u) => a.conjugate_by(u),
        }
    }

    fn untwist(&self, a: FockOperator) -> FockOperator {
        match &self.alpha {
            None => a,
            Some(u) => a.conjugate_by(&u.adjoint()),
        }
    }
}

fn apply_gauge(a: &FockOperator, v: &SectorState) -> Result<SectorState> {
    a.apply(v).ok_or_else(|| Error::Param("operator does not conserve particle number".into()))
}

impl OdContext {
    /// Maps `B psi_0` to `F(B) psi_0` where `F` multiplies transition
    /// `m <- 0` by `f(E_m - E_0)`.
    fn filter_from_ground(&self, v: &SectorState, f: impl Fn(f64) -> f64) -> Result<SectorState> {
        let spec = self.spectrum()?;
        let gs = self.ground_state()?;
        let sec = spec.sector(v.n);
        let e0 = gs.energy;
        let d = v.amps.len();
        let coef: Vec<c64> = (0..d)
            .map(|m| {
                let c: c64 = (0..d).map(|i| sec.vectors[(i, m)].conj() * v.amps[i]).sum();
                c * f(sec.energies[m] - e0)
            })
            .collect();
        let amps = (0..d).map(|i| (0..d).map(|m| sec.vectors[(i, m)] * coef[m]).sum()).collect();
        Ok(SectorState { n: v.n, amps })
    }

    fn untwist_state(&self, v: SectorState) -> Result<SectorState> {
        match &self.alpha {
            None => Ok(v),
            Some(u) => apply_gauge(u, &v),
        }
    }

    /// `A^OD[alpha] psi_alpha` for gauge-invariant `A`, without forming the
    /// operator.
    pub fn od_on_state(&self, a: &FockOperator) -> Result<SectorState> {
        let psi0 = &self.ground_state()?.state;
        let b = match &self.alpha {
            None => apply_gauge(a, psi0)?,
            Some(u) => apply_gauge(&u.adjoint(), &apply_gauge(a, &apply_gauge(u, psi0)?)?)?,
        };
        let w = &self.w;
        let out = self.filter_from_ground(&b, |d| w.phi(d))?;
        self.untwist_state(out)
    }

    /// `(Psi^OD[alpha])_{x,*} psi_alpha` for every site `x`.
    pub fn od_interaction_on_state(&self, psi: &Interaction) -> Result<Vec<SectorState>> {
        let psi0 = &self.ground_state()?.state;
        let t = match &self.alpha {
            None => psi.total(),
            Some(u) => psi.total().conjugate_by(u),
        };
        let w = &self.w;
        let tpsi = apply_gauge(&t, psi0)?;
        self.h
            .local_terms()
            .par_iter()
            .map(|hx| {
                let a = apply_gauge(&t, &apply_gauge(hx, psi0)?)?;
                let b = apply_gauge(hx, &tpsi)?;
                let c = SectorState { n: a.n, amps: a.amps.iter().zip(&b.amps).map(|(x, y)| x - y).collect() };
                let f = self.filter_from_ground(&c, |d| if d == 0.0 { 0.0 } else { -w.phi(d) / d })?;
                self.untwist_state(f)
            })
            .collect()
    }
}

/// `omega(i [X, Y])` for hermitian `X`, `Y` given `X psi` and `Y psi`.
pub fn commutator_in_state(x_psi: &SectorState, y_psi: &SectorState) -> f64 {
    -2.0 * x_psi.overlap(y_psi).im
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureWarning {
    /// Largest `|A_mn| * |phi(ds) - phi(2 ds)|` over the transitions.
    pub estimate: f64,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct QuadratureOd {
    pub op: FockOperator,
    pub warning: Option<QuadratureWarning>,
}

/// Reference path: the exact filter in the eigenbasis.
pub fn od_observable_spectral(ctx: &OdContext, a: &FockOperator) -> Result<FockOperator> {
    let spec = ctx.spectrum()?;
    let w = &ctx.w;
    let b = spec.filter(&ctx.twist(a), |em, en| cr(w.phi(em - en)));
    Ok(ctx.untwist(b).with_support(a.support().clone()))
}

/// Paper-faithful path: trapezoid quadrature of the time integral over the
/// weight-function grid, with `e^{isL_H}` applied in the cached eigenbasis.
pub fn od_observable_quadrature(ctx: &OdContext, a: &FockOperator, quad_tol: f64) -> Result<QuadratureOd> {
    let spec = ctx.spectrum()?;
    if !a.is_gauge_invariant() {
        return Err(Error::Param("quadrature OD map needs a gauge-invariant observable".into()));
    }
    let w = &ctx.w;
    let twisted = ctx.twist(a);
    let mut worst: f64 = 0.0;
    let mut blocks = std::collections::BTreeMap::new();
    for (&(p, q), blk) in twisted.blocks() {
        let (sp, sq) = (spec.sector(p), spec.sector(q));
        let inner = sp.vectors.adjoint() * blk.to_dense() * &sq.vectors;
        let (rows, cols) = (inner.nrows(), inner.ncols());
        let filtered: Vec<(c64, f64)> = (0..rows * cols)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % rows, idx / rows);
                let v = inner[(i, j)];
                if v == ZERO {
                    return (ZERO, 0.0);
                }
                let (full, half) = w.phi_quad_pair(sp.energies[i] - sq.energies[j]);
                (v * full, v.norm() * (full - half).abs())
            })
            .collect();
        worst = filtered.iter().map(|x| x.1).fold(worst, f64::max);
        let f = Mat::from_fn(rows, cols, |i, j| filtered[i + j * rows].0);
        blocks.insert((p, q), crate::block::Block::Dense(&sp.vectors * f * sq.vectors.adjoint()));
    }
    let op = FockOperator::from_blocks(ctx.space(), blocks, a.support().clone());
    let warning = (worst > quad_tol).then_some(QuadratureWarning { estimate: worst, tol: quad_tol });
    Ok(QuadratureOd { op: ctx.untwist(op), warning })
}

/// `p a q + q a p`.
pub fn od_free(sea: &FermiSea, a: &Mat<c64>) -> Mat<c64> {
    let p = &sea.projection;
    let q = sea.complement();
    p * a * &q + &q * a * p
}

/// The one-body switch (or any diagonal) matrix with entries `f(site)` on
/// every orbital.
pub fn site_diagonal(lat: &crate::lattice::Lattice, f: impl Fn(Site) -> f64) -> Mat<c64> {
    let no = lat.n_orb();
    let d = lat.n_modes();
    Mat::from_fn(d, d, |i, j| if i == j { cr(f(lat.site(i / no))) } else { ZERO })
}

#[derive(Clone, Debug)]
pub struct OdInteraction {
    pub interaction: Interaction,
    /// `(Psi^OD)_{x,*}` indexed by site.
    pub local: Vec<FockOperator>,
    /// Shell depth used at each site.
    pub depth: Vec<usize>,
}

/// Smallest `k` with `B_k(x)` covering `m`.
fn covering_radius(ctx: &OdContext, x: Site, m: &Region) -> usize {
    let lat = ctx.space().lattice();
    m.sites(lat).map(|y| lat.dist(x, y)).max().unwrap_or(0) as usize
}

/// `(Psi^OD[alpha])_{x,*}` for every site and its shell decomposition over
/// `B_0(x), ..., B_K(x)`. With `k_max = None` the shells run to the box
/// covering the operator, otherwise the tail beyond `k_max` is assigned to
/// the covering box so the shells still sum to `(Psi^OD)_{x,*}` exactly.
pub fn od_interaction(ctx: &OdContext, psi: &Interaction, k_max: Option<usize>) -> Result<OdInteraction> {
    let spec = ctx.spectrum()?;
    let space = ctx.space().clone();
    if !Arc::ptr_eq(psi.space(), &space) {
        return Err(Error::Param("interaction lives on a different Fock space".into()));
    }
    let lat = space.lattice().clone();
    let w = &ctx.w;
    let twisted_psi = ctx.alpha.as_ref().map(|u| psi.total().conjugate_by(u));
    let whole = lat.whole();

    let local_terms = ctx.h.local_terms();
    let local: Vec<FockOperator> = local_terms
        .par_iter()
        .map(|hx| {
            let c = match &twisted_psi {
                None => psi.liouvillian(hx),
                Some(tp) => tp.commutator_full(hx),
            };
            let f = spec.filter(&c, |em, en| {
                let d = em - en;
                if d == 0.0 {
                    ZERO
                } else {
                    cr(-w.phi(d) / d)
                }
            });
            ctx.untwist(f).with_support(whole.clone())
        })
        .collect();

    let per_site: Vec<(Vec<(Region, FockOperator)>, usize)> =
        local.par_iter().enumerate().map(|(i, op)| shells(ctx, lat.site(i), op, k_max)).collect::<Result<_>>()?;

    let mut out = Interaction::new(format!("{}^OD", psi.name()), &space);
    let mut depth = Vec::with_capacity(per_site.len());
    for (terms, k) in per_site {
        depth.push(k);
        for (m, t) in terms {
            if !t.is_zero() {
                out.add_term(m, t)?;
            }
        }
    }
    Ok(OdInteraction { interaction: out, local, depth })
}

/// Shell terms `(E_{B_k(x)} - E_{B_{k-1}(x)}) op` for `k = 0..=k_max`, the
/// tail going to the covering box, and the depth reached.
pub fn shells(
    ctx: &OdContext,
    x: Site,
    op: &FockOperator,
    k_max: Option<usize>,
) -> Result<(Vec<(Region, FockOperator)>, usize)> {
    let lat = ctx.space().lattice();
    let cover = covering_radius(ctx, x, &lat.whole());
    let top = k_max.unwrap_or(cover).min(cover);
    let mut terms = Vec::new();
    let mut prev = FockOperator::zero(ctx.space());
    for k in 0..=top {
        let b = lat.box_region(x, k);
        let e = if k == cover { op.clone().with_support(b.clone()) } else { op.conditional_expectation(&b)? };
        terms.push((b, e.sub(&prev).with_support(lat.box_region(x, k))));
        prev = e;
    }
    if top < cover {
        let b = lat.box_region(x, cover);
        terms.push((b.clone(), op.sub(&prev).with_support(b)));
    }
    Ok((terms, top))
}

/// `i [A, B]`.
pub fn i_commutator(a: &FockOperator, b: &FockOperator) -> FockOperator {
    a.commutator_full(b).scale(c64::new(0.0, 1.0))
}

/// Diagonal remainder `A - A^OD`.
pub fn diagonal_part(a: &FockOperator, od: &FockOperator) -> FockOperator {
    a.sub(od)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::Builtin;
    use crate::lattice::{Axis, Boundary, Lattice};
    use crate::linalg::{self, ONE};
    use crate::models::{build_interaction, build_one_body, ModelKind, ModelSpec};
    use crate::spectral::fermi_sea;
    use crate::weightfn::{build_weight, WeightParams};

    fn one_body_max(a: &Mat<c64>) -> f64 {
        linalg::max_abs(a.as_ref())
    }
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cluster(l1: usize, l2: usize, seed: u64) -> (Arc<FockSpace>, Interaction) {
        let lat = Lattice::new(l1, l2, Boundary::Open, 1).unwrap();
        let sp = FockSpace::new(&lat).unwrap();
        let spec = ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 1.2, mu: 0.4 }).with_disorder(0.6, seed);
        let h = build_interaction(&spec, &sp).unwrap();
        (sp, h)
    }

    fn ctx_for(h: &Interaction) -> OdContext {
        let spec = ManyBodySpectrum::compute(h).unwrap();
        let gs = GroundState::from_spectrum(&spec, h.name(), 1e-8).unwrap();
        let g = gs.gap.min(1.0);
        let w = Arc::new(build_weight(WeightParams::new(g)).unwrap());
        OdContext::from_parts(h, w, Arc::new(spec), gs).unwrap()
    }

    fn local_samples(sp: &Arc<FockSpace>, n: usize, seed: u64, gauge: bool) -> Vec<FockOperator> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = sp.lattice().clone();
        (0..n)
            .map(|i| {
                let c = lat.site(i % lat.n_sites());
                FockOperator::random_local(sp, &lat.box_region(c, 1), gauge, &mut rng)
            })
            .collect()
    }

    #[test]
    fn identity_and_functions_of_h_vanish() {
        let (sp, h) = cluster(3, 2, 1);
        let ctx = ctx_for(&h);
        let id = FockOperator::identity(&sp);
        assert!(od_observable_spectral(&ctx, &id).unwrap().max_abs() < 1e-13);
        let q = od_observable_quadrature(&ctx, &id, 1e-6).unwrap();
        assert!(q.op.max_abs() < 1e-13 && q.warning.is_none());
        let ht = h.total();
        let f = ht.mul(&ht).add(&ht.scale_re(0.5));
        assert!(od_observable_spectral(&ctx, &f).unwrap().max_abs() < 1e-11);
        assert!(od_observable_quadrature(&ctx, &f, 1e-6).unwrap().op.max_abs() < 1e-6);
    }

    #[test]
    fn quadrature_matches_spectral() {
        let (sp, h) = cluster(3, 2, 2);
        let ctx = ctx_for(&h);
        for a in local_samples(&sp, 4, 3, true) {
            let s = od_observable_spectral(&ctx, &a).unwrap();
            let q = od_observable_quadrature(&ctx, &a, 1e-6).unwrap();
            assert!(q.warning.is_none(), "{:?}", q.warning);
            assert!(s.sub(&q.op).max_abs() < 1e-6 * (1.0 + a.max_abs()));
        }
    }

    #[test]
    fn resolved_two_level_transition_is_kept() {
        let lat = Lattice::new(2, 1, Boundary::Open, 1).unwrap();
        let sp = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&ModelSpec::new(ModelKind::Atomic), &sp).unwrap();
        let ctx = ctx_for(&h);
        // hopping between levels -1 and +1: only transitions with |D| = 2
        let (x, y) = (lat.site(0), lat.site(1));
        let a = FockOperator::creation(&sp, x, 0).unwrap().mul(&FockOperator::annihilation(&sp, y, 0).unwrap());
        let od = od_observable_spectral(&ctx, &a).unwrap();
        assert!(od.sub(&a).max_abs() < 1e-12);
        let od2 = od_observable_spectral(&ctx, &od).unwrap();
        assert!(od2.sub(&od).max_abs() < 1e-12);
        let n = FockOperator::number(&sp, x).unwrap();
        assert!(od_observable_spectral(&ctx, &n).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn off_diagonal_property_and_remainder() {
        let (sp, h) = cluster(3, 2, 4);
        let ctx = ctx_for(&h);
        let xs = local_samples(&sp, 6, 5, true);
        let ys = local_samples(&sp, 6, 6, false);
        for (a, b) in xs.iter().zip(&ys) {
            let od = od_observable_spectral(&ctx, a).unwrap();
            let lhs = ctx.expectation(&a.commutator_full(b)).unwrap();
            let rhs = ctx.expectation(&od.commutator_full(b)).unwrap();
            assert!((lhs - rhs).norm() < 1e-12, "{}", (lhs - rhs).norm());
            let di = diagonal_part(a, &od);
            assert!((ctx.expectation(&di).unwrap() - ctx.expectation(a).unwrap()).norm() < 1e-12);
            assert!(ctx.expectation(&di.commutator_full(b)).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn od_interaction_of_number_is_zero_and_shells_close() {
        let (sp, h) = cluster(3, 2, 7);
        let ctx = ctx_for(&h);
        let n = Interaction::builtin(Builtin::Number, &sp).unwrap();
        let odn = od_interaction(&ctx, &n, None).unwrap();
        assert!(odn.interaction.is_empty() || odn.interaction.total().max_abs() < 1e-12);

        let lam = Interaction::builtin(Builtin::Switch(Axis::One), &sp).unwrap();
        for k_max in [None, Some(0), Some(1)] {
            let od = od_interaction(&ctx, &lam, k_max).unwrap();
            // shells around x sum to (Psi^OD)_{x,*}
            let lat = sp.lattice();
            for (i, loc) in od.local.iter().enumerate() {
                let x = lat.site(i);
                let mut sum = FockOperator::zero(&sp);
                let (terms, _) = shells(&ctx, x, loc, k_max).unwrap();
                for (_, t) in &terms {
                    sum = sum.add(t);
                }
                assert!(sum.sub(loc).max_abs() < 1e-13);
            }
            // the interaction sums to the observable OD of the total switch
            let total = od.interaction.total();
            let obs = od_observable_spectral(&ctx, &lam.total()).unwrap();
            assert!(total.sub(&obs).max_abs() < 1e-10);
        }
    }

    #[test]
    fn liouvillian_of_od_interaction_in_state() {
        let (sp, h) = cluster(3, 2, 8);
        let ctx = ctx_for(&h);
        let lam = Interaction::builtin(Builtin::Switch(Axis::Two), &sp).unwrap();
        let od = od_interaction(&ctx, &lam, Some(1)).unwrap();
        for a in local_samples(&sp, 5, 9, false) {
            let lhs = ctx.expectation(&lam.liouvillian(&a)).unwrap();
            let rhs = ctx.expectation(&od.interaction.liouvillian(&a)).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "{}", (lhs - rhs).norm());
        }
    }

    #[test]
    fn twisted_context_properties() {
        let (sp, h) = cluster(3, 2, 10);
        let ctx = ctx_for(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lat = sp.lattice().clone();
        let gen = FockOperator::random_local(&sp, &lat.box_region(lat.site(0), 1), true, &mut rng);
        let gen = gen.add(&gen.adjoint());
        let u = gen.exp_herm(0.7).unwrap();
        let tctx = ctx.clone().with_alpha(u).unwrap();
        for (a, b) in local_samples(&sp, 4, 12, true).iter().zip(local_samples(&sp, 4, 13, false).iter()) {
            let od = od_observable_spectral(&tctx, a).unwrap();
            let lhs = tctx.expectation(&a.commutator_full(b)).unwrap();
            let rhs = tctx.expectation(&od.commutator_full(b)).unwrap();
            assert!((lhs - rhs).norm() < 1e-11);
        }
    }

    #[test]
    fn state_routes_match_operator_routes() {
        let (sp, h) = cluster(3, 2, 14);
        let ctx = ctx_for(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let lat = sp.lattice().clone();
        let gen = FockOperator::random_local(&sp, &lat.box_region(lat.site(1), 1), true, &mut rng);
        let u = gen.add(&gen.adjoint()).exp_herm(0.4).unwrap();
        for c in [ctx.clone(), ctx.with_alpha(u).unwrap()] {
            let psi = c.state().unwrap();
            let l1 = Interaction::builtin(Builtin::Switch(Axis::One), &sp).unwrap();
            let l2 = Interaction::builtin(Builtin::Switch(Axis::Two), &sp).unwrap();
            let o1 = od_observable_spectral(&c, &l1.total()).unwrap();
            let o2 = od_observable_spectral(&c, &l2.total()).unwrap();
            let v1 = c.od_on_state(&l1.total()).unwrap();
            let dv: f64 = o1.apply(&psi).unwrap().amps.iter().zip(&v1.amps).map(|(a, b)| (a - b).norm()).sum();
            assert!(dv < 1e-12);
            let full = c.expectation(&i_commutator(&o2, &o1)).unwrap();
            let fast = commutator_in_state(&c.od_on_state(&l2.total()).unwrap(), &v1);
            assert!((full.re - fast).abs() < 1e-12 && full.im.abs() < 1e-12);
            let loc = od_interaction(&c, &l1, Some(0)).unwrap();
            let vs = c.od_interaction_on_state(&l1).unwrap();
            for (op, v) in loc.local.iter().zip(&vs) {
                let d: f64 = op.apply(&psi).unwrap().amps.iter().zip(&v.amps).map(|(a, b)| (a - b).norm()).sum();
                assert!(d < 1e-12);
            }
        }
    }

    #[test]
    fn free_od_examples() {
        let lat = Lattice::new(4, 4, Boundary::Open, 2).unwrap();
        let h = build_one_body(&ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }), &lat).unwrap();
        let sea = fermi_sea(&h, 1e-3).unwrap();
        assert!(one_body_max(&od_free(&sea, &sea.projection)) < 1e-12);
        assert!(one_body_max(&od_free(&sea, &h)) < 1e-10);
        let lam = site_diagonal(&lat, |x| if x.x1 >= 0 { 1.0 } else { 0.0 });
        let od = od_free(&sea, &lam);
        assert!(one_body_max(&(od_free(&sea, &od) - &od)) < 1e-12);
        assert!(one_body_max(&od_free(&sea, &Mat::from_fn(32, 32, |i, j| if i == j { ONE } else { ZERO }))) < 1e-12);
    }

    #[test]
    fn free_and_many_body_conductance_agree() {
        let lat = Lattice::new(3, 2, Boundary::Open, 2).unwrap();
        let sp = FockSpace::new(&lat).unwrap();
        let spec = ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }).with_fermi_level(0.02);
        let h = build_interaction(&spec, &sp).unwrap();
        let ctx = ctx_for(&h);
        let l1 = Interaction::builtin(Builtin::Switch(Axis::One), &sp).unwrap().total();
        let l2 = Interaction::builtin(Builtin::Switch(Axis::Two), &sp).unwrap().total();
        let mb = commutator_in_state(&ctx.od_on_state(&l2).unwrap(), &ctx.od_on_state(&l1).unwrap());

        let h1 = build_one_body(&spec, &lat).unwrap();
        let sea = fermi_sea(&h1, 0.02).unwrap();
        let a1 = od_free(&sea, &site_diagonal(&lat, |x| if x.x1 >= 0 { 1.0 } else { 0.0 }));
        let a2 = od_free(&sea, &site_diagonal(&lat, |x| if x.x2 >= 0 { 1.0 } else { 0.0 }));
        let comm = &a2 * &a1 - &a1 * &a2;
        let free = sea.expectation(&comm) * c64::new(0.0, 1.0);
        assert!((mb - free).norm() < 1e-6, "{mb} vs {free}");
    }
}

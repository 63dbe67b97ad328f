//! Fermionic Fock space, CAR operators, the tracial state, conditional
//! expectations and quasi-local norms.
//!
//! Modes are ordered row-major by site, then by orbital: mode
//! `m = site_index * n_orb + orbital`. Basis states are bit strings with bit
//! `m` the occupation of mode `m`, and
//! `c_m |s> = (-1)^(number of occupied modes below m) |s - e_m>`.
//! Operators are stored as blocks between particle-number sectors.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::{c64, Mat};
use rand::Rng;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Region, Site};
use crate::linalg::{self, cr, ONE, ZERO};

/// Hard cap on the number of modes.
pub const MAX_MODES: usize = 16;
/// Spaces with at most this many modes use dense blocks.
pub const DENSE_MODES: usize = 12;
/// Cost guard for conditional expectations: `|M| * n_orb` modes.
pub const EXPECTATION_MODES: usize = 12;

#[derive(Debug)]
pub struct FockSpace {
    lat: Lattice,
    n_modes: usize,
    sectors: Vec<Vec<u32>>,
    pos: Vec<u32>,
    dense: bool,
}

impl FockSpace {
    pub fn new(lat: &Lattice) -> Result<Arc<FockSpace>> {
        Self::with_limits(lat, MAX_MODES, DENSE_MODES)
    }

    pub fn with_limits(lat: &Lattice, max_modes: usize, dense_modes: usize) -> Result<Arc<FockSpace>> {
        let n_modes = lat.n_modes();
        if n_modes > max_modes.min(MAX_MODES) {
            return Err(Error::Size(format!(
                "Fock space with {n_modes} modes exceeds the cap of {} modes",
                max_modes.min(MAX_MODES)
            )));
        }
        let dim = 1usize << n_modes;
        let mut sectors = vec![Vec::new(); n_modes + 1];
        let mut pos = vec![0u32; dim];
        for s in 0..dim as u32 {
            let n = s.count_ones() as usize;
            pos[s as usize] = sectors[n].len() as u32;
            sectors[n].push(s);
        }
        Ok(Arc::new(FockSpace { lat: lat.clone(), n_modes, sectors, pos, dense: n_modes <= dense_modes }))
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
    pub fn dim(&self) -> usize {
        1 << self.n_modes
    }
    pub fn is_dense(&self) -> bool {
        self.dense
    }
    pub fn n_sectors(&self) -> usize {
        self.n_modes + 1
    }
    pub fn sector(&self, n: usize) -> &[u32] {
        &self.sectors[n]
    }
    pub fn sector_dim(&self, n: usize) -> usize {
        self.sectors[n].len()
    }
    pub fn position(&self, s: u32) -> usize {
        self.pos[s as usize] as usize
    }

    pub fn mode(&self, x: Site, orb: usize) -> Result<usize> {
        if orb >= self.lat.n_orb() {
            return Err(Error::Index(format!("orbital {orb} >= n_orb {}", self.lat.n_orb())));
        }
        Ok(self.lat.index(x)? * self.lat.n_orb() + orb)
    }

    pub fn mode_mask(&self, m: &Region) -> u32 {
        let no = self.lat.n_orb();
        m.iter().fold(0u32, |acc, i| acc | (((1u32 << no) - 1) << (i * no)))
    }

    pub fn site_of_mode(&self, mode: usize) -> usize {
        mode / self.lat.n_orb()
    }
}

fn jw_sign(s: u32, m: usize) -> f64 {
    if (s & ((1u32 << m) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A single CAR generator: `c_m` or `c_m^dagger`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn apply(&self, s: u32) -> Option<(u32, f64)> {
        let bit = 1u32 << self.mode;
        let occupied = s & bit != 0;
        if occupied == self.dagger {
            return None;
        }
        Some((s ^ bit, jw_sign(s, self.mode)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Debug)]
pub struct FockOperator {
    space: Arc<FockSpace>,
    blocks: BTreeMap<(usize, usize), Block>,
    support: Region,
}

/// A normalized state with definite particle number.
#[derive(Clone, Debug)]
pub struct SectorState {
    pub n: usize,
    pub amps: Vec<c64>,
}

impl SectorState {
    pub fn norm(&self) -> f64 {
        linalg::vnorm(&self.amps)
    }

    pub fn overlap(&self, other: &SectorState) -> c64 {
        if self.n != other.n {
            return ZERO;
        }
        linalg::vdot(&self.amps, &other.amps)
    }

    pub fn fidelity(&self, other: &SectorState) -> f64 {
        self.overlap(other).norm_sqr()
    }

    /// Haar-random unit vector in sector `n`.
    pub fn random(space: &FockSpace, n: usize, rng: &mut impl Rng) -> SectorState {
        let normal = rand_distr::StandardNormal;
        let mut amps: Vec<c64> =
            (0..space.sector_dim(n)).map(|_| c64::new(rng.sample(normal), rng.sample(normal))).collect();
        let nrm = linalg::vnorm(&amps);
        amps.iter_mut().for_each(|a| *a /= nrm);
        SectorState { n, amps }
    }
}

impl FockOperator {
    pub fn zero(space: &Arc<FockSpace>) -> Self {
        FockOperator { space: space.clone(), blocks: BTreeMap::new(), support: Region::empty() }
    }

    pub fn identity(space: &Arc<FockSpace>) -> Self {
        let blocks =
            (0..space.n_sectors()).map(|n| ((n, n), Block::identity(space.sector_dim(n), space.dense))).collect();
        FockOperator { space: space.clone(), blocks, support: Region::empty() }
    }

    pub fn scalar(space: &Arc<FockSpace>, a: c64) -> Self {
        Self::identity(space).scale(a)
    }

    /// Operator defined by its action on basis states. `f(s)` returns the
    /// nonzero amplitudes `<t|A|s>` as `(t, amplitude)`.
    pub fn from_action(space: &Arc<FockSpace>, support: Region, f: impl Fn(u32) -> Vec<(u32, c64)>) -> Self {
        let mut trip: BTreeMap<(usize, usize), Vec<(u32, u32, c64)>> = BTreeMap::new();
        for s in 0..space.dim() as u32 {
            let n_in = s.count_ones() as usize;
            let col = space.position(s) as u32;
            for (t, v) in f(s) {
                if v == ZERO {
                    continue;
                }
                let n_out = t.count_ones() as usize;
                trip.entry((n_out, n_in)).or_default().push((space.position(t) as u32, col, v));
            }
        }
        let blocks = trip
            .into_iter()
            .map(|((a, b), t)| ((a, b), Block::from_triplets(space.sector_dim(a), space.sector_dim(b), t, space.dense)))
            .filter(|(_, b)| !b.is_zero())
            .collect();
        FockOperator { space: space.clone(), blocks, support }
    }

    /// `coeff * l_1 l_2 ... l_k` (the rightmost factor acts first).
    pub fn monomial(space: &Arc<FockSpace>, ladders: &[Ladder], coeff: c64) -> Self {
        let sites = Region::from_indices(ladders.iter().map(|l| space.site_of_mode(l.mode)));
        Self::from_action(space, sites, |s| {
            let mut st = s;
            let mut sign = 1.0;
            for l in ladders.iter().rev() {
                match l.apply(st) {
                    Some((t, sg)) => {
                        st = t;
                        sign *= sg;
                    }
                    None => return Vec::new(),
                }
            }
            vec![(st, coeff * sign)]
        })
    }

    pub fn annihilation(space: &Arc<FockSpace>, x: Site, orb: usize) -> Result<Self> {
        let m = space.mode(x, orb)?;
        Ok(Self::monomial(space, &[Ladder { mode: m, dagger: false }], ONE))
    }

    pub fn creation(space: &Arc<FockSpace>, x: Site, orb: usize) -> Result<Self> {
        let m = space.mode(x, orb)?;
        Ok(Self::monomial(space, &[Ladder { mode: m, dagger: true }], ONE))
    }

    pub fn mode_number(space: &Arc<FockSpace>, m: usize) -> Self {
        let site = Region::from_indices([space.site_of_mode(m)]);
        Self::from_action(space, site, |s| if s & (1 << m) != 0 { vec![(s, ONE)] } else { vec![] })
    }

    /// `n_x = sum_i a*_{x,i} a_{x,i}`.
    pub fn number(space: &Arc<FockSpace>, x: Site) -> Result<Self> {
        let mask = space.mode_mask(&Region::from_indices([space.lat.index(x)?]));
        let site = Region::from_indices([space.lat.index(x)?]);
        Ok(Self::from_action(space, site, |s| {
            let k = (s & mask).count_ones();
            if k == 0 {
                vec![]
            } else {
                vec![(s, cr(k as f64))]
            }
        }))
    }

    /// Quadratic form `sum_{a,b} k[a][b] c_a^dagger c_b` over the given modes.
    pub fn quadratic(space: &Arc<FockSpace>, modes: &[usize], k: &Mat<c64>) -> Self {
        let sites = Region::from_indices(modes.iter().map(|&m| space.site_of_mode(m)));
        Self::from_action(space, sites, |s| {
            let mut out = Vec::new();
            for (jb, &b) in modes.iter().enumerate() {
                let Some((t, s1)) = (Ladder { mode: b, dagger: false }).apply(s) else { continue };
                for (ja, &a) in modes.iter().enumerate() {
                    let v = k[(ja, jb)];
                    if v == ZERO {
                        continue;
                    }
                    if let Some((u, s2)) = (Ladder { mode: a, dagger: true }).apply(t) {
                        out.push((u, v * (s1 * s2)));
                    }
                }
            }
            out
        })
    }

    /// Operator from a full `dim x dim` matrix in the bit-string basis.
    pub fn from_dense(space: &Arc<FockSpace>, m: &Mat<c64>, support: Region) -> Self {
        Self::from_action(space, support, |s| {
            (0..space.dim() as u32).map(|t| (t, m[(t as usize, s as usize)])).collect()
        })
    }

    /// A random element of `A_M`: a linear combination of products of local
    /// matrix units with complex Gaussian coefficients. With
    /// `gauge_invariant`, only particle-number-conserving units are used.
    pub fn random_local(space: &Arc<FockSpace>, m: &Region, gauge_invariant: bool, rng: &mut impl Rng) -> Self {
        let modes: Vec<usize> = (0..space.n_modes).filter(|&q| space.mode_mask(m) & (1 << q) != 0).collect();
        let k = modes.len();
        let nloc = 1usize << k;
        let normal = rand_distr::StandardNormal;
        let mut coef = vec![ZERO; nloc * nloc];
        for a in 0..nloc {
            for b in 0..nloc {
                if gauge_invariant && (a as u32).count_ones() != (b as u32).count_ones() {
                    continue;
                }
                coef[a * nloc + b] = c64::new(rng.sample(normal), rng.sample(normal));
            }
        }
        let local_bits = |s: u32| -> usize {
            modes.iter().enumerate().fold(0, |acc, (i, &q)| acc | ((((s >> q) & 1) as usize) << i))
        };
        Self::from_action(space, m.clone(), |s| {
            let b = local_bits(s);
            let mut out = Vec::with_capacity(nloc);
            for a in 0..nloc {
                let v = coef[a * nloc + b];
                if v == ZERO {
                    continue;
                }
                let mut t = s;
                let mut sign = 1.0;
                for (i, &q) in modes.iter().enumerate() {
                    if ((a ^ b) >> i) & 1 == 1 {
                        sign *= jw_sign(s, q);
                        t ^= 1 << q;
                    }
                }
                out.push((t, v * sign));
            }
            out
        })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    /// Replace the support metadata. The caller asserts that the operator
    /// lies in `A_M` for the given `M`.
    pub fn with_support(mut self, m: Region) -> Self {
        self.support = m;
        self
    }

    pub fn block(&self, n_out: usize, n_in: usize) -> Option<&Block> {
        self.blocks.get(&(n_out, n_in))
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &Block)> {
        self.blocks.iter()
    }

    pub(crate) fn from_blocks(
        space: &Arc<FockSpace>,
        blocks: BTreeMap<(usize, usize), Block>,
        support: Region,
    ) -> Self {
        let blocks =
            blocks.into_iter().filter(|(_, b)| !b.is_zero()).map(|(k, b)| (k, b.into_storage(space.dense))).collect();
        FockOperator { space: space.clone(), blocks, support }
    }

    /// Dense copy of the `(n, n)` block (zeros if absent).
    pub fn sector_matrix(&self, n: usize) -> Mat<c64> {
        match self.blocks.get(&(n, n)) {
            Some(b) => b.to_dense(),
            None => Mat::zeros(self.space.sector_dim(n), self.space.sector_dim(n)),
        }
    }

    /// Full `dim x dim` matrix in the bit-string basis.
    pub fn to_dense(&self) -> Mat<c64> {
        let d = self.space.dim();
        let mut m = Mat::zeros(d, d);
        for (&(a, b), blk) in &self.blocks {
            let (ra, rb) = (self.space.sector(a), self.space.sector(b));
            blk.for_each_nonzero(|r, c, v| m[(ra[r] as usize, rb[c] as usize)] = v);
        }
        m
    }

    fn check_space(&self, other: &FockOperator) {
        assert!(Arc::ptr_eq(&self.space, &other.space), "operators belong to different Fock spaces");
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, other: &FockOperator, a: c64) -> FockOperator {
        self.check_space(other);
        let mut blocks = self.blocks.clone();
        for (k, b) in &other.blocks {
            let nb = match blocks.get(k) {
                Some(x) => x.add_scaled(b, a),
                None => b.scale(a),
            };
            blocks.insert(*k, nb);
        }
        Self::from_blocks(&self.space, blocks, self.support.union(&other.support))
    }

    pub fn add(&self, other: &FockOperator) -> FockOperator {
        self.add_scaled(other, ONE)
    }

    pub fn sub(&self, other: &FockOperator) -> FockOperator {
        self.add_scaled(other, cr(-1.0))
    }

    pub fn scale(&self, a: c64) -> FockOperator {
        let blocks = self.blocks.iter().map(|(k, b)| (*k, b.scale(a))).collect();
        Self::from_blocks(&self.space, blocks, self.support.clone())
    }

    pub fn scale_re(&self, a: f64) -> FockOperator {
        self.scale(cr(a))
    }

    pub fn mul(&self, other: &FockOperator) -> FockOperator {
        self.check_space(other);
        let mut blocks: BTreeMap<(usize, usize), Block> = BTreeMap::new();
        for (&(a, b), x) in &self.blocks {
            for (&(b2, c), y) in other.blocks.range((b, 0)..=(b, usize::MAX)) {
                debug_assert_eq!(b, b2);
                let p = x.mul(y);
                let e = match blocks.remove(&(a, c)) {
                    Some(acc) => acc.add_scaled(&p, ONE),
                    None => p,
                };
                blocks.insert((a, c), e);
            }
        }
        Self::from_blocks(&self.space, blocks, self.support.union(&other.support))
    }

    pub fn adjoint(&self) -> FockOperator {
        let blocks = self.blocks.iter().map(|(&(a, b), x)| ((b, a), x.adjoint())).collect();
        FockOperator { space: self.space.clone(), blocks, support: self.support.clone() }
    }

    /// `[self, other]`; skipped (exact zero) when the supports are disjoint
    /// and one factor is even.
    pub fn commutator(&self, other: &FockOperator) -> FockOperator {
        if self.support.is_disjoint(&other.support) && (self.parity() == Parity::Even || other.parity() == Parity::Even)
        {
            return FockOperator::zero(&self.space).with_support(self.support.union(&other.support));
        }
        self.mul(other).sub(&other.mul(self))
    }

    /// Commutator without the disjoint-support shortcut.
    pub fn commutator_full(&self, other: &FockOperator) -> FockOperator {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn anticommutator(&self, other: &FockOperator) -> FockOperator {
        self.mul(other).add(&other.mul(self))
    }

    pub fn trace(&self) -> c64 {
        (0..self.space.n_sectors()).filter_map(|n| self.blocks.get(&(n, n))).fold(ZERO, |s, b| s + b.trace())
    }

    /// `tr(A) / dim`.
    pub fn tracial_state(&self) -> c64 {
        self.trace() / self.space.dim() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.values().fold(0.0f64, |m, b| m.max(b.max_abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks.values().map(|b| b.frob2()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for &(a, b) in self.blocks.keys() {
            if (a + b) % 2 == 0 {
                even = true
            } else {
                odd = true
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }

    /// Exact: every stored block lies on the sector diagonal.
    pub fn is_gauge_invariant(&self) -> bool {
        self.blocks.keys().all(|&(a, b)| a == b)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Operator norm.
    pub fn opnorm(&self) -> f64 {
        if self.blocks.is_empty() {
            return 0.0;
        }
        let shifts: std::collections::BTreeSet<i64> = self.blocks.keys().map(|&(a, b)| a as i64 - b as i64).collect();
        if shifts.len() == 1 && self.blocks.values().all(|b| b.is_dense() || b.nrows() <= 2048) {
            // rows and columns of distinct blocks do not overlap
            return self.blocks.values().map(|b| linalg::spectral_norm(b.to_dense().as_ref())).fold(0.0, f64::max);
        }
        if self.space.dim() <= 1024 {
            return linalg::spectral_norm(self.to_dense().as_ref());
        }
        // largest eigenvalue of A^dagger A by Lanczos on the negated operator
        let ata = self.adjoint().mul(self);
        let mut best = 0.0f64;
        for n in 0..self.space.n_sectors() {
            if let Some(b) = ata.blocks.get(&(n, n)) {
                let mv = |x: &[c64], y: &mut [c64]| {
                    b.matvec(x, y);
                    y.iter_mut().for_each(|v| *v = -*v);
                };
                if let Ok(r) = linalg::lanczos_lowest(b.nrows(), 1, &mv, 1e-9, 7) {
                    best = best.max(-r.values[0]);
                }
            }
        }
        best.max(0.0).sqrt()
    }

    /// `<psi|A|psi>`.
    pub fn expectation(&self, psi: &SectorState) -> c64 {
        match self.blocks.get(&(psi.n, psi.n)) {
            None => ZERO,
            Some(b) => {
                let mut y = vec![ZERO; psi.amps.len()];
                b.matvec(&psi.amps, &mut y);
                linalg::vdot(&psi.amps, &y)
            }
        }
    }

    /// `A psi`, which must stay in one sector.
    pub fn apply(&self, psi: &SectorState) -> Option<SectorState> {
        let mut out: Option<SectorState> = None;
        for (&(a, b), blk) in &self.blocks {
            if b != psi.n {
                continue;
            }
            if out.is_some() {
                return None;
            }
            let mut y = vec![ZERO; blk.nrows()];
            blk.matvec(&psi.amps, &mut y);
            out = Some(SectorState { n: a, amps: y });
        }
        out.or_else(|| Some(SectorState { n: psi.n, amps: vec![ZERO; psi.amps.len()] }))
    }

    /// `exp(-i t G)` for a gauge-invariant hermitian `G`, sector by sector.
    pub fn exp_herm(&self, t: f64) -> Result<FockOperator> {
        if !self.is_gauge_invariant() {
            return Err(Error::Param("exponent must conserve particle number".into()));
        }
        let mut blocks = BTreeMap::new();
        for n in 0..self.space.n_sectors() {
            let u = linalg::expm_herm(self.sector_matrix(n).as_ref(), t)?;
            blocks.insert((n, n), Block::Dense(u));
        }
        Ok(FockOperator::from_blocks(&self.space, blocks, self.support.clone()))
    }

    /// `U^dagger A U` for a gauge-invariant unitary `U`.
    pub fn conjugate_by(&self, u: &FockOperator) -> FockOperator {
        u.adjoint().mul(self).mul(u).with_support(self.support.union(u.support()))
    }

    /// True when `A` graded-commutes with every generator at sites outside
    /// `m`, up to `tol` in max-abs.
    pub fn is_supported_in(&self, m: &Region, tol: f64) -> bool {
        let p = self.parity();
        for q in 0..self.space.n_modes {
            if m.contains(self.space.site_of_mode(q)) {
                continue;
            }
            for dagger in [false, true] {
                let g = Self::monomial(&self.space, &[Ladder { mode: q, dagger }], ONE);
                let comm = match p {
                    Parity::Even => self.commutator_full(&g),
                    Parity::Odd => self.anticommutator(&g),
                    Parity::Mixed => {
                        let (ev, od) = self.parity_parts();
                        let c = ev.commutator_full(&g).add(&od.anticommutator(&g));
                        c
                    }
                };
                if comm.max_abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Even and odd parts.
    pub fn parity_parts(&self) -> (FockOperator, FockOperator) {
        let mut ev = BTreeMap::new();
        let mut od = BTreeMap::new();
        for (&(a, b), x) in &self.blocks {
            if (a + b) % 2 == 0 {
                ev.insert((a, b), x.clone());
            } else {
                od.insert((a, b), x.clone());
            }
        }
        (
            Self::from_blocks(&self.space, ev, self.support.clone()),
            Self::from_blocks(&self.space, od, self.support.clone()),
        )
    }

    /// Trace-preserving projection onto `A_M` (the conditional expectation),
    /// computed as a composition of single-mode removals over the modes
    /// outside `M`.
    pub fn conditional_expectation(&self, m: &Region) -> Result<FockOperator> {
        let n_orb = self.space.lat.n_orb();
        if m.len() * n_orb > EXPECTATION_MODES {
            return Err(Error::Size(format!(
                "conditional expectation onto {} modes exceeds the guard of {EXPECTATION_MODES}",
                m.len() * n_orb
            )));
        }
        let keep = self.space.mode_mask(m);
        let sup_mask = self.space.mode_mask(&self.support);
        let mut x = self.clone();
        for q in 0..self.space.n_modes {
            if keep & (1 << q) != 0 || sup_mask & (1 << q) == 0 {
                // modes outside the support are already traced out exactly
                continue;
            }
            x = x.remove_mode(q);
        }
        Ok(x.with_support(self.support.intersection(m)))
    }

    /// `E_{complement of mode q}`: entries `(s, t)` with `s_q = t_q` survive as
    /// `(X_st + tau_s tau_t X_{s^q, t^q}) / 2`, `tau_s` the parity of the
    /// modes above `q`.
    fn remove_mode(&self, q: usize) -> FockOperator {
        let sp = &self.space;
        let bit = 1u32 << q;
        let above = |s: u32| -> f64 {
            if (s >> (q + 1)).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut out: BTreeMap<(usize, usize), Vec<(u32, u32, c64)>> = BTreeMap::new();
        for (&(a, b), blk) in &self.blocks {
            let (ra, rb) = (sp.sector(a), sp.sector(b));
            blk.for_each_nonzero(|r, c, v| {
                let (s, t) = (ra[r], rb[c]);
                if (s ^ t) & bit != 0 {
                    return;
                }
                let half = v * 0.5;
                out.entry((a, b)).or_default().push((r as u32, c as u32, half));
                let (s2, t2) = (s ^ bit, t ^ bit);
                let (a2, b2) = (s2.count_ones() as usize, t2.count_ones() as usize);
                let sign = above(s) * above(t);
                out.entry((a2, b2)).or_default().push((sp.position(s2) as u32, sp.position(t2) as u32, half * sign));
            });
        }
        let blocks = out
            .into_iter()
            .map(|((a, b), t)| ((a, b), Block::from_triplets(sp.sector_dim(a), sp.sector_dim(b), t, sp.dense)))
            .collect();
        Self::from_blocks(sp, blocks, self.support.clone())
    }

    /// `||A|| + sup_k ||A - E_{B_k(x)} A|| (1+k)^nu`; the supremum stops at
    /// the first box containing the support.
    pub fn local_norm(&self, nu: u32, x: Site) -> Result<f64> {
        let lat = self.space.lattice();
        let base = self.opnorm();
        let mut k_cover = 0usize;
        while !self.support.is_subset(&lat.box_region(x, k_cover)) {
            k_cover += 1;
        }
        let mut best = 0.0f64;
        let mut inner = self.clone();
        for k in (0..k_cover).rev() {
            inner = inner.conditional_expectation(&lat.box_region(x, k))?;
            let d = self.sub(&inner).opnorm();
            best = best.max(d * ((1 + k) as f64).powi(nu as i32));
        }
        Ok(base + best)
    }
}

//! Concrete lattice Hamiltonians, as one-body matrices and as interactions.

use std::sync::Arc;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockSpace, Ladder};
use crate::interaction::Interaction;
use crate::lattice::{Boundary, Lattice, Region, Site};
use crate::linalg::{cr, ONE, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// On-site energies `-1, +1, -1, ...` by orbital; with one orbital, a
    /// checkerboard of `-1` and `+1`.
    Atomic,
    /// Two-band Chern insulator with Bloch matrix
    /// `sin k1 sx + sin k2 sy + (u + cos k1 + cos k2) sz`.
    QiWuZhang { u: f64 },
    /// Honeycomb Chern insulator drawn on the square lattice (brick wall),
    /// orbital 0 and 1 the two sublattices.
    Haldane { t1: f64, t2: f64, phi: f64, m: f64 },
    /// Square-lattice hopping with flux `p/q` per plaquette (Landau gauge).
    Hofstadter { p: i64, q: i64 },
    /// `-t sum_<xy> (a*_x a_y + h.c.) + v sum_<xy> n_x n_y - mu sum_x n_x`.
    InteractingCluster { t: f64, v: f64, mu: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// On-site disorder drawn uniformly from `[-w, w]` per mode.
    pub disorder: f64,
    pub seed: u64,
    /// Chemical potential of quadratic models, subtracted in the many-body
    /// Hamiltonian and used as the Fermi level of the free engine.
    pub fermi_level: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec { kind, disorder: 0.0, seed: 0, fermi_level: 0.0 }
    }

    pub fn with_disorder(mut self, w: f64, seed: u64) -> Self {
        self.disorder = w;
        self.seed = seed;
        self
    }

    pub fn with_fermi_level(mut self, mu: f64) -> Self {
        self.fermi_level = mu;
        self
    }

    pub fn is_quadratic(&self) -> bool {
        !matches!(self.kind, ModelKind::InteractingCluster { .. })
    }

    pub fn required_orbitals(&self) -> Option<usize> {
        match self.kind {
            ModelKind::QiWuZhang { .. } | ModelKind::Haldane { .. } => Some(2),
            ModelKind::Hofstadter { .. } | ModelKind::InteractingCluster { .. } => Some(1),
            ModelKind::Atomic => None,
        }
    }

    /// Whether the parameters sit inside the documented gapped ranges. The gap
    /// is always measured downstream; this only flags suspicious inputs.
    pub fn in_documented_gapped_range(&self) -> bool {
        match self.kind {
            ModelKind::Atomic => true,
            ModelKind::QiWuZhang { u } => u.abs() > 0.05 && (u.abs() - 2.0).abs() > 0.05,
            ModelKind::Haldane { t2, phi, m, .. } => {
                (m.abs() - 3.0 * 3f64.sqrt() * (t2 * phi.sin()).abs()).abs() > 0.05
            }
            ModelKind::Hofstadter { p, q } => q > 0 && p % q != 0,
            ModelKind::InteractingCluster { .. } => true,
        }
    }

    fn check_orbitals(&self, lat: &Lattice) -> Result<()> {
        if let Some(n) = self.required_orbitals() {
            if lat.n_orb() != n {
                return Err(Error::Model(format!("{:?} needs n_orb = {n}, lattice has {}", self.kind, lat.n_orb())));
            }
        }
        if let ModelKind::Hofstadter { p: _, q } = self.kind {
            if q <= 0 {
                return Err(Error::Model("flux denominator must be positive".into()));
            }
            if lat.boundary() == Boundary::Torus && lat.l1() as i64 % q != 0 {
                return Err(Error::Model(format!("torus width {} incompatible with flux denominator {q}", lat.l1())));
            }
        }
        if self.disorder < 0.0 {
            return Err(Error::Model("disorder strength must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A hopping `sum_x a*_{x+shift} t a_x` with an `n_orb x n_orb` amplitude.
#[derive(Clone, Debug)]
pub struct Hop {
    pub shift: Site,
    pub t: Mat<c64>,
}

fn pauli(which: char) -> Mat<c64> {
    let mut m = Mat::zeros(2, 2);
    match which {
        'x' => {
            m[(0, 1)] = ONE;
            m[(1, 0)] = ONE;
        }
        'y' => {
            m[(0, 1)] = c64::new(0.0, -1.0);
            m[(1, 0)] = c64::new(0.0, 1.0);
        }
        'z' => {
            m[(0, 0)] = ONE;
            m[(1, 1)] = cr(-1.0);
        }
        _ => unreachable!(),
    }
    m
}

fn lin(terms: &[(c64, &Mat<c64>)], n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| terms.iter().fold(ZERO, |s, (a, m)| s + *a * m[(i, j)]))
}

/// Translation-invariant hopping list, including the on-site term at
/// shift zero and both orientations of every bond.
pub fn bloch_hoppings(spec: &ModelSpec, n_orb: usize) -> Result<Vec<Hop>> {
    if spec.disorder != 0.0 {
        return Err(Error::Model("disordered models are not translation-invariant".into()));
    }
    if let Some(n) = spec.required_orbitals() {
        if n != n_orb {
            return Err(Error::Model(format!("model needs n_orb = {n}")));
        }
    }
    let mut hops = Vec::new();
    let mut add = |shift: Site, t: Mat<c64>| {
        if shift == Site::new(0, 0) {
            hops.push(Hop { shift, t });
        } else {
            let back = t.adjoint().to_owned();
            hops.push(Hop { shift, t });
            hops.push(Hop { shift: Site::new(-shift.x1, -shift.x2), t: back });
        }
    };
    match spec.kind {
        ModelKind::Atomic => {
            if n_orb < 2 {
                return Err(Error::Model("the one-orbital atomic checkerboard has a two-site unit cell".into()));
            }
            add(Site::new(0, 0), Mat::from_fn(n_orb, n_orb, |i, j| if i == j { cr(atomic_energy(i)) } else { ZERO }));
        }
        ModelKind::QiWuZhang { u } => {
            let (sx, sy, sz) = (pauli('x'), pauli('y'), pauli('z'));
            let half = cr(0.5);
            let ihalf = c64::new(0.0, 0.5);
            add(Site::new(0, 0), lin(&[(cr(u), &sz)], 2));
            add(Site::new(1, 0), lin(&[(half, &sz), (ihalf, &sx)], 2));
            add(Site::new(0, 1), lin(&[(half, &sz), (ihalf, &sy)], 2));
        }
        ModelKind::Haldane { t1, t2, phi, m } => {
            let ab = |a: c64| Mat::from_fn(2, 2, |i, j| if (i, j) == (0, 1) { a } else { ZERO });
            let mut onsite = Mat::zeros(2, 2);
            onsite[(0, 0)] = cr(m);
            onsite[(1, 1)] = cr(-m);
            onsite[(0, 1)] = cr(t1);
            onsite[(1, 0)] = cr(t1);
            add(Site::new(0, 0), onsite);
            add(Site::new(1, 0), ab(cr(t1)));
            add(Site::new(0, 1), ab(cr(t1)));
            for v in [Site::new(1, 0), Site::new(-1, 1), Site::new(0, -1)] {
                let mut t = Mat::zeros(2, 2);
                t[(0, 0)] = c64::cis(phi) * t2;
                t[(1, 1)] = c64::cis(-phi) * t2;
                add(v, t);
            }
        }
        ModelKind::Hofstadter { .. } | ModelKind::InteractingCluster { .. } => {
            return Err(Error::Model(format!("{:?} has no single-site Bloch decomposition", spec.kind)))
        }
    }
    Ok(merge_hops(hops))
}

fn merge_hops(hops: Vec<Hop>) -> Vec<Hop> {
    let mut out: Vec<Hop> = Vec::new();
    for h in hops {
        match out.iter_mut().find(|o| o.shift == h.shift) {
            Some(o) => o.t = &o.t + &h.t,
            None => out.push(h),
        }
    }
    out
}

/// Bloch matrix `h(k) = sum_R T_R exp(-i k.R)`.
pub fn bloch_matrix(hops: &[Hop], k: (f64, f64)) -> Mat<c64> {
    let n = hops[0].t.nrows();
    let mut m = Mat::zeros(n, n);
    for h in hops {
        let ph = c64::cis(-(k.0 * h.shift.x1 as f64 + k.1 * h.shift.x2 as f64));
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] += ph * h.t[(i, j)];
            }
        }
    }
    m
}

fn atomic_energy(orb: usize) -> f64 {
    if orb % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Hermitian one-body matrix of dimension `n_sites * n_orb` (mode order).
pub fn build_one_body(spec: &ModelSpec, lat: &Lattice) -> Result<Mat<c64>> {
    spec.check_orbitals(lat)?;
    let no = lat.n_orb();
    let d = lat.n_modes();
    let mut h = Mat::<c64>::zeros(d, d);
    let target = |x: Site| -> Option<usize> {
        match lat.boundary() {
            Boundary::Open => lat.index(x).ok(),
            Boundary::Torus => {
                let (o1, o2) = lat.origin();
                let c = (x.x1 + o1 as i64).rem_euclid(lat.l1() as i64);
                let r = (x.x2 + o2 as i64).rem_euclid(lat.l2() as i64);
                Some(r as usize * lat.l1() + c as usize)
            }
        }
    };
    match spec.kind {
        ModelKind::Atomic if no == 1 => {
            for i in 0..lat.n_sites() {
                let (o1, o2) = lat.origin();
                let x = lat.site(i);
                let parity = (x.x1 + o1 as i64 + x.x2 + o2 as i64).rem_euclid(2);
                h[(i, i)] = cr(if parity == 0 { -1.0 } else { 1.0 });
            }
        }
        ModelKind::Hofstadter { p, q } => {
            let flux = p as f64 / q as f64;
            for i in 0..lat.n_sites() {
                let x = lat.site(i);
                let col = x.x1 + lat.origin().0 as i64;
                for (d, phase) in [
                    (Site::new(1, 0), ONE),
                    (Site::new(0, 1), c64::cis(2.0 * std::f64::consts::PI * flux * col as f64)),
                ] {
                    if let Some(j) = target(x + d) {
                        if j == i {
                            continue;
                        }
                        h[(j, i)] += -phase;
                        h[(i, j)] += -phase.conj();
                    }
                }
            }
        }
        ModelKind::InteractingCluster { .. } => {
            return Err(Error::Model("interacting clusters have no one-body matrix".into()))
        }
        _ => {
            let hops = bloch_hoppings(&ModelSpec { disorder: 0.0, ..spec.clone() }, no)?;
            for i in 0..lat.n_sites() {
                let x = lat.site(i);
                for hp in &hops {
                    if let Some(j) = target(x + hp.shift) {
                        for a in 0..no {
                            for b in 0..no {
                                h[(j * no + a, i * no + b)] += hp.t[(a, b)];
                            }
                        }
                    }
                }
            }
        }
    }
    add_disorder(&mut h, spec);
    Ok(h)
}

fn disorder_values(spec: &ModelSpec, n: usize) -> Vec<f64> {
    if spec.disorder == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..n).map(|_| spec.disorder * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

fn add_disorder(h: &mut Mat<c64>, spec: &ModelSpec) {
    for (i, w) in disorder_values(spec, h.nrows()).into_iter().enumerate() {
        h[(i, i)] += cr(w);
    }
}

/// One-body kernel of the quadratic part of the many-body Hamiltonian:
/// `build_one_body - fermi_level`, or the hopping and chemical potential of
/// an interacting cluster.
pub fn quadratic_kernel(spec: &ModelSpec, lat: &Lattice) -> Result<Mat<c64>> {
    spec.check_orbitals(lat)?;
    let k = match spec.kind {
        ModelKind::InteractingCluster { t, mu, .. } => {
            let mut h = Mat::<c64>::zeros(lat.n_modes(), lat.n_modes());
            for i in 0..lat.n_sites() {
                let x = lat.site(i);
                h[(i, i)] = cr(-mu);
                for d in [Site::new(1, 0), Site::new(0, 1)] {
                    if let Ok(j) = lat.index(x + d) {
                        h[(i, j)] = cr(-t);
                        h[(j, i)] = cr(-t);
                    }
                }
            }
            add_disorder(&mut h, spec);
            h
        }
        _ => {
            let mut h = build_one_body(spec, lat)?;
            for i in 0..lat.n_modes() {
                h[(i, i)] -= cr(spec.fermi_level);
            }
            h
        }
    };
    Ok(k)
}

/// Many-body Hamiltonian. Quadratic specs give the second quantization of
/// `build_one_body - fermi_level`, split into on-site and bond terms.
pub fn build_interaction(spec: &ModelSpec, space: &Arc<FockSpace>) -> Result<Interaction> {
    let lat = space.lattice().clone();
    spec.check_orbitals(&lat)?;
    let no = lat.n_orb();
    let one = quadratic_kernel(spec, &lat)?;
    let mut out = Interaction::new(format!("{:?}", spec.kind), space);
    let n = lat.n_sites();
    for i in 0..n {
        for j in i..n {
            let mut modes: Vec<usize> = (0..no).map(|a| i * no + a).collect();
            if i != j {
                modes.extend((0..no).map(|a| j * no + a));
            }
            let k = Mat::from_fn(modes.len(), modes.len(), |a, b| {
                let (ma, mb) = (modes[a], modes[b]);
                // on a bond term keep only the inter-site blocks
                if i != j && ma / no == mb / no {
                    ZERO
                } else {
                    one[(ma, mb)]
                }
            });
            if k.norm_max() == 0.0 {
                continue;
            }
            let op = FockOperator::quadratic(space, &modes, &k);
            out.add_term(Region::from_indices([i, j]), op)?;
        }
    }
    if let ModelKind::InteractingCluster { v, .. } = spec.kind {
        if v != 0.0 {
            for i in 0..n {
                let x = lat.site(i);
                for d in [Site::new(1, 0), Site::new(0, 1)] {
                    if let Ok(j) = lat.index(x + d) {
                        let op = FockOperator::monomial(
                            space,
                            &[
                                Ladder { mode: i, dagger: true },
                                Ladder { mode: i, dagger: false },
                                Ladder { mode: j, dagger: true },
                                Ladder { mode: j, dagger: false },
                            ],
                            cr(v),
                        );
                        out.add_term(Region::from_indices([i, j]), op)?;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, hermiticity_defect};

    fn qwz(u: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::QiWuZhang { u })
    }

    #[test]
    fn builders_are_hermitian() {
        let lat2 = Lattice::new(4, 3, Boundary::Open, 2).unwrap();
        let lat1 = Lattice::new(4, 3, Boundary::Open, 1).unwrap();
        let specs = [
            (ModelSpec::new(ModelKind::Atomic), &lat2),
            (ModelSpec::new(ModelKind::Atomic), &lat1),
            (qwz(1.0).with_disorder(0.3, 4), &lat2),
            (ModelSpec::new(ModelKind::Haldane { t1: 1.0, t2: 0.2, phi: 1.1, m: 0.1 }), &lat2),
            (ModelSpec::new(ModelKind::Hofstadter { p: 1, q: 3 }), &lat1),
        ];
        for (s, lat) in specs {
            let h = build_one_body(&s, lat).unwrap();
            assert_eq!(hermiticity_defect(h.as_ref()), 0.0, "{s:?}");
        }
        assert!(matches!(build_one_body(&qwz(1.0), &lat1), Err(Error::Model(_))));
    }

    #[test]
    fn atomic_is_diagonal_with_gap_two() {
        let lat = Lattice::new(3, 3, Boundary::Open, 2).unwrap();
        let h = build_one_body(&ModelSpec::new(ModelKind::Atomic), &lat).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i != j {
                    assert_eq!(h[(i, j)], ZERO);
                }
            }
        }
        let ev = eigvalsh(h.as_ref()).unwrap();
        let below = ev.iter().filter(|&&e| e < 0.0).fold(f64::MIN, |a, &b| a.max(b));
        let above = ev.iter().filter(|&&e| e > 0.0).fold(f64::MAX, |a, &b| a.min(b));
        assert_eq!(above - below, 2.0);
    }

    #[test]
    fn qwz_bloch_matrix_is_standard() {
        let hops = bloch_hoppings(&qwz(1.3), 2).unwrap();
        for &(k1, k2) in &[(0.3, -1.2), (2.0, 0.7), (0.0, 0.0)] {
            let h = bloch_matrix(&hops, (k1, k2));
            let d: [f64; 3] = [f64::sin(k1), f64::sin(k2), 1.3 + f64::cos(k1) + f64::cos(k2)];
            let expect = lin(&[(cr(d[0]), &pauli('x')), (cr(d[1]), &pauli('y')), (cr(d[2]), &pauli('z'))], 2);
            assert!((&h - &expect).norm_max() < 1e-14);
        }
    }

    #[test]
    fn qwz_torus_matches_bloch_spectrum() {
        // oracle: diagonalize the 2x2 Bloch matrix on the torus momentum grid
        let l = 6;
        let lat = Lattice::new(l, l, Boundary::Torus, 2).unwrap();
        let h = build_one_body(&qwz(1.0), &lat).unwrap();
        let mut real = eigvalsh(h.as_ref()).unwrap();
        let hops = bloch_hoppings(&qwz(1.0), 2).unwrap();
        let mut bloch = Vec::new();
        let mut gap = f64::MAX;
        for a in 0..l {
            for b in 0..l {
                let k = (
                    2.0 * std::f64::consts::PI * a as f64 / l as f64,
                    2.0 * std::f64::consts::PI * b as f64 / l as f64,
                );
                let e = eigvalsh(bloch_matrix(&hops, k).as_ref()).unwrap();
                gap = gap.min(e[1] - e[0]);
                bloch.extend(e);
            }
        }
        real.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bloch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in real.iter().zip(&bloch) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(gap > 1.0, "half filling gapped on the grid");
    }

    #[test]
    fn interaction_matches_one_body() {
        let lat = Lattice::new(2, 2, Boundary::Open, 2).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let spec = qwz(0.7).with_disorder(0.2, 9).with_fermi_level(0.1);
        let h = build_one_body(&spec, &lat).unwrap();
        let hi = build_interaction(&spec, &space).unwrap();
        let modes: Vec<usize> = (0..lat.n_modes()).collect();
        let mut shifted = h.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] -= cr(0.1);
        }
        let direct = FockOperator::quadratic(&space, &modes, &shifted);
        assert!(hi.total().sub(&direct).max_abs() < 1e-14);
        for (m, t) in hi.terms() {
            assert!(lat.diameter(m) <= 2);
            assert!(t.is_gauge_invariant());
        }
    }

    #[test]
    fn cluster_terms() {
        let lat = Lattice::new(3, 2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        let spec = ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 0.5, mu: 0.2 });
        let h = build_interaction(&spec, &space).unwrap();
        // 7 nearest-neighbour bonds and 6 sites
        assert_eq!(h.terms().filter(|(m, _)| m.len() == 2).count(), 7);
        assert_eq!(h.terms().filter(|(m, _)| m.len() == 1).count(), 6);
        let atomic = build_interaction(&ModelSpec::new(ModelKind::Atomic), &space).unwrap();
        assert!(atomic.terms().all(|(m, _)| m.len() == 1));
        let big = Lattice::new(5, 4, Boundary::Open, 1).unwrap();
        assert!(matches!(FockSpace::new(&big), Err(Error::Size(_))));
    }

    #[test]
    fn disorder_is_seeded() {
        let lat = Lattice::new(3, 3, Boundary::Open, 2).unwrap();
        let a = build_one_body(&qwz(1.0).with_disorder(0.5, 1), &lat).unwrap();
        let b = build_one_body(&qwz(1.0).with_disorder(0.5, 1), &lat).unwrap();
        let c = build_one_body(&qwz(1.0).with_disorder(0.5, 2), &lat).unwrap();
        assert_eq!((&a - &b).norm_max(), 0.0);
        assert!((&a - &c).norm_max() > 0.0);
    }
}

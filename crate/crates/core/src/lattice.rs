//! Finite square lattices, regions and the center rule.
//!
//! Coordinates handed to and returned from this module are relative to the
//! lattice origin, so `Site { x1: 0, x2: 0 }` is the origin itself.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Torus,
}

/// A lattice point in origin-relative coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x1: i64,
    pub x2: i64,
}

impl Site {
    pub const fn new(x1: i64, x2: i64) -> Self {
        Site { x1, x2 }
    }

    pub fn coord(&self, axis: Axis) -> i64 {
        match axis {
            Axis::One => self.x1,
            Axis::Two => self.x2,
        }
    }
}

impl std::ops::Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl std::ops::Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    One,
    Two,
}

impl Axis {
    pub fn from_index(j: usize) -> Result<Axis> {
        match j {
            1 => Ok(Axis::One),
            2 => Ok(Axis::Two),
            _ => Err(Error::Index(format!("axis must be 1 or 2, got {j}"))),
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::One => Axis::Two,
            Axis::Two => Axis::One,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    l1: usize,
    l2: usize,
    boundary: Boundary,
    n_orb: usize,
    /// Absolute (column, row) of the origin.
    origin: (usize, usize),
}

impl Lattice {
    /// Lattice with the origin at the center `(l1 / 2, l2 / 2)`.
    pub fn new(l1: usize, l2: usize, boundary: Boundary, n_orb: usize) -> Result<Self> {
        Self::with_origin(l1, l2, boundary, n_orb, (l1 / 2, l2 / 2))
    }

    /// The origin must leave both half-lines `x_j >= 0` and `x_j < 0` nonempty
    /// along each open direction.
    pub fn with_origin(l1: usize, l2: usize, boundary: Boundary, n_orb: usize, origin: (usize, usize)) -> Result<Self> {
        if l1 == 0 || l2 == 0 || n_orb == 0 {
            return Err(Error::Param(format!(
                "lattice extents and n_orb must be positive (l1={l1}, l2={l2}, n_orb={n_orb})"
            )));
        }
        if origin.0 >= l1 || origin.1 >= l2 {
            return Err(Error::Param(format!("origin {origin:?} outside {l1}x{l2} lattice")));
        }
        if boundary == Boundary::Open {
            for (o, l, name) in [(origin.0, l1, "x1"), (origin.1, l2, "x2")] {
                if l > 1 && (o == 0 || o >= l) {
                    return Err(Error::Param(format!(
                        "origin must lie strictly inside along {name} (got column/row {o} of {l})"
                    )));
                }
            }
        }
        Ok(Lattice { l1, l2, boundary, n_orb, origin })
    }

    pub fn l1(&self) -> usize {
        self.l1
    }
    pub fn l2(&self) -> usize {
        self.l2
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn n_orb(&self) -> usize {
        self.n_orb
    }
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }
    pub fn n_sites(&self) -> usize {
        self.l1 * self.l2
    }
    pub fn n_modes(&self) -> usize {
        self.n_sites() * self.n_orb
    }

    /// Same geometry with the origin moved by `z`.
    pub fn shifted_origin(&self, z: Site) -> Result<Lattice> {
        let o1 = self.origin.0 as i64 + z.x1;
        let o2 = self.origin.1 as i64 + z.x2;
        if o1 < 0 || o2 < 0 {
            return Err(Error::Param(format!("shifted origin ({o1},{o2}) outside lattice")));
        }
        Lattice::with_origin(self.l1, self.l2, self.boundary, self.n_orb, (o1 as usize, o2 as usize))
    }

    /// Minimal and maximal origin-relative coordinates along `axis`.
    pub fn extent(&self, axis: Axis) -> (i64, i64) {
        let (o, l) = match axis {
            Axis::One => (self.origin.0 as i64, self.l1 as i64),
            Axis::Two => (self.origin.1 as i64, self.l2 as i64),
        };
        (-o, l - 1 - o)
    }

    pub fn contains(&self, x: Site) -> bool {
        let (a1, b1) = self.extent(Axis::One);
        let (a2, b2) = self.extent(Axis::Two);
        (a1..=b1).contains(&x.x1) && (a2..=b2).contains(&x.x2)
    }

    /// Row-major linear index `row * l1 + column`.
    pub fn index(&self, x: Site) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::Index(format!("site {x:?} not on lattice")));
        }
        let c = (x.x1 + self.origin.0 as i64) as usize;
        let r = (x.x2 + self.origin.1 as i64) as usize;
        Ok(r * self.l1 + c)
    }

    pub fn site(&self, index: usize) -> Site {
        debug_assert!(index < self.n_sites());
        let c = (index % self.l1) as i64;
        let r = (index / self.l1) as i64;
        Site::new(c - self.origin.0 as i64, r - self.origin.1 as i64)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.n_sites()).map(move |i| self.site(i))
    }

    /// Coordinate difference `y - x`, using the minimal image on a torus.
    pub fn displacement(&self, x: Site, y: Site) -> Site {
        let d = y - x;
        match self.boundary {
            Boundary::Open => d,
            Boundary::Torus => Site::new(min_image(d.x1, self.l1 as i64), min_image(d.x2, self.l2 as i64)),
        }
    }

    /// Max-norm distance.
    pub fn dist(&self, x: Site, y: Site) -> i64 {
        let d = self.displacement(x, y);
        d.x1.abs().max(d.x2.abs())
    }

    /// Distance from `x` to the nearest site outside the lattice along open
    /// directions; `None` for a torus.
    pub fn edge_distance(&self, x: Site) -> Option<i64> {
        if self.boundary == Boundary::Torus {
            return None;
        }
        let (a1, b1) = self.extent(Axis::One);
        let (a2, b2) = self.extent(Axis::Two);
        Some((x.x1 - a1 + 1).min(b1 - x.x1 + 1).min(x.x2 - a2 + 1).min(b2 - x.x2 + 1))
    }

    pub fn require_open(&self, what: &str) -> Result<()> {
        match self.boundary {
            Boundary::Open => Ok(()),
            Boundary::Torus => Err(Error::Geometry(format!(
                "{what} needs open boundaries; half-plane steps are inconsistent on a torus"
            ))),
        }
    }

    pub fn whole(&self) -> Region {
        Region { sites: (0..self.n_sites()).collect() }
    }

    /// `{x | x_j >= shift}`.
    pub fn half_plane(&self, axis: Axis, shift: i64) -> Result<Region> {
        let r = self.filter(|x| x.coord(axis) >= shift);
        if r.is_empty() {
            return Err(Error::RegionEmpty(format!(
                "half-plane x_{} >= {shift} misses the lattice",
                if axis == Axis::One { 1 } else { 2 }
            )));
        }
        Ok(r)
    }

    /// Max-norm ball of radius `k` around `x`, intersected with the lattice.
    pub fn box_region(&self, x: Site, k: usize) -> Region {
        let k = k as i64;
        self.filter(|y| self.dist(x, y) <= k)
    }

    /// `{x | -k <= x_1 <= k}`.
    pub fn stripe(&self, k: usize) -> Region {
        let k = k as i64;
        self.filter(|x| x.x1.abs() <= k)
    }

    pub fn filter(&self, f: impl Fn(Site) -> bool) -> Region {
        Region { sites: (0..self.n_sites()).filter(|&i| f(self.site(i))).collect() }
    }

    pub fn region_from_sites(&self, sites: &[Site]) -> Result<Region> {
        let mut v = sites.iter().map(|&s| self.index(s)).collect::<Result<Vec<_>>>()?;
        v.sort_unstable();
        v.dedup();
        Ok(Region { sites: v })
    }

    /// Max-norm diameter of a region.
    pub fn diameter(&self, m: &Region) -> i64 {
        let s: Vec<Site> = m.iter().map(|i| self.site(i)).collect();
        let mut d = 0;
        for (a, &x) in s.iter().enumerate() {
            for &y in &s[a + 1..] {
                d = d.max(self.dist(x, y));
            }
        }
        d
    }

    /// The center `C(M)`: closest site to the center of mass (Euclidean), ties
    /// broken by the smallest angle in `[0, 2pi)` of `C(M) - cm(M)` against
    /// `e_1`, with the zero vector at angle 0.
    ///
    /// Computed in exact integer arithmetic on `|M| x - sum(M)`.
    pub fn center_of(&self, m: &Region) -> Result<Site> {
        if m.is_empty() {
            return Err(Error::RegionEmpty("center of an empty region".into()));
        }
        let sites: Vec<Site> = m.iter().map(|i| self.site(i)).collect();
        let n = sites.len() as i64;
        let s1: i64 = sites.iter().map(|x| x.x1).sum();
        let s2: i64 = sites.iter().map(|x| x.x2).sum();
        let rel = |x: &Site| (n * x.x1 - s1, n * x.x2 - s2);
        let best = sites
            .iter()
            .min_by(|a, b| {
                let (a1, a2) = rel(a);
                let (b1, b2) = rel(b);
                (a1 * a1 + a2 * a2)
                    .cmp(&(b1 * b1 + b2 * b2))
                    .then_with(|| angle(a1, a2).partial_cmp(&angle(b1, b2)).unwrap_or(Ordering::Equal))
            })
            .copied()
            .expect("nonempty");
        Ok(best)
    }
}

fn min_image(d: i64, l: i64) -> i64 {
    let r = d.rem_euclid(l);
    if 2 * r > l {
        r - l
    } else {
        r
    }
}

fn angle(v1: i64, v2: i64) -> f64 {
    if v1 == 0 && v2 == 0 {
        return 0.0;
    }
    let a = (v2 as f64).atan2(v1 as f64);
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// A set of lattice sites, stored as sorted linear indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    sites: Vec<usize>,
}

impl Region {
    pub fn empty() -> Self {
        Region { sites: Vec::new() }
    }

    pub fn from_indices(it: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = it.into_iter().collect();
        Region { sites: set.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().copied()
    }

    pub fn indices(&self) -> &[usize] {
        &self.sites
    }

    pub fn contains(&self, i: usize) -> bool {
        self.sites.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.iter().all(|&i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        let (mut a, mut b) = (0, 0);
        while a < self.sites.len() && b < other.sites.len() {
            match self.sites[a].cmp(&other.sites[b]) {
                Ordering::Less => a += 1,
                Ordering::Greater => b += 1,
                Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &Region) -> Region {
        Region::from_indices(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region { sites: self.iter().filter(|&i| other.contains(i)).collect() }
    }

    pub fn complement(&self, lat: &Lattice) -> Region {
        Region { sites: (0..lat.n_sites()).filter(|&i| !self.contains(i)).collect() }
    }

    pub fn sites<'a>(&'a self, lat: &'a Lattice) -> impl Iterator<Item = Site> + 'a {
        self.iter().map(move |i| lat.site(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn open(l1: usize, l2: usize) -> Lattice {
        Lattice::new(l1, l2, Boundary::Open, 1).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let lat = Lattice::with_origin(5, 3, Boundary::Open, 2, (2, 1)).unwrap();
        for i in 0..lat.n_sites() {
            assert_eq!(lat.index(lat.site(i)).unwrap(), i);
        }
        assert_eq!(lat.site(0), Site::new(-2, -1));
        assert!(lat.index(Site::new(3, 0)).is_err());
    }

    #[test]
    fn half_plane_counts() {
        let lat = open(4, 4);
        assert_eq!(lat.origin(), (2, 2));
        let up = lat.half_plane(Axis::Two, 0).unwrap();
        assert_eq!(up.len(), 8);
        assert!(up.sites(&lat).all(|x| x.x2 >= 0));
        let right = lat.half_plane(Axis::One, 0).unwrap();
        let left = right.complement(&lat);
        assert!(left.sites(&lat).all(|x| x.x1 < 0));
        assert_eq!(left.len() + right.len(), 16);
        assert!(matches!(lat.half_plane(Axis::One, 4), Err(Error::RegionEmpty(_))));
    }

    #[test]
    fn boxes_and_stripes() {
        let lat = open(5, 5);
        let o = Site::new(0, 0);
        assert_eq!(lat.box_region(o, 0).len(), 1);
        assert_eq!(lat.box_region(o, 1).len(), 9);
        assert_eq!(lat.box_region(Site::new(-2, -2), 1).len(), 4);
        assert_eq!(lat.stripe(0).len(), 5);
        assert!(lat.stripe(0).sites(&lat).all(|x| x.x1 == 0));
        assert_eq!(lat.stripe(1).len(), 15);
        assert_eq!(lat.stripe(7), lat.whole());
    }

    #[test]
    fn center_rule_examples() {
        let lat = open(6, 6);
        let r = |v: &[(i64, i64)]| {
            lat.region_from_sites(&v.iter().map(|&(a, b)| Site::new(a, b)).collect::<Vec<_>>()).unwrap()
        };
        assert_eq!(lat.center_of(&r(&[(0, 0)])).unwrap(), Site::new(0, 0));
        assert_eq!(lat.center_of(&r(&[(0, 0), (1, 0)])).unwrap(), Site::new(1, 0));
        assert_eq!(lat.center_of(&r(&[(0, 0), (0, 1), (1, 0), (1, 1)])).unwrap(), Site::new(1, 1));
        // cm coincides with a lattice point: that point wins
        assert_eq!(lat.center_of(&r(&[(-1, 0), (0, 0), (1, 0)])).unwrap(), Site::new(0, 0));
        assert!(lat.center_of(&Region::empty()).is_err());
    }

    #[test]
    fn torus_distance_wraps() {
        let lat = Lattice::new(6, 6, Boundary::Torus, 1).unwrap();
        assert_eq!(lat.dist(Site::new(-3, 0), Site::new(2, 0)), 1);
        assert_eq!(lat.box_region(Site::new(-3, -3), 1).len(), 9);
        assert!(lat.require_open("x").is_err());
    }

    #[test]
    fn origin_must_be_interior() {
        assert!(Lattice::with_origin(4, 4, Boundary::Open, 1, (0, 2)).is_err());
        assert!(Lattice::with_origin(2, 3, Boundary::Open, 2, (1, 1)).is_ok());
    }

    fn arb_region() -> impl Strategy<Value = Vec<(i64, i64)>> {
        prop::collection::vec((-3i64..=3, -3i64..=3), 1..6)
    }

    proptest! {
        #[test]
        fn box_monotone(x1 in -5i64..5, x2 in -5i64..5, k in 0usize..6) {
            let lat = open(10, 10);
            let x = Site::new(x1, x2);
            prop_assert!(lat.box_region(x, k).is_subset(&lat.box_region(x, k + 1)));
            prop_assert!(lat.box_region(x, k).len() <= (2 * k + 1).pow(2));
        }

        #[test]
        fn half_plane_partitions(s in -5i64..5) {
            let lat = open(10, 10);
            let h = lat.half_plane(Axis::Two, s).unwrap();
            let c = h.complement(&lat);
            prop_assert!(h.is_disjoint(&c));
            prop_assert_eq!(h.union(&c), lat.whole());
        }

        #[test]
        fn center_in_region_and_covariant(pts in arb_region(), z1 in -3i64..=3, z2 in -3i64..=3) {
            let lat = open(20, 20);
            let sites: Vec<Site> = pts.iter().map(|&(a, b)| Site::new(a, b)).collect();
            let m = lat.region_from_sites(&sites).unwrap();
            let c = lat.center_of(&m).unwrap();
            prop_assert!(m.contains(lat.index(c).unwrap()));
            prop_assert_eq!(c, lat.center_of(&m).unwrap());
            let z = Site::new(z1, z2);
            let shifted: Vec<Site> = sites.iter().map(|&s| s + z).collect();
            let mz = lat.region_from_sites(&shifted).unwrap();
            prop_assert_eq!(lat.center_of(&mz).unwrap(), c + z);
        }
    }
}

//! Interactions: finite maps from regions to local self-adjoint
//! gauge-invariant operators, with norms, local terms and Liouvillians.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockSpace};
use crate::lattice::{Axis, Region, Site};
use crate::linalg::{cr, I};

/// Relative hermiticity tolerance accepted for stored terms.
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Interaction {
    name: String,
    space: Arc<FockSpace>,
    terms: BTreeMap<Region, FockOperator>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// Total particle number, `N({x}) = n_x`.
    Number,
    /// Half-plane switch, `n_x` for `x_j >= 0`.
    Switch(Axis),
    /// Position, `x_j n_x`.
    Position(Axis),
}

impl Interaction {
    pub fn new(name: impl Into<String>, space: &Arc<FockSpace>) -> Self {
        Interaction { name: name.into(), space: space.clone(), terms: BTreeMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Region, &FockOperator)> {
        self.terms.iter()
    }

    pub fn term(&self, m: &Region) -> Option<&FockOperator> {
        self.terms.get(m)
    }

    /// Add `op` to the term on `m`, checking the interaction invariants.
    pub fn add_term(&mut self, m: Region, op: FockOperator) -> Result<()> {
        if m.is_empty() {
            return Err(Error::Param("interaction term on the empty set".into()));
        }
        if !op.support().is_subset(&m) {
            return Err(Error::Param(format!("term support {:?} not inside its region {:?}", op.support(), m)));
        }
        if !op.is_gauge_invariant() {
            return Err(Error::Param("interaction terms must be gauge-invariant".into()));
        }
        let scale = op.max_abs().max(1e-300);
        if op.hermiticity_defect() > HERMITIAN_TOL * scale {
            return Err(Error::Param("interaction terms must be self-adjoint".into()));
        }
        if op.is_zero() {
            return Ok(());
        }
        let op = op.with_support(m.clone());
        let merged = match self.terms.remove(&m) {
            Some(prev) => prev.add(&op),
            None => op,
        };
        if !merged.is_zero() {
            self.terms.insert(m, merged);
        }
        Ok(())
    }

    pub fn builtin(kind: Builtin, space: &Arc<FockSpace>) -> Result<Self> {
        let lat = space.lattice().clone();
        let name = match kind {
            Builtin::Number => "N".to_string(),
            Builtin::Switch(a) => format!("Lambda{}", axis_label(a)),
            Builtin::Position(a) => format!("X{}", axis_label(a)),
        };
        if !matches!(kind, Builtin::Number) {
            lat.require_open(&name)?;
        }
        let mut out = Interaction::new(name, space);
        for i in 0..lat.n_sites() {
            let x = lat.site(i);
            let w = match kind {
                Builtin::Number => 1.0,
                Builtin::Switch(a) => {
                    if x.coord(a) >= 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Builtin::Position(a) => x.coord(a) as f64,
            };
            if w != 0.0 {
                out.add_term(Region::from_indices([i]), FockOperator::number(space, x)?.scale_re(w))?;
            }
        }
        Ok(out)
    }

    /// Number operator of the half-plane `x_j >= shift`, one term per site.
    pub fn switch(space: &Arc<FockSpace>, axis: Axis, shift: i64) -> Result<Self> {
        let lat = space.lattice().clone();
        let name = format!("Lambda{}", axis_label(axis));
        lat.require_open(&name)?;
        let mut out = Interaction::new(name, space);
        for i in lat.half_plane(axis, shift)?.iter() {
            out.add_term(Region::from_indices([i]), FockOperator::number(space, lat.site(i))?)?;
        }
        Ok(out)
    }

    /// `sum_M Phi(M)`.
    pub fn total(&self) -> FockOperator {
        let mut acc = FockOperator::zero(&self.space);
        for op in self.terms.values() {
            acc = acc.add(op);
        }
        acc
    }

    pub fn scale(&self, a: f64) -> Interaction {
        let mut out = Interaction::new(self.name.clone(), &self.space);
        for (m, op) in &self.terms {
            if a != 0.0 {
                out.terms.insert(m.clone(), op.scale_re(a));
            }
        }
        out
    }

    /// Termwise sum `self + a * other`.
    pub fn add_scaled(&self, other: &Interaction, a: f64) -> Interaction {
        let mut out = self.clone();
        for (m, op) in &other.terms {
            let merged = match out.terms.remove(m) {
                Some(prev) => prev.add_scaled(op, cr(a)),
                None => op.scale_re(a),
            };
            if !merged.is_zero() {
                out.terms.insert(m.clone(), merged);
            }
        }
        out.name = format!("{}+{}*{}", self.name, a, other.name);
        out
    }

    /// Apply `f` to every term, keeping or enlarging regions as returned.
    pub fn map_terms(
        &self,
        name: impl Into<String>,
        f: impl Fn(&Region, &FockOperator) -> (Region, FockOperator),
    ) -> Result<Interaction> {
        let mut out = Interaction::new(name, &self.space);
        for (m, op) in &self.terms {
            let (m2, op2) = f(m, op);
            out.add_term(m2, op2)?;
        }
        Ok(out)
    }

    fn norm_with(&self, weight: impl Fn(i64) -> f64) -> f64 {
        let lat = self.space.lattice();
        let weighted: Vec<(Region, f64)> =
            self.terms.iter().map(|(m, op)| (m.clone(), weight(lat.diameter(m)) * op.opnorm())).collect();
        (0..lat.n_sites())
            .map(|x| weighted.iter().filter(|(m, _)| m.contains(x)).map(|(_, w)| w).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `sup_x sum_{M containing x} (1 + diam M)^nu ||Phi(M)||`.
    pub fn norm(&self, nu: u32) -> f64 {
        self.norm_with(|d| ((1 + d) as f64).powi(nu as i32))
    }

    /// `sup_x sum_{M containing x} exp(a diam M) ||Phi(M)||`.
    pub fn norm_exp(&self, a: f64) -> f64 {
        self.norm_with(|d| (a * d as f64).exp())
    }

    /// Center site index of every term region.
    pub fn centers(&self) -> Vec<(usize, &Region)> {
        let lat = self.space.lattice();
        self.terms
            .keys()
            .map(|m| (lat.index(lat.center_of(m).expect("terms are nonempty")).expect("on lattice"), m))
            .collect()
    }

    /// `Phi_x = sum over M with center x of Phi(M)`.
    pub fn local_term(&self, x: Site) -> Result<FockOperator> {
        let lat = self.space.lattice();
        let xi = lat.index(x)?;
        let mut acc = FockOperator::zero(&self.space);
        for (c, m) in self.centers() {
            if c == xi {
                acc = acc.add(&self.terms[m]);
            }
        }
        Ok(acc)
    }

    /// All local terms, indexed by site.
    pub fn local_terms(&self) -> Vec<FockOperator> {
        let n = self.space.lattice().n_sites();
        let mut acc = vec![FockOperator::zero(&self.space); n];
        for (c, m) in self.centers() {
            acc[c] = acc[c].add(&self.terms[m]);
        }
        acc
    }

    /// `L_Phi A = sum_M [Phi(M), A]`, skipping terms disjoint from `supp A`.
    pub fn liouvillian(&self, a: &FockOperator) -> FockOperator {
        let mut acc = FockOperator::zero(&self.space);
        for (m, op) in &self.terms {
            if m.is_disjoint(a.support()) {
                continue;
            }
            acc = acc.add(&op.commutator(a));
        }
        acc.with_support(self.liouvillian_support(a))
    }

    fn liouvillian_support(&self, a: &FockOperator) -> Region {
        self.terms.keys().filter(|m| !m.is_disjoint(a.support())).fold(a.support().clone(), |r, m| r.union(m))
    }

    /// The same derivation resummed over local terms, `sum_x [Phi_x, A]`.
    pub fn liouvillian_local(&self, a: &FockOperator) -> FockOperator {
        let mut acc = FockOperator::zero(&self.space);
        for t in self.local_terms() {
            acc = acc.add(&t.commutator_full(a));
        }
        acc
    }
}

fn axis_label(a: Axis) -> &'static str {
    match a {
        Axis::One => "1",
        Axis::Two => "2",
    }
}

/// The self-adjoint interaction `i[Phi, Psi]` with
/// `i[Phi, Psi](M) = i sum_{M1 u M2 = M} [Phi(M1), Psi(M2)]`.
pub fn commutator_interaction(phi: &Interaction, psi: &Interaction) -> Result<Interaction> {
    let mut acc: BTreeMap<Region, FockOperator> = BTreeMap::new();
    for (m1, a) in phi.terms() {
        for (m2, b) in psi.terms() {
            if m1.is_disjoint(m2) {
                continue;
            }
            let c = a.commutator(b).scale(I);
            let m = m1.union(m2);
            let merged = match acc.remove(&m) {
                Some(prev) => prev.add(&c),
                None => c,
            };
            acc.insert(m, merged);
        }
    }
    let mut out = Interaction::new(format!("i[{},{}]", phi.name(), psi.name()), phi.space());
    for (m, op) in acc {
        out.add_term(m.clone(), op.with_support(m))?;
    }
    Ok(out)
}

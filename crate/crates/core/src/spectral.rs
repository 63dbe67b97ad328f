//! Exact diagonalization, ground states, the gap inequality and the
//! free-fermion Fermi sea.

use std::sync::Arc;

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockSpace, SectorState};
use crate::interaction::Interaction;
use crate::lattice::Lattice;
use crate::linalg::{self, ZERO};

/// Sectors up to this dimension are diagonalized densely.
pub const DENSE_SECTOR_LIMIT: usize = 4096;

#[derive(Clone, Debug)]
pub struct SectorSpectrum {
    pub n: usize,
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, in the sector basis.
    pub vectors: Mat<c64>,
}

/// Full eigensystem of a particle-number-conserving Hamiltonian.
#[derive(Clone, Debug)]
pub struct ManyBodySpectrum {
    space: Arc<FockSpace>,
    sectors: Vec<SectorSpectrum>,
}

fn assemble_sector(h: &FockOperator, n: usize) -> Result<Mat<c64>> {
    let m = h.sector_matrix(n);
    let scale = linalg::max_abs(m.as_ref()).max(1.0);
    if linalg::hermiticity_defect(m.as_ref()) > 1e-10 * scale {
        return Err(Error::Numerical(format!("assembled Hamiltonian block N={n} is not hermitian")));
    }
    Ok(m)
}

impl ManyBodySpectrum {
    pub fn compute(h: &Interaction) -> Result<Self> {
        Self::of_operator(&h.total())
    }

    pub fn of_operator(h: &FockOperator) -> Result<Self> {
        let space = h.space().clone();
        if !h.is_gauge_invariant() {
            return Err(Error::Numerical("Hamiltonian does not conserve particle number".into()));
        }
        let mut sectors = Vec::new();
        for n in 0..space.n_sectors() {
            if space.sector_dim(n) > DENSE_SECTOR_LIMIT {
                return Err(Error::Size(format!(
                    "full spectrum needs dense sectors; N={n} has dimension {}",
                    space.sector_dim(n)
                )));
            }
            let m = assemble_sector(h, n)?;
            let (energies, vectors) = linalg::eigh(m.as_ref())?;
            sectors.push(SectorSpectrum { n, energies, vectors });
        }
        Ok(ManyBodySpectrum { space, sectors })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn sector(&self, n: usize) -> &SectorSpectrum {
        &self.sectors[n]
    }

    pub fn sectors(&self) -> &[SectorSpectrum] {
        &self.sectors
    }

    /// Applies `f(E_m, E_n)` entrywise to `A` in the eigenbasis and transforms
    /// back, block by block.
    pub fn filter(&self, a: &FockOperator, f: impl Fn(f64, f64) -> c64) -> FockOperator {
        let mut blocks = std::collections::BTreeMap::new();
        for (&(p, q), blk) in a.blocks() {
            let (sp, sq) = (&self.sectors[p], &self.sectors[q]);
            let dense = blk.to_dense();
            let inner = sp.vectors.adjoint() * &dense * &sq.vectors;
            let filtered =
                Mat::from_fn(inner.nrows(), inner.ncols(), |i, j| inner[(i, j)] * f(sp.energies[i], sq.energies[j]));
            let back = &sp.vectors * &filtered * sq.vectors.adjoint();
            blocks.insert((p, q), crate::block::Block::Dense(back));
        }
        FockOperator::from_blocks(&self.space, blocks, a.support().clone())
    }

    /// `exp(i s H) A exp(-i s H)`.
    pub fn heisenberg(&self, a: &FockOperator, s: f64) -> FockOperator {
        self.filter(a, |em, en| c64::cis(s * (em - en)))
    }

    /// Lowest energy and state over all sectors.
    pub fn ground(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for s in &self.sectors {
            if let Some(&e) = s.energies.first() {
                if e < best.1 {
                    best = (s.n, e);
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundState {
    #[serde(skip)]
    pub state: SectorState,
    pub energy: f64,
    /// `E_1 - E_0` over the whole Fock space.
    pub gap: f64,
    /// Excitation gap inside the ground-state particle-number sector.
    pub sector_gap: f64,
    pub particle_number: usize,
    pub hamiltonian: String,
}

#[derive(Clone, Copy, Debug)]
pub struct GroundStateOptions {
    pub degeneracy_tol: f64,
    pub lanczos_tol: f64,
    pub seed: u64,
    /// Largest sector diagonalized densely.
    pub dense_limit: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { degeneracy_tol: 1e-8, lanczos_tol: 1e-10, seed: 17, dense_limit: DENSE_SECTOR_LIMIT }
    }
}

impl GroundState {
    pub fn from_spectrum(spec: &ManyBodySpectrum, name: &str, tol: f64) -> Result<GroundState> {
        let lows: Vec<(usize, f64, f64)> = spec
            .sectors
            .iter()
            .filter(|s| !s.energies.is_empty())
            .map(|s| (s.n, s.energies[0], s.energies.get(1).copied().unwrap_or(f64::INFINITY)))
            .collect();
        let amps = |n: usize| spec.sectors[n].vectors.col(0).iter().copied().collect::<Vec<_>>();
        finish(&lows, name, tol, amps)
    }

    pub fn expectation(&self, a: &FockOperator) -> c64 {
        a.expectation(&self.state)
    }
}

fn finish(lows: &[(usize, f64, f64)], name: &str, tol: f64, amps: impl Fn(usize) -> Vec<c64>) -> Result<GroundState> {
    let (n0, e0, e1_in) = lows
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite energies"))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let other = lows.iter().filter(|s| s.0 != n0).map(|s| s.1).fold(f64::INFINITY, f64::min);
    let e1 = e1_in.min(other);
    let gap = e1 - e0;
    if gap < tol {
        return Err(Error::DegenerateGroundState { splitting: gap, tol });
    }
    Ok(GroundState {
        state: SectorState { n: n0, amps: amps(n0) },
        energy: e0,
        gap,
        sector_gap: e1_in - e0,
        particle_number: n0,
        hamiltonian: name.to_string(),
    })
}

/// Lowest eigenpair with a gap; dense per sector below
/// [`DENSE_SECTOR_LIMIT`], deflated Lanczos above.
pub fn ground_state(h: &Interaction, opts: GroundStateOptions) -> Result<GroundState> {
    ground_state_of(&h.total(), h.name(), opts)
}

pub fn ground_state_of(h: &FockOperator, name: &str, opts: GroundStateOptions) -> Result<GroundState> {
    if !h.is_gauge_invariant() {
        return Err(Error::Numerical("Hamiltonian does not conserve particle number".into()));
    }
    let space = h.space().clone();
    let mut lows = Vec::new();
    let mut vecs: Vec<Vec<c64>> = Vec::new();
    for n in 0..space.n_sectors() {
        let d = space.sector_dim(n);
        if d <= opts.dense_limit {
            let m = assemble_sector(h, n)?;
            let (vals, v) = linalg::eigh(m.as_ref())?;
            lows.push((n, vals[0], vals.get(1).copied().unwrap_or(f64::INFINITY)));
            vecs.push(v.col(0).iter().copied().collect());
        } else {
            let Some(blk) = h.block(n, n) else {
                lows.push((n, 0.0, 0.0));
                vecs.push(vec![ZERO; d]);
                continue;
            };
            let mv = |x: &[c64], y: &mut [c64]| blk.matvec(x, y);
            let r0 = linalg::lanczos_lowest(d, 1, &mv, opts.lanczos_tol, opts.seed)?;
            let v0 = r0.vectors[0].clone();
            // second level from the operator with the ground vector shifted away
            let mut rows = vec![0.0f64; d];
            blk.for_each_nonzero(|r, _, v| rows[r] += v.norm());
            let bound = rows.iter().fold(0.0f64, |a, &b| a.max(b));
            let shift = 2.0 * bound + 1.0;
            let deflated = |x: &[c64], y: &mut [c64]| {
                blk.matvec(x, y);
                let c = linalg::vdot(&v0, x) * shift;
                y.iter_mut().zip(&v0).for_each(|(a, b)| *a += c * b);
            };
            let r1 = linalg::lanczos_lowest(d, 1, &deflated, opts.lanczos_tol, opts.seed + 1)?;
            lows.push((n, r0.values[0], r1.values[0]));
            vecs.push(v0);
        }
    }
    finish(&lows, name, opts.degeneracy_tol, |n| vecs[n].clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSample {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub samples: Vec<GapSample>,
    pub min_slack: f64,
    pub pass: bool,
}

/// `w0(A* L_H A) >= g (w0(A* A) - |w0(A)|^2)` for every sample.
pub fn verify_gap_inequality(gs: &GroundState, h: &Interaction, samples: &[FockOperator]) -> GapReport {
    let htot = h.total();
    let mut rows = Vec::new();
    for a in samples {
        let ad = a.adjoint();
        let lhs = ad.mul(&htot.commutator_full(a)).expectation(&gs.state).re;
        let mean = a.expectation(&gs.state);
        let var = ad.mul(a).expectation(&gs.state).re - mean.norm_sqr();
        let rhs = gs.gap * var;
        rows.push(GapSample { lhs, rhs, slack: lhs - rhs });
    }
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    GapReport { gap: gs.gap, pass: rows.iter().all(|r| r.slack >= -1e-10), samples: rows, min_slack }
}

/// Spectral projection of a one-body Hamiltonian below `mu`.
#[derive(Clone, Debug)]
pub struct FermiSea {
    pub projection: Mat<c64>,
    pub mu: f64,
    /// Distance between the nearest eigenvalues straddling `mu`.
    pub one_body_gap: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<c64>,
    pub filled: usize,
}

pub fn fermi_sea(h: &Mat<c64>, mu: f64) -> Result<FermiSea> {
    let scale = linalg::max_abs(h.as_ref()).max(1.0);
    if linalg::hermiticity_defect(h.as_ref()) > 1e-12 * scale {
        return Err(Error::Numerical("one-body Hamiltonian is not hermitian".into()));
    }
    let (vals, vecs) = linalg::eigh(h.as_ref())?;
    if let Some(e) = vals.iter().find(|e| (*e - mu).abs() <= 1e-12) {
        return Err(Error::Gapless(format!("eigenvalue {e} at the chemical potential {mu}")));
    }
    let filled = vals.iter().filter(|&&e| e < mu).count();
    let below = vals[..filled].last().copied().unwrap_or(f64::NEG_INFINITY);
    let above = vals.get(filled).copied().unwrap_or(f64::INFINITY);
    let d = vals.len();
    let occ = vecs.get(0..d, 0..filled);
    let projection = occ * occ.adjoint();
    Ok(FermiSea { projection, mu, one_body_gap: above - below, eigenvalues: vals, eigenvectors: vecs, filled })
}

impl FermiSea {
    pub fn complement(&self) -> Mat<c64> {
        let d = self.projection.nrows();
        Mat::from_fn(d, d, |i, j| {
            let e = if i == j { linalg::ONE } else { ZERO };
            e - self.projection[(i, j)]
        })
    }

    /// `tr(p a)`, the ground-state expectation of the second quantization of `a`.
    pub fn expectation(&self, a: &Mat<c64>) -> c64 {
        let d = a.nrows();
        let mut s = ZERO;
        for i in 0..d {
            for j in 0..d {
                s += self.projection[(i, j)] * a[(j, i)];
            }
        }
        s
    }

    /// Gap between bulk eigenstates: those whose weight on sites at least
    /// `margin + 1` away from every open edge is at least half of that
    /// window's area fraction. Edge-localized states are skipped.
    pub fn bulk_gap(&self, lat: &Lattice, margin: i64) -> f64 {
        let no = lat.n_orb();
        let inner: Vec<usize> =
            (0..lat.n_sites()).filter(|&i| lat.edge_distance(lat.site(i)).is_none_or(|d| d > margin)).collect();
        let frac = inner.len() as f64 / lat.n_sites() as f64;
        let mut below = f64::NEG_INFINITY;
        let mut above = f64::INFINITY;
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            let w: f64 = inner
                .iter()
                .flat_map(|&i| (0..no).map(move |a| i * no + a))
                .map(|m| self.eigenvectors[(m, k)].norm_sqr())
                .sum();
            if w < 0.5 * frac {
                continue;
            }
            if e < self.mu {
                below = below.max(e);
            } else {
                above = above.min(e);
            }
        }
        above - below
    }
}

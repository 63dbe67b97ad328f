//! Hall conductance from switch functions, Hall conductivity from position
//! operators, the stripe-current check and a lattice-gauge Chern number.
//!
//! On a finite open lattice `omega(i[Lambda2^OD, Lambda1^OD])` vanishes
//! identically (the OD maps act on the ground state as `Lambda - <Lambda>`
//! and the two switches commute). The bulk value is read off from sums
//! restricted to a box around the origin, recorded as a radial series.

use std::f64::consts::PI;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::SectorState;
use crate::interaction::{commutator_interaction, Builtin, Interaction};
use crate::lattice::{Axis, Lattice, Region, Site};
use crate::linalg::{self, cr, I, ZERO};
use crate::models::{bloch_hoppings, bloch_matrix, ModelSpec};
use crate::odmap::{commutator_in_state, OdContext};
use crate::spectral::FermiSea;
use crate::weightfn::WeightFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SwitchManyBody,
    SwitchFree,
    PositionFree,
    PositionManyBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub radius: usize,
    pub value: f64,
    pub increment: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConductanceOptions {
    /// Series convergence threshold on the last increment.
    pub increment_tol: f64,
    /// Rows/columns next to each open edge that box sums stay clear of.
    pub window_margin: i64,
    /// Required distance of position boxes from the edges.
    pub edge_margin: i64,
}

impl Default for ConductanceOptions {
    fn default() -> Self {
        ConductanceOptions { increment_tol: 1e-6, window_margin: 4, edge_margin: 8 }
    }
}

impl ConductanceOptions {
    /// No edge exclusion, for few-site clusters.
    pub fn small_cluster() -> Self {
        ConductanceOptions { increment_tol: 1e-6, window_margin: 0, edge_margin: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConductanceReport {
    pub sigma: f64,
    pub method: Method,
    pub convergence: Vec<SeriesPoint>,
    pub converged: bool,
    pub increment: f64,
    pub origin: (i64, i64),
    pub model_id: Option<String>,
    pub weight_id: Option<String>,
    /// Many-body only: `omega(i[Lambda2^OD, Lambda1^OD])` over the whole lattice.
    pub global: Option<f64>,
    /// Many-body only: the same as a double sum over local terms.
    pub double_sum: Option<f64>,
    pub resummation_defect: Option<f64>,
}

impl ConductanceReport {
    fn from_series(method: Method, series: Vec<SeriesPoint>, origin: Site, tol: f64) -> Self {
        let last = *series.last().expect("series is nonempty");
        ConductanceReport {
            sigma: last.value,
            method,
            converged: series.len() > 1 && last.increment < tol,
            increment: last.increment,
            convergence: series,
            origin: (origin.x1, origin.x2),
            model_id: None,
            weight_id: None,
            global: None,
            double_sum: None,
            resummation_defect: None,
        }
    }

    /// Series value at box radius `r`, if recorded.
    pub fn value_at(&self, r: usize) -> Option<f64> {
        self.convergence.iter().find(|p| p.radius == r).map(|p| p.value)
    }

    pub fn with_ids(mut self, model: impl Into<String>, weight: Option<String>) -> Self {
        self.model_id = Some(model.into());
        self.weight_id = weight;
        self
    }
}

/// `|sigma(a) - sigma(b)|` at the largest radius both series reached, so
/// that a shifted origin closer to an edge is not charged with a shorter
/// truncation.
pub fn common_radius_difference(a: &ConductanceReport, b: &ConductanceReport) -> Option<(usize, f64)> {
    a.convergence.iter().rev().find_map(|p| b.value_at(p.radius).map(|v| (p.radius, (p.value - v).abs())))
}

pub fn weight_id(w: &WeightFunction) -> String {
    format!("smoothstep{}-g{}", w.order(), w.g())
}

pub(crate) fn to_series(points: impl IntoIterator<Item = (usize, f64)>) -> Vec<SeriesPoint> {
    let mut out: Vec<SeriesPoint> = Vec::new();
    for (radius, value) in points {
        let increment = out.last().map_or(f64::INFINITY, |p| (value - p.value).abs());
        out.push(SeriesPoint { radius, value, increment });
    }
    out
}

/// Whether the increments of a series are non-increasing from index
/// `start + 1` on, ignoring steps that are already below `floor`.
pub fn increments_monotone(series: &[SeriesPoint], start: usize, floor: f64) -> bool {
    series.windows(2).skip(start).all(|w| w[1].increment <= w[0].increment || w[1].increment <= floor)
}

/// Box radii `2, 4, ...` around `origin` that keep `margin` rows and columns
/// of clearance from every edge; `0..=room` if radius 2 does not fit.
fn radii(lat: &Lattice, origin: Site, margin: i64) -> Result<Vec<usize>> {
    lat.require_open("box-restricted conductance")?;
    if !lat.contains(origin) {
        return Err(Error::Geometry(format!("origin {origin:?} is off the lattice")));
    }
    let room = lat.edge_distance(origin).expect("open lattice") - margin - 1;
    if room < 0 {
        return Err(Error::Geometry(format!("origin {origin:?} lies inside the {margin}-site edge margin")));
    }
    let room = room as usize;
    if room < 2 {
        return Ok((0..=room).collect());
    }
    Ok((1..=room / 2).map(|i| 2 * i).collect())
}

fn modes_of(lat: &Lattice, r: &Region) -> Vec<usize> {
    let no = lat.n_orb();
    r.iter().flat_map(|i| (0..no).map(move |a| i * no + a)).collect()
}

pub(crate) fn mode_values(lat: &Lattice, f: impl Fn(Site) -> f64) -> Vec<f64> {
    let no = lat.n_orb();
    (0..lat.n_modes()).map(|m| f(lat.site(m / no))).collect()
}

/// Diagonal of `i (p f1 p f2 p - p f2 p f1 p)` on the requested modes.
fn marker_density(p: &Mat<c64>, f1: &[f64], f2: &[f64], rows: &[usize]) -> Vec<f64> {
    let d = p.nrows();
    let pr = Mat::from_fn(d, rows.len(), |b, c| p[(b, rows[c])]);
    let k = |f: &[f64]| {
        let scaled = Mat::from_fn(d, rows.len(), |b, c| pr[(b, c)] * f[b]);
        p * &scaled
    };
    let k1 = k(f1);
    let k2 = k(f2);
    (0..rows.len())
        .map(|c| {
            let mut s = ZERO;
            for b in 0..d {
                s += pr[(b, c)].conj() * (k2[(b, c)] * f1[b] - k1[(b, c)] * f2[b]);
            }
            (I * s).re
        })
        .collect()
}

fn site_sums(lat: &Lattice, rows: &[usize], dens: &[f64]) -> std::collections::BTreeMap<usize, f64> {
    let no = lat.n_orb();
    let mut out = std::collections::BTreeMap::new();
    for (m, v) in rows.iter().zip(dens) {
        *out.entry(m / no).or_insert(0.0) += v;
    }
    out
}

/// `i tr(p [lambda2^od, lambda1^od])` restricted to boxes around `origin`,
/// with `lambda_j` the indicator of `x_j >= origin_j`.
pub fn hall_conductance_free(
    sea: &FermiSea,
    lat: &Lattice,
    origin: Site,
    opts: &ConductanceOptions,
) -> Result<ConductanceReport> {
    let rs = radii(lat, origin, opts.window_margin)?;
    let l1 = mode_values(lat, |x| if x.x1 >= origin.x1 { 1.0 } else { 0.0 });
    let l2 = mode_values(lat, |x| if x.x2 >= origin.x2 { 1.0 } else { 0.0 });
    let rmax = *rs.last().expect("nonempty");
    let rows = modes_of(lat, &lat.box_region(origin, rmax));
    let dens = marker_density(&sea.projection, &l1, &l2, &rows);
    let per_site = site_sums(lat, &rows, &dens);
    let series = to_series(rs.iter().map(|&r| {
        let v: f64 = per_site.iter().filter(|(&i, _)| lat.dist(lat.site(i), origin) <= r as i64).map(|(_, v)| v).sum();
        (r, v)
    }));
    Ok(ConductanceReport::from_series(Method::SwitchFree, series, origin, opts.increment_tol))
}

/// Box-averaged `i tr(p [x2^od, (x1^od)_y])` over `B_k'(x)`, `k' = 0..=k`.
pub fn hall_conductivity_position_free(
    sea: &FermiSea,
    lat: &Lattice,
    x: Site,
    k: usize,
    opts: &ConductanceOptions,
) -> Result<ConductanceReport> {
    position_box_check(lat, x, k, opts)?;
    let x1 = mode_values(lat, |s| s.x1 as f64);
    let x2 = mode_values(lat, |s| s.x2 as f64);
    let rows = modes_of(lat, &lat.box_region(x, k));
    let dens = marker_density(&sea.projection, &x1, &x2, &rows);
    let per_site = site_sums(lat, &rows, &dens);
    let series = to_series((0..=k).map(|kk| {
        let inside: Vec<f64> =
            per_site.iter().filter(|(&i, _)| lat.dist(lat.site(i), x) <= kk as i64).map(|(_, v)| *v).collect();
        (kk, inside.iter().sum::<f64>() / inside.len() as f64)
    }));
    Ok(ConductanceReport::from_series(Method::PositionFree, series, x, opts.increment_tol))
}

fn position_box_check(lat: &Lattice, x: Site, k: usize, opts: &ConductanceOptions) -> Result<()> {
    lat.require_open("position conductivity")?;
    if !lat.contains(x) {
        return Err(Error::Geometry(format!("site {x:?} is off the lattice")));
    }
    let room = lat.edge_distance(x).expect("open lattice") - k as i64;
    if room <= opts.edge_margin {
        return Err(Error::Geometry(format!(
            "box of radius {k} around {x:?} comes within {} sites of an edge",
            opts.edge_margin
        )));
    }
    Ok(())
}

fn sum_states(v: &[SectorState], pick: impl Fn(usize) -> bool) -> Option<SectorState> {
    let mut acc: Option<SectorState> = None;
    for (i, s) in v.iter().enumerate() {
        if !pick(i) {
            continue;
        }
        match &mut acc {
            None => acc = Some(s.clone()),
            Some(a) => a.amps.iter_mut().zip(&s.amps).for_each(|(x, y)| *x += y),
        }
    }
    acc
}

fn in_state(x: &Option<SectorState>, y: &Option<SectorState>) -> f64 {
    match (x, y) {
        (Some(a), Some(b)) => commutator_in_state(a, b),
        _ => 0.0,
    }
}

/// Many-body conductance in the (possibly twisted) ground state of `ctx`:
/// the global and double-sum forms, plus the box series
/// `S(r) = sum_{x,y in B_r} omega(i[(Lambda2^OD)_x, (Lambda1^OD)_y])`.
pub fn hall_conductance_mb(ctx: &OdContext, origin: Site, opts: &ConductanceOptions) -> Result<ConductanceReport> {
    let space = ctx.space().clone();
    let lat = space.lattice().clone();
    let rs = radii(&lat, origin, opts.window_margin)?;
    let l1 = Interaction::switch(&space, Axis::One, origin.x1)?;
    let l2 = Interaction::switch(&space, Axis::Two, origin.x2)?;
    let v1 = ctx.od_interaction_on_state(&l1)?;
    let v2 = ctx.od_interaction_on_state(&l2)?;
    let global = in_state(&sum_states(&v2, |_| true), &sum_states(&v1, |_| true));
    let double_sum: f64 = v2
        .par_iter()
        .map(|a| v1.iter().map(|b| commutator_in_state(a, b)).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let series = to_series(rs.iter().map(|&r| {
        let inside = |i: usize| lat.dist(lat.site(i), origin) <= r as i64;
        (r, in_state(&sum_states(&v2, inside), &sum_states(&v1, inside)))
    }));
    let mut rep = ConductanceReport::from_series(Method::SwitchManyBody, series, origin, opts.increment_tol);
    rep.global = Some(global);
    rep.double_sum = Some(double_sum);
    rep.resummation_defect = Some((global - double_sum).abs());
    rep.weight_id = Some(weight_id(ctx.weight()));
    Ok(rep)
}

/// Many-body box average of `omega(i[X2^OD, (X1^OD)_y])` over `B_k'(x)`.
pub fn hall_conductivity_position_mb(
    ctx: &OdContext,
    x: Site,
    k: usize,
    opts: &ConductanceOptions,
) -> Result<ConductanceReport> {
    let space = ctx.space().clone();
    let lat = space.lattice().clone();
    position_box_check(&lat, x, k, opts)?;
    let v1 = ctx.od_interaction_on_state(&Interaction::builtin(Builtin::Position(Axis::One), &space)?)?;
    let v2 = ctx.od_interaction_on_state(&Interaction::builtin(Builtin::Position(Axis::Two), &space)?)?;
    let x2 = sum_states(&v2, |_| true);
    let per_site: Vec<f64> = v1.iter().map(|b| x2.as_ref().map_or(0.0, |a| commutator_in_state(a, b))).collect();
    let series = to_series((0..=k).map(|kk| {
        let b = lat.box_region(x, kk);
        (kk, b.iter().map(|i| per_site[i]).sum::<f64>() / b.len() as f64)
    }));
    let mut rep = ConductanceReport::from_series(Method::PositionManyBody, series, x, opts.increment_tol);
    rep.weight_id = Some(weight_id(ctx.weight()));
    Ok(rep)
}

/// The one-body kernel split the way the many-body Hamiltonian is: on-site
/// blocks at their site, inter-site blocks at the center of the pair.
/// Entries `(row, col, value)` per center site.
pub fn one_body_local_terms(kernel: &Mat<c64>, lat: &Lattice) -> Result<Vec<Vec<(usize, usize, c64)>>> {
    let no = lat.n_orb();
    let n = lat.n_sites();
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in i..n {
            let c = lat.index(lat.center_of(&Region::from_indices([i, j]))?)?;
            for a in 0..no {
                for b in 0..no {
                    let (ma, mb) = (i * no + a, j * no + b);
                    if kernel[(ma, mb)] != ZERO {
                        out[c].push((ma, mb, kernel[(ma, mb)]));
                    }
                    if i != j && kernel[(mb, ma)] != ZERO {
                        out[c].push((mb, ma, kernel[(mb, ma)]));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact one-body image of the many-body box series for a quadratic
/// Hamiltonian `dGamma(kernel)`, with `sea` the filled states of `kernel`.
pub fn free_box_series(
    sea: &FermiSea,
    kernel: &Mat<c64>,
    lat: &Lattice,
    w: &WeightFunction,
    origin: Site,
    opts: &ConductanceOptions,
) -> Result<Vec<SeriesPoint>> {
    let rs = radii(lat, origin, opts.window_margin)?;
    let terms = one_body_local_terms(kernel, lat)?;
    let v = &sea.eigenvectors;
    let e = &sea.eigenvalues;
    let d = lat.n_modes();
    // a_x = G o V*[lambda, h_x]V in the eigenbasis, G(D) = -phi(D)/D
    let od_term = |lam: &[f64], x: usize| -> Mat<c64> {
        let mut c = Mat::<c64>::zeros(d, d);
        for &(a, b, h) in &terms[x] {
            c[(a, b)] += h * (lam[a] - lam[b]);
        }
        let ct = v.adjoint() * &c * v;
        Mat::from_fn(d, d, |m, n| {
            let dd = e[m] - e[n];
            if dd == 0.0 {
                ZERO
            } else {
                ct[(m, n)] * (-w.phi(dd) / dd)
            }
        })
    };
    let l1 = mode_values(lat, |x| if x.x1 >= origin.x1 { 1.0 } else { 0.0 });
    let l2 = mode_values(lat, |x| if x.x2 >= origin.x2 { 1.0 } else { 0.0 });
    let a2: Vec<Mat<c64>> = (0..lat.n_sites()).map(|x| od_term(&l2, x)).collect();
    let a1: Vec<Mat<c64>> = (0..lat.n_sites()).map(|x| od_term(&l1, x)).collect();
    let occ: Vec<bool> = e.iter().map(|&x| x < sea.mu).collect();
    let points = rs.iter().map(|&r| {
        let mut s2 = Mat::<c64>::zeros(d, d);
        let mut s1 = Mat::<c64>::zeros(d, d);
        for x in lat.box_region(origin, r).iter() {
            s2 += &a2[x];
            s1 += &a1[x];
        }
        let comm = &s2 * &s1 - &s1 * &s2;
        let tr: c64 = (0..d).filter(|&m| occ[m]).map(|m| comm[(m, m)]).sum();
        (r, (I * tr).re)
    });
    Ok(to_series(points))
}

#[derive(Clone, Debug, Serialize)]
pub struct StripeReport {
    pub k: usize,
    /// `(1/(2k+1)) sum_{x in stripe, window} omega(i[H, Lambda2]_x)`.
    pub value: f64,
    /// The same sum without the normalization.
    pub total: f64,
    pub margin: i64,
    pub series: Vec<SeriesPoint>,
}

/// Per-site expectation of the local terms of `i[H, Lambda2]`, `Lambda2`
/// the half-plane `x_2 >= shift`, in the free state `p`.
pub fn site_currents_free(p: &Mat<c64>, h: &Mat<c64>, lat: &Lattice, shift: i64) -> Result<Vec<f64>> {
    lat.require_open("current across a half-plane")?;
    let no = lat.n_orb();
    let n = lat.n_sites();
    let up: Vec<bool> = (0..n).map(|i| lat.site(i).x2 >= shift).collect();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            if up[i] == up[j] {
                continue;
            }
            // j_ab = i h_ab (lambda(b) - lambda(a)) on the bond, tr(p j)
            let mut s = ZERO;
            for a in 0..no {
                for b in 0..no {
                    let (ma, mb) = (i * no + a, j * no + b);
                    let dl_ab = if up[j] { 1.0 } else { -1.0 };
                    s += p[(mb, ma)] * I * h[(ma, mb)] * dl_ab;
                    s += p[(ma, mb)] * I * h[(mb, ma)] * (-dl_ab);
                }
            }
            if s != ZERO {
                let c = lat.index(lat.center_of(&Region::from_indices([i, j]))?)?;
                out[c] += s.re;
            }
        }
    }
    Ok(out)
}

/// Per-site expectation of the local terms of `i[H, Lambda2]` in a
/// many-body state.
pub fn site_currents_mb(state: &SectorState, h: &Interaction, shift: i64) -> Result<Vec<f64>> {
    let space = h.space().clone();
    let j = commutator_interaction(h, &Interaction::switch(&space, Axis::Two, shift)?)?;
    Ok(j.local_terms().par_iter().map(|t| t.expectation(state).re).collect())
}

/// Stripe sums of per-site currents, skipping `margin` columns at each
/// side edge.
pub fn stripe_current(lat: &Lattice, currents: &[f64], k: usize, margin: i64) -> Result<StripeReport> {
    lat.require_open("stripe current")?;
    let (a1, b1) = lat.extent(Axis::One);
    let in_window = |x: Site| x.x1 - a1 >= margin && b1 - x.x1 >= margin;
    let total_at =
        |kk: usize| -> f64 { lat.stripe(kk).iter().filter(|&i| in_window(lat.site(i))).map(|i| currents[i]).sum() };
    let series = to_series((0..=k).map(|kk| (kk, total_at(kk) / (2 * kk + 1) as f64)));
    let total = total_at(k);
    Ok(StripeReport { k, value: total / (2 * k + 1) as f64, total, margin, series })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChernReport {
    pub chern: i64,
    pub raw: f64,
    pub raw_refined: f64,
    pub grid: usize,
    pub filled: usize,
    /// Smallest distance of a Bloch eigenvalue from the Fermi level.
    pub min_gap: f64,
}

fn filled_frame(spec: &ModelSpec, hops: &[crate::models::Hop], k: (f64, f64)) -> Result<(Mat<c64>, f64)> {
    let (vals, vecs) = linalg::eigh(bloch_matrix(hops, k).as_ref())?;
    let mu = spec.fermi_level;
    let gap = vals.iter().map(|e| (e - mu).abs()).fold(f64::INFINITY, f64::min);
    let nf = vals.iter().filter(|&&e| e < mu).count();
    Ok((vecs.get(.., 0..nf).to_owned(), gap))
}

fn link(a: &Mat<c64>, b: &Mat<c64>) -> c64 {
    let m = a.adjoint() * b;
    let det = det_small(&m);
    let n = det.norm();
    if n == 0.0 {
        ZERO
    } else {
        det / n
    }
}

fn det_small(m: &Mat<c64>) -> c64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = cr(1.0);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[(i, c)].norm().total_cmp(&a[(j, c)].norm())).expect("nonempty");
        if a[(piv, c)] == ZERO {
            return ZERO;
        }
        if piv != c {
            for j in 0..n {
                let t = a[(c, j)];
                a[(c, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            det = -det;
        }
        det *= a[(c, c)];
        for i in c + 1..n {
            let f = a[(i, c)] / a[(c, c)];
            for j in c..n {
                let t = a[(c, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    det
}

fn fhs_raw(spec: &ModelSpec, hops: &[crate::models::Hop], grid: usize) -> Result<(f64, usize, f64)> {
    let step = 2.0 * PI / grid as f64;
    let mut frames = Vec::with_capacity(grid * grid);
    let mut min_gap = f64::INFINITY;
    for i2 in 0..grid {
        for i1 in 0..grid {
            let (f, g) = filled_frame(spec, hops, (i1 as f64 * step, i2 as f64 * step))?;
            min_gap = min_gap.min(g);
            frames.push(f);
        }
    }
    let filled = frames[0].ncols();
    if min_gap < 1e-9 || frames.iter().any(|f| f.ncols() != filled) {
        return Err(Error::Gapless(format!(
            "Bloch spectrum touches the Fermi level {} (closest {min_gap:.3e})",
            spec.fermi_level
        )));
    }
    if filled == 0 {
        return Ok((0.0, 0, min_gap));
    }
    let at = |i1: usize, i2: usize| &frames[(i2 % grid) * grid + (i1 % grid)];
    let mut total = 0.0;
    for i2 in 0..grid {
        for i1 in 0..grid {
            let u1 = link(at(i1, i2), at(i1 + 1, i2));
            let u2 = link(at(i1 + 1, i2), at(i1 + 1, i2 + 1));
            let u3 = link(at(i1, i2 + 1), at(i1 + 1, i2 + 1));
            let u4 = link(at(i1, i2), at(i1, i2 + 1));
            total += (u1 * u2 * u3.conj() * u4.conj()).arg();
        }
    }
    Ok((total / (2.0 * PI), filled, min_gap))
}

/// Chern number of the bands below the Fermi level from plaquette
/// products of overlap determinants on a `grid x grid` Brillouin zone.
///
/// Orientation: plaquettes run counterclockwise in `(k1, k2)`, which gives
/// `2 pi sigma = chern` with `sigma` from [`hall_conductance_free`].
pub fn chern_fhs_report(spec: &ModelSpec, grid: usize) -> Result<ChernReport> {
    if grid < 16 {
        return Err(Error::Param(format!("Chern grid must be at least 16, got {grid}")));
    }
    let hops = bloch_hoppings(spec, spec.required_orbitals().unwrap_or(2))?;
    let (raw, filled, min_gap) = fhs_raw(spec, &hops, grid)?;
    let (raw_refined, _, _) = fhs_raw(spec, &hops, 2 * grid)?;
    let chern = raw.round() as i64;
    if raw_refined.round() as i64 != chern {
        return Err(Error::Numerical(format!(
            "Chern number unstable under grid refinement: {raw:.6} at {grid}, {raw_refined:.6} at {}",
            2 * grid
        )));
    }
    Ok(ChernReport { chern, raw, raw_refined, grid, filled, min_gap })
}

pub fn chern_fhs(spec: &ModelSpec, grid: usize) -> Result<i64> {
    Ok(chern_fhs_report(spec, grid)?.chern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::lattice::Boundary;
    use crate::models::{build_interaction, build_one_body, quadratic_kernel, ModelKind};
    use crate::spectral::fermi_sea;
    use crate::weightfn::{build_weight, WeightParams};
    use std::sync::Arc;

    fn qwz(u: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::QiWuZhang { u })
    }

    #[test]
    fn chern_examples() {
        assert_eq!(chern_fhs(&ModelSpec::new(ModelKind::Atomic), 16).unwrap(), 0);
        assert_eq!(chern_fhs(&qwz(3.0), 16).unwrap(), 0);
        let c = chern_fhs(&qwz(1.0), 16).unwrap();
        assert_eq!(c.abs(), 1);
        assert_eq!(chern_fhs(&qwz(-1.0), 16).unwrap(), -c);
        assert!(matches!(chern_fhs(&qwz(2.0), 16), Err(Error::Gapless(_))));
        assert!(matches!(chern_fhs(&qwz(1.0).with_disorder(0.1, 3), 16), Err(Error::Model(_))));
    }

    #[test]
    fn det_oracle() {
        let m = Mat::from_fn(3, 3, |i, j| c64::new((i * 3 + j) as f64 * 0.3 - 1.0, (i as f64 - j as f64) * 0.7));
        // cofactor expansion
        let c = |i: usize, j: usize| m[(i, j)];
        let det = c(0, 0) * (c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1)) - c(0, 1) * (c(1, 0) * c(2, 2) - c(1, 2) * c(2, 0))
            + c(0, 2) * (c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0));
        assert!((det_small(&m) - det).norm() < 1e-12);
    }

    #[test]
    fn atomic_free_conductance_is_zero() {
        let lat = Lattice::new(12, 12, Boundary::Open, 2).unwrap();
        let h = build_one_body(&ModelSpec::new(ModelKind::Atomic), &lat).unwrap();
        let sea = fermi_sea(&h, 0.0).unwrap();
        let rep = hall_conductance_free(&sea, &lat, Site::new(0, 0), &ConductanceOptions::default()).unwrap();
        assert!(rep.sigma.abs() < 1e-10);
        let pos = hall_conductivity_position_free(
            &sea,
            &lat,
            Site::new(0, 0),
            1,
            &ConductanceOptions { edge_margin: 2, ..Default::default() },
        )
        .unwrap();
        assert!(pos.sigma.abs() < 1e-10);
        let cur = site_currents_free(&sea.projection, &h, &lat, 0).unwrap();
        assert!(stripe_current(&lat, &cur, 4, 2).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn marker_matches_direct_trace() {
        // oracle: the full matrix expression i (p f1 p f2 p - p f2 p f1 p)_aa
        let lat = Lattice::new(4, 4, Boundary::Open, 2).unwrap();
        let h = build_one_body(&qwz(1.2), &lat).unwrap();
        let sea = fermi_sea(&h, 0.0).unwrap();
        let p = &sea.projection;
        let f1 = mode_values(&lat, |x| if x.x1 >= 0 { 1.0 } else { 0.0 });
        let f2 = mode_values(&lat, |x| x.x2 as f64);
        let d = lat.n_modes();
        let diag = |f: &[f64]| Mat::from_fn(d, d, |i, j| if i == j { cr(f[i]) } else { ZERO });
        let (d1, d2) = (diag(&f1), diag(&f2));
        let m = p * &d1 * p * &d2 * p - p * &d2 * p * &d1 * p;
        let rows: Vec<usize> = (0..d).collect();
        let dens = marker_density(p, &f1, &f2, &rows);
        for a in 0..d {
            assert!(((I * m[(a, a)]).re - dens[a]).abs() < 1e-12);
            assert!((I * m[(a, a)]).im.abs() < 1e-12);
        }
        // whole-lattice sum is the trace of a commutator
        assert!(dens.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn free_box_series_matches_many_body() {
        let lat = Lattice::new(3, 2, Boundary::Open, 2).unwrap();
        let spec = qwz(1.0);
        let space = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&spec, &space).unwrap();
        let kernel = quadratic_kernel(&spec, &lat).unwrap();
        let sea = fermi_sea(&kernel, 0.0).unwrap();
        // the many-body gap is the smallest particle or hole energy
        let gap = sea.eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
        let w = Arc::new(build_weight(WeightParams::new(0.9 * gap)).unwrap());
        let ctx = OdContext::many_body(&h, w.clone(), 1e-8).unwrap();
        let opts = ConductanceOptions::small_cluster();
        let mb = hall_conductance_mb(&ctx, Site::new(0, 0), &opts).unwrap();
        let free = free_box_series(&sea, &kernel, &lat, &w, Site::new(0, 0), &opts).unwrap();
        assert!(mb.global.unwrap().abs() < 1e-10);
        assert!(mb.resummation_defect.unwrap() < 1e-10);
        assert_eq!(mb.convergence.len(), free.len());
        for (a, b) in mb.convergence.iter().zip(&free) {
            assert!((a.value - b.value).abs() < 1e-9, "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn many_body_currents_match_free() {
        let lat = Lattice::new(3, 2, Boundary::Open, 2).unwrap();
        let spec = qwz(1.0);
        let space = FockSpace::new(&lat).unwrap();
        let h = build_interaction(&spec, &space).unwrap();
        let kernel = quadratic_kernel(&spec, &lat).unwrap();
        let sea = fermi_sea(&kernel, 0.0).unwrap();
        let gs = crate::spectral::ground_state(&h, Default::default()).unwrap();
        let mb = site_currents_mb(&gs.state, &h, 0).unwrap();
        let free = site_currents_free(&sea.projection, &kernel, &lat, 0).unwrap();
        for (a, b) in mb.iter().zip(&free) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn radii_and_guards() {
        let lat = Lattice::new(32, 32, Boundary::Open, 2).unwrap();
        assert_eq!(radii(&lat, Site::new(0, 0), 4).unwrap(), vec![2, 4, 6, 8, 10]);
        let torus = Lattice::new(8, 8, Boundary::Torus, 2).unwrap();
        assert!(matches!(radii(&torus, Site::new(0, 0), 0), Err(Error::Geometry(_))));
        assert!(matches!(
            position_box_check(&lat, Site::new(0, 0), 8, &ConductanceOptions::default()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn swapping_switches_flips_sign() {
        let lat = Lattice::new(10, 10, Boundary::Open, 2).unwrap();
        let h = build_one_body(&qwz(1.0), &lat).unwrap();
        let sea = fermi_sea(&h, 0.0).unwrap();
        let f1 = mode_values(&lat, |x| if x.x1 >= 0 { 1.0 } else { 0.0 });
        let f2 = mode_values(&lat, |x| if x.x2 >= 0 { 1.0 } else { 0.0 });
        let rows: Vec<usize> = (0..lat.n_modes()).collect();
        let a = marker_density(&sea.projection, &f1, &f2, &rows);
        let b = marker_density(&sea.projection, &f2, &f1, &rows);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }
}

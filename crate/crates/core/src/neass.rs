//! The perturbed steady state `omega_eps`, realized either as the ground
//! state of `H + eps Lambda1` or by adiabatic switching, the current
//! response it carries and the charge-pump protocol.

use std::f64::consts::PI;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conductance::{mode_values, site_currents_free, site_currents_mb, to_series, SeriesPoint};
use crate::error::{Error, Result};
use crate::fock::{FockOperator, SectorState};
use crate::interaction::Interaction;
use crate::lattice::{Axis, Lattice, Site};
use crate::linalg::{self, cr, ZERO};
use crate::spectral::{fermi_sea, ground_state, FermiSea, GroundState, GroundStateOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchKind {
    /// Switch on and stay on: `f(0) = 0`, `f(1) = 1`.
    Ne,
    /// Switch on and off again: `f(0) = f(1) = 0`, unit integral.
    Cp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingFunction {
    pub kind: SwitchKind,
}

impl SwitchingFunction {
    pub fn ne() -> Self {
        SwitchingFunction { kind: SwitchKind::Ne }
    }

    pub fn cp() -> Self {
        SwitchingFunction { kind: SwitchKind::Cp }
    }

    /// `f(s)`, constant outside `[0, 1]`.
    pub fn value(&self, s: f64) -> f64 {
        let t = s.clamp(0.0, 1.0);
        match self.kind {
            SwitchKind::Ne => t * t * t * (10.0 + t * (6.0 * t - 15.0)),
            SwitchKind::Cp => 630.0 * (t * (1.0 - t)).powi(4),
        }
    }
}

/// Indicator of `x_1 >= shift` as an interaction.
fn perturbation(h: &Interaction, shift: i64) -> Result<Interaction> {
    Interaction::switch(h.space(), Axis::One, shift)
}

/// Ground state of `H + eps Lambda1`, `Lambda1` the half-plane `x_1 >= shift`.
pub fn perturbed_state(h: &Interaction, eps: f64, shift: i64, opts: GroundStateOptions) -> Result<GroundState> {
    let h_eps = if eps == 0.0 { h.clone() } else { h.add_scaled(&perturbation(h, shift)?, eps) };
    let gs = ground_state(&h_eps, opts)?;
    if gs.gap <= opts.degeneracy_tol {
        return Err(Error::Gapless(format!("H + {eps} Lambda1 has gap {:.3e}", gs.gap)));
    }
    Ok(gs)
}

/// Fermi sea of `h + eps lambda1` at the same chemical potential.
pub fn perturbed_sea(h: &Mat<c64>, lat: &Lattice, mu: f64, eps: f64, shift: i64) -> Result<FermiSea> {
    let lam = mode_values(lat, |x| if x.x1 >= shift { 1.0 } else { 0.0 });
    let mut he = h.clone();
    for (i, l) in lam.iter().enumerate() {
        he[(i, i)] += cr(eps * l);
    }
    fermi_sea(&he, mu)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaCurrent {
    /// Sum over `box(origin, radius)` of the per-site current differences.
    pub value: f64,
    pub radius: usize,
    /// Partial sums over `box(origin, r)`, `r = 0..=radius`.
    pub series: Vec<SeriesPoint>,
}

fn box_series(lat: &Lattice, per_site: &[f64], origin: Site, radius: usize) -> DeltaCurrent {
    let series =
        to_series((0..=radius).map(|r| (r, lat.box_region(origin, r).iter().map(|i| per_site[i]).sum::<f64>())));
    DeltaCurrent { value: series.last().expect("nonempty").value, radius, series }
}

/// `sum_{x in box} tr((p_eps - p_0) i[h, lambda2]_x)`, `lambda2` the
/// half-plane `x_2 >= origin_2`.
pub fn delta_current_free(
    p_eps: &Mat<c64>,
    p0: &Mat<c64>,
    h: &Mat<c64>,
    lat: &Lattice,
    origin: Site,
    radius: usize,
) -> Result<DeltaCurrent> {
    let dp = p_eps - p0;
    let cur = site_currents_free(&dp, h, lat, origin.x2)?;
    Ok(box_series(lat, &cur, origin, radius))
}

/// Many-body `sum_{x in box} (omega_eps - omega_0)(i[H, Lambda2]_x)`.
pub fn delta_current_mb(
    psi_eps: &SectorState,
    psi0: &SectorState,
    h: &Interaction,
    origin: Site,
    radius: usize,
) -> Result<DeltaCurrent> {
    let a = site_currents_mb(psi_eps, h, origin.x2)?;
    let b = site_currents_mb(psi0, h, origin.x2)?;
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    Ok(box_series(h.space().lattice(), &diff, origin, radius))
}

/// Exact `d/d eps` of the windowed current at `eps = 0`, from first-order
/// perturbation theory of the Fermi projection.
pub fn first_order_current_free(
    sea: &FermiSea,
    h: &Mat<c64>,
    lat: &Lattice,
    origin: Site,
    radius: usize,
) -> Result<f64> {
    let lam = mode_values(lat, |x| if x.x1 >= origin.x1 { 1.0 } else { 0.0 });
    let v = &sea.eigenvectors;
    let e = &sea.eigenvalues;
    let d = e.len();
    let vl = Mat::from_fn(d, d, |i, j| v[(i, j)] * lam[i]);
    let l = v.adjoint() * &vl;
    let occ = |m: usize| e[m] < sea.mu;
    let dt = Mat::from_fn(d, d, |n, m| {
        if occ(m) && !occ(n) {
            l[(n, m)] / (e[m] - e[n])
        } else if occ(n) && !occ(m) {
            l[(n, m)] / (e[n] - e[m])
        } else {
            ZERO
        }
    });
    let dp = v * &dt * v.adjoint();
    let cur = site_currents_free(&dp, h, lat, origin.x2)?;
    Ok(box_series(lat, &cur, origin, radius).value)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResponseScan {
    pub epsilons: Vec<f64>,
    pub delta_j: Vec<f64>,
    /// Least-squares slope of `delta_j` against `eps` through the origin.
    pub slope_fit: f64,
    /// `delta_j - slope_fit * eps`.
    pub residuals: Vec<f64>,
    /// Exact first-order coefficient, when the engine provides it.
    pub first_order: Option<f64>,
    /// `delta_j - first_order * eps`.
    pub first_order_residuals: Option<Vec<f64>>,
    /// Slope of `log |r|` against `log eps` over the points above `floor`.
    pub residual_exponent: Option<f64>,
    pub floor: f64,
    pub window_radius: usize,
}

fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx
}

/// Least-squares slope of `log |r|` against `log eps` over the points with
/// `eps > 0` and `|r| > floor`; `None` with fewer than two such points.
pub fn residual_exponent(eps: &[f64], r: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        eps.iter().zip(r).filter(|(e, r)| **e > 0.0 && r.abs() > floor).map(|(e, r)| (e.ln(), r.abs().ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

fn assemble_scan(eps: &[f64], dj: Vec<f64>, first: Option<f64>, radius: usize) -> ResponseScan {
    let slope = slope_through_origin(eps, &dj);
    let residuals: Vec<f64> = eps.iter().zip(&dj).map(|(e, j)| j - slope * e).collect();
    let scale = dj.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let floor = 1e-12 * scale;
    let fo: Option<Vec<f64>> = first.map(|s| eps.iter().zip(&dj).map(|(e, j)| j - s * e).collect());
    let exponent = residual_exponent(eps, fo.as_deref().unwrap_or(&residuals), floor);
    ResponseScan {
        epsilons: eps.to_vec(),
        delta_j: dj,
        slope_fit: slope,
        residuals,
        first_order: first,
        first_order_residuals: fo,
        residual_exponent: exponent,
        floor,
        window_radius: radius,
    }
}

/// Free-fermion `eps` scan of the windowed current response.
pub fn linear_response_scan_free(
    h: &Mat<c64>,
    lat: &Lattice,
    mu: f64,
    origin: Site,
    eps_list: &[f64],
    radius: usize,
) -> Result<ResponseScan> {
    let sea0 = fermi_sea(h, mu)?;
    let dj = eps_list
        .par_iter()
        .map(|&e| {
            if e == 0.0 {
                return Ok(0.0);
            }
            let sea = perturbed_sea(h, lat, mu, e, origin.x1)?;
            Ok(delta_current_free(&sea.projection, &sea0.projection, h, lat, origin, radius)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let first = first_order_current_free(&sea0, h, lat, origin, radius)?;
    Ok(assemble_scan(eps_list, dj, Some(first), radius))
}

/// Many-body `eps` scan with exact perturbed ground states.
pub fn linear_response_scan_mb(
    h: &Interaction,
    origin: Site,
    eps_list: &[f64],
    radius: usize,
    opts: GroundStateOptions,
) -> Result<ResponseScan> {
    let gs0 = ground_state(h, opts)?;
    let dj = eps_list
        .par_iter()
        .map(|&e| {
            if e == 0.0 {
                return Ok(0.0);
            }
            let gs = perturbed_state(h, e, origin.x1, opts)?;
            Ok(delta_current_mb(&gs.state, &gs0.state, h, origin, radius)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(assemble_scan(eps_list, dj, None, radius))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvolveOptions {
    /// Bound on the step-doubling error estimate per accepted step.
    pub step_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub krylov_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { step_tol: 1e-10, initial_step: 0.05, min_step: 1e-9, max_steps: 2_000_000, krylov_tol: 1e-14 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Evolution {
    #[serde(skip)]
    pub state: SectorState,
    pub t_final: f64,
    pub steps: usize,
    pub rejected: usize,
    /// `|<H0>(t_final) - <H0>(0)|`; a pure integrator check when `eps = 0`.
    pub energy_drift: f64,
}

/// `H(t) = H0 + eps f(eta t) Lambda1` in the ground-state sector.
struct Protocol<'a> {
    h0: &'a FockOperator,
    lam: &'a FockOperator,
    eps: f64,
    eta: f64,
    f: SwitchingFunction,
}

impl Protocol<'_> {
    fn coupling(&self, t: f64) -> f64 {
        self.eps * self.f.value(self.eta * t)
    }

    /// `exp(-i h (a H0 + c Lambda1)) psi`.
    fn exp(&self, psi: &SectorState, h: f64, a: f64, c: f64, tol: f64) -> Result<SectorState> {
        let n = psi.n;
        let h0 = self.h0.block(n, n);
        let lam = self.lam.block(n, n);
        let dim = psi.amps.len();
        let mv = |x: &[c64], y: &mut [c64]| {
            y.iter_mut().for_each(|v| *v = ZERO);
            let mut tmp = vec![ZERO; dim];
            if let Some(b) = h0 {
                b.matvec(x, &mut tmp);
                y.iter_mut().zip(&tmp).for_each(|(v, w)| *v += w * a);
            }
            if c != 0.0 {
                if let Some(b) = lam {
                    b.matvec(x, &mut tmp);
                    y.iter_mut().zip(&tmp).for_each(|(v, w)| *v += w * c);
                }
            }
        };
        let amps = linalg::expm_krylov(dim, &mv, &psi.amps, h, tol)?;
        Ok(SectorState { n, amps })
    }

    /// One fourth-order commutator-free step from `t` to `t + h`.
    fn cf4_step(&self, psi: &SectorState, t: f64, h: f64, tol: f64) -> Result<SectorState> {
        let r = 3f64.sqrt() / 6.0;
        let (a1, a2) = (0.25 + r, 0.25 - r);
        let c1 = self.coupling(t + (0.5 - r) * h);
        let c2 = self.coupling(t + (0.5 + r) * h);
        let first = self.exp(psi, h, 0.5, a1 * c1 + a2 * c2, tol)?;
        self.exp(&first, h, 0.5, a2 * c1 + a1 * c2, tol)
    }
}

fn distance(a: &SectorState, b: &SectorState) -> f64 {
    a.amps.iter().zip(&b.amps).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Schroedinger evolution of `psi0` under `H0 + eps f(eta t) Lambda1` on
/// `[0, t_final]`, with step-doubling control of the local error.
pub fn adiabatic_evolve(
    h0: &FockOperator,
    lam1: &FockOperator,
    psi0: &SectorState,
    eps: f64,
    eta: f64,
    f: SwitchingFunction,
    t_final: f64,
    opts: EvolveOptions,
) -> Result<Evolution> {
    if h0.space().dim() > 1 << 14 {
        return Err(Error::Size(format!("Fock dimension {} exceeds 2^14 for time evolution", h0.space().dim())));
    }
    if f.kind == SwitchKind::Ne && eta > 0.0 && t_final > 1.0 / eta * (1.0 + 1e-12) {
        return Err(Error::Param(format!("t_final {t_final} exceeds the switching time 1/eta = {}", 1.0 / eta)));
    }
    let p = Protocol { h0, lam: lam1, eps, eta, f };
    let e0 = h0.expectation(psi0).re;
    let mut psi = psi0.clone();
    let mut t = 0.0;
    let mut h = opts.initial_step.min(t_final);
    let (mut steps, mut rejected) = (0usize, 0usize);
    while t < t_final {
        if steps + rejected >= opts.max_steps {
            return Err(Error::Integration(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        let h_try = h.min(t_final - t);
        let big = p.cf4_step(&psi, t, h_try, opts.krylov_tol)?;
        let half = p.cf4_step(&psi, t, 0.5 * h_try, opts.krylov_tol)?;
        let two = p.cf4_step(&half, t + 0.5 * h_try, 0.5 * h_try, opts.krylov_tol)?;
        let err = distance(&big, &two);
        let grow = if err == 0.0 { 2.0 } else { (0.9 * (opts.step_tol / err).powf(0.2)).clamp(0.2, 2.0) };
        if err <= opts.step_tol {
            psi = two;
            t += h_try;
            steps += 1;
            if h_try == h {
                h *= grow;
            }
        } else {
            rejected += 1;
            h = h_try * grow;
            if h < opts.min_step {
                return Err(Error::Integration(format!("step size fell below {} at t = {t}", opts.min_step)));
            }
        }
    }
    let energy_drift = (h0.expectation(&psi).re - e0).abs();
    Ok(Evolution { state: psi, t_final, steps, rejected, energy_drift })
}

/// The adiabatically switched state at `t = 1/eta` with the NE protocol.
pub fn adiabatic_neass(
    h: &Interaction,
    gs: &GroundState,
    eps: f64,
    eta: f64,
    shift: i64,
    opts: EvolveOptions,
) -> Result<Evolution> {
    let lam = perturbation(h, shift)?.total();
    adiabatic_evolve(&h.total(), &lam, &gs.state, eps, eta, SwitchingFunction::ne(), 1.0 / eta, opts)
}

#[derive(Clone, Debug, Serialize)]
pub struct PumpReport {
    pub eps: f64,
    pub eta: f64,
    /// Change of the windowed `Lambda2` charge over one cycle.
    pub delta_q: f64,
    /// `delta_q` itself: at `eta = eps` the cycle-averaged current over the
    /// averaged voltage reduces to the transported charge.
    pub sigma_cp: f64,
    pub window_radius: usize,
    pub steps: usize,
}

/// Charge moved into the upper half of `box(origin, radius)` by one
/// `f_CP` cycle at `eta = eps`.
pub fn charge_pump(
    h: &Interaction,
    gs: &GroundState,
    eps: f64,
    origin: Site,
    radius: usize,
    opts: EvolveOptions,
) -> Result<PumpReport> {
    let space = h.space().clone();
    let lat = space.lattice().clone();
    let mut q = FockOperator::zero(&space);
    for i in lat.box_region(origin, radius).iter() {
        let x = lat.site(i);
        if x.x2 >= origin.x2 {
            q = q.add(&FockOperator::number(&space, x)?);
        }
    }
    if eps == 0.0 {
        return Ok(PumpReport { eps, eta: 0.0, delta_q: 0.0, sigma_cp: 0.0, window_radius: radius, steps: 0 });
    }
    let eta = eps.abs();
    let lam = perturbation(h, origin.x1)?.total();
    let ev = adiabatic_evolve(&h.total(), &lam, &gs.state, eps, eta, SwitchingFunction::cp(), 1.0 / eta, opts)?;
    let delta_q = q.expectation(&ev.state).re - q.expectation(&gs.state).re;
    Ok(PumpReport { eps, eta, delta_q, sigma_cp: delta_q, window_radius: radius, steps: ev.steps })
}

/// `max_A |omega(i[H_eps, A])| / ||A||_{6,x}` over the samples, with `x`
/// the center of each sample's support.
pub fn neass_residual(state: &SectorState, h_eps: &FockOperator, samples: &[FockOperator]) -> Result<f64> {
    let lat = h_eps.space().lattice();
    let mut worst = 0.0f64;
    for a in samples {
        let x = if a.support().is_empty() { Site::new(0, 0) } else { lat.center_of(a.support())? };
        let nrm = a.local_norm(6, x)?;
        if nrm == 0.0 {
            continue;
        }
        let v = h_eps.commutator_full(a).expectation(state).norm();
        worst = worst.max(v / nrm);
    }
    Ok(worst)
}

/// Trapezoid check that a switching function integrates to `target`.
pub fn switching_integral(f: SwitchingFunction, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    (0..=n).map(|i| f.value(i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * h
}

/// `2 pi` times a conductance, the quantity compared with a Chern number.
pub fn two_pi(sigma: f64) -> f64 {
    2.0 * PI * sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::{hall_conductance_free, ConductanceOptions};
    use crate::fock::FockSpace;
    use crate::lattice::Boundary;
    use crate::models::{build_interaction, build_one_body, ModelKind, ModelSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn switching_functions() {
        let ne = SwitchingFunction::ne();
        let cp = SwitchingFunction::cp();
        assert_eq!(ne.value(0.0), 0.0);
        assert_eq!(ne.value(1.0), 1.0);
        assert_eq!(ne.value(2.0), 1.0);
        assert_eq!(cp.value(0.0), 0.0);
        assert_eq!(cp.value(1.0), 0.0);
        assert!((switching_integral(cp, 20000) - 1.0).abs() < 1e-8);
        // derivative of the NE ramp vanishes at both ends
        let d = |s: f64| (ne.value(s + 1e-6) - ne.value(s - 1e-6)) / 2e-6;
        assert!(d(0.0).abs() < 1e-9 && d(1.0).abs() < 1e-9);
    }

    fn cluster(l1: usize, l2: usize, v: f64, mu: f64) -> Interaction {
        let lat = Lattice::new(l1, l2, Boundary::Open, 1).unwrap();
        let space = FockSpace::new(&lat).unwrap();
        build_interaction(&ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v, mu }), &space).unwrap()
    }

    #[test]
    fn cf4_is_fourth_order() {
        let h = cluster(3, 2, 0.5, 0.3);
        let gs = ground_state(&h, Default::default()).unwrap();
        let lam = perturbation(&h, 0).unwrap().total();
        let h0 = h.total();
        let p = Protocol { h0: &h0, lam: &lam, eps: 0.8, eta: 0.5, f: SwitchingFunction::ne() };
        let run = |n: usize| {
            let dt = 2.0 / n as f64;
            let mut psi = gs.state.clone();
            for i in 0..n {
                psi = p.cf4_step(&psi, i as f64 * dt, dt, 1e-15).unwrap();
            }
            psi
        };
        let reference = run(1024);
        let e1 = distance(&run(16), &reference);
        let e2 = distance(&run(32), &reference);
        let ratio = e1 / e2;
        assert!(ratio > 13.0 && ratio < 19.0, "error ratio {ratio}");
    }

    #[test]
    fn stationary_evolution() {
        let h = cluster(3, 2, 0.5, 0.3);
        let gs = ground_state(&h, Default::default()).unwrap();
        let lam = perturbation(&h, 0).unwrap().total();
        let ev =
            adiabatic_evolve(&h.total(), &lam, &gs.state, 0.0, 0.1, SwitchingFunction::ne(), 10.0, Default::default())
                .unwrap();
        assert!(ev.state.fidelity(&gs.state) >= 1.0 - 1e-10);
        assert!(ev.energy_drift <= 1e-9);
    }

    #[test]
    fn exact_perturbed_state_is_stationary() {
        let h = cluster(3, 2, 0.5, 0.3);
        let eps = 0.05;
        let gs = perturbed_state(&h, eps, 0, Default::default()).unwrap();
        let h_eps = h.add_scaled(&perturbation(&h, 0).unwrap(), eps).total();
        let space = h.space().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lat = space.lattice().clone();
        let samples: Vec<FockOperator> = (0..10)
            .map(|i| {
                let r = lat.box_region(lat.site(i % lat.n_sites()), 1);
                let a = FockOperator::random_local(&space, &r, true, &mut rng);
                a.add(&a.adjoint())
            })
            .collect();
        assert!(neass_residual(&gs.state, &h_eps, &samples).unwrap() <= 1e-9);
        let haar = SectorState::random(&space, gs.state.n, &mut rng);
        assert!(neass_residual(&haar, &h_eps, &samples).unwrap() > 1e-3);
        let same = perturbed_state(&h, 0.0, 0, Default::default()).unwrap();
        assert!(same.state.fidelity(&ground_state(&h, Default::default()).unwrap().state) > 1.0 - 1e-14);
    }

    #[test]
    fn atomic_response_vanishes() {
        let lat = Lattice::new(10, 10, Boundary::Open, 2).unwrap();
        let h = build_one_body(&ModelSpec::new(ModelKind::Atomic), &lat).unwrap();
        let scan = linear_response_scan_free(&h, &lat, 0.0, Site::new(0, 0), &[0.0, 0.01, 0.02], 3).unwrap();
        assert_eq!(scan.delta_j[0], 0.0);
        assert!(scan.delta_j.iter().all(|x| x.abs() < 1e-12));
        assert!(scan.slope_fit.abs() < 1e-12);
    }

    #[test]
    fn qwz_response_matches_conductance() {
        let lat = Lattice::new(20, 20, Boundary::Open, 2).unwrap();
        let h = build_one_body(&ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }), &lat).unwrap();
        let sea = fermi_sea(&h, 0.0).unwrap();
        let sigma = hall_conductance_free(&sea, &lat, Site::new(0, 0), &ConductanceOptions::default()).unwrap().sigma;
        let first = first_order_current_free(&sea, &h, &lat, Site::new(0, 0), 5).unwrap();
        // first order against a symmetric difference
        let e = 1e-4;
        let up = perturbed_sea(&h, &lat, 0.0, e, 0).unwrap();
        let dn = perturbed_sea(&h, &lat, 0.0, -e, 0).unwrap();
        let fd =
            delta_current_free(&up.projection, &dn.projection, &h, &lat, Site::new(0, 0), 5).unwrap().value / (2.0 * e);
        assert!((first - fd).abs() < 1e-6, "{first} vs {fd}");
        assert!((first - sigma).abs() < 5e-3, "{first} vs {sigma}");
        let bulk = sea.bulk_gap(&lat, 4);
        let pert = perturbed_sea(&h, &lat, 0.0, 0.05 * bulk, 0).unwrap();
        assert!(pert.bulk_gap(&lat, 4) >= 0.9 * bulk);
    }
}

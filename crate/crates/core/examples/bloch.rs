//! Stripe-averaged current across a horizontal line: zero in the ground
//! state, eps times the conductance after a potential step.

use hallcond::conductance::{hall_conductance_free, site_currents_free, stripe_current, ConductanceOptions};
use hallcond::lattice::{Boundary, Lattice, Site};
use hallcond::models::{quadratic_kernel, ModelKind, ModelSpec};
use hallcond::neass::perturbed_sea;
use hallcond::spectral::fermi_sea;

fn main() -> hallcond::Result<()> {
    let lat = Lattice::new(24, 24, Boundary::Open, 2)?;
    let h = quadratic_kernel(&ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }), &lat)?;
    let sea = fermi_sea(&h, 0.0)?;
    let origin = Site::new(0, 0);
    let ground = stripe_current(&lat, &site_currents_free(&sea.projection, &h, &lat, origin.x2)?, 8, 4)?;
    println!("ground state: stripe current {:+.3e}", ground.value);
    let opts = ConductanceOptions { increment_tol: 1e-6, window_margin: 4, edge_margin: 4 };
    let sigma = hall_conductance_free(&sea, &lat, origin, &opts)?.sigma;
    let eps = 0.01 * sea.bulk_gap(&lat, 4);
    let pert = perturbed_sea(&h, &lat, 0.0, eps, origin.x1)?;
    let contrast = stripe_current(&lat, &site_currents_free(&pert.projection, &h, &lat, origin.x2)?, 8, 4)?;
    println!("after a step of {eps:.3e}: total {:+.6e}, eps sigma {:+.6e}", contrast.total, eps * sigma);
    Ok(())
}

//! Current response to a half-plane potential step of height eps, compared
//! with the conductance.

use hallcond::conductance::{hall_conductance_free, ConductanceOptions};
use hallcond::lattice::{Boundary, Lattice, Site};
use hallcond::models::{quadratic_kernel, ModelKind, ModelSpec};
use hallcond::neass::linear_response_scan_free;
use hallcond::spectral::fermi_sea;

fn main() -> hallcond::Result<()> {
    let lat = Lattice::new(28, 28, Boundary::Open, 2)?;
    let h = quadratic_kernel(&ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }), &lat)?;
    let sea = fermi_sea(&h, 0.0)?;
    let gap = sea.bulk_gap(&lat, 4);
    let origin = Site::new(0, 0);
    let opts = ConductanceOptions { increment_tol: 1e-6, window_margin: 4, edge_margin: 4 };
    let rep = hall_conductance_free(&sea, &lat, origin, &opts)?;
    // compare at the window radius of the scan
    let sigma = rep.value_at(8).unwrap_or(rep.sigma);
    let eps: Vec<f64> = [0.005, 0.01, 0.02, 0.04].iter().map(|f| f * gap).collect();
    let scan = linear_response_scan_free(&h, &lat, 0.0, origin, &eps, 8)?;
    for (e, dj) in scan.epsilons.iter().zip(&scan.delta_j) {
        println!("eps {e:.3e}  dJ/eps {:+.10}  sigma {:+.10}", dj / e, sigma);
    }
    println!("residual exponent {:?}", scan.residual_exponent);
    Ok(())
}

//! Switch-function conductance against the position-operator conductivity.

use hallcond::conductance::{hall_conductance_free, hall_conductivity_position_free, ConductanceOptions};
use hallcond::lattice::{Boundary, Lattice, Site};
use hallcond::models::{quadratic_kernel, ModelKind, ModelSpec};
use hallcond::spectral::fermi_sea;

fn main() -> hallcond::Result<()> {
    let lat = Lattice::new(24, 24, Boundary::Open, 2)?;
    let sea = fermi_sea(&quadratic_kernel(&ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }), &lat)?, 0.0)?;
    let opts = ConductanceOptions { increment_tol: 1e-6, window_margin: 4, edge_margin: 4 };
    let origin = Site::new(0, 0);
    let switch = hall_conductance_free(&sea, &lat, origin, &opts)?;
    let position = hall_conductivity_position_free(&sea, &lat, origin, 6, &opts)?;
    for p in &position.convergence {
        println!("k = {}  position {:+.10}  increment {:.2e}", p.radius, p.value, p.increment);
    }
    println!("switch {:+.10}  position {:+.10}", switch.sigma, position.sigma);
    Ok(())
}

//! Box-restricted Hall conductance of the Qi-Wu-Zhang model and its
//! comparison with the Chern number.

use hallcond::conductance::{chern_fhs, hall_conductance_free, ConductanceOptions};
use hallcond::lattice::{Boundary, Lattice, Site};
use hallcond::models::{quadratic_kernel, ModelKind, ModelSpec};
use hallcond::neass::two_pi;
use hallcond::spectral::fermi_sea;

fn main() -> hallcond::Result<()> {
    let spec = ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 });
    let lat = Lattice::new(28, 28, Boundary::Open, 2)?;
    let sea = fermi_sea(&quadratic_kernel(&spec, &lat)?, 0.0)?;
    println!("bulk gap {:.4}", sea.bulk_gap(&lat, 4));
    let opts = ConductanceOptions { increment_tol: 1e-6, window_margin: 4, edge_margin: 4 };
    let rep = hall_conductance_free(&sea, &lat, Site::new(0, 0), &opts)?;
    for p in &rep.convergence {
        println!("radius {:2}  2 pi sigma = {:+.10}  increment {:.2e}", p.radius, two_pi(p.value), p.increment);
    }
    println!("Chern number {}", chern_fhs(&spec, 64)?);
    Ok(())
}

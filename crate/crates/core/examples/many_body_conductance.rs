//! Many-body conductance on a 3x3 Hofstadter cluster, with the switch-function
//! series and its free-fermion image.

use std::sync::Arc;

use hallcond::conductance::{free_box_series, hall_conductance_mb, ConductanceOptions};
use hallcond::fock::FockSpace;
use hallcond::lattice::{Boundary, Lattice, Site};
use hallcond::models::{build_interaction, quadratic_kernel, ModelKind, ModelSpec};
use hallcond::odmap::OdContext;
use hallcond::spectral::{fermi_sea, ground_state};
use hallcond::weightfn::{build_weight, WeightParams};

fn main() -> hallcond::Result<()> {
    let spec = ModelSpec::new(ModelKind::Hofstadter { p: 1, q: 3 }).with_fermi_level(-1.0);
    let lat = Lattice::new(3, 3, Boundary::Open, 1)?;
    let space = FockSpace::new(&lat)?;
    let h = build_interaction(&spec, &space)?;
    let gs = ground_state(&h, Default::default())?;
    println!("gap {:.4}, particles {}", gs.gap, gs.particle_number);
    let w = Arc::new(build_weight(WeightParams::new(gs.gap))?);
    let ctx = OdContext::many_body(&h, w.clone(), 1e-8)?;
    let opts = ConductanceOptions { increment_tol: 1e-9, window_margin: 0, edge_margin: 0 };
    let rep = hall_conductance_mb(&ctx, Site::new(0, 0), &opts)?;
    // the same series computed from the one-body kernel
    let kernel = quadratic_kernel(&spec, &lat)?;
    let image = free_box_series(&fermi_sea(&kernel, 0.0)?, &kernel, &lat, &w, Site::new(0, 0), &opts)?;
    for (p, q) in rep.convergence.iter().zip(&image) {
        println!("radius {}  many-body {:+.6e}  one-body {:+.6e}", p.radius, p.value, q.value);
    }
    println!("global commutator {:+.3e}", rep.global.unwrap_or(f64::NAN));
    Ok(())
}

//! Conductance under a depth-2 random local circuit and under gauge
//! transformations, on a 3x3 Hofstadter cluster.

use std::sync::Arc;

use hallcond::conductance::ConductanceOptions;
use hallcond::fock::FockSpace;
use hallcond::lattice::{Boundary, Lattice, Site};
use hallcond::lga::{conductance_invariance_test, gauge_circuit, random_circuit, GateKind};
use hallcond::models::{build_interaction, ModelKind, ModelSpec};
use hallcond::odmap::OdContext;
use hallcond::spectral::ground_state;
use hallcond::weightfn::{build_weight, WeightParams};

fn main() -> hallcond::Result<()> {
    let spec = ModelSpec::new(ModelKind::Hofstadter { p: 1, q: 3 }).with_fermi_level(-1.0);
    let lat = Lattice::new(3, 3, Boundary::Open, 1)?;
    let space = FockSpace::new(&lat)?;
    let h = build_interaction(&spec, &space)?;
    let gap = ground_state(&h, Default::default())?.gap;
    let ctx = OdContext::many_body(&h, Arc::new(build_weight(WeightParams::new(gap))?), 1e-8)?;
    let opts = ConductanceOptions { increment_tol: 1e-9, window_margin: 0, edge_margin: 0 };
    let circuits =
        [("random", random_circuit(&space, 2, 0.8, GateKind::Generic, 7)?), ("gauge", gauge_circuit(&space, 7)?)];
    for (name, c) in circuits {
        let u = c.unitary()?;
        let rep = conductance_invariance_test(&ctx, &u, c.support_growth(), Site::new(0, 0), &opts, true, 1e-8)?;
        println!(
            "{name}: change {:.2e} via the automorphism, {:.2e} rebuilt",
            rep.delta_alpha,
            rep.delta_rebuilt.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

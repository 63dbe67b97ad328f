//! NEASS on a 3x2 interacting cluster: the exact perturbed ground state,
//! adiabatic switching at two rates, and one charge-pump cycle.

use hallcond::fock::FockSpace;
use hallcond::interaction::Interaction;
use hallcond::lattice::{Axis, Boundary, Lattice, Site};
use hallcond::models::{build_interaction, ModelKind, ModelSpec};
use hallcond::neass::{adiabatic_neass, charge_pump, delta_current_mb, neass_residual, perturbed_state, EvolveOptions};
use hallcond::properties::local_samples;
use hallcond::spectral::ground_state;

fn main() -> hallcond::Result<()> {
    let lat = Lattice::new(3, 2, Boundary::Open, 1)?;
    let space = FockSpace::new(&lat)?;
    let h = build_interaction(&ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 0.5, mu: 0.3 }), &space)?;
    let gs = ground_state(&h, Default::default())?;
    let (eps, origin) = (0.05, Site::new(0, 0));
    let exact = perturbed_state(&h, eps, origin.x1, Default::default())?;
    let h_eps = h.add_scaled(&Interaction::switch(&space, Axis::One, origin.x1)?, eps).total();
    let samples = local_samples(&space, 16, true, 1);
    println!("gap {:.4}", gs.gap);
    println!("exact NEASS residual {:.2e}", neass_residual(&exact.state, &h_eps, &samples)?);
    for eta in [0.1, 0.05] {
        let ev = adiabatic_neass(&h, &gs, eps, eta, origin.x1, EvolveOptions::default())?;
        let infidelity = 1.0 - ev.state.fidelity(&exact.state);
        let residual = neass_residual(&ev.state, &h_eps, &samples)?;
        let sigma = delta_current_mb(&ev.state, &gs.state, &h, origin, 10)?.value / eps;
        println!(
            "eta {eta}: infidelity {infidelity:.2e}, residual {residual:.2e}, dJ/eps {sigma:+.3e}, {} steps",
            ev.steps
        );
    }
    let cp = charge_pump(&h, &gs, eps, origin, 10, EvolveOptions::default())?;
    println!("pumped charge {:+.3e}", cp.delta_q);
    Ok(())
}

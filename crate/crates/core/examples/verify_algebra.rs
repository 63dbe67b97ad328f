//! The operator-algebra and off-diagonal property suite on a 3x2 cluster.

use std::sync::Arc;

use hallcond::fock::FockSpace;
use hallcond::lattice::{Boundary, Lattice};
use hallcond::models::{build_interaction, ModelKind, ModelSpec};
use hallcond::odmap::OdContext;
use hallcond::properties::{verify_all, SuiteOptions};
use hallcond::spectral::ground_state;
use hallcond::weightfn::{build_weight, WeightParams};

fn main() -> hallcond::Result<()> {
    let lat = Lattice::new(3, 2, Boundary::Open, 1)?;
    let space = FockSpace::new(&lat)?;
    let h = build_interaction(&ModelSpec::new(ModelKind::InteractingCluster { t: 1.0, v: 0.5, mu: 0.3 }), &space)?;
    let gap = ground_state(&h, Default::default())?.gap;
    let ctx = OdContext::many_body(&h, Arc::new(build_weight(WeightParams::new(gap))?), 1e-8)?;
    let suite = verify_all(&ctx, &SuiteOptions::default())?;
    for c in &suite.checks {
        println!(
            "{:5} {}/{}  {:.2e} (tol {:.0e})",
            if c.pass { "ok" } else { "FAIL" },
            c.group,
            c.name,
            c.value,
            c.tol
        );
    }
    for (group, pass) in &suite.matrix {
        println!("{group}: {}", if *pass { "PASS" } else { "FAIL" });
    }
    Ok(())
}

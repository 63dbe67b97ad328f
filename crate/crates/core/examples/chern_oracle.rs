//! Chern numbers from the momentum-space lattice oracle.

use hallcond::conductance::chern_fhs_report;
use hallcond::models::{ModelKind, ModelSpec};

fn main() -> hallcond::Result<()> {
    let models = [
        ModelSpec::new(ModelKind::QiWuZhang { u: -3.0 }),
        ModelSpec::new(ModelKind::QiWuZhang { u: -1.0 }),
        ModelSpec::new(ModelKind::QiWuZhang { u: 1.0 }),
        ModelSpec::new(ModelKind::QiWuZhang { u: 3.0 }),
        ModelSpec::new(ModelKind::Haldane { t1: 1.0, t2: 0.2, phi: std::f64::consts::FRAC_PI_2, m: 0.0 }),
    ];
    for spec in &models {
        let c = chern_fhs_report(spec, 64)?;
        println!(
            "{:?}: C = {} (raw {:.6}, refined {:.6}, min gap {:.4})",
            spec.kind, c.chern, c.raw, c.raw_refined, c.min_gap
        );
    }
    Ok(())
}

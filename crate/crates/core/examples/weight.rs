//! The weight function W for gap g: samples, Fourier constraint and filter.

use hallcond::weightfn::{build_weight, verify_weight, WeightParams};

fn main() -> hallcond::Result<()> {
    let g = 1.0;
    let w = build_weight(WeightParams::new(g))?;
    for s in [0.01, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        println!("W({s:5.2}) = {:+.6e}", w.value(s));
    }
    for d in [0.0, 0.25, 0.5, 0.9, 1.0, 2.0, 40.0] {
        println!("phi({d:5.2}) = {:.8}  quadrature {:.8}", w.phi(d * g), w.phi_quad(d * g));
    }
    let ks: Vec<f64> = (1..=40).flat_map(|i| [0.25 * g * i as f64, -0.25 * g * i as f64]).collect();
    for item in verify_weight(&w, &ks, 1e-6).items {
        println!("{:5} {} = {:.2e}", if item.pass { "ok" } else { "FAIL" }, item.name, item.value);
    }
    Ok(())
}

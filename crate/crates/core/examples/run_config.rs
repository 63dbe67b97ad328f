//! Runs an experiment from a TOML configuration and writes its report,
//! tables and plots, as the `hallcond` binary does.
//!
//! `cargo run --example run_config -- configs/weight.toml weight out/`

use clap::ValueEnum;
use hallcond::config::{Experiment, RunConfig};

fn main() -> hallcond::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let path = args.get(1).map_or("configs/weight.toml", String::as_str);
    let name = args.get(2).map_or("weight", String::as_str);
    let experiment = Experiment::from_str(name, true).expect("experiment name");
    let mut cfg = RunConfig::load(std::path::Path::new(path))?;
    if let Some(dir) = args.get(3) {
        cfg.output.dir = dir.into();
    }
    let artifacts = hallcond::run::run(&cfg, experiment)?;
    for path in artifacts.write(&cfg.output.dir, cfg.output.plots)? {
        println!("wrote {}", path.display());
    }
    for c in &artifacts.report.checks {
        println!("{} {} {:.3e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use hallcond::config::{Experiment, RunConfig};
use hallcond::run::{exit_code, run};

/// Hall conductance experiments on lattice fermion models.
///
/// Exit status: 0 when every acceptance check passes, 1 when one fails,
/// 2 on any error.
#[derive(Parser, Debug)]
#[command(name = "hallcond", version)]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "HALLCOND_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let mut cfg = RunConfig::load(&cli.config).map_err(|e| e.to_string())?;
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    let start = Instant::now();
    let result = run(&cfg, cli.experiment);
    let code = exit_code(&result);
    let artifacts = result.map_err(|e| e.to_string())?;
    let dir = cfg.output.dir.clone();
    artifacts.write(&dir, cfg.output.plots).map_err(|e| e.to_string())?;
    // wall-clock data stays out of the deterministic report
    let timing = serde_json::json!({
        "experiment": cli.experiment.name(),
        "seconds": start.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    std::fs::write(dir.join(format!("{}.timing.json", cli.experiment.name())), timing.to_string() + "\n")
        .map_err(|e| e.to_string())?;
    for c in &artifacts.report.checks {
        println!("{} {} value={:e} tol={:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tol);
    }
    println!("{}: {}", cli.experiment.name(), if artifacts.report.pass { "PASS" } else { "FAIL" });
    Ok(code as u8)
}

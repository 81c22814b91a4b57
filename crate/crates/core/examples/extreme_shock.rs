//! Two identical agents, one forced through an unemployment spell. Writes
//! the consumption and MPC curves with SVG figures to `out/examples/`.
//!
//! ```bash
//! cargo run --release -p td-consumption --example extreme_shock
//! ```

use std::path::Path;

use td_consumption::cli::load_or_pretrain;
use td_consumption::config::RunConfig;
use td_consumption::rational::solve_default;
use td_consumption::sim::output::write_experiment;
use td_consumption::sim::{extreme_shock_experiment, ShockOptions};

fn main() -> td_consumption::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = RunConfig::default();
    let model = load_or_pretrain(&cfg, Path::new("out"), None)?;
    let sol = solve_default(&cfg.params)?;

    let res = extreme_shock_experiment(&cfg.params, &cfg.scf(), &model, &sol, &ShockOptions::default())?;
    for (k, v) in &res.scalars {
        println!("{k:<40} {v:.4}");
    }
    write_experiment(Path::new("out/examples"), "extreme", &res)?;
    println!("curves and figures in out/examples/");
    Ok(())
}

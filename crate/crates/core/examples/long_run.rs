//! One learning agent over a long horizon: distance of its policy from the
//! rational one, period by period.
//!
//! ```bash
//! cargo run --release -p td-consumption --example long_run
//! ```

use std::path::Path;

use td_consumption::cli::load_or_pretrain;
use td_consumption::config::RunConfig;
use td_consumption::rational::solve_default;
use td_consumption::sim::long_run_run;

fn main() -> td_consumption::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = RunConfig::default();
    let model = load_or_pretrain(&cfg, Path::new("out"), None)?;
    let sol = solve_default(&cfg.params)?;
    let mut p = cfg.params.clone();
    p.n_periods = 120;

    let res = long_run_run(&p, &cfg.scf(), &model, &sol, 1, false)?;
    let curve = res.curve("smoothed", "distance", None, p.n_periods).expect("distance curve");
    for (t, d) in curve.x.iter().zip(&curve.y).step_by(10) {
        println!("t = {t:>4}: {d:.4} {}", "#".repeat((d * 100.0) as usize));
    }
    Ok(())
}

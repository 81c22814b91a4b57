//! Populations of learning agents: MPCs of the low- and high-liquidity halves
//! measured a few periods after classification, pooled over seeds.
//!
//! Reuses `out/checkpoint.txt` when present, otherwise pretrains into `out/`.
//!
//! ```bash
//! cargo run --release -p td-consumption --example mpc_by_liquidity
//! ```

use std::path::Path;

use td_consumption::analytics::mpc_table;
use td_consumption::cli::load_or_pretrain;
use td_consumption::config::RunConfig;
use td_consumption::sim::{mpc_experiment, run_population, PopulationOptions};

fn main() -> td_consumption::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = RunConfig::default();
    let model = load_or_pretrain(&cfg, Path::new("out"), None)?;
    let opts = PopulationOptions {
        record_mpc: true,
        ..Default::default()
    };

    let mut results = Vec::new();
    for seed in 1..=5 {
        let run = run_population(&cfg.params, &cfg.scf(), &model, seed, &opts)?;
        for c in [0, 10, 30] {
            results.push(mpc_experiment(&run, c)?);
        }
    }
    for row in mpc_table(&results) {
        match &row.welch {
            Some(w) => println!(
                "classified at {:>2}: low {:.3}, high {:.3}, difference {:+.3} (t {:.2}, p {:.3})",
                row.classify_at, row.seed_mean_low, row.seed_mean_high, w.mean_difference, w.t, w.p_value
            ),
            None => println!("classified at {:>2}: {}", row.classify_at, row.note.unwrap_or_default()),
        }
    }
    Ok(())
}

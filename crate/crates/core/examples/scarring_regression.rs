//! Regress consumption on the unemployment-experience index, with and without
//! assets as a control, on one simulated panel.
//!
//! ```bash
//! cargo run --release -p td-consumption --example scarring_regression
//! ```

use std::path::Path;

use td_consumption::analytics::{scarring_regression, ScarringOptions};
use td_consumption::cli::load_or_pretrain;
use td_consumption::config::RunConfig;
use td_consumption::sim::{run_population, PopulationOptions};

fn main() -> td_consumption::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = RunConfig::default();
    let model = load_or_pretrain(&cfg, Path::new("out"), None)?;
    let run = run_population(&cfg.params, &cfg.scf(), &model, 1, &PopulationOptions::default())?;

    let (without, with) = scarring_regression(&run.panel, &cfg.params, &ScarringOptions::default())?;
    for (label, fit) in [("without assets", &without), ("with assets", &with)] {
        println!("{label} (n = {}, R^2 {:.3})", fit.n_observations, fit.r_squared);
        for (k, name) in fit.names.iter().enumerate() {
            println!(
                "  {name:<10} {:+.4} (se {:.4}, p {:.3})",
                fit.coefficients[k], fit.std_errors[k], fit.p_values[k]
            );
        }
    }
    Ok(())
}

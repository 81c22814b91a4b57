//! Solve the rational benchmark and fit the ReLU network to its expected
//! value function, printing the fit diagnostics.
//!
//! ```bash
//! cargo run --release -p td-consumption --example pretrain_network
//! ```

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use td_consumption::model::ModelParams;
use td_consumption::neural::{pretrain, PretrainConfig};
use td_consumption::rational::solve_default;
use td_consumption::sim::policy_distance;
use td_consumption::LearningAgent;

fn main() -> td_consumption::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let p = ModelParams::default().validate()?;
    let sol = solve_default(&p)?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let t0 = Instant::now();
    let rep = pretrain(&sol, &p, &PretrainConfig::default(), &mut rng)?;
    println!(
        "{} epochs in {:.1?}, held-out max error {:.3e}",
        rep.epochs,
        t0.elapsed(),
        rep.heldout_max_error
    );

    let agent = LearningAgent::new(rep.model.clone(), &p);
    println!(
        "sup distance to the rational consumption policy: raw {:.4}, smoothed {:.4}",
        policy_distance(&agent, &p, &sol, false)?,
        policy_distance(&agent, &p, &sol, true)?
    );
    Ok(())
}

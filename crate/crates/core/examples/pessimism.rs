//! Rational policies when the agent overstates the odds of losing and of
//! staying out of work.
//!
//! ```bash
//! cargo run --release -p td-consumption --example pessimism
//! ```

use std::path::Path;

use td_consumption::model::ModelParams;
use td_consumption::sim::output::write_experiment;
use td_consumption::sim::pessimism_experiment;

fn main() -> td_consumption::Result<()> {
    let p = ModelParams::default().validate()?;
    for factor in [1.5, 2.0, 3.0] {
        let res = pessimism_experiment(&p, factor)?;
        println!(
            "factor {factor}: max consumption excess {:.2e}, max MPC excess {:.2e} ({:.2e} where savings stay below a_max)",
            res.scalars["max_excess_consumption_employed"].max(res.scalars["max_excess_consumption_unemployed"]),
            res.scalars["max_excess_mpc_employed"].max(res.scalars["max_excess_mpc_unemployed"]),
            res.scalars["max_excess_mpc_uncapped_employed"].max(res.scalars["max_excess_mpc_uncapped_unemployed"]),
        );
        if factor == 2.0 {
            write_experiment(Path::new("out/examples"), "pessimism", &res)?;
        }
    }
    Ok(())
}

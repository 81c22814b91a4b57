//! Full-information benchmark: value iteration on the asset grid, then the
//! consumption policy and MPC at a few asset levels.
//!
//! ```bash
//! cargo run --release -p td-consumption --example rational_benchmark
//! ```

use std::time::Instant;

use td_consumption::model::ModelParams;
use td_consumption::rational::solve_default;
use td_consumption::IncomeState;

fn main() -> td_consumption::Result<()> {
    let p = ModelParams::default().validate()?;
    let t0 = Instant::now();
    let sol = solve_default(&p)?;
    println!(
        "converged in {} iterations ({:.2?}), Bellman residual {:.2e}",
        sol.iterations,
        t0.elapsed(),
        sol.bellman_residual()
    );

    println!("{:>6} {:>10} {:>10} {:>8} {:>8}", "a", "c(e)", "c(u)", "mpc(e)", "mpc(u)");
    for a in [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let (e, u) = (IncomeState::Employed, IncomeState::Unemployed);
        println!(
            "{a:>6.2} {:>10.4} {:>10.4} {:>8.3} {:>8.3}",
            sol.consumption(a, e),
            sol.consumption(a, u),
            sol.mpc(a, e, p.transfer),
            sol.mpc(a, u, p.transfer)
        );
    }
    Ok(())
}

//! Run the variable-speed walk, build its clock and cut it into blocks.
//!
//! ```text
//! cargo run --release --example trajectory_clock
//! ```

use trapclock::chains::{run, ChainKind, TrajectoryConfig};
use trapclock::clock::{block_series, blocked_clock, build_clock, ledger_clock, rescale, ScaleSet, ThetaPolicy};
use trapclock::env::{EnvConfig, Environment};

fn main() -> trapclock::Result<()> {
    let env = Environment::new(EnvConfig::new(2, 0.5, 0.0, 5))?;
    let scales = ScaleSet::batm(100_000, 0.5, 2, ThetaPolicy::default())?;
    println!(
        "n = 1e5: c_n = {:.1}, a_n = {:.1}, theta_n = {:.2}, k_n(1) = {}",
        scales.c_n,
        scales.a_n,
        scales.theta_n,
        scales.k_n(1.0)
    );

    let horizon = (2.0 * scales.a_n).ceil() + 1.0;
    let traj = run(&env, &TrajectoryConfig::new(11, ChainKind::Continuous, env.origin(), horizon))?;
    let clock = build_clock(&traj);
    println!(
        "{} sojourns, {} distinct sites, clock S({horizon:.0}) = {:.4e}",
        traj.events(),
        traj.ledger.len(),
        clock.final_value()
    );
    println!("ledger sum of local time x tau = {:.4e}", ledger_clock(&env, &traj));

    let series = block_series(&clock, &scales, 2.0)?;
    println!("{:>6} {:>14} {:>14}", "t", "S_n(t)", "blocked");
    for t in [0.25, 0.5, 1.0, 1.5, 2.0] {
        println!("{t:>6} {:>14.6} {:>14.6}", rescale(&clock, &scales, t)?, blocked_clock(&series, t)?);
    }
    Ok(())
}

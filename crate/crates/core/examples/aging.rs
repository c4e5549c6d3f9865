//! Two-time correlation functions of the trap model against the arcsine law.
//!
//! ```text
//! cargo run --release --example aging
//! ```

use trapclock::aging::{estimate_batm, estimate_ceps_fk, AgingSpec, FkAgingSpec};
use trapclock::clock::ThetaPolicy;
use trapclock::dynamics::{Disorder, TrapEnsemble};
use trapclock::env::{EnvConfig, Site};

fn main() -> trapclock::Result<()> {
    let cfg = EnvConfig::new(2, 0.5, 0.0, 31);
    let ens = TrapEnsemble::new(cfg, Disorder::Annealed)?;
    let mut spec = AgingSpec::batm(&cfg, 1e4, vec![0.5, 1.0, 3.0], ThetaPolicy::default())?;
    spec.n_env = 60;
    spec.n_traj = 20;
    spec.eps = vec![0.05];
    let result = estimate_batm(&ens, Site::origin(2), &spec)?;
    println!("s = 1e4, {} x {} trajectories", spec.n_env, spec.n_traj);
    for p in &result.points {
        println!(
            "{:>10} rho = {:<4} {:.4} +- {:.4}   arcsine {:.4}",
            p.kind.to_string(),
            p.rho,
            p.estimate,
            p.std_error,
            p.arcsine_target
        );
    }

    let fk = estimate_ceps_fk(&FkAgingSpec::new(0.5, 2, vec![1.0], vec![0.05], 4000, 9))?;
    for p in &fk {
        println!(
            "fractional kinetics eps = {}: {:.4} +- {:.4} (level {}, converged {})",
            p.point.eps.unwrap(),
            p.point.estimate,
            p.point.std_error,
            p.level,
            p.converged
        );
    }
    Ok(())
}

//! Estimate the block functionals and return sums on a trap landscape.
//!
//! ```text
//! cargo run --release --example conditions
//! ```

use trapclock::chains::ChainKind;
use trapclock::clock::{ScaleSet, ThetaPolicy};
use trapclock::dynamics::Annealed;
use trapclock::env::{EnvConfig, Site};
use trapclock::estimators::ConditionEstimator;
use trapclock::stats::log_log_slope;

fn main() -> trapclock::Result<()> {
    let ens = Annealed::new(EnvConfig::new(2, 0.5, 0.0, 3))?;
    let scales = ScaleSet::batm(10_000, 0.5, 2, ThetaPolicy::default())?;
    let o = Site::origin(2);
    let est = ConditionEstimator::new(&ens, ChainKind::Continuous, scales, o, 17);

    let us = [0.25, 0.5, 1.0, 2.0, 4.0];
    let f = est.block_functionals(1.0, &us, &[0.1, 0.4], 4000)?;
    for e in f.nu.iter().chain(&f.sigma).chain(&f.m) {
        println!("{:>8} u/eps = {:<5} {:.5} +- {:.5}", e.name.to_string(), e.u.or(e.eps).unwrap(), e.value, e.std_error);
    }
    let nu: Vec<f64> = f.nu.iter().map(|e| e.value).collect();
    println!("tail slope of nu in u: {:.3} (alpha = 0.5)", log_log_slope(&us, &nu).slope);

    let pi = est.pi_t(1.0, 4000, 2.0)?;
    println!("pi(origin) = {:.4}, mass outside radius 2 = {:.4}", pi.get(&o).unwrap().0, pi.remainder.0);

    let rs = est.return_sum(o, 1.0, 2000)?;
    println!("return sum over {} blocks: {:.4} +- {:.4}", rs.partial.len(), rs.total.value, rs.total.std_error);
    Ok(())
}

//! Build a trap landscape and look at its depths and rates.
//!
//! ```text
//! cargo run --example environment
//! ```

use trapclock::env::{EnvConfig, Environment, Site};

fn main() -> trapclock::Result<()> {
    let env = Environment::new(EnvConfig::new(2, 0.5, 0.3, 2024))?;
    let o = env.origin();
    println!("tau(origin) = {:.4}", env.tau_at(&o));
    for y in o.neighbors() {
        println!(
            "  {y}: tau = {:>10.4}  lambda(o,y) = {:.4e}  vsrw(o,y) = {:.4e}",
            env.tau_at(&y),
            env.edge_rate(&o, &y),
            env.vsrw_rate(&o, &y)
        );
    }

    // the deepest trap in a 41 x 41 box
    let mut deepest = (o, 0.0);
    for i in -20..=20 {
        for j in -20..=20 {
            let x = Site::new(&[i, j]);
            let t = env.tau_at(&x);
            if t > deepest.1 {
                deepest = (x, t);
            }
        }
    }
    println!("deepest trap within radius 20: {} with tau = {:.3e}", deepest.0, deepest.1);

    // depths are heavy tailed: P(tau > u) = u^-alpha
    let n = 100_000;
    let above = (0..n).filter(|&i| env.tau_at(&Site::new(&[i, 7])) > 100.0).count();
    println!("P(tau > 100) = {:.4} (exact 0.1)", above as f64 / n as f64);
    Ok(())
}

//! Sample the stable subordinator and compare overshoots with the arcsine law.
//!
//! ```text
//! cargo run --release --example subordinator
//! ```

use trapclock::limits::{arcsine_target, Subordinator, DEFAULT_TOLERANCE};
use trapclock::rng::{mix_pair, stream, Stream};

fn main() -> trapclock::Result<()> {
    let n = 20_000u64;
    println!("{:>5} {:>5} {:>10} {:>10}", "alpha", "rho", "empirical", "arcsine");
    for alpha in [0.3, 0.5, 0.8] {
        let sub = Subordinator::with_tolerance(alpha, DEFAULT_TOLERANCE)?;
        let chi: Vec<f64> = (0..n)
            .map(|i| sub.sample_overshoot(1.0, &mut stream(mix_pair(3, i), Stream::Subordinator)))
            .collect();
        for rho in [0.5, 1.0, 3.0] {
            let p = chi.iter().filter(|&&c| c >= rho).count() as f64 / n as f64;
            println!("{alpha:>5} {rho:>5} {p:>10.4} {:>10.4}", arcsine_target(alpha, rho)?);
        }
    }

    let sub = Subordinator::with_tolerance(0.5, DEFAULT_TOLERANCE)?;
    let path = sub.sample_path(1.0, &mut stream(7, Stream::Subordinator))?;
    let biggest = path.jump_sizes.iter().cloned().fold(0.0, f64::max);
    println!(
        "\none path on [0,1]: {} jumps above {:.2e}, V(1) = {:.4}, largest jump {:.4}",
        path.jump_times.len(),
        path.small_jump_cutoff,
        path.value_at(1.0),
        biggest
    );
    Ok(())
}

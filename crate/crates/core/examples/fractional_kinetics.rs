//! Brownian motion run on the inverse subordinator clock.
//!
//! ```text
//! cargo run --release --example fractional_kinetics
//! ```

use trapclock::limits::{mean_inverse, sample_fk, Subordinator, DEFAULT_TOLERANCE};
use trapclock::rng::{mix_pair, stream, Stream};
use trapclock::stats::{log_log_slope, Moments};

fn main() -> trapclock::Result<()> {
    let (alpha, d) = (0.6, 2);
    let sub = Subordinator::with_tolerance(alpha, DEFAULT_TOLERANCE)?;
    let times = [1.0, 3.0, 10.0, 30.0, 100.0];
    let mut msd = vec![Moments::default(); times.len()];
    for i in 0..5000u64 {
        let seed = mix_pair(21, i);
        let z = sample_fk(&sub, d, &times, &mut stream(seed, Stream::Subordinator), &mut stream(seed, Stream::Brownian))?;
        let offset = z.times.len() - times.len();
        for (k, m) in msd.iter_mut().enumerate() {
            m.push(z.squared_norm(k + offset));
        }
    }
    println!("{:>6} {:>10} {:>10}", "t", "E|Z|^2", "theory");
    for (t, m) in times.iter().zip(&msd) {
        println!("{t:>6} {:>10.3} {:>10.3}", m.mean(), d as f64 * mean_inverse(alpha, *t));
    }
    let means: Vec<f64> = msd.iter().map(|m| m.mean()).collect();
    println!("slope {:.3} (alpha = {alpha})", log_log_slope(&times, &means).slope);
    Ok(())
}

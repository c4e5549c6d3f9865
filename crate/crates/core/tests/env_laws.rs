use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trapclock::chains::jump_distribution;
use trapclock::env::{EnvConfig, Environment, Site};
use trapclock::stats::binomial_se;

fn random_site(rng: &mut ChaCha8Rng, d: usize) -> Site {
    let coords: Vec<i32> = (0..d).map(|_| rng.random_range(-100_000..=100_000)).collect();
    Site::new(&coords)
}

#[test]
fn pareto_tail_fraction() {
    let env = Environment::new(EnvConfig::new(2, 0.5, 0.0, 8)).unwrap();
    let n = 1_000_000u64;
    let mut above = 0u64;
    for i in 0..1000 {
        for j in 0..1000 {
            if env.tau_at(&Site::new(&[i, j])) > 100.0 {
                above += 1;
            }
        }
    }
    let p = 0.1;
    let frac = above as f64 / n as f64;
    assert!((frac - p).abs() <= 3.0 * binomial_se(p, n), "fraction {frac}");
}

#[test]
fn vsrw_rate_is_tau_times_jump_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..10_000u64 {
        let d = 1 + (k % 4) as usize;
        let env = Environment::new(EnvConfig::new(d, 0.6, (k % 5) as f64 / 4.0, k / 100)).unwrap();
        let x = random_site(&mut rng, d);
        let y = x.step(rng.random_range(0..2 * d));
        let lhs = env.vsrw_rate(&x, &y);
        let rhs = env.tau_at(&x) * env.edge_rate(&x, &y);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs, "{x} -> {y}: {lhs} vs {rhs}");
    }
}

#[test]
fn both_rate_families_give_the_same_jump_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let env = Environment::new(EnvConfig::new(3, 0.4, 0.7, 12)).unwrap();
    for _ in 0..1000 {
        let x = random_site(&mut rng, 3);
        let ys: Vec<Site> = x.neighbors().collect();
        let total: f64 = ys.iter().map(|y| env.edge_rate(&x, y)).sum();
        for (y, p) in jump_distribution(&env, &x) {
            let q = env.edge_rate(&x, &y) / total;
            assert!((p - q).abs() <= 1e-12, "{x} -> {y}: {p} vs {q}");
        }
    }
}

#[test]
fn c_bar_scales_every_trap() {
    let base = EnvConfig::new(2, 0.3, 0.0, 5);
    let scaled = EnvConfig { c_bar: 2.5, ..base };
    let (a, b) = (Environment::new(base).unwrap(), Environment::new(scaled).unwrap());
    for i in -50..50 {
        let x = Site::new(&[i, 3 * i + 1]);
        assert!((b.tau_at(&x) - 2.5 * a.tau_at(&x)).abs() <= 1e-15 * b.tau_at(&x));
    }
}

proptest! {
    #[test]
    fn detailed_balance(
        seed in any::<u64>(),
        alpha in 0.05f64..0.95,
        theta in 0.0f64..=1.0,
        d in 1usize..=4,
        coords in prop::collection::vec(-1_000_000i32..1_000_000, 4),
        dir in 0usize..8,
    ) {
        let env = Environment::new(EnvConfig::new(d, alpha, theta, seed)).unwrap();
        let x = Site::new(&coords[..d]);
        let y = x.step(dir % (2 * d));
        let lhs = env.tau_at(&x) * env.edge_rate(&x, &y);
        let rhs = env.tau_at(&y) * env.edge_rate(&y, &x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
        prop_assert_eq!(env.vsrw_rate(&x, &y), env.vsrw_rate(&y, &x));
    }

    #[test]
    fn traps_are_reproducible_and_above_cutoff(
        seed in any::<u64>(),
        alpha in 0.05f64..0.95,
        coords in prop::collection::vec(any::<i32>(), 3),
    ) {
        let cfg = EnvConfig::new(3, alpha, 0.0, seed);
        let x = Site::new(&coords);
        let t1 = Environment::new(cfg).unwrap().tau_at(&x);
        let t2 = Environment::new(cfg).unwrap().tau_at(&x);
        prop_assert_eq!(t1, t2);
        prop_assert!(t1 >= 1.0 && t1.is_finite());
        let u = Environment::new(cfg).unwrap().uniform_at(&x);
        prop_assert!(u > 0.0 && u < 1.0);
    }
}

//! Heavy-tailed trap landscape on `Z^d`.
//!
//! The landscape is never stored. `τ(x)` is recomputed on demand from
//! `(env_seed, x)`:
//!
//! ```text
//! h_0     = env_seed
//! h_{i+1} = mix_pair(h_i, x_i as u64)      for each coordinate x_1..x_d
//! U(x)    = ((h_d >> 12) + 0.5) / 2^52     in (0, 1)
//! τ(x)    = c_bar * U(x)^(-1/α)
//! ```
//!
//! so `P(τ > u) = (u / c_bar)^(-α)` for `u > c_bar` and `τ > c_bar` always.
//! Coordinates are sign-extended to 64 bits before mixing.

use crate::error::{invalid, Result};
use crate::rng::{mix_pair, open_unit};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest lattice dimension supported by [`Site`].
pub const MAX_DIM: usize = 8;

/// A point of `Z^d`. Unused trailing coordinates are always zero, so derived
/// equality, hashing and ordering only see the active ones.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Site {
    pub fn origin(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension {d} unsupported");
        Site {
            dim: d as u8,
            coords: [0; MAX_DIM],
        }
    }

    pub fn new(coords: &[i32]) -> Self {
        let mut s = Site::origin(coords.len());
        s.coords[..coords.len()].copy_from_slice(coords);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim()]
    }

    /// Neighbour in direction `k` in `0..2d`: axis `k / 2`, `+1` for even `k`.
    #[inline]
    pub fn step(&self, k: usize) -> Site {
        let mut s = *self;
        let axis = k / 2;
        debug_assert!(axis < self.dim());
        s.coords[axis] += if k.is_multiple_of(2) { 1 } else { -1 };
        s
    }

    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..2 * self.dim()).map(move |k| self.step(k))
    }

    pub fn l1_distance(&self, other: &Site) -> u64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (i64::from(*a) - i64::from(*b)).unsigned_abs())
            .sum()
    }

    pub fn euclidean_distance(&self, other: &Site) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| {
                let d = f64::from(*a) - f64::from(*b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_neighbor(&self, other: &Site) -> bool {
        self.dim == other.dim && self.l1_distance(other) == 1
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Site{:?}", self.coords())
    }
}

/// Coordinates joined by `;`, the CSV cell format.
impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Parameters of the trap landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub d: usize,
    pub alpha: f64,
    pub theta: f64,
    #[serde(default = "default_c_bar")]
    pub c_bar: f64,
    #[serde(default)]
    pub env_seed: u64,
}

fn default_c_bar() -> f64 {
    1.0
}

impl EnvConfig {
    pub fn new(d: usize, alpha: f64, theta: f64, env_seed: u64) -> Self {
        EnvConfig {
            d,
            alpha,
            theta,
            c_bar: 1.0,
            env_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.d) {
            return Err(invalid("d", format!("need 1 <= d <= {MAX_DIM}, got {}", self.d)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("need 0 < alpha < 1, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(invalid("theta", format!("need 0 <= theta <= 1, got {}", self.theta)));
        }
        if !(self.c_bar > 0.0 && self.c_bar.is_finite()) {
            return Err(invalid("c_bar", format!("need c_bar > 0, got {}", self.c_bar)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, env_seed: u64) -> Self {
        self.env_seed = env_seed;
        self
    }
}

/// A realised trap landscape: the trap model on `Z^d` with jump rates
/// `λ(x,y) = τ(x)^(θ-1) τ(y)^θ` and its variable-speed walk with symmetric
/// rates `λ̃(x,y) = (τ(x) τ(y))^θ`.
#[derive(Debug, Clone, Copy)]
pub struct Environment {
    cfg: EnvConfig,
    neg_inv_alpha: f64,
}

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Environment {
            cfg,
            neg_inv_alpha: -1.0 / cfg.alpha,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.d
    }

    pub fn origin(&self) -> Site {
        Site::origin(self.cfg.d)
    }

    /// The pseudo-random uniform `U(x)` behind `τ(x)`.
    #[inline]
    pub fn uniform_at(&self, x: &Site) -> f64 {
        assert_eq!(x.dim(), self.cfg.d, "site dimension does not match environment");
        let h = x
            .coords()
            .iter()
            .fold(self.cfg.env_seed, |h, &c| mix_pair(h, i64::from(c) as u64));
        open_unit(h)
    }

    /// Trap depth `τ(x)`.
    #[inline]
    pub fn tau_at(&self, x: &Site) -> f64 {
        self.cfg.c_bar * self.uniform_at(x).powf(self.neg_inv_alpha)
    }

    /// `λ(x,y) = τ(x)^(θ-1) τ(y)^θ` for nearest neighbours.
    pub fn edge_rate(&self, x: &Site, y: &Site) -> f64 {
        assert!(x.is_neighbor(y), "{x:?} and {y:?} are not neighbours");
        let theta = self.cfg.theta;
        self.tau_at(x).powf(theta - 1.0) * self.tau_at(y).powf(theta)
    }

    /// `λ̃(x,y) = (τ(x) τ(y))^θ`, evaluated in lexicographic argument order so
    /// that it is exactly symmetric.
    pub fn vsrw_rate(&self, x: &Site, y: &Site) -> f64 {
        assert!(x.is_neighbor(y), "{x:?} and {y:?} are not neighbours");
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        self.vsrw_rate_unchecked(self.tau_at(a), self.tau_at(b))
    }

    #[inline]
    fn vsrw_rate_unchecked(&self, tau_a: f64, tau_b: f64) -> f64 {
        if self.cfg.theta == 0.0 {
            1.0
        } else {
            (tau_a * tau_b).powf(self.cfg.theta)
        }
    }

    /// Whether `x` is a large trap at scale `eps`:
    /// `τ(x)/c_n > eps` and every neighbour has `τ <= eps^(-2/α)`.
    pub fn is_large_trap(&self, x: &Site, c_n: f64, eps: f64) -> bool {
        if self.tau_at(x) / c_n <= eps {
            return false;
        }
        let cap = eps.powf(-2.0 / self.cfg.alpha);
        x.neighbors().all(|y| self.tau_at(&y) <= cap)
    }
}

impl crate::dynamics::Dynamics for Environment {
    type State = Site;

    #[inline]
    fn vsrw_rates(&self, x: &Site, out: &mut Vec<(Site, f64)>) {
        out.clear();
        if self.cfg.theta == 0.0 {
            out.extend(x.neighbors().map(|y| (y, 1.0)));
        } else {
            let tx = self.tau_at(x);
            for y in x.neighbors() {
                let ty = self.tau_at(&y);
                let r = if *x <= y {
                    self.vsrw_rate_unchecked(tx, ty)
                } else {
                    self.vsrw_rate_unchecked(ty, tx)
                };
                out.push((y, r));
            }
        }
    }

    #[inline]
    fn clock_weight(&self, x: &Site) -> f64 {
        self.tau_at(x)
    }

    fn distance(&self, x: &Site, y: &Site) -> f64 {
        x.euclidean_distance(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::mix64;
    use crate::stats::EmpiricalCdf;

    fn env(alpha: f64, theta: f64, seed: u64) -> Environment {
        Environment::new(EnvConfig::new(2, alpha, theta, seed)).unwrap()
    }

    #[test]
    fn inverse_cdf_arithmetic() {
        // U = 0.25, α = 0.5, c_bar = 1 → τ = 16
        let u: f64 = 0.25;
        assert_eq!(u.powf(-1.0 / 0.5), 16.0);
    }

    #[test]
    fn tau_is_deterministic_and_above_cutoff() {
        let e = env(0.5, 0.3, 11);
        for i in -20..20 {
            for j in -20..20 {
                let x = Site::new(&[i, j]);
                let t = e.tau_at(&x);
                assert!(t > 1.0);
                assert_eq!(t.to_bits(), e.tau_at(&x).to_bits());
            }
        }
    }

    #[test]
    fn rate_examples() {
        // θ = 0: λ(x,y) = 1/τ(x)
        let e = env(0.5, 0.0, 3);
        let x = Site::new(&[4, -2]);
        for y in x.neighbors() {
            assert!((e.edge_rate(&x, &y) - 1.0 / e.tau_at(&x)).abs() < 1e-15);
            assert_eq!(e.vsrw_rate(&x, &y), 1.0);
        }
        // direct formula with τ(x) = 2, τ(y) = 3, θ = 0.5
        let (tx, ty, th) = (2.0_f64, 3.0_f64, 0.5);
        let lam_xy = tx.powf(th - 1.0) * ty.powf(th);
        let lam_yx = ty.powf(th - 1.0) * tx.powf(th);
        assert!((lam_xy - 1.224_744_871).abs() < 1e-9);
        assert!((tx * lam_xy - 6f64.sqrt()).abs() < 1e-12);
        assert!((ty * lam_yx - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vsrw_rate_is_tau_times_edge_rate() {
        let mut worst = 0.0_f64;
        for k in 0..10_000u64 {
            let e = env(0.3 + 0.5 * (k % 3) as f64 / 2.0, (k % 5) as f64 / 4.0, mix64(k));
            let h = mix64(k ^ 0xabc);
            let x = Site::new(&[(h % 1000) as i32 - 500, ((h >> 20) % 1000) as i32 - 500]);
            let y = x.step((h >> 40) as usize % 4);
            let lhs = e.vsrw_rate(&x, &y);
            let rhs = e.tau_at(&x) * e.edge_rate(&x, &y);
            worst = worst.max((lhs - rhs).abs() / lhs);
            assert_eq!(lhs, e.vsrw_rate(&y, &x));
        }
        assert!(worst <= 1e-12, "worst relative deviation {worst}");
    }

    #[test]
    #[should_panic(expected = "not neighbours")]
    fn non_neighbour_is_rejected() {
        let e = env(0.5, 0.5, 1);
        e.edge_rate(&Site::new(&[0, 0]), &Site::new(&[1, 1]));
    }

    #[test]
    #[should_panic(expected = "dimension")]
    fn dimension_mismatch_is_rejected() {
        env(0.5, 0.5, 1).tau_at(&Site::new(&[0, 0, 0]));
    }

    #[test]
    fn log_tau_is_exponential() {
        // log(τ/c_bar) ~ Exponential(α)
        let alpha = 0.5;
        let e = env(alpha, 0.0, 99);
        let samples: Vec<f64> = (0..100_000)
            .map(|i| e.tau_at(&Site::new(&[i % 317, i / 317])).ln())
            .collect();
        let d = EmpiricalCdf::new(samples).ks_distance(|z| 1.0 - (-alpha * z).exp());
        assert!(d <= 0.01, "KS distance {d}");
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig::new(2, 1.0, 0.0, 0).validate().is_err());
        assert!(EnvConfig::new(2, 0.5, 1.5, 0).validate().is_err());
        assert!(EnvConfig::new(0, 0.5, 0.5, 0).validate().is_err());
        assert!(EnvConfig::new(3, 0.5, 1.0, 0).validate().is_ok());
    }
}

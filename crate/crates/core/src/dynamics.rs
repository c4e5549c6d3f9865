//! The abstraction every simulator and estimator works against: a chain `J`
//! given by its variable-speed jump rates, together with the clock weight
//! `λ̃(x)/λ(x)` that turns time spent by `J` into time spent by `X`.
//!
//! [`Environment`](crate::env::Environment) is the trap model on `Z^d`;
//! [`FiniteChain`] is a small explicit chain used for exact cross-checks.

use crate::env::{EnvConfig, Environment};
use crate::rng::mix_pair;
use serde::{Deserialize, Serialize};
use std::fmt::{Debug, Display};
use std::hash::Hash;

pub trait Dynamics: Send + Sync {
    type State: Copy + Eq + Hash + Ord + Debug + Display + Send + Sync;

    /// Fills `out` with `(y, λ̃(x, y))` for every neighbour `y` of `x`.
    fn vsrw_rates(&self, x: &Self::State, out: &mut Vec<(Self::State, f64)>);

    /// `λ̃(x)/λ(x)`; equals `τ(x)` for the trap model.
    fn clock_weight(&self, x: &Self::State) -> f64;

    /// Distance used by balls and boxes.
    fn distance(&self, x: &Self::State, y: &Self::State) -> f64;

    /// Total jump rate `λ̃(x)`.
    fn vsrw_total(&self, x: &Self::State) -> f64 {
        let mut buf = Vec::new();
        self.vsrw_rates(x, &mut buf);
        buf.iter().map(|(_, r)| r).sum()
    }

    /// Inverse mean holding time of `X` at `x`, `λ(x) = λ̃(x) / weight(x)`.
    fn x_rate(&self, x: &Self::State) -> f64 {
        self.vsrw_total(x) / self.clock_weight(x)
    }
}

/// Environment disorder treatment for Monte Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Disorder {
    /// One fixed environment for every sample.
    #[default]
    Quenched,
    /// A fresh environment per sample.
    Annealed,
}

impl Display for Disorder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Disorder::Quenched => "quenched",
            Disorder::Annealed => "annealed",
        })
    }
}

/// A source of environments indexed by sample number.
pub trait Ensemble: Sync {
    type Dyn: Dynamics;
    fn realize(&self, sample: u64) -> Self::Dyn;
    fn disorder(&self) -> Disorder;
}

impl Ensemble for Environment {
    type Dyn = Environment;
    fn realize(&self, _sample: u64) -> Environment {
        *self
    }
    fn disorder(&self) -> Disorder {
        Disorder::Quenched
    }
}

impl Ensemble for FiniteChain {
    type Dyn = FiniteChain;
    fn realize(&self, _sample: u64) -> FiniteChain {
        self.clone()
    }
    fn disorder(&self) -> Disorder {
        Disorder::Quenched
    }
}

/// Trap landscapes drawn per sample: sample `i` uses
/// `env_seed_i = mix_pair(base.env_seed, i)`.
#[derive(Debug, Clone, Copy)]
pub struct Annealed {
    base: EnvConfig,
}

impl Annealed {
    pub fn new(base: EnvConfig) -> crate::Result<Self> {
        base.validate()?;
        Ok(Annealed { base })
    }
}

impl Ensemble for Annealed {
    type Dyn = Environment;
    fn realize(&self, sample: u64) -> Environment {
        Environment::new(self.base.with_seed(mix_pair(self.base.env_seed, sample)))
            .expect("validated at construction")
    }
    fn disorder(&self) -> Disorder {
        Disorder::Annealed
    }
}

/// Trap landscape under either disorder treatment.
#[derive(Debug, Clone, Copy)]
pub enum TrapEnsemble {
    Quenched(Environment),
    Annealed(Annealed),
}

impl TrapEnsemble {
    pub fn new(cfg: EnvConfig, disorder: Disorder) -> crate::Result<Self> {
        Ok(match disorder {
            Disorder::Quenched => TrapEnsemble::Quenched(Environment::new(cfg)?),
            Disorder::Annealed => TrapEnsemble::Annealed(Annealed::new(cfg)?),
        })
    }
}

impl Ensemble for TrapEnsemble {
    type Dyn = Environment;
    fn realize(&self, sample: u64) -> Environment {
        match self {
            TrapEnsemble::Quenched(e) => *e,
            TrapEnsemble::Annealed(a) => a.realize(sample),
        }
    }
    fn disorder(&self) -> Disorder {
        match self {
            TrapEnsemble::Quenched(_) => Disorder::Quenched,
            TrapEnsemble::Annealed(_) => Disorder::Annealed,
        }
    }
}

/// A finite chain with explicit variable-speed rates and clock weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    rates: Vec<Vec<(usize, f64)>>,
    weights: Vec<f64>,
}

impl FiniteChain {
    /// `rates[x]` lists `(y, λ̃(x,y))`; `weights[x] = λ̃(x)/λ(x)`.
    pub fn new(rates: Vec<Vec<(usize, f64)>>, weights: Vec<f64>) -> Self {
        assert_eq!(rates.len(), weights.len());
        let n = rates.len();
        for (x, row) in rates.iter().enumerate() {
            assert!(!row.is_empty(), "state {x} has no exits");
            for &(y, r) in row {
                assert!(y < n && y != x && r > 0.0, "bad rate entry ({x}, {y}, {r})");
            }
        }
        assert!(weights.iter().all(|&w| w > 0.0));
        FiniteChain { rates, weights }
    }

    /// Trap-model rates on an `n`-cycle: `λ̃(x,y) = (τ_x τ_y)^θ`, weight `τ_x`.
    pub fn trap_cycle(taus: &[f64], theta: f64) -> Self {
        let n = taus.len();
        assert!(n >= 3);
        let rates = (0..n)
            .map(|x| {
                [(x + 1) % n, (x + n - 1) % n]
                    .into_iter()
                    .map(|y| (y, (taus[x] * taus[y]).powf(theta)))
                    .collect()
            })
            .collect();
        FiniteChain::new(rates, taus.to_vec())
    }

    /// Two states with `a → b` at rate `q_ab` and `b → a` at rate `q_ba`.
    pub fn two_state(q_ab: f64, q_ba: f64, w_a: f64, w_b: f64) -> Self {
        FiniteChain::new(vec![vec![(1, q_ab)], vec![(0, q_ba)]], vec![w_a, w_b])
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self, x: usize) -> &[(usize, f64)] {
        &self.rates[x]
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    /// Jump-chain transition matrix `p(x, y) = λ̃(x,y)/λ̃(x)`.
    pub fn jump_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut p = vec![vec![0.0; n]; n];
        for (x, row) in self.rates.iter().enumerate() {
            let tot: f64 = row.iter().map(|(_, r)| r).sum();
            for &(y, r) in row {
                p[x][y] += r / tot;
            }
        }
        p
    }
}

impl Dynamics for FiniteChain {
    type State = usize;

    fn vsrw_rates(&self, x: &usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend_from_slice(&self.rates[*x]);
    }

    fn clock_weight(&self, x: &usize) -> f64 {
        self.weights[*x]
    }

    fn distance(&self, x: &usize, y: &usize) -> f64 {
        x.abs_diff(*y) as f64
    }
}

//! Monte Carlo estimators of the block functionals behind the clock-process
//! convergence conditions, plus lattice diagnostics of the walk itself.
//!
//! A sample `i` draws its dynamics from the ensemble (`realize(i)`) and all of
//! its randomness from `mix_pair(seed, i)`. Within a sample, the skeleton walk
//! uses child 0, the first independent block from the `k`-th skeleton point
//! uses child `(1, k)` and the second one child `(2, k)`.

use crate::chains::{block_increment, skeleton, ChainKind, Walker};
use crate::clock::ScaleSet;
use crate::dynamics::{Dynamics, Ensemble};
use crate::env::{Environment, Site};
use crate::error::{invalid, Error, Result};
use crate::parallel::map_chunks;
use crate::rng::mix_pair;
use crate::stats::{binomial_se, Moments};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Which functional an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionName {
    #[serde(rename = "Q_u")]
    QU,
    #[serde(rename = "Pi_t")]
    PiT,
    #[serde(rename = "Nu_t")]
    NuT,
    #[serde(rename = "Sigma_t")]
    SigmaT,
    #[serde(rename = "M_eps")]
    MEps,
    #[serde(rename = "A0_tail")]
    A0Tail,
    #[serde(rename = "A1_return_sum")]
    A1ReturnSum,
    HeatKernel,
    RangeMean,
    RangeSecondMoment,
    ExitTimeCdf,
    /// Slope of `log ν̂` against `log u`.
    NuTailSlope,
}

impl fmt::Display for ConditionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionName::QU => "Q_u",
            ConditionName::PiT => "Pi_t",
            ConditionName::NuT => "Nu_t",
            ConditionName::SigmaT => "Sigma_t",
            ConditionName::MEps => "M_eps",
            ConditionName::A0Tail => "A0_tail",
            ConditionName::A1ReturnSum => "A1_return_sum",
            ConditionName::HeatKernel => "heat_kernel",
            ConditionName::RangeMean => "range_mean",
            ConditionName::RangeSecondMoment => "range_second_moment",
            ConditionName::ExitTimeCdf => "exit_time_cdf",
            ConditionName::NuTailSlope => "nu_tail_slope",
        })
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionEstimate {
    pub name: ConditionName,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub t: Option<f64>,
    pub u: Option<f64>,
    pub eps: Option<f64>,
}

impl ConditionEstimate {
    fn from_moments(name: ConditionName, m: &Moments) -> Self {
        ConditionEstimate {
            name,
            value: m.mean(),
            std_error: if m.count > 1 { m.std_error() } else { 0.0 },
            n_samples: m.count,
            t: None,
            u: None,
            eps: None,
        }
    }

    fn with(mut self, t: Option<f64>, u: Option<f64>, eps: Option<f64>) -> Self {
        self.t = t;
        self.u = u;
        self.eps = eps;
        self
    }
}

/// Ensemble-averaged occupation measure of the skeleton `J(kθ_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiEstimate<S> {
    pub k_n: u64,
    pub n_samples: u64,
    /// `(site, value, std_error)` for sites inside the box, sorted by site.
    pub sites: Vec<(S, f64, f64)>,
    /// Mass outside the box.
    pub remainder: (f64, f64),
}

impl<S: PartialEq> PiEstimate<S> {
    pub fn get(&self, x: &S) -> Option<(f64, f64)> {
        self.sites.iter().find(|(y, _, _)| y == x).map(|&(_, v, s)| (v, s))
    }

    pub fn total_mass(&self) -> f64 {
        self.sites.iter().map(|(_, v, _)| v).sum::<f64>() + self.remainder.0
    }
}

/// Tail, second-moment and truncated-mean functionals at one `t`, all from
/// the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFunctionals {
    pub k_n: u64,
    pub nu: Vec<ConditionEstimate>,
    pub sigma: Vec<ConditionEstimate>,
    pub m: Vec<ConditionEstimate>,
    pub a0: Vec<ConditionEstimate>,
}

/// Partial sums `Σ_{j<=k} P_x(J(jθ_n) = x)` for `k = 1..k_n(t)-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSum {
    /// `(mean, std_error)` of each partial sum.
    pub partial: Vec<(f64, f64)>,
    pub total: ConditionEstimate,
}

impl ReturnSum {
    /// Least-squares growth rate of the partial sums per block.
    pub fn slope(&self) -> crate::stats::LineFit {
        let ks: Vec<f64> = (1..=self.partial.len()).map(|k| k as f64).collect();
        let ys: Vec<f64> = self.partial.iter().map(|p| p.0).collect();
        crate::stats::least_squares(&ks, &ys)
    }
}

/// Monte Carlo driver over an ensemble.
pub struct ConditionEstimator<'a, E: Ensemble> {
    pub ensemble: &'a E,
    pub kind: ChainKind,
    pub scales: ScaleSet,
    pub start: <E::Dyn as Dynamics>::State,
    pub seed: u64,
    pub workers: usize,
}

type State<E> = <<E as Ensemble>::Dyn as Dynamics>::State;

fn check_count(n_traj: u64) -> Result<()> {
    if n_traj == 0 {
        return Err(invalid("n_traj", "need at least one trajectory"));
    }
    Ok(())
}

fn fold_moments(parts: Vec<Vec<Moments>>, len: usize) -> Vec<Moments> {
    let mut out = vec![Moments::default(); len];
    for part in parts {
        for (o, p) in out.iter_mut().zip(&part) {
            o.merge(p);
        }
    }
    out
}

impl<'a, E: Ensemble> ConditionEstimator<'a, E> {
    pub fn new(
        ensemble: &'a E,
        kind: ChainKind,
        scales: ScaleSet,
        start: State<E>,
        seed: u64,
    ) -> Self {
        ConditionEstimator {
            ensemble,
            kind,
            scales,
            start,
            seed,
            workers: 1,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn k_n_checked(&self, t: f64) -> Result<u64> {
        if !(t > 0.0) {
            return Err(invalid("t", format!("need t > 0, got {t}")));
        }
        let k = self.scales.k_n(t);
        if k < 2 {
            return Err(Error::DegenerateScale(format!(
                "k_n({t}) = {k}; at least two blocks are needed"
            )));
        }
        Ok(k)
    }

    /// `Q_n^u(x) = P_x(Z_{n,1} > u)`.
    pub fn q_u(&self, x: State<E>, u: f64, n_traj: u64) -> Result<ConditionEstimate> {
        check_count(n_traj)?;
        if !(u >= 0.0) {
            return Err(invalid("u", format!("need u >= 0, got {u}")));
        }
        let threshold = u * self.scales.c_n;
        let theta = self.scales.theta_n;
        let hits: u64 = map_chunks(self.workers, n_traj, |r| {
            r.filter(|&i| {
                let d = self.ensemble.realize(i);
                let seed = mix_pair(mix_pair(self.seed, i), 1);
                block_increment(&d, self.kind, x, seed, theta) > threshold
            })
            .count() as u64
        })
        .into_iter()
        .sum();
        let p = hits as f64 / n_traj as f64;
        Ok(ConditionEstimate {
            name: ConditionName::QU,
            value: p,
            std_error: binomial_se(p, n_traj),
            n_samples: n_traj,
            t: None,
            u: Some(u),
            eps: None,
        })
    }

    /// `π_n^t(x) = E[k_n(t)^(-1) Σ_{k=1}^{k_n(t)-1} 1{J(kθ_n) = x}]` for `x`
    /// within `radius` of the start, plus the remaining mass.
    pub fn pi_t(&self, t: f64, n_traj: u64, radius: f64) -> Result<PiEstimate<State<E>>> {
        check_count(n_traj)?;
        let k_n = self.k_n_checked(t)?;
        let theta = self.scales.theta_n;
        let weight = 1.0 / k_n as f64;
        type Part<S> = (BTreeMap<S, (f64, f64)>, Moments);
        let parts: Vec<Part<State<E>>> = map_chunks(self.workers, n_traj, |r| {
            let mut sums = BTreeMap::new();
            let mut rest = Moments::default();
            for i in r {
                let d = self.ensemble.realize(i);
                let seed = mix_pair(mix_pair(self.seed, i), 0);
                let sk = skeleton(&d, self.kind, self.start, seed, theta, (k_n - 1) as usize);
                let mut counts: FxHashMap<State<E>, u32> = FxHashMap::default();
                for x in sk.positions {
                    *counts.entry(x).or_default() += 1;
                }
                let mut outside = 0.0;
                for (x, c) in counts {
                    let v = c as f64 * weight;
                    if d.distance(&self.start, &x) <= radius {
                        let e: &mut (f64, f64) = sums.entry(x).or_default();
                        e.0 += v;
                        e.1 += v * v;
                    } else {
                        outside += v;
                    }
                }
                rest.push(outside);
            }
            (sums, rest)
        });
        let mut sums: BTreeMap<State<E>, (f64, f64)> = BTreeMap::new();
        let mut rest = Moments::default();
        for (s, r) in parts {
            for (x, (a, b)) in s {
                let e = sums.entry(x).or_default();
                e.0 += a;
                e.1 += b;
            }
            rest.merge(&r);
        }
        let n = n_traj as f64;
        let sites = sums
            .into_iter()
            .map(|(x, (s, s2))| {
                let m = Moments {
                    count: n_traj,
                    sum: s,
                    sum_sq: s2,
                };
                let se = if n_traj > 1 { m.std_error() } else { 0.0 };
                (x, s / n, se)
            })
            .collect();
        let rest_se = if n_traj > 1 { rest.std_error() } else { 0.0 };
        Ok(PiEstimate {
            k_n,
            n_samples: n_traj,
            sites,
            remainder: (rest.mean(), rest_se),
        })
    }

    /// `ν_n^t(u,∞)`, `σ_n^t(u,∞)` for each `u`, `m_n^t(ε)` for each `ε`, and
    /// the (A-0) tail `P(Z_{n,0} + Z_{n,1} > u)`.
    ///
    /// Each sample walks the skeleton `x_k = J(kθ_n)`, `k < k_n(t)`, then runs
    /// two independent blocks `Z_k`, `Z'_k` from every `x_k`:
    /// `ν = E Σ_k 1{Z_k > u}`, `σ = E Σ_k 1{Z_k > u} 1{Z'_k > u}`,
    /// `m = E Σ_k Z_k 1{Z_k <= ε}`.
    pub fn block_functionals(
        &self,
        t: f64,
        us: &[f64],
        eps: &[f64],
        n_traj: u64,
    ) -> Result<BlockFunctionals> {
        check_count(n_traj)?;
        let k_n = self.k_n_checked(t)?;
        if us.iter().any(|u| !(*u > 0.0)) {
            return Err(invalid("u", "thresholds must be positive"));
        }
        if eps.iter().any(|e| !(*e >= 0.0)) {
            return Err(invalid("eps", "truncation levels must be non-negative"));
        }
        let (nu_len, m_len) = (us.len(), eps.len());
        let len = 3 * nu_len + m_len;
        let theta = self.scales.theta_n;
        let c_n = self.scales.c_n;
        let parts = map_chunks(self.workers, n_traj, |r| {
            let mut acc = vec![Moments::default(); len];
            let mut sample = vec![0.0; len];
            for i in r {
                sample.iter_mut().for_each(|v| *v = 0.0);
                let d = self.ensemble.realize(i);
                let ss = mix_pair(self.seed, i);
                let sk = skeleton(&d, self.kind, self.start, mix_pair(ss, 0), theta, (k_n - 1) as usize);
                let (s1, s2) = (mix_pair(ss, 1), mix_pair(ss, 2));
                for (k, &x) in sk.positions.iter().enumerate() {
                    let k = k as u64;
                    let z = block_increment(&d, self.kind, x, mix_pair(s1, k), theta) / c_n;
                    let z2 = block_increment(&d, self.kind, x, mix_pair(s2, k), theta) / c_n;
                    for (j, &u) in us.iter().enumerate() {
                        if z > u {
                            sample[j] += 1.0;
                            if z2 > u {
                                sample[nu_len + j] += 1.0;
                            }
                        }
                    }
                    for (j, &e) in eps.iter().enumerate() {
                        if z <= e {
                            sample[3 * nu_len + j] += z;
                        }
                    }
                }
                let first = sk.clock_at_theta / c_n;
                for (j, &u) in us.iter().enumerate() {
                    sample[2 * nu_len + j] = f64::from(u8::from(first > u));
                }
                for (a, v) in acc.iter_mut().zip(&sample) {
                    a.push(*v);
                }
            }
            acc
        });
        let acc = fold_moments(parts, len);
        let est = |name, j: usize| ConditionEstimate::from_moments(name, &acc[j]);
        Ok(BlockFunctionals {
            k_n,
            nu: (0..nu_len)
                .map(|j| est(ConditionName::NuT, j).with(Some(t), Some(us[j]), None))
                .collect(),
            sigma: (0..nu_len)
                .map(|j| est(ConditionName::SigmaT, nu_len + j).with(Some(t), Some(us[j]), None))
                .collect(),
            a0: (0..nu_len)
                .map(|j| est(ConditionName::A0Tail, 2 * nu_len + j).with(None, Some(us[j]), None))
                .collect(),
            m: (0..m_len)
                .map(|j| est(ConditionName::MEps, 3 * nu_len + j).with(Some(t), None, Some(eps[j])))
                .collect(),
        })
    }

    pub fn nu_t(&self, t: f64, u: f64, n_traj: u64) -> Result<ConditionEstimate> {
        Ok(self.block_functionals(t, &[u], &[], n_traj)?.nu[0])
    }

    pub fn sigma_t(&self, t: f64, u: f64, n_traj: u64) -> Result<ConditionEstimate> {
        Ok(self.block_functionals(t, &[u], &[], n_traj)?.sigma[0])
    }

    pub fn m_eps(&self, t: f64, eps: f64, n_traj: u64) -> Result<ConditionEstimate> {
        Ok(self.block_functionals(t, &[], &[eps], n_traj)?.m[0])
    }

    /// Return-probability partial sums from `x`.
    pub fn return_sum(&self, x: State<E>, t: f64, n_traj: u64) -> Result<ReturnSum> {
        check_count(n_traj)?;
        let k_n = self.k_n_checked(t)?;
        let len = (k_n - 1) as usize;
        let theta = self.scales.theta_n;
        let parts = map_chunks(self.workers, n_traj, |r| {
            let mut acc = vec![Moments::default(); len];
            for i in r {
                let d = self.ensemble.realize(i);
                let sk = skeleton(&d, self.kind, x, mix_pair(mix_pair(self.seed, i), 0), theta, len);
                let mut running = 0.0;
                for (a, y) in acc.iter_mut().zip(&sk.positions) {
                    if *y == x {
                        running += 1.0;
                    }
                    a.push(running);
                }
            }
            acc
        });
        let acc = fold_moments(parts, len);
        let partial: Vec<(f64, f64)> = acc
            .iter()
            .map(|m| (m.mean(), if m.count > 1 { m.std_error() } else { 0.0 }))
            .collect();
        let total = ConditionEstimate::from_moments(ConditionName::A1ReturnSum, &acc[len - 1]).with(
            Some(t),
            None,
            None,
        );
        Ok(ReturnSum { partial, total })
    }

    fn indicator_mc<F>(&self, name: ConditionName, n_traj: u64, f: F) -> Result<ConditionEstimate>
    where
        F: Fn(&E::Dyn, u64) -> bool + Sync,
    {
        check_count(n_traj)?;
        let hits: u64 = map_chunks(self.workers, n_traj, |r| {
            r.filter(|&i| f(&self.ensemble.realize(i), mix_pair(mix_pair(self.seed, i), 0)))
                .count() as u64
        })
        .into_iter()
        .sum();
        let p = hits as f64 / n_traj as f64;
        Ok(ConditionEstimate {
            name,
            value: p,
            std_error: binomial_se(p, n_traj),
            n_samples: n_traj,
            t: None,
            u: None,
            eps: None,
        })
    }

    /// `q_t(x, y) = P_x(J(t) = y)`.
    pub fn heat_kernel(&self, x: State<E>, y: State<E>, t: f64, n_traj: u64) -> Result<ConditionEstimate> {
        if !(t > 0.0) {
            return Err(invalid("t", format!("need t > 0, got {t}")));
        }
        let kind = self.kind;
        Ok(self
            .indicator_mc(ConditionName::HeatKernel, n_traj, |d, seed| {
                skeleton(d, kind, x, seed, t, 1).positions[0] == y
            })?
            .with(Some(t), None, None))
    }

    /// `P_x(η(B_r(x)) <= m)`: the walk leaves the closed ball of radius `r`
    /// before time `m`.
    pub fn exit_time_cdf(&self, x: State<E>, r: f64, m: f64, n_traj: u64) -> Result<ConditionEstimate> {
        if !(r >= 0.0 && m > 0.0) {
            return Err(invalid("r, m", "need r >= 0 and m > 0"));
        }
        let kind = self.kind;
        Ok(self
            .indicator_mc(ConditionName::ExitTimeCdf, n_traj, |d, seed| {
                Walker::new(d, kind, x, seed)
                    .take_while(|s| s.start <= m)
                    .any(|s| d.distance(&x, &s.site) > r)
            })?
            .with(Some(m), None, Some(r)))
    }

    /// `E R_m` and `E R_m^2`, where `R_m` counts the distinct sites visited
    /// during `[0, m]`.
    pub fn range_stat(&self, x: State<E>, m: f64, n_traj: u64) -> Result<(ConditionEstimate, ConditionEstimate)> {
        check_count(n_traj)?;
        if !(m >= 0.0) {
            return Err(invalid("m", "need m >= 0"));
        }
        let kind = self.kind;
        let parts = map_chunks(self.workers, n_traj, |r| {
            let mut acc = vec![Moments::default(); 2];
            let mut seen: FxHashSet<State<E>> = FxHashSet::default();
            for i in r {
                let d = self.ensemble.realize(i);
                seen.clear();
                for s in Walker::new(&d, kind, x, mix_pair(mix_pair(self.seed, i), 0)) {
                    if s.start > m {
                        break;
                    }
                    seen.insert(s.site);
                }
                let range = seen.len() as f64;
                acc[0].push(range);
                acc[1].push(range * range);
            }
            acc
        });
        let acc = fold_moments(parts, 2);
        Ok((
            ConditionEstimate::from_moments(ConditionName::RangeMean, &acc[0]).with(Some(m), None, None),
            ConditionEstimate::from_moments(ConditionName::RangeSecondMoment, &acc[1]).with(Some(m), None, None),
        ))
    }
}

/// Large traps `T_n` found by scanning a cube around the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSetSample {
    pub sites: Vec<Site>,
    pub eps_n: f64,
    pub box_radius: i32,
    pub box_size: u64,
}

/// Exhaustive scan of `[-radius, radius]^d` for sites with
/// `τ(x)/c_n > ε_n` and `max_{y~x} τ(y) <= ε_n^(-2/α)`.
pub fn trap_set(env: &Environment, scales: &ScaleSet, radius: i32) -> Result<TrapSetSample> {
    if radius < 1 {
        return Err(invalid("radius", "need a box radius of at least 1"));
    }
    let d = env.dim();
    let side = (2 * radius + 1) as u64;
    let box_size = side.pow(d as u32);
    let mut sites = Vec::new();
    let mut coords = vec![-radius; d];
    for _ in 0..box_size {
        let x = Site::new(&coords);
        if env.is_large_trap(&x, scales.c_n, scales.eps_n) {
            sites.push(x);
        }
        for c in coords.iter_mut() {
            if *c < radius {
                *c += 1;
                break;
            }
            *c = -radius;
        }
    }
    Ok(TrapSetSample {
        sites,
        eps_n: scales.eps_n,
        box_radius: radius,
        box_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FiniteChain;
    use crate::env::EnvConfig;

    fn toy() -> FiniteChain {
        FiniteChain::trap_cycle(&[1.0, 4.0, 2.0, 8.0, 3.0], 0.5)
    }

    #[test]
    fn q_u_extremes() {
        let env = Environment::new(EnvConfig::new(2, 0.5, 0.0, 3)).unwrap();
        let s = ScaleSet::batm(10_000, 0.5, 2, Default::default()).unwrap();
        let est = ConditionEstimator::new(&env, ChainKind::Continuous, s, env.origin(), 1);
        assert_eq!(est.q_u(env.origin(), 0.0, 200).unwrap().value, 1.0);
        assert_eq!(est.q_u(env.origin(), 1e12, 200).unwrap().value, 0.0);
        assert!(est.q_u(env.origin(), 1.0, 0).is_err());
    }

    #[test]
    fn pi_mass_is_exact() {
        let chain = toy();
        let s = ScaleSet::custom(1.0, 20.0, 2.0).unwrap();
        let est = ConditionEstimator::new(&chain, ChainKind::Discrete, s, 0, 5);
        let pi = est.pi_t(1.0, 500, 1.0).unwrap();
        assert!((pi.total_mass() - 9.0 / 10.0).abs() < 1e-12);
        assert!(pi.remainder.0 > 0.0);
        let bad = ScaleSet::custom(1.0, 3.0, 2.0).unwrap();
        let est = ConditionEstimator::new(&chain, ChainKind::Discrete, bad, 0, 5);
        assert!(matches!(est.pi_t(1.0, 10, 1.0), Err(Error::DegenerateScale(_))));
    }

    #[test]
    fn functionals_ranges_and_order() {
        let chain = toy();
        let s = ScaleSet::custom(1.0, 40.0, 2.0).unwrap();
        let est = ConditionEstimator::new(&chain, ChainKind::Continuous, s, 0, 9);
        let f = est.block_functionals(1.0, &[0.5, 2.0], &[0.0, f64::INFINITY], 2000).unwrap();
        for (nu, sigma) in f.nu.iter().zip(&f.sigma) {
            assert!(nu.value >= 0.0 && sigma.value >= 0.0);
            assert!(nu.value >= sigma.value - 3.0 * (nu.std_error + sigma.std_error));
        }
        assert_eq!(f.m[0].value, 0.0);
        assert!(f.m[1].value > 0.0);
        assert!(f.a0.iter().all(|a| (0.0..=1.0).contains(&a.value)));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let env = Environment::new(EnvConfig::new(2, 0.5, 0.2, 3)).unwrap();
        let s = ScaleSet::batm(10_000, 0.5, 2, Default::default()).unwrap();
        let a = ConditionEstimator::new(&env, ChainKind::Continuous, s, env.origin(), 4);
        let b = ConditionEstimator::new(&env, ChainKind::Continuous, s, env.origin(), 4).workers(3);
        let fa = a.block_functionals(0.2, &[0.1, 1.0], &[0.5], 300).unwrap();
        let fb = b.block_functionals(0.2, &[0.1, 1.0], &[0.5], 300).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn trap_set_members_verify() {
        let env = Environment::new(EnvConfig::new(2, 0.5, 0.0, 11)).unwrap();
        let s = ScaleSet::custom(10.0, 1000.0, 8.0).unwrap();
        let ts = trap_set(&env, &s, 30).unwrap();
        assert_eq!(ts.box_size, 61 * 61);
        assert!(!ts.sites.is_empty());
        let cap = s.eps_n.powf(-4.0);
        for x in &ts.sites {
            assert!(env.tau_at(x) / 10.0 > s.eps_n);
            assert!(x.neighbors().all(|y| env.tau_at(&y) <= cap));
        }
        let huge = ScaleSet::custom(1e300, 1e301, 8.0).unwrap();
        assert!(trap_set(&env, &huge, 5).unwrap().sites.is_empty());
    }
}

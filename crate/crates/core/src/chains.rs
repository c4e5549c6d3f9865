//! Event-driven simulation of the chain `J` (variable-speed walk in
//! continuous time, or the jump chain in discrete time) with sparse
//! local-time bookkeeping, and reconstruction of `X` through the clock.
//!
//! Both kinds draw jump directions from the same sub-stream, so for equal
//! seeds they visit the same sequence of sites; only holding times differ
//! (exponential with rate `λ̃(x)` in continuous time, mean-one marks in
//! discrete time).

use crate::clock::ClockPath;
use crate::dynamics::Dynamics;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Stream};
use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    /// Discrete-time jump chain with exponential marks.
    Discrete,
    /// Continuous-time variable-speed random walk.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig<S> {
    pub traj_seed: u64,
    pub kind: ChainKind,
    pub start: S,
    /// Internal time for continuous chains, step count for discrete ones.
    pub horizon: f64,
    /// Hard cap on simulated events.
    pub max_events: u64,
}

impl<S> TrajectoryConfig<S> {
    pub fn new(traj_seed: u64, kind: ChainKind, start: S, horizon: f64) -> Self {
        TrajectoryConfig {
            traj_seed,
            kind,
            start,
            horizon,
            max_events: u64::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ChainKind::Continuous => self.horizon > 0.0 && self.horizon.is_finite(),
            ChainKind::Discrete => self.horizon >= 0.0 && self.horizon.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("horizon", format!("{} is not admissible", self.horizon)))
        }
    }
}

/// One sojourn of `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<S> {
    pub site: S,
    /// Internal time at which the sojourn starts (step index in discrete time).
    pub start: f64,
    /// Internal duration (1 in discrete time).
    pub length: f64,
    /// Local time credited to `site`: the holding time, or the mark `e_i`.
    pub local_time: f64,
    /// Clock increment `local_time · λ̃(x)/λ(x)`.
    pub clock: f64,
}

impl<S> Segment<S> {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }
}

/// Infinite stream of sojourns of `J` started at a given site.
pub struct Walker<'a, D: Dynamics> {
    dynamics: &'a D,
    kind: ChainKind,
    site: D::State,
    time: f64,
    holding: ChaCha8Rng,
    direction: ChaCha8Rng,
    buf: Vec<(D::State, f64)>,
}

impl<'a, D: Dynamics> Walker<'a, D> {
    pub fn new(dynamics: &'a D, kind: ChainKind, start: D::State, seed: u64) -> Self {
        let holding = match kind {
            ChainKind::Continuous => stream(seed, Stream::Holding),
            ChainKind::Discrete => stream(seed, Stream::Marks),
        };
        Walker {
            dynamics,
            kind,
            site: start,
            time: 0.0,
            holding,
            direction: stream(seed, Stream::Direction),
            buf: Vec::with_capacity(16),
        }
    }

    pub fn site(&self) -> D::State {
        self.site
    }
}

impl<D: Dynamics> Iterator for Walker<'_, D> {
    type Item = Segment<D::State>;

    #[inline]
    fn next(&mut self) -> Option<Segment<D::State>> {
        self.dynamics.vsrw_rates(&self.site, &mut self.buf);
        let total: f64 = self.buf.iter().map(|(_, r)| r).sum();
        let draw: f64 = self.holding.sample(Exp1);
        let weight = self.dynamics.clock_weight(&self.site);
        let seg = match self.kind {
            ChainKind::Continuous => {
                let h = draw / total;
                Segment {
                    site: self.site,
                    start: self.time,
                    length: h,
                    local_time: h,
                    clock: h * weight,
                }
            }
            ChainKind::Discrete => Segment {
                site: self.site,
                start: self.time,
                length: 1.0,
                local_time: draw,
                clock: draw * weight / total,
            },
        };
        let mut target = self.direction.random::<f64>() * total;
        let mut next = self.buf[self.buf.len() - 1].0;
        for &(y, r) in &self.buf {
            if target < r {
                next = y;
                break;
            }
            target -= r;
        }
        self.site = next;
        self.time += seg.length;
        Some(seg)
    }
}

/// Occupation times per site, in first-visit order.
#[derive(Debug, Clone)]
pub struct LocalTimeLedger<S: std::hash::Hash + Eq> {
    entries: IndexMap<S, f64, FxBuildHasher>,
    total: f64,
}

impl<S: std::hash::Hash + Eq + Copy> Default for LocalTimeLedger<S> {
    fn default() -> Self {
        LocalTimeLedger {
            entries: IndexMap::default(),
            total: 0.0,
        }
    }
}

impl<S: std::hash::Hash + Eq + Copy> LocalTimeLedger<S> {
    pub fn add(&mut self, site: S, dt: f64) {
        *self.entries.entry(site).or_insert(0.0) += dt;
        self.total += dt;
    }

    pub fn get(&self, site: &S) -> f64 {
        self.entries.get(site).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, &f64)> {
        self.entries.iter()
    }

    pub fn merge(&mut self, other: &LocalTimeLedger<S>) {
        for (s, t) in other.iter() {
            self.add(*s, *t);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord<S> {
    /// Internal time of the jump (arrival step in discrete time).
    pub time: f64,
    pub from: S,
    pub to: S,
    /// Local time spent at `from` before the jump.
    pub holding: f64,
}

/// A finished run of `J`.
#[derive(Debug, Clone)]
pub struct Trajectory<S: std::hash::Hash + Eq> {
    pub kind: ChainKind,
    pub start: S,
    pub horizon: f64,
    pub segments: Vec<Segment<S>>,
    pub ledger: LocalTimeLedger<S>,
}

impl<S: std::hash::Hash + Eq + Copy> Trajectory<S> {
    pub fn jumps(&self) -> Vec<JumpRecord<S>> {
        self.segments
            .windows(2)
            .map(|w| JumpRecord {
                time: w[1].start,
                from: w[0].site,
                to: w[1].site,
                holding: w[0].local_time,
            })
            .collect()
    }

    pub fn sites(&self) -> impl Iterator<Item = S> + '_ {
        self.segments.iter().map(|s| s.site)
    }

    /// Number of sojourns.
    pub fn events(&self) -> usize {
        self.segments.len()
    }
}

impl<S: std::hash::Hash + Eq + Copy + std::fmt::Display> Trajectory<S> {
    /// CSV `jump_index,time,from_coords,to_coords,holding`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "jump_index,time,from_coords,to_coords,holding")?;
        for (i, j) in self.jumps().iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", i, j.time, j.from, j.to, j.holding)?;
        }
        Ok(())
    }
}

/// Normalised jump probabilities `p(x, ·) = λ̃(x, ·)/λ̃(x)`.
pub fn jump_distribution<D: Dynamics>(dynamics: &D, x: &D::State) -> Vec<(D::State, f64)> {
    let mut buf = Vec::new();
    dynamics.vsrw_rates(x, &mut buf);
    let total: f64 = buf.iter().map(|(_, r)| r).sum();
    buf.into_iter().map(|(y, r)| (y, r / total)).collect()
}

/// Continuous-time variable-speed walk up to internal time `horizon`; the
/// final sojourn is truncated at the horizon.
pub fn run_vsrw<D: Dynamics>(
    dynamics: &D,
    cfg: &TrajectoryConfig<D::State>,
) -> Result<Trajectory<D::State>> {
    if cfg.kind != ChainKind::Continuous {
        return Err(invalid("kind", "run_vsrw needs a continuous chain"));
    }
    cfg.validate()?;
    let mut segments = Vec::new();
    let mut ledger = LocalTimeLedger::default();
    for mut seg in Walker::new(dynamics, cfg.kind, cfg.start, cfg.traj_seed) {
        if segments.len() as u64 >= cfg.max_events {
            return Err(Error::EventCapExceeded { cap: cfg.max_events });
        }
        let last = seg.end() >= cfg.horizon;
        if last {
            let h = cfg.horizon - seg.start;
            seg.clock *= h / seg.length;
            seg.length = h;
            seg.local_time = h;
        }
        ledger.add(seg.site, seg.local_time);
        segments.push(seg);
        if last {
            break;
        }
    }
    Ok(Trajectory {
        kind: cfg.kind,
        start: cfg.start,
        horizon: cfg.horizon,
        segments,
        ledger,
    })
}

/// Discrete-time jump chain for steps `0..=horizon`, crediting a fresh
/// mean-one exponential mark at every step.
pub fn run_discrete<D: Dynamics>(
    dynamics: &D,
    cfg: &TrajectoryConfig<D::State>,
) -> Result<Trajectory<D::State>> {
    if cfg.kind != ChainKind::Discrete {
        return Err(invalid("kind", "run_discrete needs a discrete chain"));
    }
    cfg.validate()?;
    let steps = cfg.horizon.floor() as u64;
    if steps >= cfg.max_events {
        return Err(Error::EventCapExceeded { cap: cfg.max_events });
    }
    let mut ledger = LocalTimeLedger::default();
    let segments: Vec<_> = Walker::new(dynamics, cfg.kind, cfg.start, cfg.traj_seed)
        .take(steps as usize + 1)
        .inspect(|s| ledger.add(s.site, s.local_time))
        .collect();
    Ok(Trajectory {
        kind: cfg.kind,
        start: cfg.start,
        horizon: steps as f64,
        segments,
        ledger,
    })
}

/// Positions `J(kθ)` for `k = 1..=k_max` together with `S(θ)`, read off a
/// single walk without storing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton<S> {
    pub positions: Vec<S>,
    pub clock_at_theta: f64,
}

pub fn skeleton<D: Dynamics>(
    dynamics: &D,
    kind: ChainKind,
    start: D::State,
    seed: u64,
    theta: f64,
    k_max: usize,
) -> Skeleton<D::State> {
    let mut positions = Vec::with_capacity(k_max);
    let mut clock_at_theta = 0.0;
    let mut k = 1;
    let walker = Walker::new(dynamics, kind, start, seed);
    match kind {
        ChainKind::Continuous => {
            for seg in walker {
                if seg.start < theta {
                    clock_at_theta += seg.clock * ((theta.min(seg.end()) - seg.start) / seg.length);
                }
                while k <= k_max && (k as f64 * theta) < seg.end() {
                    positions.push(seg.site);
                    k += 1;
                }
                if k > k_max && seg.end() >= theta {
                    break;
                }
            }
        }
        ChainKind::Discrete => {
            let last_mark = theta.floor();
            for (j, seg) in walker.enumerate() {
                let j = j as f64;
                if j <= last_mark {
                    clock_at_theta += seg.clock;
                }
                while k <= k_max && (k as f64 * theta).floor() == j {
                    positions.push(seg.site);
                    k += 1;
                }
                if k > k_max && j >= last_mark {
                    break;
                }
            }
        }
    }
    Skeleton {
        positions,
        clock_at_theta,
    }
}

/// `S(θ) - S(0)` of a walk started at `start`: the unscaled first block.
pub fn block_increment<D: Dynamics>(
    dynamics: &D,
    kind: ChainKind,
    start: D::State,
    seed: u64,
    theta: f64,
) -> f64 {
    let mut acc = 0.0;
    let walker = Walker::new(dynamics, kind, start, seed);
    match kind {
        ChainKind::Continuous => {
            for seg in walker {
                if seg.end() >= theta {
                    acc += seg.clock * ((theta - seg.start) / seg.length);
                    break;
                }
                acc += seg.clock;
            }
        }
        ChainKind::Discrete => {
            for seg in walker.skip(1).take(theta.floor() as usize) {
                acc += seg.clock;
            }
        }
    }
    acc
}

/// Runs either kind.
pub fn run<D: Dynamics>(dynamics: &D, cfg: &TrajectoryConfig<D::State>) -> Result<Trajectory<D::State>> {
    match cfg.kind {
        ChainKind::Continuous => run_vsrw(dynamics, cfg),
        ChainKind::Discrete => run_discrete(dynamics, cfg),
    }
}

/// Position of `J` at internal time `v` (right-continuous).
pub fn position_of_j<S: Copy>(start: S, jumps: &[JumpRecord<S>], v: f64) -> S {
    let k = jumps.partition_point(|j| j.time <= v);
    if k == 0 {
        start
    } else {
        jumps[k - 1].to
    }
}

/// `X(t) = J(S^←(t))`, with `S^←` the right-continuous inverse of the clock.
pub fn position_of_x<S: Copy>(
    start: S,
    jumps: &[JumpRecord<S>],
    clock: &ClockPath,
    t_phys: f64,
) -> Result<S> {
    let v = clock.inverse(t_phys)?;
    Ok(position_of_j(start, jumps, v))
}

//! Clock processes built from trajectories of `J`, their rescaled and
//! blocked versions, and inverse-clock queries.

use crate::chains::{ChainKind, Segment, Trajectory};
use crate::dynamics::Dynamics;
use crate::env::{Environment, Site};
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Accumulated clock `S(v)` as a function of internal time `v`.
///
/// Stored as cumulative values at breakpoints. A continuous clock is linear
/// between breakpoints (slope `τ` of the site being held); a discrete clock is
/// a right-continuous step function whose value on `[i, i+1)` already
/// contains the mark of step `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockPath {
    kind: ChainKind,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl ClockPath {
    fn checked(kind: ChainKind, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.is_empty() {
            return Err(invalid("breakpoints", "need matching, non-empty breakpoints and values"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints", "must be strictly increasing"));
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) || !(values[0] >= 0.0) {
            return Err(invalid("values", "must be non-negative and nondecreasing"));
        }
        Ok(ClockPath {
            kind,
            breakpoints,
            values,
        })
    }

    /// Step clock: value `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
    pub fn step(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::checked(ChainKind::Discrete, breakpoints, values)
    }

    /// Piecewise-linear clock through `(breakpoints[i], values[i])`.
    pub fn linear(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::checked(ChainKind::Continuous, breakpoints, values)
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Last internal time at which the clock is known.
    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `S(v)` for `0 <= v <= horizon`.
    pub fn value_at(&self, v: f64) -> Result<f64> {
        if v > self.horizon() || v.is_nan() {
            return Err(Error::RangeExhausted {
                requested: v,
                available: self.horizon(),
            });
        }
        let i = self.breakpoints.partition_point(|&b| b <= v);
        if i == 0 {
            return Ok(if self.kind == ChainKind::Discrete { 0.0 } else { self.values[0] });
        }
        let i = i - 1;
        Ok(match self.kind {
            ChainKind::Discrete => self.values[i],
            ChainKind::Continuous => {
                if i + 1 == self.values.len() {
                    self.values[i]
                } else {
                    let (b0, b1) = (self.breakpoints[i], self.breakpoints[i + 1]);
                    let (s0, s1) = (self.values[i], self.values[i + 1]);
                    s0 + (s1 - s0) * (v - b0) / (b1 - b0)
                }
            }
        })
    }

    /// Right-continuous inverse `inf{v : S(v) > s}`, defined for `s` below the
    /// final value.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        if !(s < self.final_value()) {
            return Err(Error::RangeExhausted {
                requested: s,
                available: self.final_value(),
            });
        }
        let i = self.values.partition_point(|&x| x <= s);
        Ok(match self.kind {
            ChainKind::Discrete => self.breakpoints[i],
            ChainKind::Continuous => {
                if i == 0 {
                    self.breakpoints[0]
                } else {
                    let (b0, b1) = (self.breakpoints[i - 1], self.breakpoints[i]);
                    let (s0, s1) = (self.values[i - 1], self.values[i]);
                    (b0 + (b1 - b0) * (s - s0) / (s1 - s0)).min(b1)
                }
            }
        })
    }

    /// CSV `internal_time,clock_value` at the breakpoints.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "internal_time,clock_value")?;
        for (b, v) in self.breakpoints.iter().zip(&self.values) {
            writeln!(w, "{b},{v}")?;
        }
        Ok(())
    }
}

/// Clock of a trajectory: each sojourn contributes `local_time · λ̃/λ` of its
/// site (holding × τ in continuous time, mark / λ(x) in discrete time).
pub fn build_clock<S: std::hash::Hash + Eq + Copy>(traj: &Trajectory<S>) -> ClockPath {
    build_clock_from_segments(traj.kind, &traj.segments)
}

pub fn build_clock_from_segments<S>(kind: ChainKind, segments: &[Segment<S>]) -> ClockPath {
    let mut breakpoints = Vec::with_capacity(segments.len() + 1);
    let mut values = Vec::with_capacity(segments.len() + 1);
    let mut acc = 0.0;
    match kind {
        ChainKind::Continuous => {
            for seg in segments {
                breakpoints.push(seg.start);
                values.push(acc);
                acc += seg.clock;
            }
            if let Some(last) = segments.last() {
                breakpoints.push(last.end());
                values.push(acc);
            }
            // zero-length final sojourn
            if breakpoints.len() >= 2 && breakpoints[breakpoints.len() - 1] <= breakpoints[breakpoints.len() - 2] {
                breakpoints.pop();
                let v = values.pop().unwrap();
                *values.last_mut().unwrap() = v;
            }
        }
        ChainKind::Discrete => {
            for seg in segments {
                acc += seg.clock;
                breakpoints.push(seg.start);
                values.push(acc);
            }
        }
    }
    ClockPath {
        kind,
        breakpoints,
        values,
    }
}

/// How the block length `θ_n` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase", deny_unknown_fields)]
pub enum ThetaPolicy {
    /// `d = 2`: `max(2, n^(α γ₂))`; `d >= 3`: `max(2, ⌊a_n^0.1⌋)`.
    Desk {
        #[serde(default = "default_gamma2")]
        gamma2: f64,
    },
    /// `d = 2`: `n^(α γ₂)`; `d >= 3`: `(ln n)^γ₃`. Rejected unless `2 <= θ_n < a_n`.
    Theorem {
        #[serde(default = "default_gamma2")]
        gamma2: f64,
        gamma3: f64,
    },
    /// A fixed block length.
    Fixed { theta_n: f64 },
}

fn default_gamma2() -> f64 {
    0.15
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        ThetaPolicy::Desk {
            gamma2: default_gamma2(),
        }
    }
}

/// Scaling sequences at one value of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleSet {
    pub n: u64,
    pub c_n: f64,
    pub a_n: f64,
    pub theta_n: f64,
    pub eps_n: f64,
    pub alpha: f64,
    pub d: usize,
    pub gamma2: f64,
    pub gamma3: f64,
    pub policy: ThetaPolicy,
}

impl ScaleSet {
    /// Trap-model scales: `c_n = n`, `a_n = n^α (ln n)^(1-α)` in `d = 2` and
    /// `n^α` in `d >= 3`, `θ_n` from `policy`, and
    /// `ε_n = (ln θ_n)^(-6/(1-α))` in `d = 2`, `θ_n^(-1/3)` in `d >= 3`.
    pub fn batm(n: u64, alpha: f64, d: usize, policy: ThetaPolicy) -> Result<Self> {
        if n < 3 {
            return Err(invalid("n", format!("need n >= 3, got {n}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("need 0 < alpha < 1, got {alpha}")));
        }
        if d < 2 {
            return Err(invalid("d", "scaling sequences need d >= 2"));
        }
        let nf = n as f64;
        let ln_n = nf.ln();
        let a_n = if d == 2 {
            nf.powf(alpha) * ln_n.powf(1.0 - alpha)
        } else {
            nf.powf(alpha)
        };
        let (theta_n, gamma2, gamma3) = match policy {
            ThetaPolicy::Desk { gamma2 } => {
                check_gamma2(gamma2)?;
                let th = if d == 2 {
                    nf.powf(alpha * gamma2).max(2.0)
                } else {
                    a_n.powf(0.1).floor().max(2.0)
                };
                (th, gamma2, f64::NAN)
            }
            ThetaPolicy::Theorem { gamma2, gamma3 } => {
                check_gamma2(gamma2)?;
                if !(gamma3 > 12.0 / (1.0 - alpha)) {
                    return Err(invalid("gamma3", format!("need gamma3 > 12/(1-alpha), got {gamma3}")));
                }
                let th = if d == 2 { nf.powf(alpha * gamma2) } else { ln_n.powf(gamma3) };
                (th, gamma2, gamma3)
            }
            ThetaPolicy::Fixed { theta_n } => (theta_n, f64::NAN, f64::NAN),
        };
        if !(theta_n >= 2.0) {
            return Err(invalid("theta_n", format!("need theta_n >= 2, got {theta_n}")));
        }
        if !(theta_n < a_n) {
            return Err(invalid(
                "theta_n",
                format!("block length {theta_n:.4e} is not below a_n = {a_n:.4e}"),
            ));
        }
        let eps_n = if d == 2 {
            theta_n.ln().powf(-6.0 / (1.0 - alpha))
        } else {
            theta_n.powf(-1.0 / 3.0)
        };
        Ok(ScaleSet {
            n,
            c_n: nf,
            a_n,
            theta_n,
            eps_n,
            alpha,
            d,
            gamma2,
            gamma3,
            policy,
        })
    }

    /// Explicit scales, for chains outside the trap model.
    pub fn custom(c_n: f64, a_n: f64, theta_n: f64) -> Result<Self> {
        if !(c_n > 0.0 && a_n > 0.0) {
            return Err(invalid("c_n, a_n", "must be positive"));
        }
        if !(theta_n >= 1.0 && theta_n < a_n) {
            return Err(invalid("theta_n", format!("need 1 <= theta_n < a_n, got {theta_n}")));
        }
        Ok(ScaleSet {
            n: c_n.round() as u64,
            c_n,
            a_n,
            theta_n,
            eps_n: theta_n.powf(-1.0 / 3.0),
            alpha: f64::NAN,
            d: 0,
            gamma2: f64::NAN,
            gamma3: f64::NAN,
            policy: ThetaPolicy::Fixed { theta_n },
        })
    }

    /// `k_n(t) = ⌊⌊a_n t⌋ / θ_n⌋`.
    pub fn k_n(&self, t: f64) -> u64 {
        ((self.a_n * t).floor() / self.theta_n).floor().max(0.0) as u64
    }

    /// `d_n(t) = ⌊a_n t⌋^(1/2) ln ⌊a_n t⌋`.
    pub fn d_n(&self, t: f64) -> f64 {
        let m = (self.a_n * t).floor();
        m.sqrt() * m.ln()
    }

    /// `δ_n = ε_n^((1-α)/2)`.
    pub fn delta_n(&self) -> f64 {
        self.eps_n.powf((1.0 - self.alpha) / 2.0)
    }

    /// Ball radius `(θ_n ln θ_n)^(1/2)`.
    pub fn ball_radius(&self) -> f64 {
        (self.theta_n * self.theta_n.ln()).sqrt()
    }
}

fn check_gamma2(g: f64) -> Result<()> {
    if g > 0.0 && g < 1.0 / 6.0 {
        Ok(())
    } else {
        Err(invalid("gamma2", format!("need 0 < gamma2 < 1/6, got {g}")))
    }
}

/// `S_n(t) = c_n^(-1) S(⌊a_n t⌋)`.
pub fn rescale(clock: &ClockPath, scales: &ScaleSet, t: f64) -> Result<f64> {
    Ok(clock.value_at((scales.a_n * t).floor())? / scales.c_n)
}

/// Block variables of a clock.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSeries {
    /// `Z_{n,k}` for `k = 1..=K`.
    pub z: Vec<f64>,
    /// Initial increment `c_n^(-1) S(0)`; non-zero for discrete chains only.
    pub z0: f64,
    pub theta_n: f64,
    pub a_n: f64,
}

impl BlockSeries {
    fn k_of(&self, t: f64) -> u64 {
        ((self.a_n * t).floor() / self.theta_n).floor().max(0.0) as u64
    }

    /// Rescaled time at which block `k` is completed: smallest `t` with `k_n(t) >= k`.
    pub fn block_time(&self, k: usize) -> f64 {
        (k as f64 * self.theta_n).ceil() / self.a_n
    }

    /// Block values paired with their completion times, for passage queries.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((0.0, self.z0)).chain(self.z.iter().scan(self.z0, |acc, z| {
            *acc += z;
            Some(*acc)
        }).enumerate().map(|(i, v)| (self.block_time(i + 1), v)))
    }

    /// CSV `k,Z_k` with `k = 0` holding `Z0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,Z_k")?;
        writeln!(w, "0,{}", self.z0)?;
        for (k, z) in self.z.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, z)?;
        }
        Ok(())
    }
}

/// `Z_{n,k} = c_n^(-1) (S(θ_n k) - S(θ_n (k-1)))` for `k = 1..=k_n(t)`.
pub fn block_series(clock: &ClockPath, scales: &ScaleSet, t: f64) -> Result<BlockSeries> {
    let k_max = scales.k_n(t);
    let needed = scales.theta_n * k_max as f64;
    if needed > clock.horizon() {
        return Err(Error::RangeExhausted {
            requested: needed,
            available: clock.horizon(),
        });
    }
    let mut z = Vec::with_capacity(k_max as usize);
    let s0 = clock.value_at(0.0)?;
    let mut prev = s0;
    for k in 1..=k_max {
        let cur = clock.value_at(scales.theta_n * k as f64)?;
        z.push((cur - prev) / scales.c_n);
        prev = cur;
    }
    Ok(BlockSeries {
        z,
        z0: s0 / scales.c_n,
        theta_n: scales.theta_n,
        a_n: scales.a_n,
    })
}

/// Blocked clock `Σ_{k < k_n(t)} Z_{n,k+1} + Z_{n,0}`.
pub fn blocked_clock(series: &BlockSeries, t: f64) -> Result<f64> {
    let k = series.k_of(t) as usize;
    if k > series.z.len() {
        return Err(Error::RangeExhausted {
            requested: k as f64,
            available: series.z.len() as f64,
        });
    }
    Ok(series.z[..k].iter().sum::<f64>() + series.z0)
}

/// Blocked clock restricted to large traps
/// `T_n = {x : τ(x)/c_n > ε_n, max_{y~x} τ(y) <= ε_n^(-2/α)}`.
pub fn truncated_blocked_clock(
    env: &Environment,
    traj: &Trajectory<Site>,
    scales: &ScaleSet,
    t: f64,
) -> Result<f64> {
    if traj.kind != ChainKind::Continuous {
        return Err(invalid("kind", "truncated clock is defined for continuous chains"));
    }
    let end = scales.theta_n * scales.k_n(t) as f64;
    if end > traj.horizon {
        return Err(Error::RangeExhausted {
            requested: end,
            available: traj.horizon,
        });
    }
    let mut member = rustc_hash::FxHashMap::default();
    let mut acc = 0.0;
    for seg in &traj.segments {
        if seg.start >= end {
            break;
        }
        let overlap = seg.end().min(end) - seg.start;
        let inside = *member
            .entry(seg.site)
            .or_insert_with(|| env.is_large_trap(&seg.site, scales.c_n, scales.eps_n));
        if inside {
            acc += env.tau_at(&seg.site) * overlap;
        }
    }
    Ok(acc / scales.c_n)
}

/// Clock recomputed from a ledger: `Σ_x ℓ(x) · λ̃(x)/λ(x)` (continuous) or
/// `Σ_x ℓ(x)/λ(x)` (discrete).
pub fn ledger_clock<D: Dynamics>(dynamics: &D, traj: &Trajectory<D::State>) -> f64 {
    traj.ledger
        .iter()
        .map(|(x, l)| match traj.kind {
            ChainKind::Continuous => l * dynamics.clock_weight(x),
            ChainKind::Discrete => l / dynamics.x_rate(x),
        })
        .sum()
}

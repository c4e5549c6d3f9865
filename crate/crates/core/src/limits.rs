//! Limiting objects: the α-stable subordinator and its inverse, the
//! fractional kinetics process, overshoots of monotone paths and the
//! generalised arcsine law.
//!
//! The subordinator is normalised to `ν(u, ∞) = u^(-α)`, i.e. Lévy density
//! `α u^(-α-1)` and Laplace exponent `Γ(1-α) λ^α`.

use crate::chains::ChainKind;
use crate::clock::{BlockSeries, ClockPath};
use crate::error::{invalid, Error, Result};
use crate::special::{beta_reg, gamma};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("need 0 < alpha < 1, got {alpha}")))
    }
}

/// `Asl_α(u) = (sin απ / π) ∫₀^u (1-x)^(-α) x^(α-1) dx = I_u(α, 1-α)`.
pub fn arcsine_cdf(alpha: f64, u: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid("u", format!("need 0 <= u <= 1, got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(1.0);
    }
    beta_reg(alpha, 1.0 - alpha, u)
}

/// `Asl_α(1/(1+ρ))`, the aging target for window ratio `ρ`.
pub fn arcsine_target(alpha: f64, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(invalid("rho", format!("need rho >= 0, got {rho}")));
    }
    arcsine_cdf(alpha, 1.0 / (1.0 + rho))
}

/// Treatment of jumps below the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallJumps {
    /// Discarded; the path is a pure compound Poisson process.
    Dropped,
    /// Replaced by their mean, a linear drift `α δ^(1-α)/(1-α)`.
    #[default]
    Compensated,
}

/// Approximate sampler for the unit stable subordinator: jumps above `δ` are
/// exact, jumps below `δ` are dropped or compensated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subordinator {
    alpha: f64,
    cutoff: f64,
    small: SmallJumps,
    rate: f64,
    drift: f64,
}

/// Default standard deviation, per unit time, of the discarded small-jump
/// fluctuation.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

impl Subordinator {
    pub fn new(alpha: f64, cutoff: f64, small: SmallJumps) -> Result<Self> {
        check_alpha(alpha)?;
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(invalid("cutoff", format!("need a positive cutoff, got {cutoff}")));
        }
        let drift = match small {
            SmallJumps::Dropped => 0.0,
            SmallJumps::Compensated => alpha * cutoff.powf(1.0 - alpha) / (1.0 - alpha),
        };
        Ok(Subordinator {
            alpha,
            cutoff,
            small,
            rate: cutoff.powf(-alpha),
            drift,
        })
    }

    /// Compensated sampler whose neglected small-jump noise has standard
    /// deviation `tol` per unit time: `sqrt(α/(2-α)) δ^(1-α/2) = tol`.
    pub fn with_tolerance(alpha: f64, tol: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(tol > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        let cutoff = (tol / (alpha / (2.0 - alpha)).sqrt()).powf(1.0 / (1.0 - alpha / 2.0));
        Self::new(alpha, cutoff, SmallJumps::Compensated)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn small_jumps(&self) -> SmallJumps {
        self.small
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Rate of jumps above the cutoff, `δ^(-α)`.
    pub fn jump_rate(&self) -> f64 {
        self.rate
    }

    /// Unbounded stream of `(time, size)` jumps above the cutoff.
    pub fn jumps<'r, R: Rng>(&self, rng: &'r mut R) -> Jumps<'r, R> {
        Jumps {
            rng,
            rate: self.rate,
            cutoff: self.cutoff,
            neg_inv_alpha: -1.0 / self.alpha,
            time: 0.0,
        }
    }

    /// Path on `[0, horizon]`.
    pub fn sample_path<R: Rng>(&self, horizon: f64, rng: &mut R) -> Result<SubordinatorPath> {
        if !(horizon > 0.0) {
            return Err(invalid("horizon", format!("need horizon > 0, got {horizon}")));
        }
        let mut jump_times = Vec::new();
        let mut jump_sizes = Vec::new();
        for (t, j) in self.jumps(rng) {
            if t > horizon {
                break;
            }
            jump_times.push(t);
            jump_sizes.push(j);
        }
        Ok(SubordinatorPath {
            jump_times,
            jump_sizes,
            drift: self.drift,
            small_jump_cutoff: self.cutoff,
            horizon,
        })
    }

    /// `V(t)` at a single time, without storing the path.
    pub fn sample_value<R: Rng>(&self, t: f64, rng: &mut R) -> f64 {
        let mut v = self.drift * t;
        for (s, j) in self.jumps(rng) {
            if s > t {
                break;
            }
            v += j;
        }
        v
    }

    /// First passage above `level`, streaming: `(L, V(L))`.
    pub fn sample_passage<R: Rng>(&self, level: f64, rng: &mut R) -> Passage {
        let mut before = 0.0;
        let mut last = 0.0;
        for (s, j) in self.jumps(rng) {
            if let Some(p) = drift_crossing(before, last, s, self.drift, level) {
                return p;
            }
            let after = before + self.drift * (s - last) + j;
            if after > level {
                return Passage { time: s, value: after };
            }
            before = after;
            last = s;
        }
        unreachable!("jump stream is unbounded")
    }

    /// Overshoot `χ_u = V(L_u) - u`.
    pub fn sample_overshoot<R: Rng>(&self, level: f64, rng: &mut R) -> f64 {
        self.sample_passage(level, rng).value - level
    }

    /// `V^←(t)` at sorted `times`, streaming.
    pub fn sample_inverse<R: Rng>(&self, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("times", "must be non-negative and sorted"));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut idx = 0;
        let mut before = 0.0;
        let mut last = 0.0;
        let mut jumps = self.jumps(rng);
        while idx < times.len() {
            let (s, j) = jumps.next().unwrap();
            while idx < times.len() {
                match drift_crossing(before, last, s, self.drift, times[idx]) {
                    Some(p) => {
                        out.push(p.time);
                        idx += 1;
                    }
                    None => break,
                }
            }
            let after = before + self.drift * (s - last) + j;
            while idx < times.len() && after > times[idx] {
                out.push(s);
                idx += 1;
            }
            before = after;
            last = s;
        }
        Ok(out)
    }
}

/// Crossing of `level` by the drift on `[last, next)` starting from `before`.
fn drift_crossing(before: f64, last: f64, next: f64, drift: f64, level: f64) -> Option<Passage> {
    if before > level {
        return Some(Passage { time: last, value: before });
    }
    if drift > 0.0 && before + drift * (next - last) > level {
        let time = last + (level - before) / drift;
        return Some(Passage { time, value: level });
    }
    None
}

/// Jump iterator of a [`Subordinator`].
pub struct Jumps<'r, R: Rng> {
    rng: &'r mut R,
    rate: f64,
    cutoff: f64,
    neg_inv_alpha: f64,
    time: f64,
}

impl<R: Rng> Iterator for Jumps<'_, R> {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        let e: f64 = self.rng.sample(Exp1);
        self.time += e / self.rate;
        let u: f64 = 1.0 - self.rng.random::<f64>();
        Some((self.time, self.cutoff * u.powf(self.neg_inv_alpha)))
    }
}

/// Exact marginal `V(t) = t^(1/α) Γ(1-α)^(1/α) S` with `S` positive stable,
/// `E e^(-λS) = e^(-λ^α)`, drawn by Kanter's representation.
pub fn sample_stable_marginal<R: Rng>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let e: f64 = rng.sample(Exp1);
    let pu = std::f64::consts::PI * u;
    let a = ((alpha * pu).sin().powf(alpha) * ((1.0 - alpha) * pu).sin().powf(1.0 - alpha) / pu.sin())
        .powf(1.0 / (1.0 - alpha));
    let s = (a / e).powf((1.0 - alpha) / alpha);
    (t * gamma(1.0 - alpha)).powf(1.0 / alpha) * s
}

/// `E V^←(t) = t^α sin(πα) / (πα)` for the unit subordinator.
pub fn mean_inverse(alpha: f64, t: f64) -> f64 {
    let pa = std::f64::consts::PI * alpha;
    t.powf(alpha) * pa.sin() / pa
}

/// A sampled subordinator path: `V(t) = drift·t + Σ_{s_i <= t} J_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
    pub drift: f64,
    pub small_jump_cutoff: f64,
    pub horizon: f64,
}

impl SubordinatorPath {
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.jump_times.partition_point(|&s| s <= t);
        self.drift * t + self.jump_sizes[..i].iter().sum::<f64>()
    }

    /// `V^←(t) = inf{v : V(v) > t}`.
    pub fn inverse(&self, t: f64) -> Result<f64> {
        Ok(self.first_passage(t)?.time)
    }

    /// CSV `t,value` at the jump times (value after the jump).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        writeln!(w, "0,0")?;
        let mut acc = 0.0;
        for (t, j) in self.jump_times.iter().zip(&self.jump_sizes) {
            acc += j;
            writeln!(w, "{},{}", t, acc + self.drift * t)?;
        }
        writeln!(w, "{},{}", self.horizon, acc + self.drift * self.horizon)
    }
}

/// First passage of a nondecreasing path above a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Passage {
    /// `L_u = inf{t : Y(t) > u}`.
    pub time: f64,
    /// `Y(L_u)`.
    pub value: f64,
}

/// Nondecreasing càdlàg paths.
pub trait MonotonePath {
    fn first_passage(&self, level: f64) -> Result<Passage>;
}

/// `χ_u(Y) = Y(L_u) - u`.
pub fn overshoot<P: MonotonePath + ?Sized>(path: &P, level: f64) -> Result<f64> {
    Ok((path.first_passage(level)?.value - level).max(0.0))
}

impl MonotonePath for SubordinatorPath {
    fn first_passage(&self, level: f64) -> Result<Passage> {
        let mut before = 0.0;
        let mut last = 0.0;
        for (&s, &j) in self.jump_times.iter().zip(&self.jump_sizes) {
            if let Some(p) = drift_crossing(before, last, s, self.drift, level) {
                return Ok(p);
            }
            let after = before + self.drift * (s - last) + j;
            if after > level {
                return Ok(Passage { time: s, value: after });
            }
            before = after;
            last = s;
        }
        drift_crossing(before, last, self.horizon, self.drift, level).ok_or(Error::RangeExhausted {
            requested: level,
            available: self.value_at(self.horizon),
        })
    }
}

impl MonotonePath for ClockPath {
    fn first_passage(&self, level: f64) -> Result<Passage> {
        let time = self.inverse(level)?;
        let value = match self.kind() {
            ChainKind::Continuous => self.value_at(time)?.max(level),
            ChainKind::Discrete => self.value_at(time)?,
        };
        Ok(Passage { time, value })
    }
}

impl MonotonePath for BlockSeries {
    fn first_passage(&self, level: f64) -> Result<Passage> {
        let mut last = 0.0;
        for (time, value) in self.steps() {
            if value > level {
                return Ok(Passage { time, value });
            }
            last = value;
        }
        Err(Error::RangeExhausted {
            requested: level,
            available: last,
        })
    }
}

/// A sample of the fractional kinetics process `Z(t) = B(V^←(t))` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkSample {
    pub alpha: f64,
    pub d: usize,
    pub times: Vec<f64>,
    /// `V^←` at each grid time.
    pub inverse_times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl FkSample {
    pub fn squared_norm(&self, i: usize) -> f64 {
        self.positions[i].iter().map(|x| x * x).sum()
    }

    /// CSV `t,x_1,...,x_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for k in 1..=self.d {
            write!(w, ",x_{k}")?;
        }
        writeln!(w)?;
        for (t, p) in self.times.iter().zip(&self.positions) {
            write!(w, "{t}")?;
            for x in p {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Sample `Z_{d,α}` at sorted `grid` times. `t = 0` is prepended when absent
/// so that `positions[0]` is the origin. The subordinator and the Brownian
/// motion use separate generators.
pub fn sample_fk<R1: Rng, R2: Rng>(
    sub: &Subordinator,
    d: usize,
    grid: &[f64],
    sub_rng: &mut R1,
    bm_rng: &mut R2,
) -> Result<FkSample> {
    if d == 0 {
        return Err(invalid("d", "need d >= 1"));
    }
    let mut times = Vec::with_capacity(grid.len() + 1);
    if grid.first().is_none_or(|&t| t > 0.0) {
        times.push(0.0);
    }
    times.extend_from_slice(grid);
    let mut inverse_times = sub.sample_inverse(&times, sub_rng)?;
    inverse_times[0] = 0.0;
    let mut positions = vec![vec![0.0; d]];
    for i in 1..times.len() {
        let dt = inverse_times[i] - inverse_times[i - 1];
        let sd = dt.sqrt();
        let next: Vec<f64> = positions[i - 1]
            .iter()
            .map(|x| x + sd * bm_rng.sample::<f64, _>(StandardNormal))
            .collect();
        positions.push(next);
    }
    Ok(FkSample {
        alpha: sub.alpha(),
        d,
        times,
        inverse_times,
        positions,
    })
}

/// Sup of `|B(r)|` over `[0, length]` for a `d`-dimensional Brownian motion
/// started at 0, resolved by midpoint bridge refinement.
///
/// Returns the first refinement level (grid of `2^level` intervals) at which
/// the discretised sup exceeds `radius`, or `None` if it stays within the
/// radius through `max_level`. The discretised sup is nondecreasing in the
/// level, so the event "sup <= radius at level `l`" is `level > l`.
pub fn brownian_exit_level<R: Rng>(
    d: usize,
    length: f64,
    radius: f64,
    max_level: u32,
    rng: &mut R,
) -> Option<u32> {
    if length <= 0.0 {
        return None;
    }
    let norm = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>().sqrt();
    let end: Vec<f64> = (0..d)
        .map(|_| length.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    if norm(&end) > radius {
        return Some(0);
    }
    // points[i] holds B at i·h for the current mesh h
    let mut points = vec![vec![0.0; d], end];
    let mut h = length;
    for level in 1..=max_level {
        let sd = (h / 4.0).sqrt();
        let mut refined = Vec::with_capacity(2 * points.len() - 1);
        let mut exceeded = false;
        for w in points.windows(2) {
            refined.push(w[0].clone());
            let mid: Vec<f64> = w[0]
                .iter()
                .zip(&w[1])
                .map(|(a, b)| 0.5 * (a + b) + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            exceeded |= norm(&mid) > radius;
            refined.push(mid);
        }
        refined.push(points.last().unwrap().clone());
        if exceeded {
            return Some(level);
        }
        points = refined;
        h /= 2.0;
    }
    None
}

//! Two-time correlation functions of the trap dynamics `X` and of the
//! fractional kinetics limit, compared against the arcsine law.
//!
//! For each trajectory the walk `J` is run together with its clock until the
//! clock passes the last requested time `s(1+ρ)`. Since `X` is constant on the
//! physical interval `[S(v-), S(v))` of each sojourn, the positions and window
//! maxima needed below are exact, with no time grid.

use crate::chains::{ChainKind, Walker};
use crate::clock::{ScaleSet, ThetaPolicy};
use crate::dynamics::{Dynamics, Ensemble};
use crate::env::EnvConfig;
use crate::error::{invalid, Error, Result};
use crate::limits::{arcsine_target, brownian_exit_level, Subordinator};
use crate::parallel::map_chunks;
use crate::rng::{mix_pair, stream, Stream};
use crate::stats::{binomial_se, Moments};
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AgingKind {
    C1,
    C2,
    C3,
    #[serde(rename = "Ceps_batm")]
    CepsBatm,
    #[serde(rename = "Ceps_fk")]
    CepsFk,
}

impl fmt::Display for AgingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgingKind::C1 => "C1",
            AgingKind::C2 => "C2",
            AgingKind::C3 => "C3",
            AgingKind::CepsBatm => "Ceps_batm",
            AgingKind::CepsFk => "Ceps_fk",
        })
    }
}

/// One correlation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgingPoint {
    pub kind: AgingKind,
    pub s: f64,
    pub rho: f64,
    pub eps: Option<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub n_env: u64,
    pub n_traj_per_env: u64,
    pub excluded: u64,
    pub arcsine_target: f64,
    /// Standard deviation of the per-environment estimates.
    pub env_sd: f64,
    /// `env_sd` with the within-environment binomial noise removed.
    pub env_sd_corrected: f64,
}

/// Per-environment (quenched) estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgingEnvRow {
    pub kind: AgingKind,
    pub s: f64,
    pub rho: f64,
    pub eps: Option<f64>,
    pub env_index: u64,
    pub env_seed: u64,
    pub estimate: f64,
    pub n_traj: u64,
    pub excluded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgingResult {
    pub points: Vec<AgingPoint>,
    pub per_env: Vec<AgingEnvRow>,
    pub events: u64,
    pub excluded: u64,
}

impl AgingResult {
    pub fn point(&self, kind: AgingKind, rho: f64, eps: Option<f64>) -> Option<&AgingPoint> {
        self.points
            .iter()
            .find(|p| p.kind == kind && p.rho == rho && p.eps == eps)
    }
}

/// What to measure at one age `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgingSpec {
    pub s: f64,
    pub rhos: Vec<f64>,
    /// Levels for the rescaled correlation `C^ε`; may be empty.
    pub eps: Vec<f64>,
    /// Ball radius of `C²`.
    pub radius: f64,
    /// Spatial scale `a_s`; `C^ε` uses radius `ε a_s^(1/2)`.
    pub a_s: f64,
    /// Index of the arcsine target.
    pub alpha: f64,
    pub n_env: u64,
    pub n_traj: u64,
    /// Jump events allowed per trajectory before it is excluded.
    pub max_events: u64,
    pub seed: u64,
    pub workers: usize,
}

impl AgingSpec {
    /// Trap-model defaults: `n = ⌊s⌋`, `C²` radius `(θ_s ln θ_s)^(1/2)` and
    /// `a_s` from the scaling sequences.
    pub fn batm(cfg: &EnvConfig, s: f64, rhos: Vec<f64>, policy: ThetaPolicy) -> Result<Self> {
        if !(s >= 3.0) {
            return Err(invalid("s", format!("need s >= 3, got {s}")));
        }
        let scales = ScaleSet::batm(s.floor() as u64, cfg.alpha, cfg.d, policy)?;
        Ok(AgingSpec {
            s,
            rhos,
            eps: Vec::new(),
            radius: scales.ball_radius(),
            a_s: scales.a_n,
            alpha: cfg.alpha,
            n_env: 200,
            n_traj: 50,
            max_events: 1_000_000_000,
            seed: cfg.env_seed,
            workers: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(invalid("s", format!("need s > 0, got {}", self.s)));
        }
        if self.rhos.is_empty() || self.rhos.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("rho", "need at least one finite rho > 0"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("eps", "need eps > 0"));
        }
        if !(self.radius >= 0.0) || !(self.a_s > 0.0) {
            return Err(invalid("radius", "need radius >= 0 and a_s > 0"));
        }
        if self.n_env == 0 || self.n_traj == 0 {
            return Err(invalid("n_env, n_traj", "need at least one environment and trajectory"));
        }
        if self.max_events == 0 {
            return Err(invalid("max_events", "must be positive"));
        }
        arcsine_target(self.alpha, 1.0).map(|_| ())
    }
}

/// Outcome of one trajectory, per `ρ`: whether `X(s) = X(s(1+ρ))` and the
/// largest distance from `X(s)` seen during `(s, s(1+ρ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub same: Vec<bool>,
    pub max_dist: Vec<f64>,
    pub events: u64,
}

/// Runs one trajectory of `X` until physical time `s(1+max ρ)`.
pub fn observe_windows<D: Dynamics>(
    dynamics: &D,
    start: D::State,
    seed: u64,
    s: f64,
    rhos: &[f64],
    max_events: u64,
) -> Result<WindowOutcome> {
    let ends: Vec<f64> = rhos.iter().map(|r| s * (1.0 + r)).collect();
    let last = ends.iter().cloned().fold(s, f64::max);
    let mut order: Vec<usize> = (0..rhos.len()).collect();
    order.sort_by(|&a, &b| ends[a].total_cmp(&ends[b]));
    let mut same = vec![false; rhos.len()];
    let mut max_dist = vec![0.0; rhos.len()];
    let mut anchor: Option<D::State> = None;
    let mut running = 0.0f64;
    let mut next = 0;
    let mut clock = 0.0;
    let mut events = 0u64;
    for seg in Walker::new(dynamics, ChainKind::Continuous, start, seed) {
        events += 1;
        if events > max_events {
            return Err(Error::EventCapExceeded { cap: max_events });
        }
        let (p0, p1) = (clock, clock + seg.clock);
        clock = p1;
        if p1 <= s {
            continue;
        }
        let x = seg.site;
        let a = *anchor.get_or_insert(x);
        // windows that close inside this sojourn
        while next < order.len() && ends[order[next]] < p1 {
            let r = order[next];
            same[r] = x == a;
            max_dist[r] = if ends[r] > p0.max(s) { running.max(dynamics.distance(&a, &x)) } else { running };
            next += 1;
        }
        if p0 > s || (p0 <= s && p1 > s && next < order.len()) {
            running = running.max(dynamics.distance(&a, &x));
        }
        if next == order.len() && p1 > last {
            break;
        }
    }
    Ok(WindowOutcome {
        same,
        max_dist,
        events,
    })
}

/// Estimates `C¹, C², C³` for every `ρ` and `C^ε` for every `ε`, from the
/// same trajectories. Environment `i` is `ensemble.realize(i)`; trajectory
/// `j` in it uses seed `mix_pair(mix_pair(seed, i), j)`.
pub fn estimate_batm<E: Ensemble>(
    ensemble: &E,
    start: <E::Dyn as Dynamics>::State,
    spec: &AgingSpec,
) -> Result<AgingResult> {
    spec.validate()?;
    let total = spec.n_env * spec.n_traj;
    let outcomes: Vec<Vec<Option<WindowOutcome>>> = map_chunks(spec.workers, total, |r| {
        r.map(|idx| {
            let (i, j) = (idx / spec.n_traj, idx % spec.n_traj);
            let d = ensemble.realize(i);
            let seed = mix_pair(mix_pair(spec.seed, i), j);
            match observe_windows(&d, start, seed, spec.s, &spec.rhos, spec.max_events) {
                Ok(o) => Some(o),
                Err(Error::EventCapExceeded { .. }) => None,
                Err(e) => panic!("unexpected trajectory failure: {e}"),
            }
        })
        .collect()
    });
    let outcomes: Vec<Option<WindowOutcome>> = outcomes.into_iter().flatten().collect();

    // (kind, rho index, eps) in output order
    let mut cells: Vec<(AgingKind, usize, Option<f64>)> = Vec::new();
    for r in 0..spec.rhos.len() {
        for k in [AgingKind::C1, AgingKind::C2, AgingKind::C3] {
            cells.push((k, r, None));
        }
        for &e in &spec.eps {
            cells.push((AgingKind::CepsBatm, r, Some(e)));
        }
    }
    let event = |cell: &(AgingKind, usize, Option<f64>), o: &WindowOutcome| -> bool {
        let (kind, r, eps) = *cell;
        let inside = o.max_dist[r] <= spec.radius;
        match kind {
            AgingKind::C1 => o.same[r],
            AgingKind::C2 => inside,
            AgingKind::C3 => o.same[r] && inside,
            _ => o.max_dist[r] <= eps.unwrap() * spec.a_s.sqrt(),
        }
    };

    let mut points = Vec::new();
    let mut per_env = Vec::new();
    let excluded = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let events = outcomes.iter().flatten().map(|o| o.events).sum();
    for cell in &cells {
        let rho = spec.rhos[cell.1];
        let mut env_means = Moments::default();
        let mut noise = 0.0;
        let mut pooled = Moments::default();
        for i in 0..spec.n_env {
            let slice = &outcomes[(i * spec.n_traj) as usize..((i + 1) * spec.n_traj) as usize];
            let m = Moments::from_iter(slice.iter().flatten().map(|o| f64::from(u8::from(event(cell, o)))));
            pooled.merge(&m);
            let ex = spec.n_traj - m.count;
            let est = if m.count > 0 { m.mean() } else { f64::NAN };
            if m.count > 0 {
                env_means.push(est);
                noise += est * (1.0 - est) / m.count as f64;
            }
            per_env.push(AgingEnvRow {
                kind: cell.0,
                s: spec.s,
                rho,
                eps: cell.2,
                env_index: i,
                env_seed: mix_pair(spec.seed, i),
                estimate: est,
                n_traj: m.count,
                excluded: ex,
            });
        }
        let (estimate, std_error) = if env_means.count >= 2 {
            (env_means.mean(), env_means.std_error())
        } else {
            let p = pooled.mean();
            (p, binomial_se(p, pooled.count))
        };
        let env_sd = if env_means.count >= 2 { env_means.std_dev() } else { 0.0 };
        let corrected = if env_means.count >= 2 {
            (env_sd * env_sd - noise / env_means.count as f64).max(0.0).sqrt()
        } else {
            0.0
        };
        points.push(AgingPoint {
            kind: cell.0,
            s: spec.s,
            rho,
            eps: cell.2,
            estimate,
            std_error,
            n_env: spec.n_env,
            n_traj_per_env: spec.n_traj,
            excluded,
            arcsine_target: arcsine_target(spec.alpha, rho)?,
            env_sd,
            env_sd_corrected: corrected,
        });
    }
    Ok(AgingResult {
        points,
        per_env,
        events,
        excluded,
    })
}

/// Settings of the fractional kinetics correlation `C^ε(1, ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FkAgingSpec {
    pub alpha: f64,
    pub d: usize,
    pub rhos: Vec<f64>,
    pub eps: Vec<f64>,
    pub n_samples: u64,
    /// Small-jump tolerance of the subordinator sampler.
    pub tolerance: f64,
    /// Finest Brownian grid is `2^max_level` intervals.
    pub max_level: u32,
    pub seed: u64,
    pub workers: usize,
}

impl FkAgingSpec {
    pub fn new(alpha: f64, d: usize, rhos: Vec<f64>, eps: Vec<f64>, n_samples: u64, seed: u64) -> Self {
        FkAgingSpec {
            alpha,
            d,
            rhos,
            eps,
            n_samples,
            tolerance: crate::limits::DEFAULT_TOLERANCE,
            max_level: 14,
            seed,
            workers: 1,
        }
    }
}

/// FK correlation estimate with its refinement diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkAgingPoint {
    pub point: AgingPoint,
    /// Grid level at which the estimate stabilised.
    pub level: u32,
    pub converged: bool,
    /// Samples still inside the ball at the finest level.
    pub flagged: u64,
}

/// `C^ε(1,ρ) = P(max_{v∈(1,1+ρ)} |Z(1) - Z(v)| <= ε)` for `Z = B(V^←)`.
///
/// The window maps to the Brownian time interval
/// `[V^←(1), V^←(1+ρ)]`; if `V` jumps over the whole window it is empty and
/// the event holds. Otherwise the Brownian sup over it is refined by midpoint
/// bisection; the reported level is the first at which the estimate moves by
/// less than half its standard error.
pub fn estimate_ceps_fk(spec: &FkAgingSpec) -> Result<Vec<FkAgingPoint>> {
    if spec.n_samples == 0 || spec.d == 0 {
        return Err(invalid("n_samples, d", "need n_samples >= 1 and d >= 1"));
    }
    if spec.rhos.iter().any(|r| !(*r > 0.0)) || spec.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("rho, eps", "must be positive"));
    }
    let sub = Subordinator::with_tolerance(spec.alpha, spec.tolerance)?;
    let (nr, ne) = (spec.rhos.len(), spec.eps.len());
    // exit level per (rho, eps); u32::MAX = never left the ball
    let levels: Vec<Vec<u32>> = map_chunks(spec.workers, spec.n_samples, |r| {
        r.flat_map(|i| {
            let seed = mix_pair(spec.seed, i);
            let mut times = vec![1.0];
            times.extend(spec.rhos.iter().map(|r| 1.0 + r));
            let mut order: Vec<usize> = (0..times.len()).collect();
            order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
            let sorted: Vec<f64> = order.iter().map(|&k| times[k]).collect();
            let inv_sorted = sub
                .sample_inverse(&sorted, &mut stream(seed, Stream::Subordinator))
                .expect("sorted grid");
            let mut inv = vec![0.0; times.len()];
            for (k, &o) in order.iter().enumerate() {
                inv[o] = inv_sorted[k];
            }
            let mut out = Vec::with_capacity(nr * ne);
            for r in 0..nr {
                let length = inv[r + 1] - inv[0];
                for (e, &eps) in spec.eps.iter().enumerate() {
                    let mut rng = stream(mix_pair(seed, (r * ne + e) as u64), Stream::Brownian);
                    out.push(fk_exit_level(spec.d, length, eps, spec.max_level, &mut rng));
                }
            }
            std::iter::once(out)
        })
        .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let n = spec.n_samples;
    let mut points = Vec::new();
    for (r, &rho) in spec.rhos.iter().enumerate() {
        let target = arcsine_target(spec.alpha, rho)?;
        for (e, &eps) in spec.eps.iter().enumerate() {
            let col: Vec<u32> = levels.iter().map(|l| l[r * ne + e]).collect();
            let est_at = |lvl: u32| col.iter().filter(|&&x| x > lvl).count() as f64 / n as f64;
            let mut level = spec.max_level;
            let mut converged = false;
            for lvl in 1..=spec.max_level {
                let (cur, prev) = (est_at(lvl), est_at(lvl - 1));
                if (cur - prev).abs() < 0.5 * binomial_se(cur, n).max(0.5 / n as f64) {
                    level = lvl;
                    converged = true;
                    break;
                }
            }
            let estimate = est_at(level);
            let flagged = col.iter().filter(|&&x| x == FK_UNRESOLVED).count() as u64;
            points.push(FkAgingPoint {
                point: AgingPoint {
                    kind: AgingKind::CepsFk,
                    s: 1.0,
                    rho,
                    eps: Some(eps),
                    estimate,
                    std_error: binomial_se(estimate, n),
                    n_env: 1,
                    n_traj_per_env: n,
                    excluded: 0,
                    arcsine_target: target,
                    env_sd: 0.0,
                    env_sd_corrected: 0.0,
                },
                level,
                converged,
                flagged,
            });
        }
    }
    Ok(points)
}

const FK_INSIDE: u32 = u32::MAX;
const FK_UNRESOLVED: u32 = u32::MAX - 1;

/// Exit level of the Brownian sup over `[0, length]`; `FK_INSIDE` when the
/// window is empty or so short that leaving the ball has probability below
/// `4d e^(-20)`, `FK_UNRESOLVED` when still inside at `max_level`.
fn fk_exit_level<R: rand::Rng>(d: usize, length: f64, eps: f64, max_level: u32, rng: &mut R) -> u32 {
    if length <= 0.0 || length * 40.0 * d as f64 <= eps * eps {
        return FK_INSIDE;
    }
    brownian_exit_level(d, length, eps, max_level, rng).unwrap_or(FK_UNRESOLVED)
}

//! Batch experiments: configuration, seed fan-out, CSV outputs and the run
//! manifest.
//!
//! Seeds fan out from one master seed: environment `i` has seed
//! `mix_pair(master, i)` and trajectory `j` in it `mix_pair(env_seed_i, j)`.
//! Every CSV depends only on the configuration and the master seed, never on
//! the number of workers.

use crate::aging::{estimate_batm, estimate_ceps_fk, AgingPoint, AgingSpec, FkAgingSpec};
use crate::chains::{run, ChainKind, TrajectoryConfig};
use crate::clock::{block_series, build_clock, ScaleSet, ThetaPolicy};
use crate::dynamics::{Annealed, Disorder, TrapEnsemble};
use crate::env::{EnvConfig, Environment, Site};
use crate::error::Error;
use crate::estimators::{ConditionEstimate, ConditionEstimator, ConditionName};
use crate::limits::{
    arcsine_target, mean_inverse, sample_fk, SmallJumps, Subordinator, DEFAULT_TOLERANCE,
};
use crate::parallel::map_chunks;
use crate::rng::{mix_pair, stream, Stream};
use crate::stats::{log_log_slope, Moments};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Experiment subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Conditions,
    Overshoot,
    Aging,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Simulate => "simulate",
            Command::Conditions => "conditions",
            Command::Overshoot => "overshoot",
            Command::Aging => "aging",
        })
    }
}

/// Failure of an experiment run.
#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("runtime cap exceeded: {0}")]
    Cap(Error),
    #[error("simulation error: {0}")]
    Runtime(Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 for validation failures, 3 for exceeded runtime
    /// caps, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Validation(_) => 2,
            ExperimentError::Cap(_) => 3,
            _ => 1,
        }
    }
}

impl From<Error> for ExperimentError {
    fn from(e: Error) -> Self {
        match e {
            Error::EventCapExceeded { .. } | Error::RefinementCap { .. } => ExperimentError::Cap(e),
            other => ExperimentError::Runtime(other),
        }
    }
}

fn validation(e: Error) -> ExperimentError {
    ExperimentError::Validation(e.to_string())
}

type Res<T> = std::result::Result<T, ExperimentError>;

/// Landscape parameters; the environment seed comes from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub d: usize,
    pub alpha: f64,
    pub theta: f64,
    pub c_bar: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            d: 2,
            alpha: 0.5,
            theta: 0.0,
            c_bar: 1.0,
        }
    }
}

impl EnvSection {
    pub fn config(&self, env_seed: u64) -> EnvConfig {
        EnvConfig {
            d: self.d,
            alpha: self.alpha,
            theta: self.theta,
            c_bar: self.c_bar,
            env_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub kind: ChainKind,
    pub n_env: u64,
    pub n_traj: u64,
    /// Internal-time horizon of `J` (number of steps for discrete chains).
    pub horizon: f64,
    /// Scale index used for the block series.
    pub n: u64,
    /// Blocks are cut up to `k_n(t)`.
    pub t: f64,
    pub max_events: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            kind: ChainKind::Continuous,
            n_env: 1,
            n_traj: 1,
            horizon: 1000.0,
            n: 10_000,
            t: 1.0,
            max_events: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    pub disorder: Disorder,
    pub kind: ChainKind,
    pub n: Vec<u64>,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub eps: Vec<f64>,
    pub n_traj: u64,
    /// Radius of the box for π; defaults to `d_n(t)`.
    pub box_radius: Option<f64>,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        ConditionsSection {
            disorder: Disorder::Quenched,
            kind: ChainKind::Continuous,
            n: vec![10_000],
            t: vec![1.0, 2.0],
            u: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            eps: vec![0.1, 0.2, 0.4],
            n_traj: 2000,
            box_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OvershootSection {
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub n_paths: u64,
    /// Level `u` of the overshoot `χ_u`.
    pub level: f64,
    /// Explicit small-jump cutoff; when absent it follows from `tolerance`.
    pub cutoff: Option<f64>,
    pub tolerance: f64,
    pub small_jumps: SmallJumps,
    /// Horizon of the dumped example path.
    pub path_horizon: f64,
    pub fk_alphas: Vec<f64>,
    pub fk_d: usize,
    pub fk_times: Vec<f64>,
    pub fk_paths: u64,
}

impl Default for OvershootSection {
    fn default() -> Self {
        OvershootSection {
            alphas: vec![0.3, 0.5, 0.8],
            rhos: vec![0.5, 1.0, 3.0],
            n_paths: 10_000,
            level: 1.0,
            cutoff: None,
            tolerance: DEFAULT_TOLERANCE,
            small_jumps: SmallJumps::Compensated,
            path_horizon: 1.0,
            fk_alphas: vec![0.5, 0.8],
            fk_d: 2,
            fk_times: vec![1.0, 3.0, 10.0, 30.0, 100.0],
            fk_paths: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgingSection {
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    /// Levels of the rescaled correlation for the trap model.
    pub eps: Vec<f64>,
    pub n_env: u64,
    pub n_traj: u64,
    pub max_events: u64,
    /// Overrides the `C²` ball radius `(θ_s ln θ_s)^(1/2)`.
    pub radius: Option<f64>,
    pub fk_eps: Vec<f64>,
    pub fk_d: Vec<usize>,
    pub fk_samples: u64,
    pub fk_max_level: u32,
}

impl Default for AgingSection {
    fn default() -> Self {
        AgingSection {
            s: vec![1e3, 1e4, 1e5],
            rho: vec![0.5, 1.0, 3.0],
            eps: vec![0.05],
            n_env: 200,
            n_traj: 50,
            max_events: 1_000_000_000,
            radius: None,
            fk_eps: vec![0.05, 0.02],
            fk_d: vec![2],
            fk_samples: 10_000,
            fk_max_level: 14,
        }
    }
}

/// Full experiment configuration, read from TOML. Every section and field is
/// optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub env: EnvSection,
    pub theta_policy: ThetaPolicy,
    pub simulate: SimulateSection,
    pub conditions: ConditionsSection,
    pub overshoot: OvershootSection,
    pub aging: AgingSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 1,
            workers: 1,
            out: None,
            env: EnvSection::default(),
            theta_policy: ThetaPolicy::default(),
            simulate: SimulateSection::default(),
            conditions: ConditionsSection::default(),
            overshoot: OvershootSection::default(),
            aging: AgingSection::default(),
        }
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Res<()> {
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::Validation(msg.into()))
    }
}

fn nonempty_positive(name: &str, xs: &[f64]) -> Res<()> {
    check(
        !xs.is_empty() && xs.iter().all(|x| *x > 0.0 && x.is_finite()),
        format!("{name} must be a non-empty list of finite positive numbers"),
    )
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Res<Self> {
        toml::from_str(s).map_err(|e| ExperimentError::Validation(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Res<Self> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks every parameter the command will use. Nothing is simulated
    /// before this passes.
    pub fn validate(&self, command: Command) -> Res<()> {
        check(self.workers >= 1, "workers must be at least 1")?;
        self.env.config(0).validate().map_err(validation)?;
        match command {
            Command::Simulate => {
                let s = &self.simulate;
                check(s.n_env >= 1 && s.n_traj >= 1, "simulate.n_env and n_traj must be >= 1")?;
                check(s.max_events >= 1, "simulate.max_events must be >= 1")?;
                check(s.t > 0.0, "simulate.t must be positive")?;
                TrajectoryConfig::new(0, s.kind, Site::origin(self.env.d), s.horizon)
                    .validate()
                    .map_err(validation)?;
                let scales = self.scales(s.n)?;
                let needed = scales.theta_n * scales.k_n(s.t) as f64;
                check(
                    needed <= s.horizon,
                    format!("simulate.horizon {} is shorter than the {needed} needed for blocks up to t = {}", s.horizon, s.t),
                )?;
            }
            Command::Conditions => {
                let c = &self.conditions;
                check(c.n_traj >= 1, "conditions.n_traj must be >= 1")?;
                check(!c.n.is_empty(), "conditions.n must not be empty")?;
                nonempty_positive("conditions.t", &c.t)?;
                check(c.u.iter().all(|u| *u > 0.0), "conditions.u must be positive")?;
                check(c.eps.iter().all(|e| *e >= 0.0), "conditions.eps must be non-negative")?;
                if let Some(r) = c.box_radius {
                    check(r >= 0.0, "conditions.box_radius must be non-negative")?;
                }
                for &n in &c.n {
                    let scales = self.scales(n)?;
                    for &t in &c.t {
                        check(
                            scales.k_n(t) >= 2,
                            format!("k_n(t) = {} < 2 for n = {n}, t = {t}", scales.k_n(t)),
                        )?;
                    }
                }
            }
            Command::Overshoot => {
                let o = &self.overshoot;
                check(o.n_paths >= 1 && o.fk_paths >= 1, "overshoot path counts must be >= 1")?;
                nonempty_positive("overshoot.rhos", &o.rhos)?;
                check(o.level > 0.0, "overshoot.level must be positive")?;
                check(o.tolerance > 0.0, "overshoot.tolerance must be positive")?;
                check(o.path_horizon > 0.0, "overshoot.path_horizon must be positive")?;
                check(o.fk_d >= 1, "overshoot.fk_d must be >= 1")?;
                nonempty_positive("overshoot.fk_times", &o.fk_times)?;
                check(
                    o.fk_times.windows(2).all(|w| w[0] < w[1]),
                    "overshoot.fk_times must be increasing",
                )?;
                for &a in o.alphas.iter().chain(&o.fk_alphas) {
                    self.subordinator(a)?;
                }
            }
            Command::Aging => {
                let a = &self.aging;
                check(a.n_env >= 1 && a.n_traj >= 1, "aging.n_env and n_traj must be >= 1")?;
                check(a.max_events >= 1, "aging.max_events must be >= 1")?;
                nonempty_positive("aging.rho", &a.rho)?;
                check(a.eps.iter().all(|e| *e > 0.0), "aging.eps must be positive")?;
                check(a.fk_eps.iter().all(|e| *e > 0.0), "aging.fk_eps must be positive")?;
                check(a.fk_d.iter().all(|d| *d >= 1), "aging.fk_d must be >= 1")?;
                check(a.fk_samples >= 1, "aging.fk_samples must be >= 1")?;
                for &s in &a.s {
                    self.aging_spec(s)?.validate().map_err(validation)?;
                }
            }
        }
        Ok(())
    }

    fn scales(&self, n: u64) -> Res<ScaleSet> {
        ScaleSet::batm(n, self.env.alpha, self.env.d, self.theta_policy).map_err(validation)
    }

    fn subordinator(&self, alpha: f64) -> Res<Subordinator> {
        let o = &self.overshoot;
        match o.cutoff {
            Some(c) => Subordinator::new(alpha, c, o.small_jumps),
            None => Subordinator::with_tolerance(alpha, o.tolerance).and_then(|s| {
                Subordinator::new(alpha, s.cutoff(), o.small_jumps)
            }),
        }
        .map_err(validation)
    }

    fn aging_spec(&self, s: f64) -> Res<AgingSpec> {
        let a = &self.aging;
        let mut spec = AgingSpec::batm(&self.env.config(self.master_seed), s, a.rho.clone(), self.theta_policy)
            .map_err(validation)?;
        spec.eps = a.eps.clone();
        spec.n_env = a.n_env;
        spec.n_traj = a.n_traj;
        spec.max_events = a.max_events;
        spec.seed = self.master_seed;
        spec.workers = self.workers;
        if let Some(r) = a.radius {
            spec.radius = r;
        }
        Ok(spec)
    }
}

/// Checksummed output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub build: String,
    pub config: ExperimentConfig,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
    pub events: u64,
}

pub fn build_id() -> String {
    format!("trapclock {}", env!("CARGO_PKG_VERSION"))
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Res<Self> {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Res<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        write_file(&self.dir, name, body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn entries(&self) -> Res<Vec<FileEntry>> {
        let mut names = self.files.clone();
        names.sort();
        names
            .iter()
            .map(|name| {
                let path = self.dir.join(name);
                let data = fs::read(&path).map_err(|source| ExperimentError::Io { path, source })?;
                let digest = Sha256::digest(&data);
                Ok(FileEntry {
                    name: name.clone(),
                    bytes: data.len() as u64,
                    sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
                })
            })
            .collect()
    }
}

fn write_file<F>(dir: &Path, name: &str, body: F) -> Res<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let io = |source| ExperimentError::Io {
        path: path.clone(),
        source,
    };
    let file = fs::File::create(&path).map_err(io)?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Runs `command`, writing CSVs and `manifest.json` into `out`.
pub fn run_command(command: Command, config: &ExperimentConfig, out: &Path) -> Res<RunManifest> {
    config.validate(command)?;
    let started = Instant::now();
    let mut output = Output::new(out)?;
    let events = match command {
        Command::Simulate => simulate(config, &mut output)?,
        Command::Conditions => conditions(config, &mut output)?,
        Command::Overshoot => overshoot(config, &mut output)?,
        Command::Aging => aging(config, &mut output)?,
    };
    let manifest = RunManifest {
        command,
        build: build_id(),
        config: config.clone(),
        files: output.entries()?,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        events,
    };
    write_file(out, "manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    Ok(manifest)
}

fn simulate(config: &ExperimentConfig, output: &mut Output) -> Res<u64> {
    let s = &config.simulate;
    let scales = config.scales(s.n)?;
    let total = s.n_env * s.n_traj;
    let dir = output.dir.clone();
    type Written = Res<(u64, [String; 3])>;
    let results: Vec<Vec<Written>> = map_chunks(config.workers, total, |r| {
        r.map(|idx| {
            let (i, j) = (idx / s.n_traj, idx % s.n_traj);
            let env_seed = mix_pair(config.master_seed, i);
            let env = Environment::new(config.env.config(env_seed))?;
            let mut cfg = TrajectoryConfig::new(mix_pair(env_seed, j), s.kind, env.origin(), s.horizon);
            cfg.max_events = s.max_events;
            let traj = run(&env, &cfg)?;
            let clock = build_clock(&traj);
            let blocks = block_series(&clock, &scales, s.t)?;
            let names = [
                format!("trajectory_{i}_{j}.csv"),
                format!("clock_{i}_{j}.csv"),
                format!("blocks_{i}_{j}.csv"),
            ];
            write_file(&dir, &names[0], |w| traj.write_csv(w))?;
            write_file(&dir, &names[1], |w| clock.write_csv(w))?;
            write_file(&dir, &names[2], |w| blocks.write_csv(w))?;
            Ok((traj.events() as u64, names))
        })
        .collect()
    });
    let mut events = 0;
    for r in results.into_iter().flatten() {
        let (e, names) = r?;
        events += e;
        output.files.extend(names);
    }
    Ok(events)
}

fn estimate_row(w: &mut dyn Write, e: &ConditionEstimate, n: u64, env_seed: u64, mode: Disorder) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        e.name,
        n,
        opt(e.t),
        opt(e.u.or(e.eps)),
        e.value,
        e.std_error,
        e.n_samples,
        env_seed,
        mode
    )
}

fn conditions(config: &ExperimentConfig, output: &mut Output) -> Res<u64> {
    let c = &config.conditions;
    let env_seed = mix_pair(config.master_seed, 0);
    let ensemble = TrapEnsemble::new(config.env.config(env_seed), c.disorder).map_err(validation)?;
    let origin = Site::origin(config.env.d);
    let mut summary = Vec::new();
    let mut pi_rows = Vec::new();
    let mut return_rows = Vec::new();
    let mut samples = 0;
    for &n in &c.n {
        let scales = config.scales(n)?;
        let est = ConditionEstimator::new(&ensemble, c.kind, scales, origin, config.master_seed)
            .workers(config.workers);
        for &t in &c.t {
            let f = est.block_functionals(t, &c.u, &c.eps, c.n_traj)?;
            summary.extend(f.nu.iter().chain(&f.sigma).chain(&f.m).chain(&f.a0).map(|e| (n, *e)));
            if c.u.len() >= 2 {
                let ys: Vec<f64> = f.nu.iter().map(|e| e.value).collect();
                let fit = log_log_slope(&c.u, &ys);
                summary.push((n, slope_row(t, fit, c.n_traj)));
            }
            let radius = c.box_radius.unwrap_or_else(|| scales.d_n(t));
            let pi = est.pi_t(t, c.n_traj, radius)?;
            for (x, v, se) in &pi.sites {
                pi_rows.push(format!("{n},{t},{x},{v},{se}"));
            }
            pi_rows.push(format!("{n},{t},outside,{},{}", pi.remainder.0, pi.remainder.1));
            let rs = est.return_sum(origin, t, c.n_traj)?;
            for (k, (v, se)) in rs.partial.iter().enumerate() {
                return_rows.push(format!("{n},{t},{},{v},{se}", k + 1));
            }
            summary.push((n, rs.total));
            samples += 3 * c.n_traj;
        }
    }
    output.write("conditions.csv", |w| {
        writeln!(w, "name,n,t,u_or_eps,value,std_error,n_samples,env_seed,mode")?;
        for (n, e) in &summary {
            estimate_row(w, e, *n, env_seed, c.disorder)?;
        }
        Ok(())
    })?;
    output.write("pi.csv", |w| {
        writeln!(w, "n,t,site,value,std_error")?;
        pi_rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    output.write("return_sum.csv", |w| {
        writeln!(w, "n,t,k,partial_sum,std_error")?;
        return_rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    Ok(samples)
}

/// Summary row for the regression of `log ν̂` on `log u`.
fn slope_row(t: f64, fit: crate::stats::LineFit, n_traj: u64) -> ConditionEstimate {
    ConditionEstimate {
        name: ConditionName::NuTailSlope,
        value: fit.slope,
        std_error: fit.slope_se,
        n_samples: n_traj,
        t: Some(t),
        u: None,
        eps: None,
    }
}

fn overshoot(config: &ExperimentConfig, output: &mut Output) -> Res<u64> {
    let o = &config.overshoot;
    let mut rows = Vec::new();
    let mut jumps_total = 0u64;
    for (a, &alpha) in o.alphas.iter().enumerate() {
        let sub = config.subordinator(alpha)?;
        let seed = mix_pair(config.master_seed, a as u64);
        let parts = map_chunks(config.workers, o.n_paths, |r| {
            let mut acc = vec![Moments::default(); o.rhos.len()];
            for i in r {
                let mut rng = stream(mix_pair(seed, i), Stream::Subordinator);
                let chi = sub.sample_overshoot(o.level, &mut rng);
                for (m, rho) in acc.iter_mut().zip(&o.rhos) {
                    m.push(f64::from(u8::from(chi >= rho * o.level)));
                }
            }
            acc
        });
        let mut acc = vec![Moments::default(); o.rhos.len()];
        for p in parts {
            for (m, q) in acc.iter_mut().zip(&p) {
                m.merge(q);
            }
        }
        for (m, &rho) in acc.iter().zip(&o.rhos) {
            rows.push(format!(
                "{alpha},{rho},{},{},{},{},{}",
                o.n_paths,
                m.mean(),
                if m.count > 1 { m.std_error() } else { 0.0 },
                arcsine_target(alpha, rho)?,
                sub.cutoff()
            ));
        }
        let path = sub.sample_path(
            o.path_horizon,
            &mut stream(mix_pair(seed, u64::MAX), Stream::Subordinator),
        )?;
        jumps_total += path.jump_times.len() as u64;
        output.write(&format!("subordinator_path_{a}.csv"), |w| path.write_csv(w))?;
    }
    output.write("overshoot.csv", |w| {
        writeln!(w, "alpha,rho,n_paths,empirical,std_error,arcsine_target,cutoff")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;

    let mut msd_rows = Vec::new();
    let mut slope_rows = Vec::new();
    for (a, &alpha) in o.fk_alphas.iter().enumerate() {
        let sub = config.subordinator(alpha)?;
        let seed = mix_pair(config.master_seed, 1000 + a as u64);
        let nt = o.fk_times.len();
        let parts = map_chunks(config.workers, o.fk_paths, |r| {
            let mut acc = vec![Moments::default(); nt];
            for i in r {
                let ps = mix_pair(seed, i);
                let sample = sample_fk(
                    &sub,
                    o.fk_d,
                    &o.fk_times,
                    &mut stream(ps, Stream::Subordinator),
                    &mut stream(ps, Stream::Brownian),
                )
                .expect("validated grid");
                let offset = sample.times.len() - nt;
                for (k, m) in acc.iter_mut().enumerate() {
                    m.push(sample.squared_norm(k + offset));
                }
            }
            acc
        });
        let mut acc = vec![Moments::default(); nt];
        for p in parts {
            for (m, q) in acc.iter_mut().zip(&p) {
                m.merge(q);
            }
        }
        let msd: Vec<f64> = acc.iter().map(|m| m.mean()).collect();
        for (k, &t) in o.fk_times.iter().enumerate() {
            msd_rows.push(format!(
                "{alpha},{},{t},{},{},{}",
                o.fk_d,
                msd[k],
                if acc[k].count > 1 { acc[k].std_error() } else { 0.0 },
                o.fk_d as f64 * mean_inverse(alpha, t)
            ));
        }
        if nt >= 2 {
            let fit = log_log_slope(&o.fk_times, &msd);
            slope_rows.push(format!("{alpha},{},{},{}", o.fk_d, fit.slope, fit.slope_se));
        }
        let t_max = *o.fk_times.last().unwrap();
        let grid: Vec<f64> = (1..=200).map(|k| t_max * k as f64 / 200.0).collect();
        let ps = mix_pair(seed, u64::MAX);
        let sample = sample_fk(
            &sub,
            o.fk_d,
            &grid,
            &mut stream(ps, Stream::Subordinator),
            &mut stream(ps, Stream::Brownian),
        )?;
        output.write(&format!("fk_path_{a}.csv"), |w| sample.write_csv(w))?;
    }
    output.write("fk_msd.csv", |w| {
        writeln!(w, "alpha,d,t,msd,std_error,theory")?;
        msd_rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    output.write("fk_slope.csv", |w| {
        writeln!(w, "alpha,d,slope,slope_se")?;
        slope_rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    Ok(o.n_paths * o.alphas.len() as u64 + o.fk_paths * o.fk_alphas.len() as u64 + jumps_total)
}

fn aging_row(w: &mut dyn Write, p: &AgingPoint, d: usize) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.kind,
        p.s,
        p.rho,
        opt(p.eps),
        p.estimate,
        p.std_error,
        p.arcsine_target,
        p.n_env,
        p.n_traj_per_env,
        p.excluded,
        p.env_sd,
        p.env_sd_corrected,
        d
    )
}

fn aging(config: &ExperimentConfig, output: &mut Output) -> Res<u64> {
    let a = &config.aging;
    let ensemble = Annealed::new(config.env.config(config.master_seed)).map_err(validation)?;
    let origin = Site::origin(config.env.d);
    let mut points = Vec::new();
    let mut env_rows = Vec::new();
    let mut events = 0;
    for &s in &a.s {
        let spec = config.aging_spec(s)?;
        let res = estimate_batm(&ensemble, origin, &spec)?;
        if res.excluded == a.n_env * a.n_traj {
            return Err(ExperimentError::Cap(Error::EventCapExceeded { cap: a.max_events }));
        }
        events += res.events;
        points.extend(res.points.iter().map(|p| (*p, config.env.d)));
        env_rows.extend(res.per_env);
    }
    for (k, &d) in a.fk_d.iter().enumerate() {
        if a.fk_eps.is_empty() {
            break;
        }
        let mut spec = FkAgingSpec::new(
            config.env.alpha,
            d,
            a.rho.clone(),
            a.fk_eps.clone(),
            a.fk_samples,
            mix_pair(config.master_seed, u64::MAX - k as u64),
        );
        spec.max_level = a.fk_max_level;
        spec.workers = config.workers;
        for p in estimate_ceps_fk(&spec)? {
            points.push((p.point, d));
        }
    }
    output.write("aging.csv", |w| {
        writeln!(
            w,
            "kind,s,rho,eps,estimate,std_error,arcsine_target,n_env,n_traj,excluded,env_sd,env_sd_corrected,d"
        )?;
        points.iter().try_for_each(|(p, d)| aging_row(w, p, *d))
    })?;
    output.write("aging_env.csv", |w| {
        writeln!(w, "kind,s,rho,eps,env_index,env_seed,estimate,n_traj,excluded")?;
        for r in &env_rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.kind,
                r.s,
                r.rho,
                opt(r.eps),
                r.env_index,
                r.env_seed,
                r.estimate,
                r.n_traj,
                r.excluded
            )?;
        }
        Ok(())
    })?;
    Ok(events)
}

//! Wang-Landau molecular dynamics.
//!
//! Parameters follow unit-mass Langevin dynamics in the potential
//! `kT * S(x, y)`, where `S` is the running entropy estimate over the
//! collective variables. After every `deposit_interval` steps a Gaussian
//! of amplitude `f(t)` is added to `S` at the current `(x, y)`. Box
//! boundaries reflect. [`run_plain_md`] runs the same integrator on the
//! train loss itself, without any bias.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kv::{fmt_f64, KeyValues};
use crate::landscape::{EntropyGrid, GridSpec};
use crate::nn::{Batch, Network, Scalar, Task};
use crate::toy::{QuadraticWell, TOY_Y};
use crate::trajectory::{TrajectoryLog, TrajectoryRecord};
use crate::{Error, Result};

/// Deposition amplitude schedule: linear ramp to `f_max` at `t1`, plateau
/// until `t2`, then decay as `(t2 - t3) / (t - t3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub f_max: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_max > 0.0
            && self.f_max.is_finite()
            && self.t1 > 0.0
            && self.t1 <= self.t2
            && self.t3 < self.t2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "schedule needs f_max > 0, 0 < t1 <= t2 and t3 < t2".into(),
            ))
        }
    }
}

pub fn schedule_f(t: f64, s: &Schedule) -> f64 {
    if t <= s.t1 {
        t / s.t1 * s.f_max
    } else if t <= s.t2 {
        s.f_max
    } else {
        s.f_max * (s.t2 - s.t3) / (t - s.t3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlmdConfig {
    pub dt: f64,
    pub friction: f64,
    pub kt: f64,
    pub schedule: Schedule,
    pub deposit_interval: u64,
    pub total_steps: u64,
    pub seed: u64,
    /// Sharpness of the smoothed-accuracy collective variable.
    pub alpha: f64,
    /// One trajectory row every this many steps; 0 disables.
    pub log_interval: u64,
}

impl Default for WlmdConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            friction: 0.01,
            kt: 1.0,
            schedule: Schedule { f_max: 1.0, t1: 1e4, t2: 1e5, t3: 0.0 },
            deposit_interval: 1,
            total_steps: 100_000,
            seed: 0,
            alpha: 5.0,
            log_interval: 1000,
        }
    }
}

impl WlmdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.friction >= 0.0 && self.friction.is_finite()) {
            return bad("friction must be >= 0");
        }
        if !(self.kt >= 0.0 && self.kt.is_finite()) {
            return bad("kT must be >= 0");
        }
        if self.deposit_interval == 0 {
            return bad("deposit_interval must be >= 1");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        self.schedule.validate()
    }
}

/// Tabulated sampler settings for one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPreset {
    pub name: &'static str,
    pub sigma: f64,
    pub cutoff: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub schedule: Schedule,
    pub dt: f64,
    pub friction: f64,
}

impl TaskPreset {
    /// Config with this preset's schedule, timestep and friction.
    pub fn config(&self, total_steps: u64, seed: u64) -> WlmdConfig {
        WlmdConfig {
            dt: self.dt,
            friction: self.friction,
            schedule: self.schedule,
            total_steps,
            seed,
            ..Default::default()
        }
    }

    /// Kernel grid over the given ranges with this preset's walls.
    pub fn grid_spec(&self, x_range: (f64, f64), y_range: (f64, f64)) -> GridSpec {
        GridSpec::for_kernel(x_range, y_range, self.sigma, self.cutoff).with_walls(
            self.x_max,
            self.y_max,
            crate::landscape::DEFAULT_WALL_CONSTANT,
        )
    }
}

const fn preset(
    name: &'static str,
    sigma: f64,
    cutoff: f64,
    x_max: f64,
    y_max: f64,
    (f_max, t1, t2, t3): (f64, f64, f64, f64),
    dt: f64,
    friction: f64,
) -> TaskPreset {
    TaskPreset { name, sigma, cutoff, x_max, y_max, schedule: Schedule { f_max, t1, t2, t3 }, dt, friction }
}

pub const PRESETS: [TaskPreset; 5] = [
    preset("house", 0.5, 2.0, -1.0, 5.0, (20.0, 5e5, 5e5, 0.0), 1e-4, 0.01),
    preset("mnist", 0.2, 0.8, 2.0, 0.95, (3.0, 2e5, 1e7, 8e6), 3e-6, 1e-5),
    preset("polymer", 0.5, 2.0, 0.0, 5.0, (20.0, 1e6, 1e6, 0.0), 3e-5, 0.01),
    preset("cifar", 0.3, 1.2, 1.0, 1.0, (20.0, 3e5, 2e6, 0.0), 2e-5, 1e-4),
    preset("spiral-regression", 0.2, 0.8, -0.5, f64::INFINITY, (5.0, 2e5, 1e7, 8e6), 5e-5, 3e-5),
];

pub fn find_preset(name: &str) -> Option<&'static TaskPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Collective variables and their parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    pub x: f64,
    pub y: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// `x` was not finite and has been replaced by the grid's lower edge.
    pub x_clamped: bool,
}

/// A parameter vector with differentiable collective variables.
pub trait CvSystem {
    fn bounds(&self) -> Vec<f64>;
    fn collective_state(&self, params: &[f64]) -> Result<CollectiveState>;
    /// Hard metric in grid `y` units, for logging.
    fn raw_metric(&self, params: &[f64]) -> Result<f64>;
    /// `y` is a smoothed stand-in for the raw metric.
    fn smoothed_y(&self) -> bool {
        false
    }
}

/// `x = ln L_train`; `y` = smoothed test accuracy or `ln L_test`.
pub struct NetworkCv<'a> {
    pub net: &'a Network,
    pub train: &'a Batch,
    pub test: &'a Batch,
    pub alpha: f64,
}

impl<'a> NetworkCv<'a> {
    pub fn new(net: &'a Network, train: &'a Batch, test: &'a Batch, alpha: f64) -> Self {
        Self { net, train, test, alpha }
    }
}

/// `(ln v, ∇v / v)`. A zero `v` yields `-inf` and a zero gradient.
fn log_with_grad(v: f64, mut g: Vec<f64>) -> (f64, Vec<f64>) {
    if v > 0.0 {
        let inv = 1.0 / v;
        g.iter_mut().for_each(|gi| *gi *= inv);
        (v.ln(), g)
    } else {
        g.iter_mut().for_each(|gi| *gi = 0.0);
        (f64::NEG_INFINITY, g)
    }
}

impl CvSystem for NetworkCv<'_> {
    fn bounds(&self) -> Vec<f64> {
        self.net.spec().bounds()
    }

    fn collective_state(&self, params: &[f64]) -> Result<CollectiveState> {
        let (lt, gt) = self.net.value_and_gradient(params, self.train, Scalar::Loss)?;
        let (x, grad_x) = log_with_grad(lt, gt);
        let (y, grad_y) = match self.net.task() {
            Task::Classification { .. } => {
                self.net.value_and_gradient(
                    params,
                    self.test,
                    Scalar::SmoothedAccuracy { alpha: self.alpha },
                )?
            }
            Task::Regression => {
                let (l, g) = self.net.value_and_gradient(params, self.test, Scalar::Loss)?;
                let (y, g) = log_with_grad(l, g);
                (y, g)
            }
        };
        Ok(CollectiveState { x, y, grad_x, grad_y, x_clamped: false })
    }

    fn raw_metric(&self, params: &[f64]) -> Result<f64> {
        match self.net.task() {
            Task::Classification { .. } => self.net.accuracy(params, self.test),
            Task::Regression => Ok(self.net.loss(params, self.test)?.ln()),
        }
    }

    fn smoothed_y(&self) -> bool {
        self.net.task().is_classification()
    }
}

impl CvSystem for QuadraticWell {
    fn bounds(&self) -> Vec<f64> {
        vec![self.bound_value(); self.dim()]
    }

    fn collective_state(&self, params: &[f64]) -> Result<CollectiveState> {
        let u: f64 = params.iter().map(|t| t * t).sum();
        let g = params.iter().map(|t| 2.0 * t).collect();
        let (x, grad_x) = log_with_grad(u, g);
        Ok(CollectiveState { x, y: TOY_Y, grad_x, grad_y: vec![0.0; params.len()], x_clamped: false })
    }

    fn raw_metric(&self, _: &[f64]) -> Result<f64> {
        Ok(TOY_Y)
    }
}

/// `F = -kT (∂S/∂x ∇x + ∂S/∂y ∇y)`.
pub fn bias_force(grid: &EntropyGrid, cs: &CollectiveState, kt: f64) -> Vec<f64> {
    let (sx, sy) = grid.gradient(cs.x, cs.y);
    cs.grad_x
        .iter()
        .zip(&cs.grad_y)
        .map(|(gx, gy)| -kt * (sx * gx + sy * gy))
        .collect()
}

/// Mirrors every coordinate back into `[-b, b]`, negating the velocity
/// once per mirror. Returns the number of reflections.
pub fn reflect(params: &mut [f64], velocities: &mut [f64], bounds: &[f64]) -> u64 {
    let mut count = 0;
    for ((p, v), &b) in params.iter_mut().zip(velocities.iter_mut()).zip(bounds) {
        if !p.is_finite() {
            continue;
        }
        while p.abs() > b {
            *p = if *p > b { 2.0 * b - *p } else { -2.0 * b - *p };
            *v = -*v;
            count += 1;
        }
    }
    count
}

/// One Euler-Maruyama step with unit mass followed by reflection.
pub fn langevin_step(
    params: &mut [f64],
    velocities: &mut [f64],
    force: &[f64],
    bounds: &[f64],
    dt: f64,
    friction: f64,
    kt: f64,
    rng: &mut ChaCha8Rng,
) -> u64 {
    let noise = (2.0 * friction * kt * dt).sqrt();
    for ((p, v), f) in params.iter_mut().zip(velocities.iter_mut()).zip(force) {
        let xi: f64 = if noise > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
        *v += dt * (f - friction * *v) + noise * xi;
        *p += dt * *v;
    }
    reflect(params, velocities, bounds)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WlmdStats {
    pub steps: u64,
    pub reflections: u64,
    /// Steps whose train loss underflowed, so `x` was clamped.
    pub x_faults: u64,
    /// Steps whose collective variables could not be evaluated.
    pub faults: u64,
    /// `Σ f(t) * kernel mass` over all deposits.
    pub deposited: f64,
    pub deposits: u64,
}

pub struct WangLandauMd<C: CvSystem> {
    system: C,
    grid: EntropyGrid,
    config: WlmdConfig,
    bounds: Vec<f64>,
    params: Vec<f64>,
    velocities: Vec<f64>,
    rng: ChaCha8Rng,
    stats: WlmdStats,
    log: TrajectoryLog,
    current: Option<CollectiveState>,
}

impl<C: CvSystem> WangLandauMd<C> {
    pub fn new(system: C, params: Vec<f64>, grid_spec: GridSpec, config: WlmdConfig) -> Result<Self> {
        config.validate()?;
        let bounds = system.bounds();
        if params.len() != bounds.len() {
            return Err(Error::Shape(format!("{} parameters for {} bounds", params.len(), bounds.len())));
        }
        if params.iter().zip(&bounds).any(|(p, b)| !(p.abs() <= *b)) {
            return Err(Error::InvalidConfig("initial parameters outside the box".into()));
        }
        let mut grid = EntropyGrid::new(grid_spec)?;
        grid.provenance = "wlmd gaussian".into();
        Ok(Self {
            velocities: vec![0.0; params.len()],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            system,
            grid,
            config,
            bounds,
            params,
            stats: WlmdStats::default(),
            log: TrajectoryLog::new(),
            current: None,
        })
    }

    pub fn grid(&self) -> &EntropyGrid {
        &self.grid
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn stats(&self) -> &WlmdStats {
        &self.stats
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn system(&self) -> &C {
        &self.system
    }

    pub fn into_parts(self) -> (EntropyGrid, TrajectoryLog, WlmdStats, Vec<f64>) {
        (self.grid, self.log, self.stats, self.params)
    }

    /// Collective state at the current parameters, with faults counted.
    fn eval_state(&mut self) -> Result<CollectiveState> {
        let mut cs = match self.system.collective_state(&self.params) {
            Ok(cs) => cs,
            Err(e) => {
                self.stats.faults += 1;
                return Err(e);
            }
        };
        if !cs.x.is_finite() {
            cs.x = self.grid.spec().x.lo;
            cs.x_clamped = true;
            self.stats.x_faults += 1;
        }
        Ok(cs)
    }

    /// Force, integrator step and deposit for one time step.
    pub fn step(&mut self) -> Result<()> {
        let cs = match self.current.take() {
            Some(cs) => cs,
            None => self.eval_state()?,
        };
        let force = bias_force(&self.grid, &cs, self.config.kt);
        self.stats.reflections += langevin_step(
            &mut self.params,
            &mut self.velocities,
            &force,
            &self.bounds,
            self.config.dt,
            self.config.friction,
            self.config.kt,
            &mut self.rng,
        );
        debug_assert!(self.params.iter().zip(&self.bounds).all(|(p, b)| p.abs() <= *b));
        self.stats.steps += 1;
        let t = self.stats.steps;
        let cs = self.eval_state()?;

        let f_t = schedule_f(t as f64, &self.config.schedule);
        if t % self.config.deposit_interval == 0 && f_t > 0.0 {
            self.stats.deposited += self.grid.deposit_gaussian(cs.x, cs.y, f_t);
            self.stats.deposits += 1;
        }
        let li = self.config.log_interval;
        if li > 0 && t % li == 0 {
            let raw = self.system.raw_metric(&self.params)?;
            self.log.push(TrajectoryRecord {
                step: t,
                x: cs.x,
                y_raw: raw,
                y_smoothed: self.system.smoothed_y().then_some(cs.y),
                f_t,
                clamp_count: self.grid.clamp_events(),
            });
        }
        self.current = Some(cs);
        Ok(())
    }
    /// Runs until `total_steps`, calling `on_block` every `block` steps.
    pub fn run_with(&mut self, block: u64, mut on_block: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        while self.stats.steps < self.config.total_steps {
            self.step()?;
            if block > 0 && self.stats.steps % block == 0 {
                on_block(self)?;
            }
        }
        Ok(())
    }

    /// Writes `grid.txt` and `state.txt` into `dir`.
    pub fn checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.grid.save(&dir.join("grid.txt"))?;
        let mut kv = KeyValues::new();
        kv.set("format", "wlmd-state-v1");
        kv.set("steps", self.stats.steps);
        kv.set("reflections", self.stats.reflections);
        kv.set("x_faults", self.stats.x_faults);
        kv.set("faults", self.stats.faults);
        kv.set("deposits", self.stats.deposits);
        kv.set("deposited", fmt_f64(self.stats.deposited));
        kv.set_rng("rng", &self.rng);
        kv.set_list("params", &self.params);
        kv.set_list("velocities", &self.velocities);
        kv.write(&dir.join("state.txt"))
    }

    pub fn resume(system: C, config: WlmdConfig, dir: &Path) -> Result<Self> {
        config.validate()?;
        let grid = EntropyGrid::load(&dir.join("grid.txt"))?;
        let path = dir.join("state.txt");
        let kv = KeyValues::read(&path)?;
        if kv.get("format") != Some("wlmd-state-v1") {
            return Err(Error::format(&path, "unsupported state format"));
        }
        let bounds = system.bounds();
        let params = kv.list_required("params", &path)?;
        let velocities = kv.list_required("velocities", &path)?;
        if params.len() != bounds.len() || velocities.len() != bounds.len() {
            return Err(Error::format(&path, "parameter count does not match the system"));
        }
        Ok(Self {
            system,
            grid,
            bounds,
            params,
            velocities,
            rng: kv.rng("rng", &path)?,
            stats: WlmdStats {
                steps: kv.parse_required("steps")?,
                reflections: kv.parse_required("reflections")?,
                x_faults: kv.parse_required("x_faults")?,
                faults: kv.parse_required("faults")?,
                deposits: kv.parse_required("deposits")?,
                deposited: kv.parse_required("deposited")?,
            },
            log: TrajectoryLog::new(),
            current: None,
            config,
        })
    }
}

/// Runs WLMD from `params` for `config.total_steps` steps.
pub fn run_wlmd<C: CvSystem>(
    system: C,
    params: Vec<f64>,
    grid_spec: GridSpec,
    config: WlmdConfig,
) -> Result<(EntropyGrid, TrajectoryLog, WlmdStats)> {
    let mut md = WangLandauMd::new(system, params, grid_spec, config)?;
    md.run_with(0, |_| Ok(()))?;
    let (grid, log, stats, _) = md.into_parts();
    Ok((grid, log, stats))
}

/// A potential for unbiased dynamics, plus what to log along the way.
pub trait Potential {
    fn bounds(&self) -> Vec<f64>;
    fn energy_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Test metric in grid `y` units.
    fn observe(&self, params: &[f64]) -> Result<f64>;
}

/// Train loss as the potential; logs hard test accuracy or `ln L_test`.
pub struct TrainLoss<'a> {
    pub net: &'a Network,
    pub train: &'a Batch,
    pub test: &'a Batch,
}

impl Potential for TrainLoss<'_> {
    fn bounds(&self) -> Vec<f64> {
        self.net.spec().bounds()
    }

    fn energy_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.net.value_and_gradient(params, self.train, Scalar::Loss)
    }

    fn observe(&self, params: &[f64]) -> Result<f64> {
        match self.net.task() {
            Task::Classification { .. } => self.net.accuracy(params, self.test),
            Task::Regression => Ok(self.net.loss(params, self.test)?.ln()),
        }
    }
}

impl Potential for QuadraticWell {
    fn bounds(&self) -> Vec<f64> {
        vec![self.bound_value(); self.dim()]
    }

    fn energy_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((params.iter().map(|t| t * t).sum(), params.iter().map(|t| 2.0 * t).collect()))
    }

    fn observe(&self, _: &[f64]) -> Result<f64> {
        Ok(TOY_Y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdConfig {
    pub dt: f64,
    pub friction: f64,
    pub kt: f64,
    pub total_steps: u64,
    pub seed: u64,
    pub log_interval: u64,
}

impl Default for MdConfig {
    fn default() -> Self {
        Self { dt: 1e-2, friction: 1.0, kt: 0.005, total_steps: 100_000, seed: 0, log_interval: 100 }
    }
}

impl MdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.friction >= 0.0 && self.kt >= 0.0) {
            return Err(Error::InvalidConfig("need dt > 0, friction >= 0, kT >= 0".into()));
        }
        Ok(())
    }
}

/// Unbiased Langevin dynamics on a [`Potential`].
pub struct PlainMd<P: Potential> {
    potential: P,
    config: MdConfig,
    bounds: Vec<f64>,
    params: Vec<f64>,
    velocities: Vec<f64>,
    energy: f64,
    grad: Vec<f64>,
    rng: ChaCha8Rng,
    steps: u64,
}

impl<P: Potential> PlainMd<P> {
    pub fn new(potential: P, params: Vec<f64>, config: MdConfig) -> Result<Self> {
        config.validate()?;
        let bounds = potential.bounds();
        if params.len() != bounds.len() {
            return Err(Error::Shape(format!("{} parameters for {} bounds", params.len(), bounds.len())));
        }
        let (energy, grad) = potential.energy_and_gradient(&params)?;
        Ok(Self {
            velocities: vec![0.0; params.len()],
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            potential,
            config,
            bounds,
            params,
            energy,
            grad,
            steps: 0,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn velocities_mut(&mut self) -> &mut [f64] {
        &mut self.velocities
    }

    pub fn potential_energy(&self) -> f64 {
        self.energy
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.velocities.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn total_energy(&self) -> f64 {
        self.potential_energy() + self.kinetic_energy()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self) -> Result<()> {
        let force: Vec<f64> = self.grad.iter().map(|g| -g).collect();
        let c = &self.config;
        langevin_step(
            &mut self.params,
            &mut self.velocities,
            &force,
            &self.bounds,
            c.dt,
            c.friction,
            c.kt,
            &mut self.rng,
        );
        let (e, g) = self.potential.energy_and_gradient(&self.params)?;
        self.energy = e;
        self.grad = g;
        self.steps += 1;
        Ok(())
    }

    /// `(step, ln L_train, metric)` at the current state.
    pub fn record(&self) -> Result<TrajectoryRecord> {
        Ok(TrajectoryRecord {
            step: self.steps,
            x: self.energy.ln(),
            y_raw: self.potential.observe(&self.params)?,
            y_smoothed: None,
            f_t: 0.0,
            clamp_count: 0,
        })
    }
}

/// Plain Langevin run from `params`; logs every `log_interval` steps
/// including step 0.
pub fn run_plain_md<P: Potential>(potential: P, params: Vec<f64>, config: MdConfig) -> Result<TrajectoryLog> {
    let mut md = PlainMd::new(potential, params, config.clone())?;
    let mut log = TrajectoryLog::new();
    let li = config.log_interval;
    if li > 0 {
        log.push(md.record()?);
    }
    while md.steps < config.total_steps {
        md.step()?;
        if li > 0 && md.steps % li == 0 {
            log.push(md.record()?);
        }
    }
    Ok(log)
}

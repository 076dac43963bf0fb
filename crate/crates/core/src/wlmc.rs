//! Wang-Landau Monte Carlo over network parameters.
//!
//! Each step changes one randomly chosen parameter by a uniform offset of
//! half-width `step_size`, evaluates the collective variables
//! `(ln train loss, test metric)` and accepts with
//! `min(1, exp(S_old - S_new))`. The entropy of the bin the chain ends up
//! in grows by `ln f = 5 / (i + 10)` during stage `i`. The step size is
//! tuned from the acceptance rate of every `accept_window` proposals.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kv::{fmt_f64, KeyValues};
use crate::landscape::{EntropyGrid, GridSpec};
use crate::nn::{Batch, CachedEvaluator, Network, Task};
use crate::trajectory::{TrajectoryLog, TrajectoryRecord};
use crate::{Error, Result};

/// A point in collective-variable space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cv {
    pub x: f64,
    pub y: f64,
}

/// A box-constrained state that supports single-coordinate trial moves.
pub trait MoveSystem {
    fn len(&self) -> usize;
    fn value(&self, i: usize) -> f64;
    /// Coordinate `i` must stay in `[-bound(i), bound(i)]`.
    fn bound(&self, i: usize) -> f64;
    fn cv(&self) -> Cv;
    /// Collective variables with coordinate `i` set to `v`; the move stays
    /// pending until `accept` or `reject`. An error means the proposal
    /// could not be evaluated and is already rolled back.
    fn propose(&mut self, i: usize, v: f64) -> Result<Cv>;
    fn accept(&mut self);
    fn reject(&mut self);
    fn values(&self) -> Vec<f64>;
}

/// Network walker: `x = ln(train loss)`, `y` = test accuracy
/// (classification) or `ln(test loss)` (regression).
pub struct NetworkWalker<'a> {
    eval: CachedEvaluator<'a>,
    bounds: Vec<f64>,
    task: Task,
}

impl<'a> NetworkWalker<'a> {
    pub fn new(net: &'a Network, train: &'a Batch, test: &'a Batch, params: Vec<f64>) -> Result<Self> {
        let bounds = net.spec().bounds();
        Ok(Self {
            eval: CachedEvaluator::new(net, train, test, params)?,
            bounds,
            task: net.task(),
        })
    }

    fn to_cv(&self, train_loss: f64, metric: f64) -> Cv {
        Cv {
            x: train_loss.ln(),
            y: match self.task {
                Task::Classification { .. } => metric,
                Task::Regression => metric.ln(),
            },
        }
    }

    pub fn train_loss(&self) -> f64 {
        self.eval.train_loss()
    }

    pub fn test_metric(&self) -> f64 {
        self.eval.test_metric()
    }
}

impl MoveSystem for NetworkWalker<'_> {
    fn len(&self) -> usize {
        self.bounds.len()
    }

    fn value(&self, i: usize) -> f64 {
        self.eval.params()[i]
    }

    fn bound(&self, i: usize) -> f64 {
        self.bounds[i]
    }

    fn cv(&self) -> Cv {
        self.to_cv(self.eval.train_loss(), self.eval.test_metric())
    }

    fn propose(&mut self, i: usize, v: f64) -> Result<Cv> {
        let (tl, tm) = self.eval.propose(i, v)?;
        Ok(self.to_cv(tl, tm))
    }

    fn accept(&mut self) {
        self.eval.accept();
    }

    fn reject(&mut self) {
        self.eval.reject();
    }

    fn values(&self) -> Vec<f64> {
        self.eval.params().to_vec()
    }
}

/// `ln f` for stage `i`.
pub fn modification_factor(stage: usize) -> f64 {
    5.0 / (stage as f64 + 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlmcConfig {
    pub n_stages: usize,
    pub steps_per_stage: u64,
    pub initial_step_size: f64,
    pub accept_window: u64,
    pub accept_low: f64,
    pub accept_high: f64,
    /// Relative step-size change applied outside the acceptance band.
    pub step_adjust: f64,
    pub seed: u64,
    /// Record one trajectory row every this many steps; 0 disables.
    pub log_interval: u64,
    /// Minimum/mean ratio of the stage histogram required to end a stage.
    /// `None` ends every stage after `steps_per_stage` steps.
    pub flatness: Option<f64>,
    /// Reject proposals whose collective variables fall outside the grid
    /// range instead of clamping them into the edge bins.
    pub confine: bool,
    /// Upper bound on `steps_per_stage` blocks per stage in flatness mode.
    pub max_blocks_per_stage: u64,
}

impl Default for WlmcConfig {
    fn default() -> Self {
        Self {
            n_stages: 300,
            steps_per_stage: 100_000,
            initial_step_size: 0.1,
            accept_window: 1000,
            accept_low: 0.3,
            accept_high: 0.7,
            step_adjust: 0.1,
            seed: 0,
            log_interval: 10_000,
            flatness: None,
            max_blocks_per_stage: 100,
            confine: false,
        }
    }
}

impl WlmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(0.0 < self.accept_low && self.accept_low < self.accept_high && self.accept_high < 1.0) {
            return bad("need 0 < accept_low < accept_high < 1");
        }
        if !(self.initial_step_size > 0.0 && self.initial_step_size.is_finite()) {
            return bad("initial step size must be positive");
        }
        if !(self.step_adjust > 0.0 && self.step_adjust < 1.0) {
            return bad("step_adjust must lie in (0, 1)");
        }
        if self.accept_window == 0 {
            return bad("accept_window must be >= 1");
        }
        if let Some(f) = self.flatness {
            if !(f > 0.0 && f <= 1.0) {
                return bad("flatness must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

/// Step size after a window with acceptance rate `rate`.
pub fn adapt_step(step_size: f64, rate: f64, cfg: &WlmcConfig) -> f64 {
    if rate > cfg.accept_high {
        step_size * (1.0 + cfg.step_adjust)
    } else if rate < cfg.accept_low {
        step_size * (1.0 - cfg.step_adjust)
    } else {
        step_size
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WlmcStats {
    pub steps: u64,
    pub accepted: u64,
    pub out_of_box: u64,
    /// Proposals rejected for leaving the grid range in confined mode.
    pub out_of_range: u64,
    pub faults: u64,
    /// Coefficient of variation of each stage's visit histogram over the
    /// bins visited so far.
    pub stage_cv: Vec<f64>,
    /// Entropy deposited so far, summed deposit by deposit.
    pub deposited: f64,
}

impl WlmcStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

/// A Wang-Landau Monte Carlo run: sampler state plus its grid.
pub struct WangLandauMc<S: MoveSystem> {
    system: S,
    grid: EntropyGrid,
    config: WlmcConfig,
    rng: ChaCha8Rng,
    step_size: f64,
    window_trials: u64,
    window_accepts: u64,
    next_stage: usize,
    stage_hist: Vec<u64>,
    stats: WlmcStats,
    log: TrajectoryLog,
}

impl<S: MoveSystem> WangLandauMc<S> {
    pub fn new(system: S, grid_spec: GridSpec, config: WlmcConfig) -> Result<Self> {
        config.validate()?;
        let mut grid = EntropyGrid::new(grid_spec)?;
        grid.provenance = "wlmc ln_f=5/(i+10)".into();
        let n_bins = grid.entropy_values().len();
        Ok(Self {
            system,
            grid,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            step_size: config.initial_step_size,
            window_trials: 0,
            window_accepts: 0,
            next_stage: 0,
            stage_hist: vec![0; n_bins],
            stats: WlmcStats::default(),
            log: TrajectoryLog::new(),
            config,
        })
    }

    pub fn grid(&self) -> &EntropyGrid {
        &self.grid
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn stats(&self) -> &WlmcStats {
        &self.stats
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn next_stage(&self) -> usize {
        self.next_stage
    }

    pub fn into_parts(self) -> (EntropyGrid, TrajectoryLog, WlmcStats, S) {
        (self.grid, self.log, self.stats, self.system)
    }

    fn in_range(&self, cv: Cv) -> bool {
        let sp = self.grid.spec();
        sp.x.contains(cv.x) && sp.y.contains(cv.y)
    }

    fn bin_entropy(&self, cv: Cv) -> f64 {
        let (ix, iy) = self.grid.bin_index(cv.x, cv.y);
        self.grid.s(ix, iy)
    }

    /// One trial move followed by a deposit of `ln_f` at the resulting state.
    pub fn step(&mut self, ln_f: f64) {
        let n = self.system.len();
        let i = self.rng.random_range(0..n);
        let delta = self.rng.random_range(-self.step_size..=self.step_size);
        let v = self.system.value(i) + delta;
        let mut accepted = false;
        if v.abs() > self.system.bound(i) {
            self.stats.out_of_box += 1;
        } else {
            match self.system.propose(i, v) {
                Err(_) => self.stats.faults += 1,
                Ok(new) if self.config.confine && !self.in_range(new) => {
                    self.stats.out_of_range += 1;
                    self.system.reject();
                }
                Ok(new) => {
                    let ds = self.bin_entropy(self.system.cv()) - self.bin_entropy(new);
                    accepted = ds >= 0.0 || self.rng.random::<f64>() < ds.exp();
                    if accepted {
                        self.system.accept();
                        debug_assert!(self.system.value(i).abs() <= self.system.bound(i));
                    } else {
                        self.system.reject();
                    }
                }
            }
        }
        self.stats.steps += 1;
        self.window_trials += 1;
        if accepted {
            self.stats.accepted += 1;
            self.window_accepts += 1;
        }
        if self.window_trials == self.config.accept_window {
            let rate = self.window_accepts as f64 / self.window_trials as f64;
            self.step_size = adapt_step(self.step_size, rate, &self.config);
            self.window_trials = 0;
            self.window_accepts = 0;
        }

        let cv = self.system.cv();
        let (ix, iy) = self.grid.bin_index(cv.x, cv.y);
        self.grid.deposit_point(cv.x, cv.y, ln_f);
        self.stats.deposited += ln_f;
        self.stage_hist[ix * self.grid.shape().1 + iy] += 1;

        let li = self.config.log_interval;
        if li > 0 && self.stats.steps % li == 0 {
            self.log.push(TrajectoryRecord {
                step: self.stats.steps,
                x: cv.x,
                y_raw: cv.y,
                y_smoothed: None,
                f_t: ln_f,
                clamp_count: self.grid.clamp_events(),
            });
        }
    }

    fn stage_flatness(&self) -> f64 {
        let visited: Vec<u64> = self
            .stage_hist
            .iter()
            .zip(self.grid.visit_counts())
            .filter(|(_, &total)| total > 0)
            .map(|(&h, _)| h)
            .collect();
        if visited.is_empty() {
            return 0.0;
        }
        let mean = visited.iter().sum::<u64>() as f64 / visited.len() as f64;
        *visited.iter().min().unwrap() as f64 / mean
    }

    fn stage_cv(&self) -> f64 {
        let visited: Vec<f64> = self
            .stage_hist
            .iter()
            .zip(self.grid.visit_counts())
            .filter(|(_, &total)| total > 0)
            .map(|(&h, _)| h as f64)
            .collect();
        if visited.is_empty() {
            return 0.0;
        }
        let n = visited.len() as f64;
        let mean = visited.iter().sum::<f64>() / n;
        let var = visited.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n;
        var.sqrt() / mean
    }

    /// Runs the next stage to completion.
    pub fn run_stage(&mut self) {
        let ln_f = modification_factor(self.next_stage);
        self.stage_hist.iter_mut().for_each(|h| *h = 0);
        let mut blocks = 0;
        loop {
            for _ in 0..self.config.steps_per_stage {
                self.step(ln_f);
            }
            blocks += 1;
            match self.config.flatness {
                Some(th) if blocks < self.config.max_blocks_per_stage && self.stage_flatness() < th => {}
                _ => break,
            }
        }
        self.stats.stage_cv.push(self.stage_cv());
        self.next_stage += 1;
    }

    /// Runs the remaining stages, calling `on_stage` after each one.
    pub fn run_with(&mut self, mut on_stage: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        while self.next_stage < self.config.n_stages {
            self.run_stage();
            on_stage(self)?;
        }
        Ok(())
    }

    /// Writes the grid (`grid.txt`) and the run state (`state.txt`) into
    /// `dir`. Together with the system's parameters these allow an exact
    /// resume.
    pub fn checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.grid.save(&dir.join("grid.txt"))?;
        let mut kv = KeyValues::new();
        kv.set("format", "wlmc-state-v1");
        kv.set("next_stage", self.next_stage);
        kv.set("step_size", fmt_f64(self.step_size));
        kv.set("window_trials", self.window_trials);
        kv.set("window_accepts", self.window_accepts);
        kv.set_rng("rng", &self.rng);
        kv.set("steps", self.stats.steps);
        kv.set("accepted", self.stats.accepted);
        kv.set("out_of_box", self.stats.out_of_box);
        kv.set("out_of_range", self.stats.out_of_range);
        kv.set("faults", self.stats.faults);
        kv.set("deposited", fmt_f64(self.stats.deposited));
        kv.set_list("stage_cv", &self.stats.stage_cv);
        kv.set_list("params", &self.system.values());
        kv.write(&dir.join("state.txt"))
    }

    /// Rebuilds a run from a checkpoint directory. `system` must already
    /// hold the checkpointed parameters (see [`checkpoint_params`]).
    pub fn resume(system: S, config: WlmcConfig, dir: &Path) -> Result<Self> {
        config.validate()?;
        let grid = EntropyGrid::load(&dir.join("grid.txt"))?;
        let path = dir.join("state.txt");
        let kv = KeyValues::read(&path)?;
        if kv.get("format") != Some("wlmc-state-v1") {
            return Err(Error::format(&path, "unsupported state format"));
        }
        if system.values() != checkpoint_params(dir)? {
            return Err(Error::InvalidConfig("system parameters differ from checkpoint".into()));
        }
        let rng = kv.rng("rng", &path)?;
        let n_bins = grid.entropy_values().len();
        Ok(Self {
            system,
            grid,
            rng,
            step_size: kv.parse_required("step_size")?,
            window_trials: kv.parse_required("window_trials")?,
            window_accepts: kv.parse_required("window_accepts")?,
            next_stage: kv.parse_required("next_stage")?,
            stage_hist: vec![0; n_bins],
            stats: WlmcStats {
                steps: kv.parse_required("steps")?,
                accepted: kv.parse_required("accepted")?,
                out_of_box: kv.parse_required("out_of_box")?,
                out_of_range: kv.parse_required("out_of_range")?,
                faults: kv.parse_required("faults")?,
                stage_cv: kv.list_required("stage_cv", &path)?,
                deposited: kv.parse_required("deposited")?,
            },
            log: TrajectoryLog::new(),
            config,
        })
    }
}

/// Parameters stored in a checkpoint directory.
pub fn checkpoint_params(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join("state.txt");
    let kv = KeyValues::read(&path)?;
    kv.list_required("params", &path)
}

/// Runs every configured stage and returns the grid, log and statistics.
pub fn run_wlmc<S: MoveSystem>(
    system: S,
    grid_spec: GridSpec,
    config: WlmcConfig,
) -> Result<(EntropyGrid, TrajectoryLog, WlmcStats)> {
    let mut mc = WangLandauMc::new(system, grid_spec, config)?;
    mc.run_with(|_| Ok(()))?;
    let (grid, log, stats, _) = mc.into_parts();
    Ok((grid, log, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Axis;
    use crate::toy::QuadraticWell;

    fn toy_spec() -> GridSpec {
        GridSpec::new(Axis::new(-5.0, 1.4, 32), Axis::new(0.0, 1.0, 4))
    }

    fn small_config(stages: usize, steps: u64) -> WlmcConfig {
        WlmcConfig {
            n_stages: stages,
            steps_per_stage: steps,
            initial_step_size: 0.2,
            seed: 5,
            log_interval: 100,
            ..Default::default()
        }
    }

    #[test]
    fn modification_factor_schedule() {
        assert_eq!(modification_factor(0), 0.5);
        assert!((modification_factor(90) - 0.05).abs() < 1e-15);
        let v: Vec<f64> = (0..1000).map(modification_factor).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(modification_factor(1_000_000) < 1e-5);
    }

    #[test]
    fn adapt_step_band() {
        let cfg = WlmcConfig::default();
        assert!((adapt_step(1.0, 0.8, &cfg) - 1.1).abs() < 1e-15);
        assert!((adapt_step(1.0, 0.2, &cfg) - 0.9).abs() < 1e-15);
        assert_eq!(adapt_step(1.0, 0.5, &cfg), 1.0);
        assert_eq!(adapt_step(1.0, 0.7, &cfg), 1.0);
        assert_eq!(adapt_step(1.0, 0.3, &cfg), 1.0);
    }

    /// Late-stage histograms get no rougher: over 6 chains, the mean of the
    /// per-chain median CV in the last quarter of stages stays within 10% of
    /// the quarter before it. Single chains fluctuate by more than that.
    #[test]
    fn histogram_flattens_over_late_stages() {
        let spec = GridSpec::new(Axis::new(-12.0, 1.0, 64), Axis::new(0.0, 1.0, 4));
        let median = |s: &[f64]| {
            let mut v = s.to_vec();
            v.sort_by(f64::total_cmp);
            (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
        };
        let (mut third, mut fourth) = (0.0, 0.0);
        for seed in 1..=6 {
            let cfg = WlmcConfig { confine: true, seed, ..small_config(80, 10_000) };
            let (_, _, stats) = run_wlmc(QuadraticWell::new(4, 1.0, seed), spec.clone(), cfg).unwrap();
            third += median(&stats.stage_cv[40..60]) / 6.0;
            fourth += median(&stats.stage_cv[60..80]) / 6.0;
        }
        assert!(fourth <= 1.1 * third, "{third} -> {fourth}");
    }

    #[test]
    fn zero_stages_leave_initial_grid() {
        let spec = toy_spec().with_walls(0.5, f64::INFINITY, 3000.0);
        let (grid, log, stats) =
            run_wlmc(QuadraticWell::new(4, 1.0, 1), spec.clone(), small_config(0, 100)).unwrap();
        let init = EntropyGrid::new(spec).unwrap();
        assert_eq!(grid.entropy_values(), init.entropy_values());
        assert!(log.is_empty());
        assert_eq!(stats.steps, 0);
    }

    #[test]
    fn deposited_mass_is_conserved() {
        let cfg = small_config(12, 2000);
        let (grid, _, stats) = run_wlmc(QuadraticWell::new(4, 1.0, 1), toy_spec(), cfg.clone()).unwrap();
        let expected: f64 = (0..12).map(|i| 2000.0 * modification_factor(i)).sum();
        assert!((grid.total_entropy() - expected).abs() < 1e-9 * expected);
        assert!((stats.deposited - expected).abs() < 1e-9 * expected);
        assert_eq!(stats.steps, 24_000);
        assert_eq!(grid.visit_counts().iter().sum::<u64>(), 24_000);
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run_wlmc(QuadraticWell::new(4, 1.0, 1), toy_spec(), small_config(5, 3000)).unwrap();
        let b = run_wlmc(QuadraticWell::new(4, 1.0, 1), toy_spec(), small_config(5, 3000)).unwrap();
        assert_eq!(a, b);
    }

    /// Accept ratio `exp(S_old - S_new)`: with `S_new - S_old = ln 2` half
    /// of the proposals go through.
    #[test]
    fn acceptance_probability_half_at_ln2() {
        struct TwoState {
            at: f64,
            pending: f64,
        }
        impl MoveSystem for TwoState {
            fn len(&self) -> usize {
                1
            }
            fn value(&self, _: usize) -> f64 {
                0.0
            }
            fn bound(&self, _: usize) -> f64 {
                1.0
            }
            fn cv(&self) -> Cv {
                Cv { x: self.at, y: 0.3 }
            }
            fn propose(&mut self, _: usize, _: f64) -> Result<Cv> {
                self.pending = 1.5 - self.at;
                Ok(Cv { x: self.pending, y: 0.3 })
            }
            fn accept(&mut self) {
                self.at = self.pending;
            }
            fn reject(&mut self) {}
            fn values(&self) -> Vec<f64> {
                vec![0.0]
            }
        }
        let spec = GridSpec::new(Axis::new(0.0, 2.0, 4), Axis::new(0.0, 1.0, 4));
        let mut mc = WangLandauMc::new(
            TwoState { at: 0.25, pending: 0.0 },
            spec,
            WlmcConfig { initial_step_size: 0.01, ..Default::default() },
        )
        .unwrap();
        // bin 0 holds x = 0.25, bin 2 holds x = 1.25
        let trials = 200_000;
        let mut up = 0;
        for _ in 0..trials {
            mc.grid.set_s(0, 1, 0.0);
            mc.grid.set_s(2, 1, std::f64::consts::LN_2);
            mc.system.at = 0.25;
            let before = mc.stats.accepted;
            mc.step(1e-9);
            up += (mc.stats.accepted - before) as usize;
        }
        let p = up as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.005, "{p}");

        // downhill always accepted
        let before = mc.stats.accepted;
        for _ in 0..1000 {
            mc.grid.set_s(0, 1, 0.0);
            mc.grid.set_s(2, 1, -1.0);
            mc.system.at = 0.25;
            mc.step(1e-9);
        }
        assert_eq!(mc.stats.accepted - before, 1000);
    }

    #[test]
    fn out_of_box_proposals_rejected_and_redeposited() {
        // bound 1e-3 with step 0.5: nearly every move leaves the box
        let mut mc = WangLandauMc::new(
            QuadraticWell::new(2, 1e-3, 3),
            GridSpec::new(Axis::new(-20.0, 0.0, 8), Axis::new(0.0, 1.0, 4)),
            WlmcConfig { initial_step_size: 0.5, accept_window: 1_000_000, ..Default::default() },
        )
        .unwrap();
        let cv0 = mc.system().cv();
        for _ in 0..200 {
            mc.step(0.1);
        }
        assert!(mc.stats().out_of_box > 190);
        assert!(mc.system().values().iter().all(|v| v.abs() <= 1e-3));
        if mc.stats().accepted == 0 {
            let (ix, iy) = mc.grid().bin_of(cv0.x, cv0.y);
            assert!((mc.grid().s(ix, iy) - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_grid_accepts_all_in_box_moves() {
        // frozen flat grid: deposit amount negligible
        let mut mc = WangLandauMc::new(
            QuadraticWell::new(4, 1.0, 8),
            GridSpec::new(Axis::new(-30.0, 2.0, 4), Axis::new(0.0, 1.0, 4)),
            WlmcConfig { initial_step_size: 0.05, accept_window: u64::MAX, ..Default::default() },
        )
        .unwrap();
        for _ in 0..20_000 {
            mc.step(1e-300);
        }
        let s = mc.stats();
        assert_eq!(s.accepted + s.out_of_box + s.out_of_range + s.faults, s.steps);
    }

    #[test]
    fn checkpoint_resume_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(8, 1500);
        let (full_grid, _, full_stats) =
            run_wlmc(QuadraticWell::new(4, 1.0, 2), toy_spec(), cfg.clone()).unwrap();

        let mut first = WangLandauMc::new(QuadraticWell::new(4, 1.0, 2), toy_spec(), cfg.clone()).unwrap();
        for _ in 0..3 {
            first.run_stage();
        }
        first.checkpoint(dir.path()).unwrap();
        drop(first);

        let params = checkpoint_params(dir.path()).unwrap();
        let system = QuadraticWell::from_values(params, 1.0);
        let mut resumed = WangLandauMc::resume(system, cfg, dir.path()).unwrap();
        resumed.run_with(|_| Ok(())).unwrap();
        let (grid, _, stats, _) = resumed.into_parts();
        assert_eq!(grid.entropy_values(), full_grid.entropy_values());
        assert_eq!(grid.visit_counts(), full_grid.visit_counts());
        assert_eq!(stats, full_stats);
    }

    #[test]
    fn config_validation() {
        let mut c = WlmcConfig::default();
        c.accept_low = 0.8;
        assert!(c.validate().is_err());
        let mut c = WlmcConfig::default();
        c.initial_step_size = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn network_walker_cv_matches_direct_evaluation() {
        use crate::data::gen_spiral_classification;
        use crate::nn::NetworkSpec;
        let data = gen_spiral_classification(10, 3).unwrap();
        let spec = NetworkSpec::classifier(2, &[6, 6, 6], 2).unwrap();
        let net = Network::new(spec.clone()).unwrap();
        let p = spec.init_params(4);
        let mut mc = WangLandauMc::new(
            NetworkWalker::new(&net, &data.train, &data.test, p.values).unwrap(),
            GridSpec::new(Axis::new(-6.0, 3.0, 32), Axis::accuracy(data.test.len())),
            WlmcConfig { initial_step_size: 0.05, ..Default::default() },
        )
        .unwrap();
        for _ in 0..3000 {
            mc.step(0.1);
        }
        let params = mc.system().values();
        let cv = mc.system().cv();
        assert_eq!(cv.x, net.loss(&params, &data.train).unwrap().ln());
        assert_eq!(cv.y, net.accuracy(&params, &data.test).unwrap());
        assert!(params.iter().zip(spec.bounds()).all(|(v, b)| v.abs() <= b));
    }
}

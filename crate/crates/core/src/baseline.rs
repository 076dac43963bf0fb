//! Gradient-descent baselines and binned comparison curves.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::landscape::Axis;
use crate::nn::{Batch, Network, Scalar, Task};
use crate::seed::derive_seed;
use crate::trajectory::{TrajectoryLog, TrajectoryRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::InvalidConfig(format!("unknown optimizer `{s}`"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Plain SGD or Adam state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (vec![0.0; n], vec![0.0; n]),
        };
        Self { kind, lr, m, v, t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t = self.t.saturating_add(1);
                let c1 = 1.0 - ADAM_BETA1.powi(self.t);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t);
                for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    *p -= self.lr * mh / (vh.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub n_repeats: usize,
    pub seed: u64,
    /// Clip parameters back into the sampling box after every update.
    pub clamp_to_box: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.1,
            batch_size: 10,
            epochs: 1000,
            n_repeats: 100,
            seed: 0,
            clamp_to_box: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(Error::InvalidConfig(format!(
                "batch_size must lie in 1..={n_train}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    /// One record per epoch, epoch 0 being the initial state.
    pub log: TrajectoryLog,
    pub params: Vec<f64>,
    /// The loss became non-finite and the run stopped early.
    pub diverged: bool,
}

fn record(net: &Network, params: &[f64], train: &Batch, test: &Batch, epoch: usize) -> Result<TrajectoryRecord> {
    let x = net.loss(params, train)?.ln();
    let y_raw = match net.task() {
        Task::Classification { .. } => net.accuracy(params, test)?,
        Task::Regression => net.loss(params, test)?.ln(),
    };
    Ok(TrajectoryRecord { step: epoch as u64, x, y_raw, y_smoothed: None, f_t: 0.0, clamp_count: 0 })
}

/// One training run from `params`, shuffling with `rng`.
pub fn train_once(
    net: &Network,
    train: &Batch,
    test: &Batch,
    cfg: &TrainConfig,
    mut params: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<TrainRun> {
    cfg.validate(train.len())?;
    let bounds = net.spec().bounds();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut log = TrajectoryLog::new();
    log.push(record(net, &params, train, test, 0)?);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let grad = if chunk.len() == train.len() {
                net.gradient(&params, train, Scalar::Loss)
            } else {
                net.gradient(&params, &train.select(chunk), Scalar::Loss)
            };
            let grad = match grad {
                Ok(g) => g,
                Err(Error::NonFinite(_)) => return Ok(TrainRun { log, params, diverged: true }),
                Err(e) => return Err(e),
            };
            opt.step(&mut params, &grad);
            if cfg.clamp_to_box {
                for (p, b) in params.iter_mut().zip(&bounds) {
                    *p = p.clamp(-b, *b);
                }
            }
        }
        match record(net, &params, train, test, epoch) {
            Ok(r) => log.push(r),
            Err(Error::NonFinite(_)) => return Ok(TrainRun { log, params, diverged: true }),
            Err(e) => return Err(e),
        }
    }
    Ok(TrainRun { log, params, diverged: false })
}

/// `n_repeats` runs from independent box-uniform initializations.
pub fn train(net: &Network, train: &Batch, test: &Batch, cfg: &TrainConfig) -> Result<Vec<TrainRun>> {
    cfg.validate(train.len())?;
    (0..cfg.n_repeats)
        .map(|k| {
            let s = derive_seed(cfg.seed, k as u64);
            let params = net.spec().init_params(s).values;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s, 1));
            train_once(net, train, test, cfg, params, &mut rng)
        })
        .collect()
}

/// Mean `(x, y_raw)` over the final records of the runs that did not diverge.
pub fn final_means(runs: &[TrainRun]) -> Option<(f64, f64)> {
    let finals: Vec<&TrajectoryRecord> = runs.iter().filter(|r| !r.diverged).filter_map(|r| r.log.last()).collect();
    if finals.is_empty() {
        return None;
    }
    let n = finals.len() as f64;
    Some((
        finals.iter().map(|r| r.x).sum::<f64>() / n,
        finals.iter().map(|r| r.y_raw).sum::<f64>() / n,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub value: f64,
    pub count: usize,
    /// Standard error of the mean; NaN for single points and for minima.
    pub stderr: f64,
}

/// Bins every record by `x` on `axis`. Classification: mean metric with
/// its standard error. Regression: the lowest metric in the bin. Records
/// outside the axis and empty bins are skipped.
pub fn sgd_curve<'a>(logs: impl IntoIterator<Item = &'a TrajectoryLog>, axis: &Axis, task: Task) -> Vec<CurvePoint> {
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); axis.bins];
    for log in logs {
        for r in &log.records {
            if axis.contains(r.x) && r.y_raw.is_finite() {
                bins[axis.index(r.x).0].push(r.y_raw);
            }
        }
    }
    bins.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(i, v)| {
            let n = v.len();
            let (value, stderr) = match task {
                Task::Classification { .. } => {
                    let mean = v.iter().sum::<f64>() / n as f64;
                    let se = if n > 1 {
                        let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64;
                        (var / n as f64).sqrt()
                    } else {
                        f64::NAN
                    };
                    (mean, se)
                }
                Task::Regression => (v.iter().cloned().fold(f64::INFINITY, f64::min), f64::NAN),
            };
            CurvePoint { x: axis.center(i), value, count: n, stderr }
        })
        .collect()
}

//! Per-step records from samplers and trainers.
//!
//! CSV columns: `step,x,y_raw_metric,y_smoothed,f_t,clamp_count`. `x` is
//! `ln(train loss)`; `y_raw_metric` is hard test accuracy for classifiers
//! and `ln(test loss)` for regressors;
//! `y_smoothed` is empty unless a smoothed accuracy was tracked; `f_t` is
//! the deposition amplitude in force at that step (0 for trainers).

use std::path::Path;

use crate::kv::fmt_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub x: f64,
    pub y_raw: f64,
    pub y_smoothed: Option<f64>,
    pub f_t: f64,
    pub clamp_count: u64,
}

impl TrajectoryRecord {
    pub fn train_loss(&self) -> f64 {
        self.x.exp()
    }
}

const HEADER: [&str; 6] = ["step", "x", "y_raw_metric", "y_smoothed", "f_t", "clamp_count"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<TrajectoryRecord>,
}

impl TrajectoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: TrajectoryRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(HEADER)?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                fmt_f64(r.x),
                fmt_f64(r.y_raw),
                r.y_smoothed.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.f_t),
                r.clamp_count.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        if rd.headers()?.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::format(path, "unexpected trajectory header"));
        }
        let bad = |m: &str| Error::format(path, m.to_string());
        let mut log = Self::new();
        for rec in rd.records() {
            let rec = rec?;
            let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad("bad number"));
            log.push(TrajectoryRecord {
                step: rec[0].parse().map_err(|_| bad("bad step"))?,
                x: f(1)?,
                y_raw: f(2)?,
                y_smoothed: if rec[3].is_empty() { None } else { Some(f(3)?) },
                f_t: f(4)?,
                clamp_count: rec[5].parse().map_err(|_| bad("bad clamp count"))?,
            });
        }
        Ok(log)
    }
}

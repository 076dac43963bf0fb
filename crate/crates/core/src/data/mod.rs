//! Dataset generators, tabular ingestion and split persistence.
//!
//! A saved split is a directory holding `train.csv`, `test.csv` (header
//! `x0,..,x{d-1},target`) and `meta.txt` (flat `key=value`). Floats are
//! written in shortest round-trip form, so loading is bit-exact.

mod spiral;
mod tabular;

pub use spiral::{
    gen_spiral_classification, gen_spiral_classification_with, gen_spiral_regression,
    spiral_point, spiral_regression_target, SPIRAL_NOISE_STD,
};
pub use tabular::{ingest_tabular, SchemaHints, TabularSchema};

use std::path::Path;

use crate::kv::{fmt_f64, KeyValues};
use crate::nn::{Batch, Targets, Task};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub seed: u64,
    pub task: Task,
    /// Generator or ingestion parameters.
    pub params: KeyValues,
}

impl DatasetMeta {
    pub fn new(name: impl Into<String>, seed: u64, task: Task) -> Self {
        Self {
            name: name.into(),
            seed,
            task,
            params: KeyValues::new(),
        }
    }

    fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("format", "split-v1");
        kv.set("name", &self.name);
        kv.set("seed", self.seed);
        match self.task {
            Task::Classification { num_classes } => {
                kv.set("task", "classification");
                kv.set("num_classes", num_classes);
            }
            Task::Regression => kv.set("task", "regression"),
        }
        for (k, v) in self.params.iter() {
            kv.set(format!("param.{k}"), v);
        }
        kv
    }

    fn from_kv(kv: &KeyValues) -> Result<Self> {
        let task = match kv.require("task")? {
            "classification" => Task::Classification {
                num_classes: kv.parse_required("num_classes")?,
            },
            "regression" => Task::Regression,
            other => return Err(Error::InvalidConfig(format!("unknown task `{other}`"))),
        };
        let mut params = KeyValues::new();
        for (k, v) in kv.iter() {
            if let Some(name) = k.strip_prefix("param.") {
                params.set(name, v);
            }
        }
        Ok(Self {
            name: kv.require("name")?.to_string(),
            seed: kv.parse_required("seed")?,
            task,
            params,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Batch,
    pub test: Batch,
    pub meta: DatasetMeta,
}

impl DatasetSplit {
    pub fn input_dim(&self) -> usize {
        self.train.dim()
    }
}

pub fn save_split(dir: &Path, split: &DatasetSplit) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_batch(&dir.join("train.csv"), &split.train)?;
    write_batch(&dir.join("test.csv"), &split.test)?;
    split.meta.to_kv().write(&dir.join("meta.txt"))
}

pub fn load_split(dir: &Path) -> Result<DatasetSplit> {
    let meta_path = dir.join("meta.txt");
    let meta = DatasetMeta::from_kv(&KeyValues::read(&meta_path)?)?;
    let train = read_batch(&dir.join("train.csv"), meta.task)?;
    let test = read_batch(&dir.join("test.csv"), meta.task)?;
    if train.dim() != test.dim() {
        return Err(Error::format(dir, "train and test feature counts differ"));
    }
    Ok(DatasetSplit { train, test, meta })
}

fn write_batch(path: &Path, batch: &Batch) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..batch.dim()).map(|i| format!("x{i}")).collect();
    header.push("target".into());
    w.write_record(&header)?;
    for i in 0..batch.len() {
        let mut rec: Vec<String> = batch.row(i).iter().map(|&v| fmt_f64(v)).collect();
        rec.push(match batch.targets() {
            Targets::Labels(l) => l[i].to_string(),
            Targets::Values(v) => fmt_f64(v[i]),
        });
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_batch(path: &Path, task: Task) -> Result<Batch> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 2 {
        return Err(Error::format(path, "need at least one feature and a target"));
    }
    let dim = width - 1;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        for field in rec.iter().take(dim) {
            inputs.push(field.parse::<f64>().map_err(|_| {
                Error::format(path, format!("row {row}: bad number `{field}`"))
            })?);
        }
        let t = &rec[dim];
        match task {
            Task::Classification { .. } => labels.push(
                t.parse::<usize>()
                    .map_err(|_| Error::format(path, format!("row {row}: bad label `{t}`")))?,
            ),
            Task::Regression => values.push(
                t.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("row {row}: bad target `{t}`")))?,
            ),
        }
    }
    match task {
        Task::Classification { .. } => Batch::classification(inputs, dim, labels),
        Task::Regression => Batch::regression(inputs, dim, values),
    }
}

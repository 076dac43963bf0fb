//! CSV ingestion: standard scaling for numeric columns, one-hot encoding for
//! categorical ones, seeded train/test split.
//!
//! Statistics and category lists come from the training rows only. Missing
//! numeric values (`""`, `NA`, `NaN`) take the training mean, so they scale
//! to 0; missing or unseen categorical values encode as all zeros.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetMeta, DatasetSplit};
use crate::kv::fmt_f64;
use crate::nn::{Batch, Task};
use crate::{Error, Result};

const MISSING: [&str; 4] = ["", "NA", "NaN", "nan"];

fn is_missing(s: &str) -> bool {
    MISSING.contains(&s.trim())
}

fn parse_num(s: &str) -> Option<f64> {
    if is_missing(s) {
        None
    } else {
        s.trim().parse().ok()
    }
}

/// Column roles. Columns not named in `numeric` or `categorical` are
/// inferred: numeric when every non-missing value parses as a number.
#[derive(Debug, Clone, Default)]
pub struct SchemaHints {
    pub target: String,
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
    pub ignore: Vec<String>,
    /// Standard-scale the target with training statistics.
    pub scale_target: bool,
}

impl SchemaHints {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            scale_target: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularSchema {
    pub numeric_columns: Vec<String>,
    pub categorical_columns: Vec<String>,
    pub target_column: String,
    /// `(mean, std)` per numeric column; std is the population value.
    pub scaling_stats: Vec<(f64, f64)>,
    /// Sorted training categories per categorical column.
    pub category_maps: Vec<Vec<String>>,
    pub target_stats: Option<(f64, f64)>,
    pub feature_names: Vec<String>,
}

impl TabularSchema {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }
}

enum Column {
    Numeric { source: usize },
    Categorical { source: usize },
}

pub fn ingest_tabular(
    csv_path: &Path,
    hints: &SchemaHints,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetSplit, TabularSchema)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
    }
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;

    let target_idx = headers
        .iter()
        .position(|h| *h == hints.target)
        .ok_or_else(|| Error::MissingColumn(hints.target.clone()))?;
    for name in hints.numeric.iter().chain(&hints.categorical).chain(&hints.ignore) {
        if !headers.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }

    let mut targets = Vec::with_capacity(rows.len());
    for (r, rec) in rows.iter().enumerate() {
        let raw = &rec[target_idx];
        let v = raw.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
            row: r,
            column: hints.target.clone(),
            value: raw.to_string(),
        })?;
        targets.push(v);
    }

    let mut columns = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == target_idx || hints.ignore.contains(name) {
            continue;
        }
        let declared_numeric = hints.numeric.contains(name);
        let numeric = if declared_numeric {
            for (r, rec) in rows.iter().enumerate() {
                let v = &rec[c];
                if !is_missing(v) && v.trim().parse::<f64>().is_err() {
                    return Err(Error::NonNumeric {
                        row: r,
                        column: name.clone(),
                        value: v.to_string(),
                    });
                }
            }
            true
        } else if hints.categorical.contains(name) {
            false
        } else {
            rows.iter()
                .all(|rec| is_missing(&rec[c]) || rec[c].trim().parse::<f64>().is_ok())
        };
        columns.push(if numeric {
            Column::Numeric { source: c }
        } else {
            Column::Categorical { source: c }
        });
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * rows.len() as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_train == rows.len() {
        return Err(Error::EmptySplit("test"));
    }
    let (train_rows, test_rows) = order.split_at(n_train);

    let mut schema = TabularSchema {
        numeric_columns: Vec::new(),
        categorical_columns: Vec::new(),
        target_column: hints.target.clone(),
        scaling_stats: Vec::new(),
        category_maps: Vec::new(),
        target_stats: None,
        feature_names: Vec::new(),
    };
    for col in &columns {
        match *col {
            Column::Numeric { source } => {
                let vals: Vec<f64> = train_rows
                    .iter()
                    .filter_map(|&r| parse_num(&rows[r][source]))
                    .collect();
                let (mean, std) = mean_std(&vals);
                if std == 0.0 {
                    log::warn!("column `{}` is constant on the training rows; encoded as zeros", headers[source]);
                }
                schema.numeric_columns.push(headers[source].clone());
                schema.scaling_stats.push((mean, std));
                schema.feature_names.push(headers[source].clone());
            }
            Column::Categorical { source } => {
                let cats: BTreeSet<String> = train_rows
                    .iter()
                    .map(|&r| rows[r][source].trim())
                    .filter(|v| !is_missing(v))
                    .map(str::to_string)
                    .collect();
                for cat in &cats {
                    schema.feature_names.push(format!("{}={cat}", headers[source]));
                }
                schema.categorical_columns.push(headers[source].clone());
                schema.category_maps.push(cats.into_iter().collect());
            }
        }
    }

    let mut y_train: Vec<f64> = train_rows.iter().map(|&r| targets[r]).collect();
    let mut y_test: Vec<f64> = test_rows.iter().map(|&r| targets[r]).collect();
    if hints.scale_target {
        let (m, s) = mean_std(&y_train);
        let s = if s == 0.0 { 1.0 } else { s };
        for y in y_train.iter_mut().chain(y_test.iter_mut()) {
            *y = (*y - m) / s;
        }
        schema.target_stats = Some((m, s));
    }

    let encode = |idx: &[usize]| -> Vec<f64> {
        let mut out = Vec::with_capacity(idx.len() * schema.feature_count());
        for &r in idx {
            let (mut num_k, mut cat_k) = (0, 0);
            for col in &columns {
                match *col {
                    Column::Numeric { source } => {
                        let (mean, std) = schema.scaling_stats[num_k];
                        num_k += 1;
                        let v = parse_num(&rows[r][source]).unwrap_or(mean);
                        out.push(if std == 0.0 { 0.0 } else { (v - mean) / std });
                    }
                    Column::Categorical { source } => {
                        let cats = &schema.category_maps[cat_k];
                        cat_k += 1;
                        let hit = cats.binary_search_by(|c| c.as_str().cmp(rows[r][source].trim())).ok();
                        out.extend((0..cats.len()).map(|k| if Some(k) == hit { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
        out
    };

    let dim = schema.feature_count();
    if dim == 0 {
        return Err(Error::InvalidConfig("no feature columns".into()));
    }
    let train = Batch::regression(encode(train_rows), dim, y_train)?;
    let test = Batch::regression(encode(test_rows), dim, y_test)?;

    let mut meta = DatasetMeta::new("tabular", seed, Task::Regression);
    meta.params.set("source", csv_path.display());
    meta.params.set("target", &hints.target);
    meta.params.set("train_fraction", fmt_f64(train_fraction));
    meta.params.set("features", dim);
    if let Some((m, s)) = schema.target_stats {
        meta.params.set("target_mean", fmt_f64(m));
        meta.params.set("target_std", fmt_f64(s));
    }
    Ok((DatasetSplit { train, test, meta }, schema))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

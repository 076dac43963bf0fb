use std::path::{Path, PathBuf};

use entropy_core::analysis::{
    advantage_report, curves_csv, equilibrium_curve, heatmap_svg, max_entropy_curve, mean_grid, merge_curves, spearman,
};
use entropy_core::baseline::{self, final_means, sgd_curve, CurvePoint, TrainConfig};
use entropy_core::data::{self, gen_spiral_classification_with, gen_spiral_regression, DatasetSplit, SchemaHints};
use entropy_core::kv::{fmt_f64, KeyValues};
use entropy_core::landscape::{Axis, EntropyGrid, GridSpec};
use entropy_core::nn::{Activation, Network, NetworkSpec, Task};
use entropy_core::seed::derive_seed;
use entropy_core::trajectory::TrajectoryLog;
use entropy_core::wlmc::{NetworkWalker, WangLandauMc, WlmcConfig};
use entropy_core::wlmd::{find_preset, run_plain_md, MdConfig, NetworkCv, Schedule, TrainLoss, WangLandauMd, WlmdConfig};
use entropy_core::{Error, Result};

use crate::config::{KeySpec, RunConfig};
use crate::Ctx;

/// Stream index for parameter initialization, kept apart from replica seeds.
const INIT_STREAM: u64 = 1 << 32;

pub const GEN_DATA_KEYS: &[KeySpec] = &[
    ("dataset", "spiral-classification", "spiral-classification, spiral-regression or tabular"),
    ("n", "20", "points per class (classification) or per split (regression)"),
    ("noise_std", "", "spiral noise standard deviation"),
    ("csv", "", "tabular: input CSV path"),
    ("target", "", "tabular: target column"),
    ("numeric", "", "tabular: comma-separated numeric columns"),
    ("categorical", "", "tabular: comma-separated categorical columns"),
    ("ignore", "", "tabular: comma-separated ignored columns"),
    ("scale_target", "true", "tabular: standard-scale the target"),
    ("train_fraction", "0.8", "tabular: share of rows in the training split"),
];

const NET_KEYS: &[KeySpec] = &[
    ("data", "", "split directory written by gen-data (required)"),
    ("hidden", "6,6,6", "comma-separated hidden widths"),
    ("activation", "relu", "relu, tanh or silu"),
];

const X_AXIS_KEYS: &[KeySpec] = &[
    ("x_lo", "-6", "lower edge of ln(train loss)"),
    ("x_hi", "2.5", "upper edge of ln(train loss)"),
];

pub fn train_keys() -> Vec<KeySpec> {
    let mut k = [NET_KEYS, X_AXIS_KEYS].concat();
    k.extend_from_slice(&[
        ("x_bins", "64", "curve bins along x"),
        ("optimizer", "sgd", "sgd or adam"),
        ("lr", "0.1", "learning rate"),
        ("batch_size", "10", "minibatch size"),
        ("epochs", "1000", "epochs per run"),
        ("repeats", "100", "independent runs"),
        ("clamp_to_box", "false", "clamp parameters to their box after each step"),
    ]);
    k
}

const GRID_KEYS: &[KeySpec] = &[
    ("y_lo", "", "lower edge of y (default: accuracy axis for classification)"),
    ("y_hi", "", "upper edge of y"),
    ("x_max", "inf", "x wall position"),
    ("y_max", "inf", "y wall position"),
    ("wall_constant", "3000", "wall stiffness"),
];

pub fn wlmc_keys() -> Vec<KeySpec> {
    let mut k = [NET_KEYS, X_AXIS_KEYS, GRID_KEYS].concat();
    k.extend_from_slice(&[
        ("x_bins", "64", "grid bins along x"),
        ("y_bins", "", "grid bins along y"),
        ("stages", "300", "modification-factor stages"),
        ("steps_per_stage", "100000", "trials per stage"),
        ("step_size", "0.1", "initial move half-width"),
        ("accept_window", "1000", "trials between step-size updates"),
        ("accept_low", "0.3", "shrink the step below this acceptance"),
        ("accept_high", "0.7", "grow the step above this acceptance"),
        ("step_adjust", "0.1", "relative step-size change"),
        ("flatness", "", "optional flat-histogram threshold"),
        ("max_blocks_per_stage", "100", "block cap in flatness mode"),
        ("confine", "false", "reject moves leaving the grid range"),
        ("log_interval", "10000", "trials between trajectory records"),
    ]);
    k
}

pub fn wlmd_keys() -> Vec<KeySpec> {
    let mut k = [NET_KEYS, X_AXIS_KEYS, GRID_KEYS].concat();
    k.extend_from_slice(&[
        ("preset", "", "task preset supplying kernel, walls, schedule, dt and friction"),
        ("sigma", "0.2", "kernel width"),
        ("cutoff", "0.8", "kernel cutoff radius"),
        ("steps", "100000", "integration steps"),
        ("dt", "0.001", "timestep"),
        ("friction", "0.01", "friction coefficient"),
        ("kt", "1", "temperature"),
        ("f_max", "0.001", "plateau deposition amplitude"),
        ("t1", "10000", "end of the ramp"),
        ("t2", "100000", "end of the plateau"),
        ("t3", "0", "decay offset"),
        ("deposit_interval", "1", "steps between deposits"),
        ("alpha", "5", "smoothed-accuracy sharpness"),
        ("log_interval", "1000", "steps between trajectory records"),
    ]);
    k
}

pub fn md_keys() -> Vec<KeySpec> {
    let mut k = NET_KEYS.to_vec();
    k.extend_from_slice(&[
        ("steps", "100000", "integration steps"),
        ("dt", "0.01", "timestep"),
        ("friction", "1", "friction coefficient"),
        ("kt", "0.005", "temperature"),
        ("log_interval", "100", "steps between trajectory records"),
        ("window_lo", "", "lower ln(train loss) edge of the trend window"),
        ("window_hi", "", "upper ln(train loss) edge of the trend window"),
    ]);
    k
}

pub const ANALYZE_KEYS: &[KeySpec] = &[
    ("grid", "", "grid file (required)"),
    ("task", "classification", "classification or regression"),
    ("sgd", "", "train output directory to compare against"),
];

/// Preset values as a config layer, so explicit keys still override them.
pub fn preset_layer(name: &str) -> Result<KeyValues> {
    let p = find_preset(name).ok_or_else(|| Error::InvalidConfig(format!("unknown preset `{name}`")))?;
    let mut kv = KeyValues::new();
    kv.set("sigma", fmt_f64(p.sigma));
    kv.set("cutoff", fmt_f64(p.cutoff));
    kv.set("x_max", fmt_f64(p.x_max));
    kv.set("y_max", fmt_f64(p.y_max));
    kv.set("f_max", fmt_f64(p.schedule.f_max));
    kv.set("t1", fmt_f64(p.schedule.t1));
    kv.set("t2", fmt_f64(p.schedule.t2));
    kv.set("t3", fmt_f64(p.schedule.t3));
    kv.set("dt", fmt_f64(p.dt));
    kv.set("friction", fmt_f64(p.friction));
    Ok(kv)
}

/// Seed and directory of replica `i`. A single replica writes into the
/// output directory itself.
fn replicas(cfg: &RunConfig, out: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let seed: u64 = cfg.parse("seed")?;
    let n: usize = cfg.parse("replicas")?;
    if n == 0 {
        return Err(Error::InvalidConfig("replicas must be >= 1".into()));
    }
    if n == 1 {
        return Ok(vec![(seed, out.to_path_buf())]);
    }
    Ok((0..n).map(|i| (derive_seed(seed, i as u64), out.join(format!("replica-{i}")))).collect())
}

fn names(cfg: &RunConfig, key: &str) -> Vec<String> {
    cfg.get(key)
        .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default()
}

pub fn gen_data(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    let n: usize = cfg.parse("n")?;
    for (seed, dir) in replicas(cfg, &ctx.out)? {
        let split = match cfg.require("dataset")? {
            "spiral-classification" => {
                let noise = cfg.parse_opt("noise_std")?.unwrap_or(data::SPIRAL_NOISE_STD);
                gen_spiral_classification_with(n, seed, noise)?
            }
            "spiral-regression" => gen_spiral_regression(n, seed)?,
            "tabular" => {
                let csv = PathBuf::from(cfg.require("csv")?);
                ctx.input("csv", &[csv.clone()])?;
                let mut hints = SchemaHints::new(cfg.require("target")?);
                hints.numeric = names(cfg, "numeric");
                hints.categorical = names(cfg, "categorical");
                hints.ignore = names(cfg, "ignore");
                hints.scale_target = cfg.flag("scale_target")?;
                let (split, schema) = data::ingest_tabular(&csv, &hints, cfg.parse("train_fraction")?, seed)?;
                let mut kv = KeyValues::new();
                kv.set("features", schema.feature_names.join(","));
                kv.set("numeric", schema.numeric_columns.join(","));
                kv.set("categorical", schema.categorical_columns.join(","));
                kv.set("target", &schema.target_column);
                if let Some((m, s)) = schema.target_stats {
                    kv.set("target_mean", fmt_f64(m));
                    kv.set("target_std", fmt_f64(s));
                }
                ctx.write(&dir.join("schema.txt"), kv.to_text())?;
                split
            }
            other => return Err(Error::InvalidConfig(format!("unknown dataset `{other}`"))),
        };
        data::save_split(&dir, &split)?;
        for f in ["train.csv", "test.csv", "meta.txt"] {
            ctx.output(&dir.join(f));
        }
        println!("{}: {} train, {} test rows", dir.display(), split.train.len(), split.test.len());
    }
    Ok(())
}

struct Problem {
    split: DatasetSplit,
    net: Network,
}

fn load_problem(ctx: &mut Ctx, cfg: &RunConfig) -> Result<Problem> {
    let dir = PathBuf::from(cfg.require("data")?);
    ctx.input("data", &["train.csv", "test.csv", "meta.txt"].map(|f| dir.join(f)))?;
    let split = data::load_split(&dir)?;
    let activation: Activation = cfg.parse("activation")?;
    let spec = NetworkSpec::new(split.input_dim(), cfg.usize_list("hidden")?, activation, split.meta.task)?;
    let net = Network::new(spec)?;
    Ok(Problem { split, net })
}

fn init_params(net: &Network, seed: u64) -> Vec<f64> {
    net.spec().init_params(derive_seed(seed, INIT_STREAM)).values
}

fn x_axis(cfg: &RunConfig) -> Result<Axis> {
    Ok(Axis::new(cfg.parse("x_lo")?, cfg.parse("x_hi")?, cfg.parse("x_bins")?))
}

fn save_log(ctx: &mut Ctx, path: &Path, log: &TrajectoryLog) -> Result<()> {
    log.save(path)?;
    ctx.output(path);
    Ok(())
}

pub fn train(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    let p = load_problem(ctx, cfg)?;
    let axis = x_axis(cfg)?;
    let task = p.split.meta.task;
    let mut all_logs = Vec::new();
    for (seed, dir) in replicas(cfg, &ctx.out)? {
        let tc = TrainConfig {
            optimizer: cfg.parse("optimizer")?,
            learning_rate: cfg.parse("lr")?,
            batch_size: cfg.parse("batch_size")?,
            epochs: cfg.parse("epochs")?,
            n_repeats: cfg.parse("repeats")?,
            seed,
            clamp_to_box: cfg.flag("clamp_to_box")?,
        };
        let runs = baseline::train(&p.net, &p.split.train, &p.split.test, &tc)?;
        let runs_dir = dir.join("runs");
        std::fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
        for (k, r) in runs.iter().enumerate() {
            save_log(ctx, &runs_dir.join(format!("run-{k:03}.csv")), &r.log)?;
        }
        let curve = sgd_curve(runs.iter().map(|r| &r.log), &axis, task);
        ctx.write(&dir.join("curve.csv"), curves_csv(&[("sgd", &curve)]))?;
        let mut kv = KeyValues::new();
        kv.set("runs", runs.len());
        kv.set("diverged", runs.iter().filter(|r| r.diverged).count());
        if let Some((x, y)) = final_means(&runs) {
            kv.set("final_x", fmt_f64(x));
            kv.set("final_y", fmt_f64(y));
            println!("{}: mean final ln(train loss) {x:.4}, metric {y:.4}", dir.display());
        }
        ctx.write(&dir.join("final.txt"), kv.to_text())?;
        all_logs.extend(runs.into_iter().map(|r| r.log));
    }
    if cfg.parse::<usize>("replicas")? > 1 {
        let curve = sgd_curve(&all_logs, &axis, task);
        ctx.write(&ctx.out.join("curve.csv"), curves_csv(&[("sgd", &curve)]))?;
    }
    Ok(())
}

/// Explicit y range, or `None` to use the task default.
fn y_axis(cfg: &RunConfig, task: Task, bins_key: Option<&str>) -> Result<Option<(f64, f64, Option<usize>)>> {
    let lo: Option<f64> = cfg.parse_opt("y_lo")?;
    let hi: Option<f64> = cfg.parse_opt("y_hi")?;
    let bins: Option<usize> = match bins_key {
        Some(k) => cfg.parse_opt(k)?,
        None => None,
    };
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(Some((lo, hi, bins))),
        (None, None) if task.is_classification() => Ok(None),
        _ => Err(Error::InvalidConfig("set both y_lo and y_hi (required for regression)".into())),
    }
}

fn wlmc_grid_spec(cfg: &RunConfig, task: Task, n_test: usize) -> Result<GridSpec> {
    let y = match y_axis(cfg, task, Some("y_bins"))? {
        Some((lo, hi, Some(bins))) => Axis::new(lo, hi, bins),
        Some(_) => return Err(Error::InvalidConfig("y_bins is required with y_lo and y_hi".into())),
        None => Axis::accuracy(n_test),
    };
    let spec = GridSpec::new(x_axis(cfg)?, y).with_walls(cfg.parse("x_max")?, cfg.parse("y_max")?, cfg.parse("wall_constant")?);
    spec.validate()?;
    Ok(spec)
}

/// Equilibrium accuracy for classification grids, max-entropy metric otherwise.
fn landscape_curve(grid: &EntropyGrid, task: Task) -> Result<Vec<CurvePoint>> {
    if task.is_classification() {
        equilibrium_curve(grid)
    } else {
        Ok(max_entropy_curve(grid, task)
            .points
            .iter()
            .map(|p| CurvePoint { x: p.x, value: p.y, count: p.visits as usize, stderr: f64::NAN })
            .collect())
    }
}

fn curve_name(task: Task) -> &'static str {
    if task.is_classification() {
        "equilibrium"
    } else {
        "max_entropy"
    }
}

fn merge_replicas(ctx: &mut Ctx, cfg: &RunConfig, grids: &[EntropyGrid], curves: &[Vec<CurvePoint>], task: Task) -> Result<()> {
    if cfg.parse::<usize>("replicas")? > 1 {
        let g = mean_grid(grids)?;
        ctx.write(&ctx.out.join("grid.txt"), g.to_text())?;
        let merged = merge_curves(curves);
        ctx.write(&ctx.out.join("curves.csv"), curves_csv(&[(curve_name(task), &merged)]))?;
    }
    Ok(())
}

pub fn wlmc(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    let p = load_problem(ctx, cfg)?;
    let task = p.split.meta.task;
    let spec = wlmc_grid_spec(cfg, task, p.split.test.len())?;
    let (mut grids, mut curves) = (Vec::new(), Vec::new());
    for (seed, dir) in replicas(cfg, &ctx.out)? {
        let wc = WlmcConfig {
            n_stages: cfg.parse("stages")?,
            steps_per_stage: cfg.parse("steps_per_stage")?,
            initial_step_size: cfg.parse("step_size")?,
            accept_window: cfg.parse("accept_window")?,
            accept_low: cfg.parse("accept_low")?,
            accept_high: cfg.parse("accept_high")?,
            step_adjust: cfg.parse("step_adjust")?,
            seed,
            log_interval: cfg.parse("log_interval")?,
            flatness: cfg.parse_opt("flatness")?,
            max_blocks_per_stage: cfg.parse("max_blocks_per_stage")?,
            confine: cfg.flag("confine")?,
        };
        let walker = NetworkWalker::new(&p.net, &p.split.train, &p.split.test, init_params(&p.net, seed))?;
        let mut mc = WangLandauMc::new(walker, spec.clone(), wc)?;
        mc.run_with(|_| Ok(()))?;
        mc.checkpoint(&dir)?;
        ctx.output(&dir.join("grid.txt"));
        ctx.output(&dir.join("state.txt"));
        save_log(ctx, &dir.join("trajectory.csv"), mc.log())?;
        let s = mc.stats();
        let mut kv = KeyValues::new();
        kv.set("steps", s.steps);
        kv.set("accepted", s.accepted);
        kv.set("acceptance_rate", fmt_f64(s.acceptance_rate()));
        kv.set("out_of_box", s.out_of_box);
        kv.set("out_of_range", s.out_of_range);
        kv.set("faults", s.faults);
        kv.set("deposited", fmt_f64(s.deposited));
        kv.set("clamp_events", mc.grid().clamp_events());
        kv.set_list("stage_cv", &s.stage_cv);
        ctx.write(&dir.join("stats.txt"), kv.to_text())?;
        println!("{}: {} trials, acceptance {:.3}", dir.display(), s.steps, s.acceptance_rate());
        curves.push(landscape_curve(mc.grid(), task)?);
        grids.push(mc.grid().clone());
    }
    merge_replicas(ctx, cfg, &grids, &curves, task)
}

pub fn wlmd(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    let p = load_problem(ctx, cfg)?;
    let task = p.split.meta.task;
    let (y_lo, y_hi) = match y_axis(cfg, task, None)? {
        Some((lo, hi, _)) => (lo, hi),
        None => (0.0, 1.0),
    };
    let spec = GridSpec::for_kernel((cfg.parse("x_lo")?, cfg.parse("x_hi")?), (y_lo, y_hi), cfg.parse("sigma")?, cfg.parse("cutoff")?)
        .with_walls(cfg.parse("x_max")?, cfg.parse("y_max")?, cfg.parse("wall_constant")?);
    spec.validate()?;
    let (mut grids, mut curves) = (Vec::new(), Vec::new());
    for (seed, dir) in replicas(cfg, &ctx.out)? {
        let wc = WlmdConfig {
            dt: cfg.parse("dt")?,
            friction: cfg.parse("friction")?,
            kt: cfg.parse("kt")?,
            schedule: Schedule { f_max: cfg.parse("f_max")?, t1: cfg.parse("t1")?, t2: cfg.parse("t2")?, t3: cfg.parse("t3")? },
            deposit_interval: cfg.parse("deposit_interval")?,
            total_steps: cfg.parse("steps")?,
            seed,
            alpha: cfg.parse("alpha")?,
            log_interval: cfg.parse("log_interval")?,
        };
        let alpha = wc.alpha;
        let cv = NetworkCv::new(&p.net, &p.split.train, &p.split.test, alpha);
        let mut md = WangLandauMd::new(cv, init_params(&p.net, seed), spec.clone(), wc)?;
        md.run_with(0, |_| Ok(()))?;
        md.checkpoint(&dir)?;
        ctx.output(&dir.join("grid.txt"));
        ctx.output(&dir.join("state.txt"));
        save_log(ctx, &dir.join("trajectory.csv"), md.log())?;
        let s = md.stats();
        let mut kv = KeyValues::new();
        kv.set("steps", s.steps);
        kv.set("reflections", s.reflections);
        kv.set("x_faults", s.x_faults);
        kv.set("faults", s.faults);
        kv.set("deposits", s.deposits);
        kv.set("deposited", fmt_f64(s.deposited));
        kv.set("clamp_events", md.grid().clamp_events());
        ctx.write(&dir.join("stats.txt"), kv.to_text())?;
        println!("{}: {} steps, {} reflections", dir.display(), s.steps, s.reflections);
        curves.push(landscape_curve(md.grid(), task)?);
        grids.push(md.grid().clone());
    }
    merge_replicas(ctx, cfg, &grids, &curves, task)
}

/// `(step, metric)` pairs whose `x` lies in `[lo, hi]`.
fn in_window(log: &TrajectoryLog, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    log.records.iter().filter(|r| r.x >= lo && r.x <= hi).map(|r| (r.step as f64, r.y_raw)).collect()
}

fn trend(kv: &mut KeyValues, pts: &[(f64, f64)]) -> Result<()> {
    kv.set("window_records", pts.len());
    if pts.len() >= 3 {
        let (t, a): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let (rho, pval) = spearman(&t, &a)?;
        kv.set("spearman_rho", fmt_f64(rho));
        kv.set("spearman_p", fmt_f64(pval));
    }
    Ok(())
}

pub fn md_verify(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    let p = load_problem(ctx, cfg)?;
    let window = match (cfg.parse_opt::<f64>("window_lo")?, cfg.parse_opt::<f64>("window_hi")?) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(Error::InvalidConfig("set both window_lo and window_hi".into())),
    };
    let mut pooled = Vec::new();
    for (seed, dir) in replicas(cfg, &ctx.out)? {
        let mc = MdConfig {
            dt: cfg.parse("dt")?,
            friction: cfg.parse("friction")?,
            kt: cfg.parse("kt")?,
            total_steps: cfg.parse("steps")?,
            seed,
            log_interval: cfg.parse("log_interval")?,
        };
        let pot = TrainLoss { net: &p.net, train: &p.split.train, test: &p.split.test };
        let log = run_plain_md(pot, init_params(&p.net, seed), mc)?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_log(ctx, &dir.join("trajectory.csv"), &log)?;
        let mut kv = KeyValues::new();
        kv.set("records", log.len());
        if let Some(last) = log.last() {
            kv.set("final_x", fmt_f64(last.x));
            kv.set("final_y", fmt_f64(last.y_raw));
        }
        if let Some((lo, hi)) = window {
            let pts = in_window(&log, lo, hi);
            trend(&mut kv, &pts)?;
            pooled.extend(pts);
        }
        ctx.write(&dir.join("summary.txt"), kv.to_text())?;
    }
    if cfg.parse::<usize>("replicas")? > 1 {
        let mut kv = KeyValues::new();
        if window.is_some() {
            trend(&mut kv, &pooled)?;
        }
        ctx.write(&ctx.out.join("summary.txt"), kv.to_text())?;
    }
    Ok(())
}

pub fn analyze(ctx: &mut Ctx, cfg: &RunConfig) -> Result<()> {
    if cfg.parse::<usize>("replicas")? != 1 {
        return Err(Error::InvalidConfig("analyze runs on a single grid; replicas must be 1".into()));
    }
    let task = match cfg.require("task")? {
        "classification" => Task::Classification { num_classes: 2 },
        "regression" => Task::Regression,
        other => return Err(Error::InvalidConfig(format!("unknown task `{other}`"))),
    };
    let grid_path = PathBuf::from(cfg.require("grid")?);
    ctx.input("grid", &[grid_path.clone()])?;
    let grid = EntropyGrid::load(&grid_path)?;
    let out = ctx.out.clone();
    ctx.write(&out.join("heatmap.svg"), heatmap_svg(&grid))?;
    let landscape = landscape_curve(&grid, task)?;
    let me: Vec<CurvePoint> = max_entropy_curve(&grid, task)
        .points
        .iter()
        .map(|p| CurvePoint { x: p.x, value: p.y, count: p.visits as usize, stderr: f64::NAN })
        .collect();
    let mut named: Vec<(&str, &[CurvePoint])> = vec![(curve_name(task), &landscape)];
    if task.is_classification() {
        named.push(("max_entropy", &me));
    }
    let mut sgd = Vec::new();
    if let Some(dir) = cfg.get("sgd") {
        let runs_dir = Path::new(dir).join("runs");
        let mut files: Vec<PathBuf> = std::fs::read_dir(&runs_dir)
            .map_err(|e| Error::io(&runs_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        ctx.input("sgd", &files)?;
        let logs = files.iter().map(|f| TrajectoryLog::load(f)).collect::<Result<Vec<_>>>()?;
        sgd = sgd_curve(&logs, &grid.spec().x, task);
        let finals: Vec<(f64, f64)> =
            logs.iter().filter_map(|l| l.last()).filter(|r| r.x.is_finite()).map(|r| (r.x, r.y_raw)).collect();
        let final_mean = (!finals.is_empty()).then(|| {
            let n = finals.len() as f64;
            (finals.iter().map(|f| f.0).sum::<f64>() / n, finals.iter().map(|f| f.1).sum::<f64>() / n)
        });
        let report = advantage_report(&grid, &sgd, task, final_mean)?;
        ctx.write(&out.join("report.txt"), report.summary().to_text())?;
        ctx.write(&out.join("report.csv"), report.to_csv())?;
        if let Some(f) = &report.at_final {
            println!("at final SGD point x={:.4}: landscape {:.4}, sgd {:.4}, gap {:+.4}", f.x, f.landscape, f.sgd, f.gap);
        }
    }
    if !sgd.is_empty() {
        named.push(("sgd", &sgd));
    }
    ctx.write(&out.join("curves.csv"), curves_csv(&named))?;
    Ok(())
}

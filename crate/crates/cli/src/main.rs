mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use entropy_core::kv::KeyValues;
use entropy_core::{Error, Result};
use sha2::{Digest, Sha256};

use config::{KeySpec, RunConfig};

/// Entropy landscapes of small neural networks: data, baselines, samplers
/// and analysis.
#[derive(Parser)]
#[command(name = "nn-entropy", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate or ingest a dataset split
    GenData(Common),
    /// SGD or Adam baseline runs
    Train(Common),
    /// Wang-Landau Monte Carlo over (ln train loss, test metric)
    Wlmc(Common),
    /// Wang-Landau molecular dynamics with Gaussian deposits
    Wlmd(Common),
    /// Plain Langevin dynamics on the train loss
    MdVerify(Common),
    /// Curves, heatmap and comparison report from a grid
    Analyze(Common),
}

#[derive(Args)]
struct Common {
    /// key=value run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in profile (desk or full) applied below --config
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override one key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    replicas: Option<usize>,
}

impl Cmd {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Cmd::GenData(c) => ("gen-data", c),
            Cmd::Train(c) => ("train", c),
            Cmd::Wlmc(c) => ("wlmc", c),
            Cmd::Wlmd(c) => ("wlmd", c),
            Cmd::MdVerify(c) => ("md-verify", c),
            Cmd::Analyze(c) => ("analyze", c),
        }
    }
}

fn keys(cmd: &str) -> Vec<KeySpec> {
    match cmd {
        "gen-data" => commands::GEN_DATA_KEYS.to_vec(),
        "train" => commands::train_keys(),
        "wlmc" => commands::wlmc_keys(),
        "wlmd" => commands::wlmd_keys(),
        "md-verify" => commands::md_keys(),
        _ => commands::ANALYZE_KEYS.to_vec(),
    }
}

fn builtin_profile(cmd: &str, profile: &str) -> Option<&'static str> {
    Some(match (profile, cmd) {
        ("desk", "gen-data") => include_str!("../profiles/desk/gen-data.conf"),
        ("desk", "train") => include_str!("../profiles/desk/train.conf"),
        ("desk", "wlmc") => include_str!("../profiles/desk/wlmc.conf"),
        ("desk", "wlmd") => include_str!("../profiles/desk/wlmd.conf"),
        ("desk", "md-verify") => include_str!("../profiles/desk/md-verify.conf"),
        ("full", "gen-data") => include_str!("../profiles/full/gen-data.conf"),
        ("full", "train") => include_str!("../profiles/full/train.conf"),
        ("full", "wlmc") => include_str!("../profiles/full/wlmc.conf"),
        ("full", "wlmd") => include_str!("../profiles/full/wlmd.conf"),
        ("full", "md-verify") => include_str!("../profiles/full/md-verify.conf"),
        _ => return None,
    })
}

/// Output directory plus the files read and written by one invocation.
pub struct Ctx {
    pub out: PathBuf,
    outputs: Vec<PathBuf>,
    inputs: Vec<(String, PathBuf)>,
}

impl Ctx {
    pub fn output(&mut self, path: &Path) {
        if !self.outputs.iter().any(|p| p == path) {
            self.outputs.push(path.to_path_buf());
        }
    }

    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
        self.output(path);
        Ok(())
    }

    /// Records inputs for the manifest; fails listing every missing path.
    pub fn input(&mut self, key: &str, paths: &[PathBuf]) -> Result<()> {
        let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::MissingInputs(missing));
        }
        self.inputs.extend(paths.iter().map(|p| (key.to_string(), p.clone())));
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn rel(path: &Path, base: &Path) -> String {
    let p = path.strip_prefix(base).unwrap_or(path);
    p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn layers(cmd: &str, c: &Common) -> Result<Vec<KeyValues>> {
    let mut layers = Vec::new();
    if let Some(name) = &c.profile {
        let text = builtin_profile(cmd, name)
            .ok_or_else(|| Error::InvalidConfig(format!("no `{name}` profile for {cmd}")))?;
        layers.push(KeyValues::parse(text, Path::new(name))?);
    }
    if let Some(path) = &c.config {
        if !path.is_file() {
            return Err(Error::MissingInputs(vec![path.clone()]));
        }
        layers.push(config::read_file(path)?);
    }
    let mut flags = config::overrides(&c.set)?;
    if let Some(s) = c.seed {
        flags.set("seed", s);
    }
    if let Some(r) = c.replicas {
        flags.set("replicas", r);
    }
    layers.push(flags);
    // A preset sits just above the defaults so explicit keys still win.
    if cmd == "wlmd" {
        if let Some(name) = layers.iter().rev().find_map(|l| l.get("preset")) {
            layers.insert(0, commands::preset_layer(name)?);
        }
    }
    Ok(layers)
}

fn run(cmd: &Cmd) -> Result<()> {
    let (name, common) = cmd.parts();
    let cfg = RunConfig::build(&keys(name), &layers(name, common)?)?;
    if cfg.get("profile") == Some("full") {
        eprintln!("warning: full-scale profile; expect runtimes of days to weeks on one core");
    }
    let out = common.out_dir.clone();
    let mut ctx = Ctx { out: out.clone(), outputs: Vec::new(), inputs: Vec::new() };
    let config_text = cfg.to_text();
    ctx.write(&out.join("config.txt"), &config_text)?;
    match cmd {
        Cmd::GenData(_) => commands::gen_data(&mut ctx, &cfg)?,
        Cmd::Train(_) => commands::train(&mut ctx, &cfg)?,
        Cmd::Wlmc(_) => commands::wlmc(&mut ctx, &cfg)?,
        Cmd::Wlmd(_) => commands::wlmd(&mut ctx, &cfg)?,
        Cmd::MdVerify(_) => commands::md_verify(&mut ctx, &cfg)?,
        Cmd::Analyze(_) => commands::analyze(&mut ctx, &cfg)?,
    }
    let mut m = KeyValues::new();
    m.set("format", "manifest-v1");
    m.set("command", name);
    m.set("version", env!("CARGO_PKG_VERSION"));
    m.set("seed", cfg.require("seed")?);
    m.set("replicas", cfg.require("replicas")?);
    m.set("config", "config.txt");
    m.set("config_sha256", sha256_hex(config_text.as_bytes()));
    for (i, (key, path)) in ctx.inputs.iter().enumerate() {
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        m.set(format!("input.{i}"), format!("{key}:{file}:{}", hash_file(path)?));
    }
    for path in &ctx.outputs {
        m.set(format!("output.{}", rel(path, &out)), hash_file(path)?);
    }
    m.write(&out.join("manifest.txt"))
}

fn main() -> ExitCode {
    let mut command = Cli::command();
    for name in ["gen-data", "train", "wlmc", "wlmd", "md-verify", "analyze"] {
        let help = config::describe(&keys(name));
        command = command.mut_subcommand(name, |s| s.after_help(help));
    }
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

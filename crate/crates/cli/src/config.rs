//! Run configuration: declared keys with defaults, overlaid by profile,
//! file and flags, then frozen into the text written next to the outputs.

use std::path::Path;
use std::str::FromStr;

use entropy_core::kv::KeyValues;
use entropy_core::{Error, Result};

/// `(key, default, help)`. An empty default means the key is optional.
pub type KeySpec = (&'static str, &'static str, &'static str);

pub const COMMON_KEYS: &[KeySpec] = &[
    ("seed", "0", "base seed; replica i uses a seed derived from it"),
    ("replicas", "1", "independent replicas, each in replica-<i>/"),
    ("profile", "custom", "desk, full or custom; full prints a runtime warning"),
];

pub struct RunConfig {
    kv: KeyValues,
}

impl RunConfig {
    /// Layers `layers` in order over the declared defaults. Keys not in
    /// `COMMON_KEYS` or `keys` are an error.
    pub fn build(keys: &[KeySpec], layers: &[KeyValues]) -> Result<Self> {
        let all = || COMMON_KEYS.iter().chain(keys);
        let mut unknown: Vec<&str> = Vec::new();
        for layer in layers {
            for k in layer.keys() {
                if !all().any(|(name, _, _)| *name == k) && !unknown.contains(&k) {
                    unknown.push(k);
                }
            }
        }
        if !unknown.is_empty() {
            return Err(Error::InvalidConfig(format!("unknown keys: {}", unknown.join(", "))));
        }
        let mut kv = KeyValues::new();
        for (name, default, _) in all() {
            let v = layers.iter().rev().find_map(|l| l.get(name)).unwrap_or(default);
            if !v.is_empty() {
                kv.set(*name, v);
            }
        }
        Ok(Self { kv })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.kv.get(key)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.kv.require(key)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        self.kv.parse_required(key)
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.kv.parse_value(key)
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.kv.get(key) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => Err(Error::InvalidConfig(format!("key `{key}`: expected true or false, got `{v}`"))),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let v = self.require(key)?;
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::InvalidConfig(format!("key `{key}`: cannot parse `{v}`"))))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.kv.to_text()
    }
}

/// Reads a `key=value` file.
pub fn read_file(path: &Path) -> Result<KeyValues> {
    KeyValues::read(path)
}

/// Turns `--set k=v` pairs into one layer.
pub fn overrides(pairs: &[String]) -> Result<KeyValues> {
    let mut kv = KeyValues::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects key=value, got `{p}`")))?;
        kv.set(k.trim(), v.trim());
    }
    Ok(kv)
}

/// Help text listing every key of a subcommand.
pub fn describe(keys: &[KeySpec]) -> String {
    let mut s = String::from("Config keys (key=value; default in brackets):\n");
    for (k, d, h) in COMMON_KEYS.iter().chain(keys) {
        let d = if d.is_empty() { String::new() } else { format!(" [{d}]") };
        s.push_str(&format!("  {k:<18}{h}{d}\n"));
    }
    s
}

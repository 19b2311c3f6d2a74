//! Flat key-value run configuration.
//!
//! Precedence, lowest first: command defaults, config file, `--set KEY=VALUE`,
//! dedicated flags (`--seed`, `--out`, `--format`, `--workers`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mbscatter::table::Format;
use mbscatter::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Keys accepted by every command besides its own parameters.
pub const RESERVED_KEYS: [&str; 4] = ["seed", "out", "format", "workers"];

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Worker threads; 0 lets rayon decide. Never affects the output.
    pub workers: usize,
}

/// Raw overrides collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config_file: Option<PathBuf>,
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub workers: Option<usize>,
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?;
    match value {
        Value::Object(map) => Ok(map.into_iter().collect()),
        _ => Err(Error::Config(format!("config file {} must hold a JSON object", path.display()))),
    }
}

/// `key=value`, where the value is parsed as JSON and falls back to a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got '{s}'")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("empty key in '{s}'")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((key.to_string(), value))
}

fn take_reserved(map: &mut BTreeMap<String, Value>, key: &str) -> Option<Value> {
    map.remove(key)
}

impl RunConfig {
    pub fn resolve(command: &str, defaults: &[(&str, Value)], ov: &Overrides) -> Result<Self> {
        let mut params: BTreeMap<String, Value> = defaults.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let mut given = BTreeMap::new();
        if let Some(path) = &ov.config_file {
            given.extend(read_config_file(path)?);
        }
        for s in &ov.set {
            let (k, v) = parse_assignment(s)?;
            given.insert(k, v);
        }

        let seed = take_reserved(&mut given, "seed");
        let out = take_reserved(&mut given, "out");
        let format = take_reserved(&mut given, "format");
        let workers = take_reserved(&mut given, "workers");
        for (k, v) in given {
            if !params.contains_key(&k) {
                let known: Vec<&str> = params.keys().map(String::as_str).chain(RESERVED_KEYS).collect();
                return Err(Error::Config(format!(
                    "unknown key '{k}' for {command}; known keys: {}",
                    known.join(", ")
                )));
            }
            params.insert(k, v);
        }

        let master_seed = match (ov.seed, seed) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .as_u64()
                .ok_or_else(|| Error::Config("seed: expected a non-negative integer".into()))?,
            (None, None) => DEFAULT_SEED,
        };
        let out = match (&ov.out, out) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(Value::String(s))) => Some(PathBuf::from(s)),
            (None, Some(_)) => return Err(Error::Config("out: expected a path string".into())),
            (None, None) => None,
        };
        let format = match (&ov.format, format) {
            (Some(f), _) => Format::parse(f)?,
            (None, Some(Value::String(s))) => Format::parse(&s)?,
            (None, Some(_)) => return Err(Error::Config("format: expected \"csv\" or \"json\"".into())),
            (None, None) => Format::Csv,
        };
        let workers = match (ov.workers, workers) {
            (Some(w), _) => w,
            (None, Some(v)) => v
                .as_u64()
                .ok_or_else(|| Error::Config("workers: expected a non-negative integer".into()))?
                as usize,
            (None, None) => 0,
        };
        Ok(Self {
            command: command.to_string(),
            params,
            master_seed,
            out,
            format,
            workers,
        })
    }

    /// Canonical JSON of everything that determines the table contents.
    pub fn canonical(&self) -> String {
        let mut map = serde_json::Map::new();
        map.insert("command".into(), Value::String(self.command.clone()));
        map.insert("seed".into(), Value::from(self.master_seed));
        for (k, v) in &self.params {
            map.insert(k.clone(), v.clone());
        }
        Value::Object(map).to_string()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn get(&self, key: &str) -> Result<&Value> {
        self.params
            .get(key)
            .ok_or_else(|| Error::Config(format!("{key}: missing parameter")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .as_f64()
            .ok_or_else(|| Error::Config(format!("{key}: expected a number")))
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let v = self.f64(key)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("{key}: must be positive, got {v}")))
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)?
            .as_u64()
            .ok_or_else(|| Error::Config(format!("{key}: expected a non-negative integer")))
    }

    pub fn u32(&self, key: &str) -> Result<u32> {
        u32::try_from(self.u64(key)?).map_err(|_| Error::Config(format!("{key}: value too large")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.get(key)?
            .as_bool()
            .ok_or_else(|| Error::Config(format!("{key}: expected true or false")))
    }

    pub fn epsilon(&self, key: &str) -> Result<i32> {
        match self.get(key)?.as_i64() {
            Some(1) => Ok(1),
            Some(-1) => Ok(-1),
            _ => Err(Error::Config(format!("{key}: expected +1 (bosons) or -1 (fermions)"))),
        }
    }

    pub fn beta(&self, key: &str) -> Result<u8> {
        match self.get(key)?.as_u64() {
            Some(b @ (1 | 2)) => Ok(b as u8),
            _ => Err(Error::Config(format!("{key}: expected 1 (orthogonal) or 2 (unitary)"))),
        }
    }

    fn list(&self, key: &str) -> Result<&Vec<Value>> {
        match self.get(key)? {
            Value::Array(a) if !a.is_empty() => Ok(a),
            _ => Err(Error::Config(format!("{key}: expected a nonempty list"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::Config(format!("{key}: expected numbers"))))
            .collect()
    }

    pub fn u32_list(&self, key: &str) -> Result<Vec<u32>> {
        self.list(key)?
            .iter()
            .map(|v| {
                v.as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| Error::Config(format!("{key}: expected non-negative integers")))
            })
            .collect()
    }

    pub fn i32_list(&self, key: &str) -> Result<Vec<i32>> {
        self.list(key)?
            .iter()
            .map(|v| {
                v.as_i64()
                    .and_then(|x| i32::try_from(x).ok())
                    .ok_or_else(|| Error::Config(format!("{key}: expected integers")))
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        Ok(self.u32_list(key)?.into_iter().map(|x| x as usize).collect())
    }
}

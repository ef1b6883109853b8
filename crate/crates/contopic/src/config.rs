//! Training configuration files and `--key value` overrides.
//!
//! A key is either a dotted path (`sampler.k`) or a leaf name that is unique
//! across the configuration (`k`). Values are parsed as JSON, falling back
//! to a plain string, so `--variant full` and `--beta0 0.5` both work.

use std::path::Path;

use contopic_core::train::TrainConfig;
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("configuration key {key:?} is ambiguous; use one of {candidates:?}")]
    Ambiguous { key: String, candidates: Vec<String> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read configuration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn leaf_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                leaf_paths(child, &path, out);
            }
        }
        _ => out.push(prefix.to_string()),
    }
}

/// Every settable dotted key of the configuration.
pub fn known_keys() -> Vec<String> {
    let mut out = Vec::new();
    leaf_paths(&serde_json::to_value(TrainConfig::default()).unwrap(), "", &mut out);
    out
}

/// Resolves a user-supplied key to a full dotted path.
pub fn resolve_key(key: &str) -> Result<String, ConfigError> {
    let key = key.replace('-', "_");
    let keys = known_keys();
    if keys.contains(&key) {
        return Ok(key);
    }
    let candidates: Vec<String> = keys
        .into_iter()
        .filter(|k| k.rsplit('.').next() == Some(key.as_str()))
        .collect();
    match candidates.len() {
        0 => Err(ConfigError::UnknownKey(key)),
        1 => Ok(candidates.into_iter().next().unwrap()),
        _ => Err(ConfigError::Ambiguous { key, candidates }),
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, path: &str, value: Value) {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .as_object_mut()
            .expect("known path")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    cur.as_object_mut()
        .expect("known path")
        .insert(parts[parts.len() - 1].to_string(), value);
}

fn check_keys(v: &Value) -> Result<(), ConfigError> {
    let known = known_keys();
    let mut given = Vec::new();
    leaf_paths(v, "", &mut given);
    match given.into_iter().find(|k| !k.is_empty() && !known.contains(k)) {
        Some(k) => Err(ConfigError::UnknownKey(k)),
        None => Ok(()),
    }
}

/// Builds a configuration from an optional JSON document plus overrides,
/// applied in order on top of the defaults.
pub fn resolve(base: Option<&str>, overrides: &[(String, String)]) -> Result<TrainConfig, ConfigError> {
    let mut value = serde_json::to_value(TrainConfig::default()).unwrap();
    if let Some(text) = base {
        let user: Value = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !user.is_object() {
            return Err(ConfigError::Invalid("configuration must be a JSON object".into()));
        }
        check_keys(&user)?;
        let mut flat = Vec::new();
        leaf_paths(&user, "", &mut flat);
        for path in flat {
            let leaf = path.split('.').try_fold(&user, |v, p| v.get(p)).cloned().unwrap();
            set_path(&mut value, &path, leaf);
        }
    }
    for (k, raw) in overrides {
        let path = resolve_key(k)?;
        set_path(&mut value, &path, parse_value(raw));
    }
    serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))
}

pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<TrainConfig, ConfigError> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?),
        None => None,
    };
    resolve(text.as_deref(), overrides)
}

/// Arguments left for the parser, plus `(key, value)` overrides.
pub type SplitArgs = (Vec<String>, Vec<(String, String)>);

/// Pulls `--key value` and `--key=value` pairs whose key is not in
/// `reserved` out of `args`, returning the remaining arguments and the pairs.
pub fn split_overrides(args: &[String], reserved: &[String]) -> Result<SplitArgs, ConfigError> {
    let mut rest = Vec::new();
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let Some(body) = a.strip_prefix("--").filter(|b| !b.is_empty()) else {
            rest.push(a.clone());
            i += 1;
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (body, None),
        };
        if reserved.iter().any(|r| r == key) {
            rest.push(a.clone());
            i += 1;
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => match args.get(i + 1) {
                Some(v) => {
                    i += 1;
                    v.clone()
                }
                None => return Err(ConfigError::Invalid(format!("--{key} needs a value"))),
            },
        };
        pairs.push((key.to_string(), value));
        i += 1;
    }
    Ok((rest, pairs))
}

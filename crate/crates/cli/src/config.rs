//! Config files and run manifests.
//!
//! A config file holds any subset of a command's config fields. A manifest
//! written by an earlier run is accepted too; its `config` object is used.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

pub struct Loaded<T> {
    pub config: T,
    /// Input file recorded by a manifest, if any.
    pub input: Option<PathBuf>,
}

/// `defaults` overlaid with the file at `path`. Unknown keys are rejected.
pub fn load<T: Serialize + DeserializeOwned>(defaults: T, path: Option<&Path>, command: &str) -> Result<Loaded<T>, Failure> {
    let Some(path) = path else { return Ok(Loaded { config: defaults, input: None }) };
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut file: Value = serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut input = None;
    if let Some(obj) = file.as_object_mut() {
        if let (Some(Value::String(cmd)), Some(_)) = (obj.get("command"), obj.get("config")) {
            if cmd != command {
                return Err(Failure::input(format!("{} is a manifest for '{cmd}', not '{command}'", path.display())));
            }
            input = obj.get("input").and_then(Value::as_str).map(PathBuf::from);
            file = obj.remove("config").unwrap_or_default();
        }
    }
    let mut merged = serde_json::to_value(&defaults).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    overlay(&mut merged, file, "").map_err(|key| Failure::input(format!("{}: unknown config key '{key}'", path.display())))?;
    let config = serde_json::from_value(merged).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(Loaded { config, input })
}

fn overlay(base: &mut Value, top: Value, at: &str) -> Result<(), String> {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => overlay_object(b, t, at),
        (b, t) => {
            *b = t;
            Ok(())
        }
    }
}

fn overlay_object(base: &mut Map<String, Value>, top: Map<String, Value>, at: &str) -> Result<(), String> {
    for (k, v) in top {
        let key = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
        match base.get_mut(&k) {
            // Optional fields serialize as null, so anything may replace them.
            Some(slot) => overlay(slot, v, &key)?,
            None => return Err(key),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Versions {
    pkf: &'static str,
    parallel: bool,
}

#[derive(Serialize)]
struct Manifest<'a, T> {
    command: &'a str,
    seed: Option<u64>,
    config: &'a T,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<&'a Path>,
    outputs: Vec<String>,
    versions: Versions,
}

pub fn write_manifest<T: Serialize>(
    dir: &Path,
    stem: &str,
    command: &str,
    seed: Option<u64>,
    config: &T,
    input: Option<&Path>,
    outputs: &[&Path],
) -> Result<(), Failure> {
    let manifest = Manifest {
        command,
        seed,
        config,
        input,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        versions: Versions { pkf: env!("CARGO_PKG_VERSION"), parallel: pkf::par::Execution::Parallel.is_parallel() },
    };
    pkf::sim::write_json(&manifest, &dir.join(format!("{stem}.manifest.json")))?;
    Ok(())
}

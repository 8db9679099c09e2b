//! Run manifests, atomic file output and number formatting.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Rounds to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Shortest text for `x` at 15 significant digits.
pub fn fmt15(x: f64) -> String {
    format!("{}", round15(x))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; not part of the hash.
    pub timestamp: u64,
}

#[derive(Serialize)]
struct HashedFields<'a> {
    command: &'a str,
    parameters: &'a BTreeMap<String, Value>,
    config_path: &'a Option<String>,
    config_sha256: &'a Option<String>,
    outputs: &'a [String],
    seed: Option<u64>,
    tool_version: &'a str,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            parameters: BTreeMap::new(),
            config_path: None,
            config_sha256: None,
            outputs: Vec::new(),
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn config(&mut self, path: &Path, contents: &str) -> &mut Self {
        self.config_path = Some(path.display().to_string());
        self.config_sha256 = Some(hex::encode(Sha256::digest(contents.as_bytes())));
        self
    }

    /// SHA-256 over every field except the timestamp, so identical runs
    /// produce identical hashes.
    pub fn hash(&self) -> String {
        let fields = HashedFields {
            command: &self.command,
            parameters: &self.parameters,
            config_path: &self.config_path,
            config_sha256: &self.config_sha256,
            outputs: &self.outputs,
            seed: self.seed,
            tool_version: &self.tool_version,
        };
        let bytes = serde_json::to_vec(&fields).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Writes `<path>.manifest.json` next to the primary output.
    pub fn write_sidecar(&self, primary: &Path) -> std::io::Result<PathBuf> {
        let path = sidecar_path(primary, "manifest.json");
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        value["manifest_hash"] = Value::String(self.hash());
        write_atomic(&path, serde_json::to_string_pretty(&value)?.as_bytes())?;
        Ok(path)
    }
}

/// `<primary>.<suffix>`, e.g. `trials.csv.summary.json`.
pub fn sidecar_path(primary: &Path, suffix: &str) -> PathBuf {
    let mut name = primary.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(fmt15(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(fmt15(1.0), "1");
        assert_eq!(fmt15(0.0), "0");
        assert_eq!(fmt15(-2.5e-20), "-0.000000000000000000025");
    }

    #[test]
    fn hash_ignores_timestamp() {
        let mut a = RunManifest::new("sweep");
        a.param("grid", "0:1:3");
        let mut b = a.clone();
        b.timestamp += 100;
        assert_eq!(a.hash(), b.hash());
        b.param("grid", "0:1:4");
        assert_ne!(a.hash(), b.hash());
    }
}

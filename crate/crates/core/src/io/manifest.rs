use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{fmt_f64, key_values};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Provenance of an output directory. Commands sharing a directory merge
/// into one manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub version: String,
    /// SHA-256 of the canonical config text; empty for commands that take
    /// no run configuration (they join whatever manifest is present).
    pub config_hash: String,
    pub halt_reason: Option<String>,
    /// Summed over the commands that wrote into the directory.
    pub wall_time_s: f64,
    /// File name to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    /// Manifest for a command without a run configuration.
    pub fn unconfigured() -> Self {
        Self { version: env!("CARGO_PKG_VERSION").into(), ..Self::default() }
    }

    pub fn new(config_text: &str) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: hex::encode(Sha256::digest(config_text.as_bytes())),
            ..Self::default()
        }
    }

    /// The manifest in `dir`, if there is one.
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_NAME);
        if !path.exists() {
            return Ok(None);
        }
        Self::parse(&fs::read_to_string(path)?).map(Some)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: k + 1, msg: msg.into() };
            let (key, value) = line.split_once(" = ").ok_or_else(|| bad("expected 'key = value'"))?;
            match key {
                "version" => m.version = value.into(),
                "config_hash" => m.config_hash = value.into(),
                "halt_reason" => m.halt_reason = Some(value.into()),
                "wall_time_s" => m.wall_time_s = value.parse().map_err(|_| bad("wall time is not a number"))?,
                _ => match key.strip_prefix("output.") {
                    Some(name) => {
                        m.outputs.insert(name.into(), value.into());
                    }
                    None => return Err(bad(&format!("unknown manifest key '{key}'"))),
                },
            }
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut pairs =
            vec![("version".to_string(), self.version.clone()), ("config_hash".to_string(), self.config_hash.clone())];
        if let Some(h) = &self.halt_reason {
            pairs.push(("halt_reason".into(), h.clone()));
        }
        pairs.push(("wall_time_s".into(), fmt_f64(self.wall_time_s)));
        for (name, hash) in &self.outputs {
            pairs.push((format!("output.{name}"), hash.clone()));
        }
        key_values(&pairs)
    }

    /// Hashes `dir/name` and lists it.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let hash = sha256_file(&dir.join(name))?;
        self.outputs.insert(name.into(), hash);
        Ok(())
    }

    /// Folds this command's entries into the manifest already in `dir` (if
    /// any) and writes the result.
    pub fn write_merged(&self, dir: &Path) -> Result<Self> {
        let mut merged = match Self::load(dir)? {
            Some(mut old) => {
                if !self.config_hash.is_empty() && old.config_hash != self.config_hash {
                    // a different configuration owns the directory now
                    old.outputs.clear();
                    old.wall_time_s = 0.0;
                    old.halt_reason = None;
                    old.config_hash = self.config_hash.clone();
                }
                old.version = self.version.clone();
                old
            }
            None => Self { outputs: BTreeMap::new(), wall_time_s: 0.0, halt_reason: None, ..self.clone() },
        };
        merged.wall_time_s += self.wall_time_s;
        if self.halt_reason.is_some() {
            merged.halt_reason = self.halt_reason.clone();
        }
        merged.outputs.extend(self.outputs.iter().map(|(k, v)| (k.clone(), v.clone())));
        fs::write(dir.join(MANIFEST_NAME), merged.to_text())?;
        Ok(merged)
    }
}

//! Effective run configuration: merge order, canonical text form, round trip.
//!
//! Precedence is command line over configuration file over built-in default.
//! The file is plain `key = value` lines. An effective [`RunConfig`] renders
//! to the same format, and parsing that rendering reproduces the value
//! exactly; the manifest of a run is therefore also a valid configuration
//! file for reproducing it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context};

/// Command outcome split by exit class: usage errors exit 2, runtime
/// failures exit 1.
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(err: impl Into<anyhow::Error>) -> Failure {
        Failure::Usage(err.into())
    }

    pub fn runtime(err: impl Into<anyhow::Error>) -> Failure {
        Failure::Runtime(err.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

/// Keys a configuration file may set. Each is the long name of some flag;
/// a key that does not apply to the current command is ignored, an unknown
/// key is a usage error.
const KNOWN_KEYS: [&str; 14] = [
    "suite", "format", "out", "order", "stage", "h", "k", "eps", "beta", "tmax", "method", "seed",
    "dir", "audit",
];

/// Parse `key = value` lines. Blank lines and `#` comments are skipped;
/// a repeated key keeps the last value.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::usage(anyhow!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// A loaded configuration file, used as the middle layer of the merge.
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> FileConfig {
        FileConfig { values: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<FileConfig, Failure> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading configuration file {}", path.display()))
            .map_err(Failure::usage)?;
        let values = parse_kv(&text)?;
        for key in values.keys() {
            // "command" appears in manifests fed back as configuration files.
            if key != "command" && !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Failure::usage(anyhow!(
                    "unknown configuration key `{key}` in {}",
                    path.display()
                )));
            }
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolve one setting: explicit flag, else file value, else default.
/// The file value goes through `FromStr`, so a bad file entry fails with
/// the key named instead of poisoning the run later.
pub fn resolve<T>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T, Failure>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| Failure::usage(anyhow!("configuration key `{key}`: {e} (value `{raw}`)"))),
        None => Ok(default),
    }
}

/// Like [`resolve`] for clap value enums, which spell their values through
/// `ValueEnum` rather than `FromStr`.
pub fn resolve_enum<T>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T, Failure>
where
    T: clap::ValueEnum,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => T::from_str(raw, true)
            .map_err(|_| Failure::usage(anyhow!("configuration key `{key}`: unknown value `{raw}`"))),
        None => Ok(default),
    }
}

/// The effective configuration of one invocation: the command, the level
/// and field parameters, the suite selection, output paths and the seed.
/// Every report echoes it; `render` is its canonical text form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunConfig {
    pub command: String,
    pub eps: String,
    pub beta: String,
    pub h: String,
    pub k: String,
    pub suite: String,
    pub out: String,
    pub seed: String,
}

/// Field order of the canonical rendering. Fixed so equal configurations
/// render byte-identically.
const FIELD_ORDER: [&str; 8] = ["command", "eps", "beta", "h", "k", "suite", "out", "seed"];

impl RunConfig {
    pub fn for_command(command: &str) -> RunConfig {
        RunConfig { command: command.to_string(), ..RunConfig::default() }
    }

    fn field(&self, key: &str) -> &str {
        match key {
            "command" => &self.command,
            "eps" => &self.eps,
            "beta" => &self.beta,
            "h" => &self.h,
            "k" => &self.k,
            "suite" => &self.suite,
            "out" => &self.out,
            "seed" => &self.seed,
            _ => unreachable!("field order lists only known keys"),
        }
    }

    fn field_mut(&mut self, key: &str) -> Option<&mut String> {
        Some(match key {
            "command" => &mut self.command,
            "eps" => &mut self.eps,
            "beta" => &mut self.beta,
            "h" => &mut self.h,
            "k" => &mut self.k,
            "suite" => &mut self.suite,
            "out" => &mut self.out,
            "seed" => &mut self.seed,
            _ => return None,
        })
    }

    /// Canonical text form: fixed field order, empty fields skipped.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in FIELD_ORDER {
            let value = self.field(key);
            if !value.is_empty() {
                out.push_str(key);
                out.push_str(" = ");
                out.push_str(value);
                out.push('\n');
            }
        }
        out
    }

    /// Parse a canonical rendering back. Keys outside the configuration
    /// fields are rejected; parsing its own rendering reproduces the value.
    pub fn parse(text: &str) -> Result<RunConfig, Failure> {
        let map = parse_kv(text)?;
        let mut cfg = RunConfig::default();
        for (key, value) in map {
            match cfg.field_mut(&key) {
                Some(slot) => *slot = value,
                None => return Err(Failure::usage(anyhow!("unknown run-configuration key `{key}`"))),
            }
        }
        Ok(cfg)
    }

    /// Canonical text with the round trip re-proved: the rendering must
    /// parse back to this exact value, so a written manifest is always a
    /// valid configuration file for reproducing the run.
    pub fn canonical_text(&self) -> Result<String, Failure> {
        let text = self.render();
        let back = RunConfig::parse(&text)?;
        if back != *self {
            return Err(Failure::runtime(anyhow!(
                "configuration round trip failed: a field does not survive its own rendering"
            )));
        }
        Ok(text)
    }

    /// The non-empty fields in canonical order, for echoing into reports.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        FIELD_ORDER
            .iter()
            .filter(|k| !self.field(k).is_empty())
            .map(|&k| (k, self.field(k).to_string()))
            .collect()
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

/// Parameter lookup with the precedence built-in default < config file <
/// command-line flag. Every resolved value is remembered for the manifest.
#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    pub resolved: BTreeMap<String, String>,
}

impl Resolver {
    /// Reads `key = value` lines; `#` starts a comment line. Keys are flag
    /// names without the leading dashes.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Resolver::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let mut file = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::io(format!("{}: line {}: expected key = value", path.display(), i + 1)))?;
            file.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Resolver { file, ..Default::default() })
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, Failure>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file.get(key).cloned();
        if from_file.is_some() {
            self.used.insert(key.to_string());
        }
        let value = match (flag, from_file) {
            (Some(v), _) => v,
            (None, Some(text)) => text
                .parse::<T>()
                .map_err(|e| Failure::validation(format!("config key {key}: {text:?}: {e}")))?,
            (None, None) => default,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`Resolver::get`] for a switch: set by the flag, or by a config
    /// value of `true`.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, Failure> {
        let v = self.get::<bool>(key, flag.then_some(true), false)?;
        Ok(v)
    }

    /// Config keys that no parameter of the command asked for.
    pub fn unused(&self) -> Vec<String> {
        self.file.keys().filter(|k| !self.used.contains(*k)).cloned().collect()
    }
}

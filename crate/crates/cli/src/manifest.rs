use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Record of one invocation, written as `manifest.json` next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Resolved parameters in their command-line spelling.
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub threads: usize,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    /// `ok`, `partial` or `error`.
    pub status: String,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub version: String,
}

/// Writes `dir/manifest.json` through a temporary file and a rename, so a
/// reader never sees a partial manifest.
pub fn write_manifest(m: &RunManifest, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(".manifest.json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(serde_json::to_string_pretty(m).map_err(std::io::Error::other)?.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join("manifest.json"))
}

//! Demonstration episodes on disk, and the augmentations applied to them:
//! relighting with propagation, colour degradation, and albedo swaps.

mod augment;
mod degrade;

pub use augment::{augment_episode, swap_albedo, AlbedoSource, AugmentOptions, Augmentation};
pub use degrade::{degrade_episode, degrade_frame, JitterParams, BCS_RANGE, HUE_RANGE};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagery::{load_png, save_png, RadianceImage};

/// Frames in linear light plus the synchronized robot records. Row `t` of
/// `proprio` and `actions` belongs to frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub frames: Vec<RadianceImage>,
    pub proprio: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
}

impl Episode {
    pub fn new(
        frames: Vec<RadianceImage>,
        proprio: Vec<Vec<f64>>,
        actions: Vec<Vec<f64>>,
        meta: BTreeMap<String, String>,
    ) -> Result<Self> {
        let ep = Episode { frames, proprio, actions, meta };
        ep.validate()?;
        Ok(ep)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames.first().map_or((0, 0), |f| f.dims())
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.frames.first().ok_or_else(|| Error::invalid("episode", "has no frames"))?;
        for (t, f) in self.frames.iter().enumerate().skip(1) {
            if f.dims() != first.dims() {
                return Err(Error::dims(format!("frame {t}"), f.dims(), "frame 0", first.dims()));
            }
        }
        for (name, rows) in [("proprio.csv", &self.proprio), ("actions.csv", &self.actions)] {
            if rows.len() != self.frames.len() {
                return Err(Error::RowCount {
                    file: name.into(),
                    rows: rows.len(),
                    frames: self.frames.len(),
                });
            }
        }
        Ok(())
    }

    /// Same records and metadata, new frames.
    pub fn with_frames(&self, frames: Vec<RadianceImage>) -> Result<Episode> {
        Episode::new(frames, self.proprio.clone(), self.actions.clone(), self.meta.clone())
    }
}

fn frame_name(t: usize) -> String {
    format!("{t:06}.png")
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    if !path.exists() {
        return Err(Error::MissingFile { path: path.into() });
    }
    let bad = |reason: String| Error::Parse {
        path: path.into(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("row {}: {f:?}: {e}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    if rows.iter().any(|r| r.is_empty()) {
        return Err(Error::invalid(path.display().to_string(), "rows must have at least one column"));
    }
    let to_io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::invalid(path.display().to_string(), format!("{other:?}")),
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(to_io)?;
    for row in rows {
        // Display prints the shortest decimal that parses back to the same bits
        w.write_record(row.iter().map(|v| v.to_string())).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile { path: path.into() },
        _ => Error::io(path, e),
    })?;
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            reason: format!("line {}: expected key = value", i + 1),
        })?;
        meta.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(meta)
}

/// Reads `frames/%06d.png` (sRGB, decoded to linear), `proprio.csv`,
/// `actions.csv` and `meta.txt` from `dir`.
pub fn load_episode(dir: impl AsRef<Path>) -> Result<Episode> {
    let dir = dir.as_ref();
    let frames_dir = dir.join("frames");
    if !frames_dir.is_dir() {
        return Err(Error::MissingFile { path: frames_dir });
    }
    let mut names: Vec<String> = fs::read_dir(&frames_dir)
        .map_err(|e| Error::io(&frames_dir, e))?
        .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
        .filter(|n| n.len() == 10 && n.ends_with(".png") && n[..6].bytes().all(|b| b.is_ascii_digit()))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::MissingFile { path: frames_dir.join(frame_name(0)) });
    }
    for (t, n) in names.iter().enumerate() {
        if *n != frame_name(t) {
            return Err(Error::MissingFile { path: frames_dir.join(frame_name(t)) });
        }
    }
    let frames = names.iter().map(|n| load_png(frames_dir.join(n))).collect::<Result<Vec<_>>>()?;
    let proprio = read_matrix(&dir.join("proprio.csv"))?;
    let actions = read_matrix(&dir.join("actions.csv"))?;
    let meta = read_meta(&dir.join("meta.txt"))?;
    Episode::new(frames, proprio, actions, meta)
}

/// Writes the layout read by [`load_episode`]. Frames are quantized to 8-bit
/// sRGB; the records round-trip exactly.
pub fn save_episode(ep: &Episode, dir: impl AsRef<Path>) -> Result<()> {
    ep.validate()?;
    for (k, v) in &ep.meta {
        if k.is_empty() || k.contains(['=', '\n', '\r']) || k.trim() != k || v.contains(['\n', '\r']) || v.trim() != v {
            return Err(Error::invalid("meta", format!("entry {k:?} cannot be stored as a key = value line")));
        }
    }
    let dir = dir.as_ref();
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for (t, f) in ep.frames.iter().enumerate() {
        save_png(f, frames_dir.join(frame_name(t)))?;
    }
    write_matrix(&dir.join("proprio.csv"), &ep.proprio)?;
    write_matrix(&dir.join("actions.csv"), &ep.actions)?;
    let meta: String = ep.meta.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let p = dir.join("meta.txt");
    fs::write(&p, meta).map_err(|e| Error::io(&p, e))
}

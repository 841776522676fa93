use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Writes `v` and `f` records with 1-based indices. Coordinates are written
/// as the shortest decimal that reads back to the same `f32`.
pub fn save_mesh_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(out, "v {} {} {}", v.x as f32, v.y as f32, v.z as f32)?;
        }
        for f in &mesh.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads the `v` and `f` records of an OBJ file. Texture and normal indices
/// in face records are ignored; polygons are fanned into triangles.
pub fn load_mesh_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| bad(i + 1, format!("{t:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad(i + 1, "vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        match head.parse::<u32>() {
                            Ok(v) if v >= 1 => Ok(v - 1),
                            _ => Err(bad(i + 1, format!("bad face index {t:?}"))),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad(i + 1, "face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&v| v as usize >= vertices.len())) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("face {:?} references a missing vertex", f.map(|v| v + 1)),
        });
    }
    Ok(TriMesh {
        vertices,
        faces,
        vertex_labels: None,
        vertex_uv: Vec::new(),
        grid: None,
    })
}

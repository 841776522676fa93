//! Depth-map triangulation, mask segmentation of the mesh, and background
//! re-rendering against the triangulated scene.

mod background;
mod intersect;
mod obj;

pub use background::{feather_alpha, render_background, render_background_with, BACKGROUND_STREAM, FEATHER_PIXELS};
pub use intersect::{intersect_triangle, Accel, Bvh, Hit, MeshIntersector};
pub use obj::{load_mesh_obj, save_mesh_obj};

use crate::error::{Error, Result};
use crate::imagery::{Intrinsics, LabelImage, RadianceImage};
use crate::math::Vec3;

/// Default largest max/min depth ratio inside one triangle.
pub const DEFAULT_DISCONTINUITY_RATIO: f64 = 1.1;
/// Triangles with less area than this are dropped.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Triangle mesh in the pinhole camera frame (metres).
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    /// Counter-clockwise as seen from the camera.
    pub faces: Vec<[u32; 3]>,
    /// Segment id per vertex, once a mask has been projected.
    pub vertex_labels: Option<Vec<u8>>,
    /// Source pixel of each vertex; empty for meshes read from OBJ.
    pub vertex_uv: Vec<[u32; 2]>,
    /// Width and height of the depth map the mesh came from.
    pub grid: Option<(usize, usize)>,
}

impl TriMesh {
    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Segment of face `f`: set only when all three vertices share a label.
    pub fn face_label(&self, f: usize) -> Option<u8> {
        let labels = self.vertex_labels.as_ref()?;
        let [a, b, c] = self.faces[f].map(|i| labels[i as usize]);
        (a == b && b == c).then_some(a)
    }

    /// Indices of the faces belonging to `segment`.
    pub fn segment_faces(&self, segment: u8) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| self.face_label(f) == Some(segment)).collect()
    }
}

fn triangle_area(p: [Vec3; 3]) -> f64 {
    0.5 * (p[1] - p[0]).cross(p[2] - p[0]).length()
}

/// Triangulates a depth map: one vertex per pixel centre, two triangles per
/// 2×2 block of pixels. A triangle is dropped when its largest depth exceeds
/// `discontinuity_ratio` times its smallest, or when it is degenerate.
pub fn depth_to_mesh(depth: &RadianceImage, k: &Intrinsics, discontinuity_ratio: f64) -> Result<TriMesh> {
    k.check_invertible()?;
    if depth.channels() != 1 {
        return Err(Error::ChannelMismatch {
            what: "depth".into(),
            expected: 1,
            found: depth.channels(),
        });
    }
    if !(discontinuity_ratio >= 1.0) {
        return Err(Error::param("discontinuity_ratio", format!("{discontinuity_ratio} must be at least 1")));
    }
    if let Some(v) = depth.data().iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::invalid("depth", format!("non-positive depth {v}")));
    }
    let (w, h) = depth.dims();
    let mut vertices = Vec::with_capacity(w * h);
    let mut vertex_uv = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            vertices.push(k.backproject(x as f64 + 0.5, y as f64 + 0.5, depth.scalar(x, y)));
            vertex_uv.push([x as u32, y as u32]);
        }
    }
    let idx = |x: usize, y: usize| (y * w + x) as u32;
    let mut faces = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let (i00, i10, i01, i11) = (idx(x, y), idx(x + 1, y), idx(x, y + 1), idx(x + 1, y + 1));
            for tri in [[i00, i01, i10], [i10, i01, i11]] {
                let z = tri.map(|i| vertices[i as usize].z);
                let (lo, hi) = (z.iter().cloned().fold(f64::INFINITY, f64::min), z.iter().cloned().fold(0.0, f64::max));
                if hi > discontinuity_ratio * lo {
                    continue;
                }
                if triangle_area(tri.map(|i| vertices[i as usize])) < MIN_FACE_AREA {
                    continue;
                }
                faces.push(tri);
            }
        }
    }
    Ok(TriMesh {
        vertices,
        faces,
        vertex_labels: None,
        vertex_uv,
        grid: Some((w, h)),
    })
}

/// Copies `mask` labels onto the vertices through their source pixels.
pub fn project_mask(mesh: &TriMesh, mask: &LabelImage) -> Result<TriMesh> {
    let grid = mesh
        .grid
        .ok_or_else(|| Error::invalid("mesh", "has no source pixel grid to project a mask onto"))?;
    if grid != mask.dims() {
        return Err(Error::dims("mask", mask.dims(), "mesh grid", grid));
    }
    let labels = mesh.vertex_uv.iter().map(|&[x, y]| mask.get(x as usize, y as usize)).collect();
    Ok(TriMesh {
        vertex_labels: Some(labels),
        ..mesh.clone()
    })
}

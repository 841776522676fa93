use rayon::prelude::*;

use super::intersect::{Accel, MeshIntersector};
use super::TriMesh;
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::imagery::{pinhole_to_shading, GBuffer, LabelImage, RadianceImage};
use crate::math::{Rgb, Vec3};
use crate::relight::{pixel_seed, relight_frame, shade_point, RenderSettings};
use crate::shading::ShadingFrame;

/// Width of the blend band outside the kept region, in pixels.
pub const FEATHER_PIXELS: usize = 2;
/// Stream offset for background shading, distinct from the relit frame's.
pub const BACKGROUND_STREAM: u64 = 0xb6;

/// Foreground weight per pixel. Mask values of 128 and above are kept
/// (weight 1); other pixels fade linearly with their Chebyshev distance to
/// the kept region and reach 0 beyond [`FEATHER_PIXELS`].
pub fn feather_alpha(keep: &LabelImage) -> Vec<f64> {
    let (w, h) = keep.dims();
    let r = FEATHER_PIXELS as isize;
    let kept = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && keep.get(x as usize, y as usize) >= 128;
    let mut alpha = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            if kept(x, y) {
                alpha[y as usize * w + x as usize] = 1.0;
                continue;
            }
            let mut best = None;
            for dy in -r..=r {
                for dx in -r..=r {
                    if kept(x + dx, y + dy) {
                        let d = dx.abs().max(dy.abs()) as usize;
                        best = Some(best.map_or(d, |b: usize| b.min(d)));
                    }
                }
            }
            if let Some(d) = best {
                alpha[y as usize * w + x as usize] = 1.0 - d as f64 / (FEATHER_PIXELS + 1) as f64;
            }
        }
    }
    alpha
}

/// Relights the kept region from the G-buffer and re-renders everything else
/// by casting camera rays into `mesh` under `env`. Rays that miss see the
/// environment itself.
pub fn render_background(
    mesh: &TriMesh,
    gbuf: &GBuffer,
    keep: &LabelImage,
    env: &EnvironmentMap,
    settings: &RenderSettings,
) -> Result<RadianceImage> {
    render_background_with(mesh, gbuf, keep, env, settings, Accel::Bvh)
}

/// [`render_background`] with an explicit intersection strategy. The output
/// does not depend on it.
pub fn render_background_with(
    mesh: &TriMesh,
    gbuf: &GBuffer,
    keep: &LabelImage,
    env: &EnvironmentMap,
    settings: &RenderSettings,
    accel: Accel,
) -> Result<RadianceImage> {
    let dims = gbuf.dims();
    match mesh.grid {
        Some(g) if g == dims => {}
        Some(g) => return Err(Error::dims("mesh grid", g, "G-buffer", dims)),
        None => return Err(Error::invalid("mesh", "has no source pixel grid")),
    }
    if mesh.vertex_uv.len() != mesh.vertices.len() {
        return Err(Error::invalid("mesh", "vertex_uv does not cover every vertex"));
    }
    if keep.dims() != dims {
        return Err(Error::dims("mask", keep.dims(), "G-buffer", dims));
    }
    let mut out = relight_frame(gbuf, env, settings)?;
    let alpha = feather_alpha(keep);
    if alpha.iter().all(|&a| a == 1.0) {
        return Ok(out);
    }

    let (w, h) = dims;
    let k = gbuf.intrinsics();
    let tracer = MeshIntersector::new(mesh, accel);
    let shade = |x: usize, y: usize| -> Result<Rgb> {
        let dir = k.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
        let Some(hit) = tracer.intersect(Vec3::ZERO, dir) else {
            return Ok(env.radiance(pinhole_to_shading(dir)) * settings.exposure);
        };
        // material of the nearest vertex, ties to the lower corner index
        let bary = [1.0 - hit.u - hit.v, hit.u, hit.v];
        let corner = (0..3).fold(0, |best, i| if bary[i] > bary[best] { i } else { best });
        let [sx, sy] = mesh.vertex_uv[mesh.faces[hit.face][corner] as usize];
        let (sx, sy) = (sx as usize, sy as usize);
        let frame = ShadingFrame::new(gbuf.normal_at(sx, sy), -pinhole_to_shading(dir));
        shade_point(&gbuf.material(sx, sy), frame, env, settings, pixel_seed(settings.seed, x, y, BACKGROUND_STREAM))
    };

    let background: Vec<Result<Rgb>> = (0..w * h)
        .into_par_iter()
        .map(|p| if alpha[p] < 1.0 { shade(p % w, p / w) } else { Ok(Vec3::ZERO) })
        .collect();
    for (p, bg) in background.into_iter().enumerate() {
        let a = alpha[p];
        if a < 1.0 {
            let (x, y) = (p % w, p / w);
            out.set_rgb(x, y, out.rgb(x, y) * a + bg? * (1.0 - a));
        }
    }
    Ok(out)
}

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::envmap::uv_to_dir;
use crate::error::{Error, Result};
use crate::imagery::{GBuffer, RadianceImage};
use crate::math::Vec3;
use crate::shading::{brdf_eval, BrdfMode};

/// Largest environment resolution the basis will be built for.
pub const MAX_BASIS_RES: (usize, usize) = (64, 32);

/// One image per environment texel: `B_j(x, y)` is the radiance pixel `(x, y)`
/// reflects toward the camera when texel `j` emits unit radiance in every
/// channel and all other texels are black.
///
/// Stored as `[texel][channel][pixel]` so that the per-channel Gram matrix
/// reads contiguous rows.
#[derive(Debug, Clone)]
pub struct TransportBasis {
    env_width: usize,
    env_height: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl TransportBasis {
    pub fn env_dims(&self) -> (usize, usize) {
        (self.env_width, self.env_height)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn texel_count(&self) -> usize {
        self.env_width * self.env_height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Texel index of column `col`, row `row`.
    pub fn texel_index(&self, col: usize, row: usize) -> usize {
        row * self.env_width + col
    }

    /// `B_texel` for one channel, one value per pixel in row-major order.
    pub fn image(&self, texel: usize, channel: usize) -> &[f64] {
        let n = self.pixel_count();
        let start = (texel * 3 + channel) * n;
        &self.data[start..start + n]
    }

    pub fn get(&self, texel: usize, channel: usize, x: usize, y: usize) -> f64 {
        self.image(texel, channel)[y * self.width + x]
    }

    /// `Σ_j E_j · B_j` for an environment given as a texel grid of the
    /// basis resolution.
    pub fn render(&self, env: &RadianceImage) -> Result<RadianceImage> {
        if env.dims() != self.env_dims() {
            return Err(Error::dims("environment", env.dims(), "basis", self.env_dims()));
        }
        let n = self.pixel_count();
        let mut acc = vec![[0.0f64; 3]; n];
        for row in 0..self.env_height {
            for col in 0..self.env_width {
                let e = env.rgb(col, row);
                let j = self.texel_index(col, row);
                for c in 0..3 {
                    if e[c] == 0.0 {
                        continue;
                    }
                    for (a, b) in acc.iter_mut().zip(self.image(j, c)) {
                        a[c] += e[c] * b;
                    }
                }
            }
        }
        let mut img = RadianceImage::new(self.width, self.height, 3);
        for (p, a) in acc.iter().enumerate() {
            img.set_rgb(p % self.width, p / self.width, Vec3::from_array(*a));
        }
        Ok(img)
    }
}

/// Builds the transport basis by midpoint quadrature over each texel, with
/// `subdivisions × subdivisions` sub-cells per texel.
pub fn transport_basis(
    gbuf: &GBuffer,
    env_res: (usize, usize),
    mode: BrdfMode,
    subdivisions: usize,
) -> Result<TransportBasis> {
    let (ew, eh) = env_res;
    if ew == 0 || eh == 0 {
        return Err(Error::param("env_res", "must be nonzero"));
    }
    if ew > MAX_BASIS_RES.0 || eh > MAX_BASIS_RES.1 {
        return Err(Error::param(
            "env_res",
            format!("{ew}x{eh} exceeds the {}x{} limit", MAX_BASIS_RES.0, MAX_BASIS_RES.1),
        ));
    }
    if subdivisions == 0 {
        return Err(Error::param("subdivisions", "must be at least 1"));
    }
    let (w, h) = gbuf.dims();
    let texels = ew * eh;

    // quadrature nodes shared by every pixel
    let s = subdivisions;
    let cell = (2.0 * PI / (ew * s) as f64) * (PI / (eh * s) as f64);
    let mut nodes: Vec<(usize, Vec3, f64)> = Vec::with_capacity(texels * s * s);
    for row in 0..eh {
        for col in 0..ew {
            for b in 0..s {
                let v = (row as f64 + (b as f64 + 0.5) / s as f64) / eh as f64;
                for a in 0..s {
                    let u = (col as f64 + (a as f64 + 0.5) / s as f64) / ew as f64;
                    nodes.push((row * ew + col, uv_to_dir(u, v), cell * (v * PI).sin()));
                }
            }
        }
    }

    // pixel-major first, then transposed
    let per_pixel: Vec<Vec<f64>> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let mut out = vec![0.0; texels * 3];
            let n = gbuf.normal_at(x, y);
            let v = gbuf.view_at(x, y);
            if n.dot(v) <= 0.0 {
                return out;
            }
            let mat = gbuf.material(x, y);
            for &(j, dir, d_omega) in &nodes {
                let cos = n.dot(dir);
                if cos <= 0.0 {
                    continue;
                }
                let f = brdf_eval(&mat, n, dir, v, mode) * (cos * d_omega);
                for c in 0..3 {
                    out[j * 3 + c] += f[c];
                }
            }
            out
        })
        .collect();

    let n = w * h;
    let mut data = vec![0.0; texels * 3 * n];
    data.par_chunks_mut(n).enumerate().for_each(|(jc, dst)| {
        for (p, d) in dst.iter_mut().enumerate() {
            *d = per_pixel[p][jc];
        }
    });
    Ok(TransportBasis {
        env_width: ew,
        env_height: eh,
        width: w,
        height: h,
        data,
    })
}

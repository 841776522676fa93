//! Equirectangular environment maps: lookup and importance sampling.
//!
//! Directions are in the shading frame (y up, z toward the viewer). The map
//! is addressed by `u = atan2(dx, -dz) / 2π + 0.5` and `v = acos(dy) / π`, so
//! `v = 0` is the zenith and the horizontal centre of the image (`u = 0.5`)
//! is the direction the camera looks along (`-z`).
//!
//! Sampling picks a texel with probability proportional to
//! `luminance · sin θ_centre`, then a uniform point inside it in `(u, v)`.
//! The resulting solid-angle density is
//! `weight / (total_weight · (2π/W)(π/H) · sin θ)` with `θ` the polar angle of
//! the sampled direction, which integrates to exactly one over each texel.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imagery::RadianceImage;
use crate::math::Vec3;

/// Keeps in-texel sample offsets off texel borders so that re-deriving the
/// texel from the sampled direction never lands on a neighbour.
const EDGE_GUARD: f64 = 1e-7;

/// `(u, v)` for a direction. The input is normalised first; zero or
/// non-finite vectors are rejected.
pub fn dir_to_uv(dir: Vec3) -> Result<(f64, f64)> {
    let len = dir.length();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::ZeroDirection);
    }
    Ok(unit_dir_to_uv(dir / len))
}

/// `dir_to_uv` for a direction already known to be unit length.
pub fn unit_dir_to_uv(d: Vec3) -> (f64, f64) {
    let mut u = d.x.atan2(-d.z) / (2.0 * PI) + 0.5;
    if u >= 1.0 {
        u -= 1.0;
    }
    let v = d.y.clamp(-1.0, 1.0).acos() / PI;
    (u, v)
}

/// Right inverse of [`dir_to_uv`].
pub fn uv_to_dir(u: f64, v: f64) -> Vec3 {
    let phi = (u - 0.5) * 2.0 * PI;
    let theta = v * PI;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * sp, ct, -st * cp)
}

/// One draw from [`EnvironmentMap::sample_light`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSample {
    pub dir: Vec3,
    /// Radiance of the texel the sample fell in.
    pub radiance: Vec3,
    /// Solid-angle density.
    pub pdf: f64,
}

/// HDR radiance grid plus its importance-sampling tables.
#[derive(Debug, Clone)]
pub struct EnvironmentMap {
    radiance: RadianceImage,
    /// `height + 1` entries, cumulative over rows.
    marginal_cdf: Vec<f64>,
    /// `height` rows of `width + 1` cumulative entries.
    conditional_cdf: Vec<f64>,
    /// Unnormalised texel weights, `luminance · sin θ_centre`.
    weights: Vec<f64>,
    total_weight: f64,
    /// Peak sampling density relative to a uniform sphere (`4π · max pdf`).
    concentration: f64,
}

impl EnvironmentMap {
    /// Builds the sampling tables for `radiance`. Fails on negative values.
    pub fn new(radiance: RadianceImage) -> Result<Self> {
        if let Some(v) = radiance.data().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("environment map", format!("radiance value {v} is negative or not finite")));
        }
        let (w, h) = radiance.dims();
        if w == 0 || h == 0 {
            return Err(Error::invalid("environment map", "empty image"));
        }
        let mut weights = vec![0.0; w * h];
        let mut conditional_cdf = vec![0.0; h * (w + 1)];
        let mut row_sums = vec![0.0; h];
        for j in 0..h {
            let sin_theta = ((j as f64 + 0.5) * PI / h as f64).sin();
            let cdf = &mut conditional_cdf[j * (w + 1)..(j + 1) * (w + 1)];
            for i in 0..w {
                let wt = radiance.rgb(i, j).luminance() * sin_theta;
                weights[j * w + i] = wt;
                cdf[i + 1] = cdf[i] + wt;
            }
            row_sums[j] = cdf[w];
            normalize_cdf(cdf);
        }
        let mut marginal_cdf = vec![0.0; h + 1];
        for j in 0..h {
            marginal_cdf[j + 1] = marginal_cdf[j] + row_sums[j];
        }
        let total_weight = marginal_cdf[h];
        normalize_cdf(&mut marginal_cdf);
        let concentration = if total_weight > 0.0 {
            let max_lum = (0..h)
                .flat_map(|j| (0..w).map(move |i| (i, j)))
                .map(|(i, j)| radiance.rgb(i, j).luminance())
                .fold(0.0, f64::max);
            let cell = (2.0 * PI / w as f64) * (PI / h as f64);
            4.0 * PI * max_lum / (total_weight * cell)
        } else {
            0.0
        };
        Ok(EnvironmentMap {
            radiance,
            marginal_cdf,
            conditional_cdf,
            weights,
            total_weight,
            concentration,
        })
    }

    /// Constant-radiance map.
    pub fn constant(width: usize, height: usize, rgb: Vec3) -> Result<Self> {
        Self::new(RadianceImage::filled(width, height, rgb))
    }

    /// Map whose texel `(i, j)` holds `f(direction of texel centre)`.
    pub fn from_direction_fn(width: usize, height: usize, mut f: impl FnMut(Vec3) -> Vec3) -> Result<Self> {
        Self::new(RadianceImage::from_fn(width, height, 3, |i, j| {
            f(texel_center_dir(i, j, width, height))
        }))
    }

    pub fn radiance_image(&self) -> &RadianceImage {
        &self.radiance
    }

    pub fn width(&self) -> usize {
        self.radiance.width()
    }

    pub fn height(&self) -> usize {
        self.radiance.height()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// True when every texel is black; light sampling is then unavailable and
    /// integrators fall back to BSDF-side sampling.
    pub fn is_degenerate(&self) -> bool {
        !(self.total_weight > 0.0)
    }

    /// Peak of the light-sampling density divided by the uniform-sphere
    /// density `1/4π`. About 1 for a constant map, large for a small bright
    /// source, 0 for a degenerate map.
    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    /// Share of MIS samples drawn from the map rather than the cosine lobe:
    /// `0.5 · (1 - 1/κ)` clamped to `[0, 0.5]`, with κ the concentration.
    /// Light sampling buys nothing on a uniform map, so it gets no samples.
    pub fn mis_light_fraction(&self) -> f64 {
        if self.concentration <= 1.0 {
            0.0
        } else {
            (0.5 * (1.0 - 1.0 / self.concentration)).clamp(0.0, 0.5)
        }
    }

    pub fn marginal_cdf(&self) -> &[f64] {
        &self.marginal_cdf
    }

    pub fn conditional_cdf(&self, row: usize) -> &[f64] {
        let w = self.width();
        &self.conditional_cdf[row * (w + 1)..(row + 1) * (w + 1)]
    }

    /// Direction through the centre of texel `(col, row)`.
    pub fn texel_direction(&self, col: usize, row: usize) -> Vec3 {
        texel_center_dir(col, row, self.width(), self.height())
    }

    /// Solid angle of texel row `row`, `(2π/W)(π/H) · sin θ_centre`.
    pub fn texel_solid_angle(&self, row: usize) -> f64 {
        let (w, h) = (self.width() as f64, self.height() as f64);
        (2.0 * PI / w) * (PI / h) * ((row as f64 + 0.5) * PI / h).sin()
    }

    /// Texel containing a unit direction.
    pub fn texel_of(&self, dir: Vec3) -> (usize, usize) {
        let (u, v) = unit_dir_to_uv(dir);
        let col = ((u * self.width() as f64) as usize).min(self.width() - 1);
        let row = ((v * self.height() as f64) as usize).min(self.height() - 1);
        (col, row)
    }

    /// Bilinear radiance lookup, wrapping in `u` and clamping in `v`.
    /// `dir` must be unit length.
    pub fn radiance(&self, dir: Vec3) -> Vec3 {
        let (u, v) = unit_dir_to_uv(dir);
        self.radiance_uv(u, v)
    }

    /// Checked form of [`radiance`](Self::radiance) that accepts any nonzero vector.
    pub fn sample_radiance(&self, dir: Vec3) -> Result<Vec3> {
        let (u, v) = dir_to_uv(dir)?;
        Ok(self.radiance_uv(u, v))
    }

    fn radiance_uv(&self, u: f64, v: f64) -> Vec3 {
        let (w, h) = (self.width(), self.height());
        let x = u * w as f64 - 0.5;
        let y = (v * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let xi0 = (x0 as i64).rem_euclid(w as i64) as usize;
        let xi1 = (xi0 + 1) % w;
        let yi0 = y0 as usize;
        let yi1 = (yi0 + 1).min(h - 1);
        let r = &self.radiance;
        let top = r.rgb(xi0, yi0) * (1.0 - fx) + r.rgb(xi1, yi0) * fx;
        let bottom = r.rgb(xi0, yi1) * (1.0 - fx) + r.rgb(xi1, yi1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Draws a direction proportionally to texel luminance.
    pub fn sample_light(&self, u1: f64, u2: f64) -> Result<LightSample> {
        if self.is_degenerate() {
            return Err(Error::DegenerateEnvironment);
        }
        let (w, h) = (self.width(), self.height());
        let (row, dv) = sample_cdf(&self.marginal_cdf, u1);
        let (col, du) = sample_cdf(self.conditional_cdf(row), u2);
        let du = du.clamp(EDGE_GUARD, 1.0 - EDGE_GUARD);
        let dv = dv.clamp(EDGE_GUARD, 1.0 - EDGE_GUARD);
        let dir = uv_to_dir((col as f64 + du) / w as f64, (row as f64 + dv) / h as f64);
        Ok(LightSample {
            dir,
            radiance: self.radiance.rgb(col, row),
            pdf: self.pdf_light(dir),
        })
    }

    /// Solid-angle density with which [`sample_light`](Self::sample_light)
    /// produces `dir`. Zero for degenerate maps.
    pub fn pdf_light(&self, dir: Vec3) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let sin_theta = (1.0 - dir.y * dir.y).max(0.0).sqrt();
        if sin_theta <= 0.0 {
            return 0.0;
        }
        let (col, row) = self.texel_of(dir);
        let (w, h) = (self.width() as f64, self.height() as f64);
        self.weights[row * self.width() + col] / (self.total_weight * (2.0 * PI / w) * (PI / h) * sin_theta)
    }

    /// Copy with radiance multiplied by `factor` (tables rebuilt).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.radiance.map_values(|v| (v as f64 * factor) as f32))
    }
}

fn texel_center_dir(col: usize, row: usize, w: usize, h: usize) -> Vec3 {
    uv_to_dir((col as f64 + 0.5) / w as f64, (row as f64 + 0.5) / h as f64)
}

fn normalize_cdf(cdf: &mut [f64]) {
    let n = cdf.len() - 1;
    let total = cdf[n];
    if total > 0.0 {
        for c in cdf.iter_mut() {
            *c /= total;
        }
    } else {
        for (i, c) in cdf.iter_mut().enumerate() {
            *c = i as f64 / n as f64;
        }
    }
    cdf[n] = 1.0;
}

/// Inverts a normalised CDF: returns the bin containing `u` and the offset of
/// `u` inside it, skipping zero-width bins.
fn sample_cdf(cdf: &[f64], u: f64) -> (usize, f64) {
    let n = cdf.len() - 1;
    let mut bin = cdf[1..].partition_point(|&c| c <= u).min(n - 1);
    while bin > 0 && cdf[bin + 1] <= cdf[bin] {
        bin -= 1;
    }
    let width = cdf[bin + 1] - cdf[bin];
    let offset = if width > 0.0 {
        ((u - cdf[bin]) / width).clamp(0.0, 1.0)
    } else {
        0.5
    };
    (bin, offset)
}

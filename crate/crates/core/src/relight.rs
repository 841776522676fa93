//! Monte Carlo evaluation of the reflected radiance at each G-buffer pixel:
//!
//! ```text
//! I*(x) = ∫_Ω  f(ω) · E(ω) · (ω · n)  dω
//! ```
//!
//! over the hemisphere around the pixel normal, with no visibility term.
//! Two strategies are available, environment importance sampling and
//! cosine-weighted hemisphere sampling, combined with the balance heuristic.
//! Each strategy draws Latin-hypercube stratified points.
//!
//! Every pixel owns a random stream seeded from a hash of
//! `(seed, x, y, seed_offset)`, so a frame is bit-identical regardless of how
//! pixels are scheduled across threads.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::imagery::{GBuffer, RadianceImage};
use crate::math::{Rgb, Vec3};
use crate::shading::{brdf_eval, BrdfMode, MaterialSample, ShadingFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    /// Environment and cosine sampling, balance-heuristic weighted.
    #[default]
    Mis,
    EnvOnly,
    CosineOnly,
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mis" => Ok(SamplerKind::Mis),
            "env_only" | "env-only" => Ok(SamplerKind::EnvOnly),
            "cosine_only" | "cosine-only" => Ok(SamplerKind::CosineOnly),
            other => Err(Error::param("sampler", format!("unknown sampler {other:?}"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerKind::Mis => "mis",
            SamplerKind::EnvOnly => "env_only",
            SamplerKind::CosineOnly => "cosine_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub spp: u32,
    pub mode: BrdfMode,
    pub sampler: SamplerKind,
    pub seed: u64,
    /// Multiplier on environment radiance.
    pub exposure: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            spp: 256,
            mode: BrdfMode::Disney,
            sampler: SamplerKind::Mis,
            seed: 0,
            exposure: 1.0,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(Error::param("spp", "must be at least 1"));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(Error::param("exposure", format!("{} must be positive", self.exposure)));
        }
        Ok(())
    }

    fn check_env(&self, env: &EnvironmentMap) -> Result<()> {
        self.validate()?;
        if self.sampler == SamplerKind::EnvOnly && env.is_degenerate() {
            return Err(Error::DegenerateEnvironment);
        }
        Ok(())
    }
}

/// Stream seed for one pixel.
pub fn pixel_seed(seed: u64, x: usize, y: usize, seed_offset: u64) -> u64 {
    let mut h = splitmix(seed ^ 0x9e37_79b9_7f4a_7c15);
    h = splitmix(h ^ x as u64);
    h = splitmix(h ^ (y as u64).rotate_left(32));
    splitmix(h ^ seed_offset)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` Latin-hypercube points in `[0, 1)²`.
fn latin_hypercube(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let inv = 1.0 / n as f64;
    (0..n)
        .map(|k| {
            let a = (k as f64 + rng.random::<f64>()) * inv;
            let b = (perm[k] as f64 + rng.random::<f64>()) * inv;
            (a.min(1.0 - f64::EPSILON), b.min(1.0 - f64::EPSILON))
        })
        .collect()
}

/// Cosine-weighted direction about `n` (Malley's method).
fn cosine_sample(n: Vec3, u1: f64, u2: f64) -> Vec3 {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = n.orthonormal_basis();
    let z = (1.0 - u1).max(0.0).sqrt();
    (t * (r * phi.cos()) + b * (r * phi.sin()) + n * z).normalized()
}

fn cosine_pdf(n: Vec3, dir: Vec3) -> f64 {
    n.dot(dir).max(0.0) / PI
}

/// Drives the estimator for one shading point. `visit(dir, weight)` receives
/// every sampled direction with `weight = E(dir) · max(0, n·dir) / Σ n_k p_k(dir)`
/// already applied, so the caller only multiplies by its BRDF value.
///
/// Single-strategy samplers draw `spp` samples. MIS draws `2 · spp`, split
/// between the map and the cosine lobe by [`EnvironmentMap::mis_light_fraction`]
/// and combined with the balance heuristic over sample counts.
pub(crate) fn integrate(
    n: Vec3,
    env: &EnvironmentMap,
    spp: u32,
    sampler: SamplerKind,
    stream_seed: u64,
    mut visit: impl FnMut(Vec3, Rgb),
) {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let spp_n = spp as usize;
    let (n_env, n_cos) = sample_counts(env, spp_n, sampler);
    let env_points = latin_hypercube(&mut rng, n_env);
    let cos_points = latin_hypercube(&mut rng, n_cos);
    let (ne, nc) = (n_env as f64, n_cos as f64);

    for &(u1, u2) in &env_points {
        // sample_light cannot fail here: degenerate maps get no light samples
        let Ok(s) = env.sample_light(u1, u2) else { continue };
        let cos = n.dot(s.dir);
        if cos <= 0.0 {
            continue;
        }
        let denom = ne * s.pdf + nc * cosine_pdf(n, s.dir);
        if denom > 0.0 {
            visit(s.dir, env.radiance(s.dir) * (cos / denom));
        }
    }
    for &(u1, u2) in &cos_points {
        let dir = cosine_sample(n, u1, u2);
        let cos = n.dot(dir);
        if cos <= 0.0 {
            continue;
        }
        let p_env = if n_env > 0 { env.pdf_light(dir) } else { 0.0 };
        let denom = ne * p_env + nc * cosine_pdf(n, dir);
        if denom > 0.0 {
            visit(dir, env.radiance(dir) * (cos / denom));
        }
    }
}

/// Number of light and cosine samples used per shading point.
pub fn sample_counts(env: &EnvironmentMap, spp: usize, sampler: SamplerKind) -> (usize, usize) {
    match sampler {
        SamplerKind::EnvOnly if env.is_degenerate() => (0, 0),
        SamplerKind::EnvOnly => (spp, 0),
        SamplerKind::CosineOnly => (0, spp),
        SamplerKind::Mis if env.is_degenerate() => (0, 2 * spp),
        SamplerKind::Mis => {
            let total = 2 * spp;
            let n_env = (total as f64 * env.mis_light_fraction()).round() as usize;
            let n_env = if env.mis_light_fraction() > 0.0 { n_env.max(1) } else { 0 };
            (n_env, total - n_env)
        }
    }
}

/// Estimates reflected radiance for an arbitrary material and frame.
/// `stream_seed` fully determines the random numbers used.
pub fn shade_point(
    mat: &MaterialSample,
    frame: ShadingFrame,
    env: &EnvironmentMap,
    settings: &RenderSettings,
    stream_seed: u64,
) -> Result<Rgb> {
    settings.check_env(env)?;
    Ok(shade_point_unchecked(mat, frame, env, settings, stream_seed))
}

pub(crate) fn shade_point_unchecked(
    mat: &MaterialSample,
    frame: ShadingFrame,
    env: &EnvironmentMap,
    settings: &RenderSettings,
    stream_seed: u64,
) -> Rgb {
    if frame.cos_view() <= 0.0 {
        return Vec3::ZERO;
    }
    let mut sum = Vec3::ZERO;
    integrate(frame.n, env, settings.spp, settings.sampler, stream_seed, |l, w| {
        sum += brdf_eval(mat, frame.n, l, frame.v, settings.mode).mul_elem(w);
    });
    sum * settings.exposure
}

/// Radiance leaving the surface at pixel `(x, y)` toward the camera.
pub fn shade_pixel(
    gbuf: &GBuffer,
    x: usize,
    y: usize,
    env: &EnvironmentMap,
    settings: &RenderSettings,
    seed_offset: u64,
) -> Result<Rgb> {
    if x >= gbuf.width() || y >= gbuf.height() {
        return Err(Error::param("pixel", format!("({x}, {y}) outside {}x{}", gbuf.width(), gbuf.height())));
    }
    settings.check_env(env)?;
    Ok(shade_gbuffer_pixel(gbuf, x, y, env, settings, seed_offset))
}

fn shade_gbuffer_pixel(
    gbuf: &GBuffer,
    x: usize,
    y: usize,
    env: &EnvironmentMap,
    settings: &RenderSettings,
    seed_offset: u64,
) -> Rgb {
    let frame = ShadingFrame::new(gbuf.normal_at(x, y), gbuf.view_at(x, y));
    let seed = pixel_seed(settings.seed, x, y, seed_offset);
    shade_point_unchecked(&gbuf.material(x, y), frame, env, settings, seed)
}

/// Relights every pixel. Output is bit-identical for a fixed seed regardless
/// of the rayon pool it runs on.
pub fn relight_frame(gbuf: &GBuffer, env: &EnvironmentMap, settings: &RenderSettings) -> Result<RadianceImage> {
    relight_frame_with_offset(gbuf, env, settings, 0)
}

/// [`relight_frame`] with an extra stream offset, for drawing independent
/// renders of the same scene.
pub fn relight_frame_with_offset(
    gbuf: &GBuffer,
    env: &EnvironmentMap,
    settings: &RenderSettings,
    seed_offset: u64,
) -> Result<RadianceImage> {
    settings.check_env(env)?;
    let (w, h) = gbuf.dims();
    let rows: Vec<Vec<Rgb>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| shade_gbuffer_pixel(gbuf, x, y, env, settings, seed_offset))
                .collect()
        })
        .collect();
    let mut img = RadianceImage::new(w, h, 3);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, v) in row.into_iter().enumerate() {
            img.set_rgb(x, y, v);
        }
    }
    Ok(img)
}

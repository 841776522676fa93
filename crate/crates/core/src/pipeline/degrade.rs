use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Episode;
use crate::error::{Error, Result};
use crate::imagery::{srgb_decode, srgb_encode, RadianceImage};
use crate::math::Vec3;

/// Range of the brightness, contrast and saturation factors.
pub const BCS_RANGE: (f64, f64) = (0.2, 1.9);
/// Range of the hue shift, in turns.
pub const HUE_RANGE: (f64, f64) = (-0.5, 0.5);

/// One colour-jitter draw, applied identically to every frame of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    /// Hue rotation in turns.
    pub hue: f64,
    /// Seed the factors were drawn from, if they were drawn.
    pub seed: Option<u64>,
}

impl Default for JitterParams {
    fn default() -> Self {
        JitterParams {
            brightness: 1.0,
            contrast: 1.0,
            saturation: 1.0,
            hue: 0.0,
            seed: None,
        }
    }
}

impl JitterParams {
    /// Uniform draws over the stated ranges.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = BCS_RANGE;
        JitterParams {
            brightness: rng.random_range(lo..=hi),
            contrast: rng.random_range(lo..=hi),
            saturation: rng.random_range(lo..=hi),
            hue: rng.random_range(HUE_RANGE.0..=HUE_RANGE.1),
            seed: Some(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("brightness", self.brightness), ("contrast", self.contrast), ("saturation", self.saturation)] {
            if !(BCS_RANGE.0..=BCS_RANGE.1).contains(&v) {
                return Err(Error::param(name, format!("{v} outside [{}, {}]", BCS_RANGE.0, BCS_RANGE.1)));
            }
        }
        if !(HUE_RANGE.0..=HUE_RANGE.1).contains(&self.hue) {
            return Err(Error::param("hue", format!("{} outside [{}, {}]", self.hue, HUE_RANGE.0, HUE_RANGE.1)));
        }
        Ok(())
    }
}

fn luma(c: Vec3) -> f64 {
    c.luminance()
}

fn clamp01(c: Vec3) -> Vec3 {
    c.map(|v| v.clamp(0.0, 1.0))
}

fn rgb_to_hsv(c: Vec3) -> (f64, f64, f64) {
    let (max, min) = (c.max_elem(), c.min_elem());
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == c.x {
        ((c.y - c.z) / d).rem_euclid(6.0)
    } else if max == c.y {
        (c.z - c.x) / d + 2.0
    } else {
        (c.x - c.y) / d + 4.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h / 6.0, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Vec3 {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = (h6.floor() as i32).rem_euclid(6);
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i {
        0 => Vec3::new(v, t, p),
        1 => Vec3::new(q, v, p),
        2 => Vec3::new(p, v, t),
        3 => Vec3::new(p, q, v),
        4 => Vec3::new(t, p, v),
        _ => Vec3::new(v, p, q),
    }
}

/// Applies brightness, contrast, saturation and hue, in that order, to the
/// sRGB encoding of `frame`. Contrast pivots on the frame's mean luma.
pub fn degrade_frame(frame: &RadianceImage, params: &JitterParams) -> Result<RadianceImage> {
    params.validate()?;
    let (w, h) = frame.dims();
    let mut px: Vec<Vec3> = (0..w * h)
        .map(|p| clamp01(frame.rgb(p % w, p / w)).map(srgb_encode) * params.brightness)
        .map(clamp01)
        .collect();
    let mean = px.iter().map(|&c| luma(c)).sum::<f64>() / px.len().max(1) as f64;
    for c in &mut px {
        *c = clamp01((*c - Vec3::splat(mean)) * params.contrast + Vec3::splat(mean));
        let y = Vec3::splat(luma(*c));
        *c = clamp01(y.lerp(*c, params.saturation));
        if params.hue != 0.0 {
            let (hh, s, v) = rgb_to_hsv(*c);
            *c = hsv_to_rgb(hh + params.hue, s, v);
        }
    }
    Ok(RadianceImage::from_fn(w, h, 3, |x, y| px[y * w + x].map(srgb_decode)))
}

/// [`degrade_frame`] on every frame with the same parameters; the records
/// are copied unchanged.
pub fn degrade_episode(ep: &Episode, params: &JitterParams) -> Result<Episode> {
    params.validate()?;
    let frames = ep.frames.par_iter().map(|f| degrade_frame(f, params)).collect::<Result<Vec<_>>>()?;
    ep.with_frames(frames)
}

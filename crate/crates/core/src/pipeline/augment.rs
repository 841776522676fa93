use rayon::prelude::*;

use super::Episode;
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::imagery::{GBuffer, LabelImage, RadianceImage};
use crate::math::Rgb;
use crate::optimize::{estimate_envmap, refine_properties, EnvEstimateConfig, RefineConfig};
use crate::relight::{relight_frame, RenderSettings};
use crate::temporal::{propagate, quotient_map, DEFAULT_EPSILON, DEFAULT_GAIN_MAX};

/// Replacement albedo for [`swap_albedo`].
#[derive(Debug, Clone, PartialEq)]
pub enum AlbedoSource {
    Constant(Rgb),
    /// Three-channel image of the G-buffer's size; read inside the mask only.
    Image(RadianceImage),
}

/// Replaces the albedo where `mask >= 128`. Every other map is carried over
/// untouched.
pub fn swap_albedo(gbuf: &GBuffer, mask: &LabelImage, new_albedo: &AlbedoSource) -> Result<GBuffer> {
    if mask.dims() != gbuf.dims() {
        return Err(Error::dims("mask", mask.dims(), "G-buffer", gbuf.dims()));
    }
    match new_albedo {
        AlbedoSource::Constant(c) => {
            if !(0..3).all(|i| (0.0..=1.0).contains(&c[i])) {
                return Err(Error::invalid("albedo", format!("{c:?} outside [0, 1]")));
            }
        }
        AlbedoSource::Image(img) => {
            if img.dims() != gbuf.dims() {
                return Err(Error::dims("albedo image", img.dims(), "G-buffer", gbuf.dims()));
            }
            if img.channels() != 3 {
                return Err(Error::ChannelMismatch {
                    what: "albedo image".into(),
                    expected: 3,
                    found: img.channels(),
                });
            }
            if img.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid("albedo image", "values outside [0, 1]"));
            }
        }
    }
    let mut albedo = gbuf.albedo().clone();
    let (w, h) = gbuf.dims();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) >= 128 {
                let c = match new_albedo {
                    AlbedoSource::Constant(c) => *c,
                    AlbedoSource::Image(img) => img.rgb(x, y),
                };
                albedo.set_rgb(x, y, c);
            }
        }
    }
    gbuf.with_albedo(albedo)
}

/// Knobs of [`augment_episode`] beyond the render settings.
#[derive(Debug, Clone)]
pub struct AugmentOptions {
    /// Refine the G-buffer against frame 0 before relighting.
    pub refine: Option<RefineConfig>,
    /// Lighting of the original frame 0. Estimated when refinement needs it
    /// and it is not given.
    pub source_env: Option<EnvironmentMap>,
    pub estimate: EnvEstimateConfig,
    pub epsilon: f64,
    pub gain_max: f64,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            refine: None,
            source_env: None,
            estimate: EnvEstimateConfig::default(),
            epsilon: DEFAULT_EPSILON,
            gain_max: DEFAULT_GAIN_MAX,
        }
    }
}

#[derive(Debug)]
pub struct Augmentation {
    /// One entry per input environment, in input order. A failed
    /// environment does not affect the others.
    pub episodes: Vec<Result<Episode>>,
    /// G-buffer every environment was rendered from.
    pub gbuf: GBuffer,
    /// Number of environment estimations performed (0 or 1).
    pub estimations: usize,
    /// Number of refinement runs performed (0 or 1).
    pub refinements: usize,
}

/// Relights frame 0 under each environment and carries the change across the
/// episode by quotient images. Estimation and refinement run once, before
/// any environment; the per-environment jobs then run in parallel.
pub fn augment_episode(
    ep: &Episode,
    gbuf: &GBuffer,
    envs: &[EnvironmentMap],
    settings: &RenderSettings,
    options: &AugmentOptions,
) -> Result<Augmentation> {
    ep.validate()?;
    settings.validate()?;
    if envs.is_empty() {
        return Err(Error::invalid("environments", "at least one is required"));
    }
    if gbuf.dims() != ep.dims() {
        return Err(Error::dims("G-buffer", gbuf.dims(), "episode frames", ep.dims()));
    }
    let i0 = &ep.frames[0];
    let (mut estimations, mut refinements) = (0, 0);
    let gbuf = match &options.refine {
        None => gbuf.clone(),
        Some(cfg) => {
            let source = match &options.source_env {
                Some(e) => e.clone(),
                None => {
                    estimations += 1;
                    estimate_envmap(gbuf, i0, &options.estimate)?.env
                }
            };
            refinements += 1;
            refine_properties(gbuf, i0, &source, cfg)?.gbuf
        }
    };

    let episodes = envs
        .par_iter()
        .map(|env| {
            let relit = relight_frame(&gbuf, env, settings)?;
            let q = quotient_map(i0, &relit, options.epsilon, options.gain_max)?;
            ep.with_frames(propagate(&ep.frames, &q)?)
        })
        .collect();
    Ok(Augmentation {
        episodes,
        gbuf,
        estimations,
        refinements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::Intrinsics;
    use crate::math::Vec3;
    use crate::shading::{BrdfMode, MaterialSample};
    use std::collections::BTreeMap;

    fn scene() -> GBuffer {
        GBuffer::uniform(
            8,
            8,
            MaterialSample::new(Vec3::new(0.6, 0.4, 0.2), 0.7, 0.0),
            |x, y| Vec3::new(x as f64 * 0.1 - 0.35, 0.35 - y as f64 * 0.1, 1.0),
            2.0,
            Intrinsics::new(20.0, 20.0, 4.0, 4.0),
        )
        .unwrap()
    }

    #[test]
    fn empty_mask_changes_nothing() {
        let g = scene();
        let out = swap_albedo(&g, &LabelImage::filled(8, 8, 0), &AlbedoSource::Constant(Vec3::new(0.0, 0.0, 1.0))).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn full_mask_turns_blue() {
        let g = scene();
        let out = swap_albedo(&g, &LabelImage::filled(8, 8, 255), &AlbedoSource::Constant(Vec3::new(0.0, 0.0, 1.0))).unwrap();
        assert!((0..64).all(|p| out.albedo().rgb(p % 8, p / 8) == Vec3::new(0.0, 0.0, 1.0)));
        assert_eq!(out.roughness(), g.roughness());
        assert_eq!(out.metallic(), g.metallic());
        assert_eq!(out.normal(), g.normal());
        assert_eq!(out.depth(), g.depth());
    }

    #[test]
    fn lambert_output_scales_with_albedo() {
        let g = scene();
        let mask = LabelImage::new(8, 8, (0..64).map(|i| if i % 8 < 4 { 255 } else { 0 }).collect()).unwrap();
        let new = Vec3::new(0.3, 0.8, 0.1);
        let swapped = swap_albedo(&g, &mask, &AlbedoSource::Constant(new)).unwrap();
        let env = EnvironmentMap::constant(16, 8, Vec3::ONE).unwrap();
        let s = RenderSettings { spp: 16, mode: BrdfMode::Lambert, ..Default::default() };
        let (a, b) = (relight_frame(&g, &env, &s).unwrap(), relight_frame(&swapped, &env, &s).unwrap());
        for y in 0..8 {
            for x in 0..8 {
                let (ra, rb) = (a.rgb(x, y), b.rgb(x, y));
                for c in 0..3 {
                    let want = if x < 4 { ra[c] * new[c] / g.albedo().rgb(x, y)[c] } else { ra[c] };
                    assert!((rb[c] - want).abs() < 1e-5 * want.max(1e-3), "({x},{y},{c}) {} vs {want}", rb[c]);
                }
            }
        }
    }

    #[test]
    fn swap_rejects_bad_input() {
        let g = scene();
        let m = LabelImage::filled(8, 8, 255);
        assert!(swap_albedo(&g, &m, &AlbedoSource::Constant(Vec3::new(1.2, 0.0, 0.0))).is_err());
        assert!(swap_albedo(&g, &LabelImage::filled(7, 8, 255), &AlbedoSource::Constant(Vec3::ONE)).is_err());
        assert!(swap_albedo(&g, &m, &AlbedoSource::Image(RadianceImage::new(8, 8, 1))).is_err());
    }

    fn episode(g: &GBuffer) -> Episode {
        let env = EnvironmentMap::from_direction_fn(16, 8, |d| Vec3::splat(1.0 + 0.5 * d.y)).unwrap();
        let i0 = relight_frame(g, &env, &RenderSettings { spp: 64, ..Default::default() }).unwrap();
        let frames = (0..3).map(|t| i0.map_values(|v| v * (1.0 + 0.01 * t as f32))).collect();
        Episode::new(frames, vec![vec![0.25, -1.0]; 3], vec![vec![3.0]; 3], BTreeMap::new()).unwrap()
    }

    #[test]
    fn one_episode_per_env_with_records_untouched() {
        let g = scene();
        let ep = episode(&g);
        let envs: Vec<_> = (0..3).map(|i| EnvironmentMap::constant(16, 8, Vec3::splat(0.5 + i as f64)).unwrap()).collect();
        let out = augment_episode(&ep, &g, &envs, &RenderSettings { spp: 8, ..Default::default() }, &AugmentOptions::default()).unwrap();
        assert_eq!(out.episodes.len(), 3);
        assert_eq!((out.estimations, out.refinements), (0, 0));
        for e in &out.episodes {
            let e = e.as_ref().unwrap();
            assert_eq!(e.proprio, ep.proprio);
            assert_eq!(e.actions, ep.actions);
            assert_eq!(e.len(), 3);
        }
    }

    #[test]
    fn refinement_runs_once() {
        let g = scene();
        let ep = episode(&g);
        let envs: Vec<_> = (0..4).map(|i| EnvironmentMap::constant(8, 4, Vec3::splat(1.0 + i as f64)).unwrap()).collect();
        let opts = AugmentOptions {
            refine: Some(RefineConfig { iterations: 2, spp_inner: 4, ..Default::default() }),
            estimate: EnvEstimateConfig { env_width: 8, env_height: 4, ..Default::default() },
            ..Default::default()
        };
        let out = augment_episode(&ep, &g, &envs, &RenderSettings { spp: 4, ..Default::default() }, &opts).unwrap();
        assert_eq!((out.estimations, out.refinements), (1, 1));
        assert!(out.episodes.iter().all(|e| e.is_ok()));
    }

    #[test]
    fn mismatched_inputs() {
        let g = scene();
        let ep = episode(&g);
        let env = EnvironmentMap::constant(8, 4, Vec3::ONE).unwrap();
        assert!(augment_episode(&ep, &g, &[], &RenderSettings::default(), &AugmentOptions::default()).is_err());
        let small = GBuffer::uniform(4, 4, MaterialSample::new(Vec3::ONE, 0.5, 0.0), |_, _| Vec3::new(0.0, 0.0, 1.0), 1.0, Intrinsics::new(1.0, 1.0, 2.0, 2.0)).unwrap();
        assert!(augment_episode(&ep, &small, &[env], &RenderSettings::default(), &AugmentOptions::default()).is_err());
    }
}

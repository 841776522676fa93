#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relit::envmap::EnvironmentMap;
use relit::imagery::{save_pfm, Intrinsics};
use relit::pipeline::{save_episode, Episode};
use relit::{relight_frame, GBuffer, MaterialSample, RadianceImage, RenderSettings, Vec3};

pub fn relit<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_relit")).args(args).output().expect("spawn relit")
}

/// A sphere in front of a wall, with material varying across the frame.
pub fn sphere_scene(w: usize, h: usize) -> GBuffer {
    let k = Intrinsics::new(w as f64 * 1.2, w as f64 * 1.2, w as f64 / 2.0, h as f64 / 2.0);
    let (cx, cy, r) = (w as f64 / 2.0, h as f64 / 2.0, w.min(h) as f64 * 0.35);
    let inside = |x: usize, y: usize| {
        let (dx, dy) = ((x as f64 + 0.5 - cx) / r, (y as f64 + 0.5 - cy) / r);
        (dx * dx + dy * dy < 1.0).then(|| (dx, dy, (1.0 - dx * dx - dy * dy).sqrt()))
    };
    let albedo = RadianceImage::from_fn(w, h, 3, |x, y| match inside(x, y) {
        Some(_) => Vec3::new(0.8, 0.35 + 0.3 * x as f64 / w as f64, 0.2),
        None => Vec3::new(0.5, 0.5, 0.55 + 0.3 * y as f64 / h as f64),
    });
    let rough = RadianceImage::from_fn(w, h, 1, |x, _| Vec3::splat(0.3 + 0.6 * x as f64 / w as f64));
    let metal = RadianceImage::from_fn(w, h, 1, |x, y| Vec3::splat(if inside(x, y).is_some() && x < w / 2 { 0.6 } else { 0.0 }));
    // shading frame: x right, y up, z toward the camera
    let normal = RadianceImage::from_fn(w, h, 3, |x, y| match inside(x, y) {
        Some((dx, dy, dz)) => Vec3::new(dx, -dy, dz),
        None => Vec3::new(0.0, 0.0, 1.0),
    });
    let depth = RadianceImage::from_fn(w, h, 1, |x, y| Vec3::splat(inside(x, y).map_or(3.0, |(_, _, dz)| 2.0 - 0.5 * dz)));
    GBuffer::new(albedo, rough, metal, normal, depth, k).unwrap()
}

pub fn lambert_material() -> MaterialSample {
    MaterialSample::new(Vec3::splat(0.5), 1.0, 0.0)
}

/// Smooth sky: warm from above, cool from one side.
pub fn sky(w: usize, h: usize, tint: f64) -> EnvironmentMap {
    EnvironmentMap::from_direction_fn(w, h, |d| {
        Vec3::new(1.0 + 0.8 * d.y.max(0.0) + 0.3 * tint * d.x, 0.9 + 0.5 * d.y.max(0.0), 0.8 + 0.6 * (d.z * tint).max(0.0))
    })
    .unwrap()
}

/// Writes the G-buffer, `n_env` environment maps and a static episode of
/// `frames` frames rendered under the first map.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub gbuf: PathBuf,
    pub envs: Vec<PathBuf>,
    pub episode: PathBuf,
}

pub fn fixture(w: usize, h: usize, n_env: usize, frames: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let g = sphere_scene(w, h);
    let gbuf = dir.path().join("gbuffer");
    g.save(&gbuf).unwrap();
    let envs: Vec<PathBuf> = (0..n_env)
        .map(|i| {
            let p = dir.path().join(format!("env{i}.pfm"));
            save_pfm(sky(16, 8, i as f64 - 1.0).radiance_image(), &p).unwrap();
            p
        })
        .collect();
    let i0 = relight_frame(&g, &sky(16, 8, -1.0), &RenderSettings { spp: 32, ..Default::default() }).unwrap();
    let i0 = i0.map_values(|v| v.min(1.0));
    let ep = Episode::new(
        vec![i0; frames],
        (0..frames).map(|t| vec![t as f64 * 0.1, -1.0 / 3.0, 1e-17]).collect(),
        (0..frames).map(|t| vec![(t as f64).sqrt(), 2.5]).collect(),
        BTreeMap::from([("task".into(), "stack blocks".into())]),
    )
    .unwrap();
    let episode = dir.path().join("episode");
    save_episode(&ep, &episode).unwrap();
    Fixture { dir, gbuf, envs, episode }
}

pub fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

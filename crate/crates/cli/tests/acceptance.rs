//! Acceptance criteria, one line of output each. Runs without the libtest
//! harness so the report reads as a checklist; exits nonzero if any fail.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relit::envmap::{uv_to_dir, EnvironmentMap};
use relit::geometry::depth_to_mesh;
use relit::imagery::{save_label_png, Intrinsics, LabelImage};
use relit::metrics::{ssim, temporal_ssim, SsimParams};
use relit::optimize::{estimate_envmap, refine_properties, EnvEstimateConfig, RefineConfig, RefineProblem};
use relit::pipeline::{augment_episode, degrade_episode, AugmentOptions, Episode, JitterParams};
use relit::relight::{relight_frame_with_offset, shade_point};
use relit::shading::{ggx_ndf, ShadingFrame};
use relit::temporal::{propagate, quotient_map, DEFAULT_EPSILON, DEFAULT_GAIN_MAX};
use relit::{relight_frame, BrdfMode, GBuffer, MaterialSample, RadianceImage, RenderSettings, Vec3};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn gentle_normals(w: usize, h: usize) -> impl Fn(usize, usize) -> Vec3 {
    move |x, y| Vec3::new((x as f64 / w as f64 - 0.5) * 0.8, (0.5 - y as f64 / h as f64) * 0.8, 1.0)
}

fn intrinsics(w: usize, h: usize) -> Intrinsics {
    Intrinsics::new(2.0 * w as f64, 2.0 * w as f64, w as f64 / 2.0, h as f64 / 2.0)
}

fn furnace() -> Outcome {
    let env = EnvironmentMap::constant(32, 16, Vec3::ONE).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for a in [0.1, 0.5, 0.9] {
        let g = GBuffer::uniform(64, 64, MaterialSample::new(Vec3::splat(a), 0.5, 0.0), gentle_normals(64, 64), 2.0, intrinsics(64, 64))
            .map_err(|e| e.to_string())?;
        let t = Instant::now();
        let img = relight_frame(&g, &env, &RenderSettings { spp: 256, mode: BrdfMode::Lambert, ..Default::default() })
            .map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        for &v in img.data() {
            worst = worst.max((v as f64 - a).abs() / a);
        }
    }
    check(worst <= 0.01, format!("worst relative error {worst:.2e}"))?;
    check(slowest < Duration::from_secs(10), format!("slowest 64x64 render {slowest:?}"))?;
    Ok(format!("worst relative error {worst:.1e}, slowest render {slowest:.2?}"))
}

fn oracle_agreement() -> Outcome {
    let fixture: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/integrator_reference.json")).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let mut sq = 0.0;
    let mut worst: f64 = 0.0;
    let scenes = fixture["scenes"].as_array().ok_or("no scenes")?;
    let v3 = |v: &serde_json::Value| Vec3::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap(), v[2].as_f64().unwrap());
    for (i, s) in scenes.iter().enumerate() {
        let (w, h) = (s["env_width"].as_u64().unwrap() as usize, s["env_height"].as_u64().unwrap() as usize);
        let texels: Vec<f32> = s["env"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap() as f32).collect();
        let env = EnvironmentMap::new(RadianceImage::from_vec(w, h, 3, texels).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let mat = MaterialSample::new(v3(&s["albedo"]), s["roughness"].as_f64().unwrap(), s["metallic"].as_f64().unwrap());
        let frame = ShadingFrame::new(v3(&s["normal"]), v3(&s["view"]));
        let settings = RenderSettings { spp: 1024, seed: i as u64, ..Default::default() };
        let est = shade_point(&mat, frame, &env, &settings, i as u64).map_err(|e| e.to_string())?;
        let reference = v3(&s["reference"]);
        let rel = (est - reference).length() / reference.length();
        worst = worst.max(rel);
        sq += rel * rel;
    }
    let rms = (sq / scenes.len() as f64).sqrt();
    let elapsed = t.elapsed();
    check(rms <= 0.02, format!("RMS relative error {rms:.4} over {} scenes", scenes.len()))?;
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!("RMS relative error {rms:.4} (worst {worst:.4}) over {} scenes in {elapsed:.2?}", scenes.len()))
}

fn normalization() -> Outcome {
    let env = common::sky(32, 16, 1.0);
    let (nu, nv) = (2048, 1024);
    let mut total = 0.0;
    for j in 0..nv {
        let v = (j as f64 + 0.5) / nv as f64;
        let d_omega = (2.0 * PI / nu as f64) * (PI / nv as f64) * (v * PI).sin();
        for i in 0..nu {
            total += env.pdf_light(uv_to_dir((i as f64 + 0.5) / nu as f64, v)) * d_omega;
        }
    }
    check((0.99..=1.01).contains(&total), format!("env pdf integrates to {total:.5}"))?;
    let mut ndf = Vec::new();
    for alpha in [0.1, 0.5, 1.0] {
        // ∫ D(h) cos θ_h dω over the hemisphere, midpoint rule in θ
        let n = 200_000;
        let mut s = 0.0;
        for k in 0..n {
            let th = (k as f64 + 0.5) / n as f64 * PI / 2.0;
            s += ggx_ndf(alpha, th.cos()).map_err(|e| e.to_string())? * th.cos() * th.sin() * 2.0 * PI * (PI / 2.0 / n as f64);
        }
        check((s - 1.0).abs() <= 1e-2, format!("NDF at alpha {alpha} integrates to {s:.5}"))?;
        ndf.push(format!("{s:.5}"));
    }
    Ok(format!("env pdf {total:.5}, NDF {}", ndf.join("/")))
}

fn variance_law() -> Outcome {
    // per-pixel variance over independent seeds, on a real frame
    let g = common::sphere_scene(16, 12);
    let env = common::sky(32, 16, 1.0);
    let trials = 48;
    let mut pts = Vec::new();
    for spp in [16u32, 64, 256, 1024] {
        let renders: Vec<RadianceImage> = (0..trials)
            .map(|s| relight_frame(&g, &env, &RenderSettings { spp, seed: 500 + s, ..Default::default() }).unwrap())
            .collect();
        let mut var_sum = 0.0;
        let m = renders[0].data().len();
        for k in 0..m {
            let xs: Vec<f64> = renders.iter().map(|r| r.data()[k] as f64).collect();
            let mean = xs.iter().sum::<f64>() / trials as f64;
            var_sum += xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        }
        pts.push(((spp as f64).ln(), (var_sum / m as f64).ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    check((slope + 1.0).abs() <= 0.15, format!("slope {slope:.3}"))?;
    Ok(format!("log-log slope {slope:.3}"))
}

fn env_recovery() -> Outcome {
    let t = Instant::now();
    let (w, h) = (64, 64);
    // a sphere in front of a wall, each with its own albedo
    let base = common::sphere_scene(w, h);
    let g = GBuffer::new(
        base.albedo().clone(),
        base.roughness().clone(),
        RadianceImage::new(w, h, 1),
        base.normal().clone(),
        base.depth().clone(),
        base.intrinsics(),
    )
    .map_err(|e| e.to_string())?;
    let truth = EnvironmentMap::from_direction_fn(32, 16, |d| {
        Vec3::new(0.9 + 0.6 * d.y + 0.3 * d.x, 0.8 + 0.4 * d.y - 0.2 * d.x, 0.7 + 0.3 * d.z + 0.4 * d.y).map(|c| c.max(0.05))
    })
    .map_err(|e| e.to_string())?;
    let settings = RenderSettings { spp: 256, mode: BrdfMode::Lambert, ..Default::default() };
    let frame = relight_frame(&g, &truth, &settings).map_err(|e| e.to_string())?;
    let cfg = EnvEstimateConfig { mode: BrdfMode::Lambert, ..Default::default() };
    let est = estimate_envmap(&g, &frame, &cfg).map_err(|e| e.to_string())?;
    let rerender = relight_frame(&g, &est.env, &settings).map_err(|e| e.to_string())?;
    let s = ssim(&rerender, &frame, &SsimParams::default()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    check(s >= 0.95, format!("SSIM {s:.4}"))?;
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!("re-render SSIM {s:.4}, residual {:.2e}, {elapsed:.2?}", est.relative_residual))
}

fn refinement() -> Outcome {
    let size = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = GBuffer::uniform(size, size, MaterialSample::new(Vec3::splat(0.5), 0.6, 0.0), gentle_normals(size, size), 1.5, intrinsics(size, size))
        .and_then(|g| {
            let a = RadianceImage::from_fn(size, size, 3, |_, _| {
                Vec3::new(rng.random_range(0.1..0.66), rng.random_range(0.1..0.66), rng.random_range(0.1..0.66))
            });
            g.with_albedo(a)
        })
        .map_err(|e| e.to_string())?;
    let env = common::sky(32, 16, 0.5);
    let target = relight_frame_with_offset(&truth, &env, &RenderSettings { spp: 256, mode: BrdfMode::Lambert, seed: 77, ..Default::default() }, 0)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corrupted = truth.albedo().map_values(|v| (v as f64 * rng.random_range(0.5..1.5)).min(1.0) as f32);
    let start = truth.with_albedo(corrupted).map_err(|e| e.to_string())?;
    let cfg = RefineConfig { delta: 0.0, iterations: 200, mode: BrdfMode::Lambert, seed: 5, ..Default::default() };
    let out = refine_properties(&start, &target, &env, &cfg).map_err(|e| e.to_string())?;
    let mut errs: Vec<f64> = out
        .gbuf
        .albedo()
        .data()
        .iter()
        .zip(truth.albedo().data())
        .map(|(x, t)| ((x - t) / t).abs() as f64)
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = errs[errs.len() / 2];
    check(median < 0.05, format!("median relative albedo error {median:.4}"))?;
    check(out.loss_trace.windows(2).all(|w| w[1] <= w[0]), "accepted loss increased")?;

    // analytic gradient against central differences, on the corrupted start
    let problem = RefineProblem::new(&start, &target, &env, &cfg).map_err(|e| e.to_string())?;
    let state = problem.initial_state();
    let grad = problem.albedo_gradient(&state);
    let mut worst: f64 = 0.0;
    for p in [0, 37, 511, 1023] {
        for c in 0..3 {
            let h = 1e-4;
            let (mut up, mut down) = (state.clone(), state.clone());
            up.albedo[p][c] += h;
            down.albedo[p][c] -= h;
            let fd = (problem.loss(&up) - problem.loss(&down)) / (2.0 * h);
            worst = worst.max((grad[p][c] - fd).abs() / fd.abs().max(1e-12));
        }
    }
    check(worst <= 1e-3, format!("gradient relative mismatch {worst:.2e}"))?;
    Ok(format!(
        "median albedo error {median:.4} after {} iterations, monotone loss, gradient mismatch {worst:.1e}",
        out.iterations
    ))
}

fn mesh_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
        let k = Intrinsics::new(rng.random_range(20.0..600.0), rng.random_range(20.0..600.0), rng.random_range(-5.0..50.0), rng.random_range(-5.0..50.0));
        let d = RadianceImage::from_fn(w, h, 1, |_, _| Vec3::splat(rng.random_range(0.2..10.0)));
        let m = depth_to_mesh(&d, &k, 1.1).map_err(|e| e.to_string())?;
        for (v, uv) in m.vertices.iter().zip(&m.vertex_uv) {
            let (px, py) = k.project(*v);
            worst = worst.max((px - (uv[0] as f64 + 0.5)).abs()).max((py - (uv[1] as f64 + 0.5)).abs());
        }
        let flat = RadianceImage::from_fn(w, h, 1, |_, _| Vec3::splat(2.0));
        let faces = depth_to_mesh(&flat, &k, 1.1).map_err(|e| e.to_string())?.faces.len();
        check(faces == 2 * (w - 1) * (h - 1), format!("{w}x{h}: {faces} faces"))?;
    }
    check(worst <= 1e-6, format!("reprojection error {worst:.2e}"))?;
    let two = depth_to_mesh(&RadianceImage::from_fn(2, 2, 1, |_, _| Vec3::ONE), &Intrinsics::new(1.0, 1.0, 1.0, 1.0), 1.1)
        .map_err(|e| e.to_string())?;
    let expected = [Vec3::new(-0.5, -0.5, 1.0), Vec3::new(0.5, -0.5, 1.0), Vec3::new(-0.5, 0.5, 1.0), Vec3::new(0.5, 0.5, 1.0)];
    check(two.vertices == expected, format!("2x2 vertices {:?}", two.vertices))?;
    Ok(format!("reprojection error {worst:.1e}, face counts and 2x2 fixture exact"))
}

fn temporal_propagation() -> Outcome {
    let (w, h, n) = (48, 32, 14);
    let base = common::sphere_scene(w, h);
    let (src, dst) = (common::sky(32, 16, -1.0), common::sky(32, 16, 1.5).scaled(0.7).map_err(|e| e.to_string())?);
    let settings = RenderSettings { spp: 64, ..Default::default() };
    // a painted square slides across the static scene
    let frames_gbuf: Vec<GBuffer> = (0..n)
        .map(|t| {
            let a = RadianceImage::from_fn(w, h, 3, |x, y| {
                if (2 + 2 * t..10 + 2 * t).contains(&x) && (20..28).contains(&y) { Vec3::new(0.9, 0.9, 0.1) } else { base.albedo().rgb(x, y) }
            });
            base.with_albedo(a).unwrap()
        })
        .collect();
    let frames: Vec<RadianceImage> = frames_gbuf.iter().map(|g| relight_frame(g, &src, &settings).unwrap()).collect();
    let star = relight_frame(&frames_gbuf[0], &dst, &settings).map_err(|e| e.to_string())?;
    let q = quotient_map(&frames[0], &star, DEFAULT_EPSILON, DEFAULT_GAIN_MAX).map_err(|e| e.to_string())?;
    let p = SsimParams::default();
    let before = temporal_ssim(&frames, &p).map_err(|e| e.to_string())?;
    let after = temporal_ssim(&propagate(&frames, &q).map_err(|e| e.to_string())?, &p).map_err(|e| e.to_string())?;
    check(after >= before - 0.01, format!("temporal SSIM {after:.4} < {before:.4} - 0.01"))?;

    let still = propagate(&vec![frames[0].clone(); n], &q).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for f in &still {
        for ((got, want), a) in f.data().iter().zip(star.data()).zip(frames[0].data()) {
            let (got, want, a) = (*got as f64, *want as f64, *a as f64);
            let bound = DEFAULT_EPSILON * (a - want).abs() / (a + DEFAULT_EPSILON) + 1e-6 * want.max(1.0);
            worst = worst.max((got - want).abs() / bound);
        }
    }
    check(worst <= 1.0, format!("static frame off by {worst:.2} x the epsilon bound"))?;
    Ok(format!("temporal SSIM {before:.4} -> {after:.4}; static frames within the epsilon bound"))
}

fn metric_correctness() -> Outcome {
    let refs: serde_json::Value =
        serde_json::from_str(include_str!("../../core/tests/fixtures/ssim.json")).map_err(|e| e.to_string())?;
    let img = |name: &str| {
        RadianceImage::from_fn(32, 32, 3, |x, y| {
            let (x, y) = (x as f64, y as f64);
            match name {
                "a" => Vec3::new(x / 31.0, y / 31.0, (x + y) / 62.0),
                "b" => Vec3::new(x * y / 961.0, 0.5, (31.0 - x + y) / 62.0),
                _ => Vec3::new((x / 3.0).sin() * 0.5 + 0.5, (y / 5.0).cos() * 0.5 + 0.5, (x % 7.0) / 7.0),
            }
        })
    };
    let p = SsimParams::default();
    let mut worst: f64 = 0.0;
    for pair in ["ab", "ac", "bc"] {
        let (a, b) = (img(&pair[..1]), img(&pair[1..]));
        let got = ssim(&a, &b, &p).map_err(|e| e.to_string())?;
        worst = worst.max((got - refs[pair].as_f64().unwrap()).abs());
        check(got == ssim(&b, &a, &p).map_err(|e| e.to_string())?, format!("{pair} not symmetric"))?;
        check(ssim(&a, &a, &p).map_err(|e| e.to_string())? == 1.0, "ssim(x, x) != 1")?;
    }
    check(worst <= 1e-9, format!("fixture mismatch {worst:.2e}"))?;
    Ok(format!("identity exact, symmetric, fixtures within {worst:.1e}"))
}

fn small_episode(g: &GBuffer, frames: usize) -> Episode {
    let f0 = relight_frame(g, &common::sky(16, 8, -1.0), &RenderSettings { spp: 32, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rows = |k: usize| -> Vec<Vec<f64>> {
        (0..frames).map(|_| (0..k).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8))).collect()).collect()
    };
    let (proprio, actions) = (rows(7), rows(4));
    Episode::new(vec![f0; frames], proprio, actions, BTreeMap::new()).unwrap()
}

fn bits(rows: &[Vec<f64>]) -> Vec<u64> {
    rows.iter().flatten().map(|v| v.to_bits()).collect()
}

fn episode_integrity() -> Outcome {
    let g = common::sphere_scene(64, 64);
    let ep = small_episode(&g, 4);
    let envs: Vec<EnvironmentMap> = (0..6).map(|i| common::sky(16, 8, i as f64 * 0.4 - 1.0)).collect();
    let settings = RenderSettings { spp: 32, ..Default::default() };
    let refine = RefineConfig { iterations: 20, spp_inner: 16, ..Default::default() };
    let opts = AugmentOptions { refine: Some(refine), ..Default::default() };

    // fastest of three runs each, so scheduler noise does not decide the comparison
    let fastest = |f: &mut dyn FnMut()| {
        (0..3)
            .map(|_| {
                let t = Instant::now();
                f();
                t.elapsed()
            })
            .min()
            .unwrap()
    };
    let (mut six, mut one) = (None, None);
    let t6 = fastest(&mut || six = Some(augment_episode(&ep, &g, &envs, &settings, &opts)));
    let t1 = fastest(&mut || one = Some(augment_episode(&ep, &g, &envs[..1], &settings, &opts)));
    // the estimation and refinement on their own, as augment runs them
    let tr = fastest(&mut || {
        let source = estimate_envmap(&g, &ep.frames[0], &opts.estimate).unwrap().env;
        refine_properties(&g, &ep.frames[0], &source, &refine).unwrap();
    });
    let six = six.unwrap().map_err(|e| e.to_string())?;
    let one = one.unwrap().map_err(|e| e.to_string())?;

    check(six.episodes.len() == 6, format!("{} episodes", six.episodes.len()))?;
    check(six.refinements == 1 && six.estimations == 1, format!("{} refinements, {} estimations", six.refinements, six.estimations))?;
    check(one.refinements == 1, "single-env run did not refine once")?;
    let budget = t1.as_secs_f64() * 6.0 - tr.as_secs_f64() * 4.0;
    check(t6.as_secs_f64() < budget, format!("6 envs took {t6:?}, budget {budget:.3}s (1 env {t1:?}, refinement {tr:?})"))?;

    let mut outputs: Vec<Episode> = Vec::new();
    for e in six.episodes.into_iter().chain(one.episodes) {
        outputs.push(e.map_err(|e| e.to_string())?);
    }
    outputs.push(degrade_episode(&ep, &JitterParams::sample(4)).map_err(|e| e.to_string())?);
    let q = quotient_map(&ep.frames[0], &ep.frames[0].map_values(|v| v * 0.5), DEFAULT_EPSILON, DEFAULT_GAIN_MAX).map_err(|e| e.to_string())?;
    outputs.push(ep.with_frames(propagate(&ep.frames, &q).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?);
    for o in &outputs {
        check(bits(&o.proprio) == bits(&ep.proprio) && bits(&o.actions) == bits(&ep.actions), "records changed")?;
    }
    Ok(format!(
        "{} outputs with bit-identical records; 6 envs {t6:.2?} vs 1 env {t1:.2?}, refinement {tr:.2?}",
        outputs.len()
    ))
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "manifest.json") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let f = common::fixture(24, 18, 2, 3);
    let d = f.dir.path();
    let mask = d.join("mask.png");
    save_label_png(&LabelImage::new(24, 18, (0..24 * 18).map(|i| if i % 24 < 12 { 255 } else { 0 }).collect()).unwrap(), &mask)
        .map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let frame0 = d.join("episode/frames/000000.png");
    let envs = format!("{},{}", s(&f.envs[0]), s(&f.envs[1]));
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("relight", vec!["--gbuffer".into(), s(&f.gbuf), "--env".into(), s(&f.envs[0]), "--spp".into(), "32".into()]),
        ("background", vec!["--gbuffer".into(), s(&f.gbuf), "--mask".into(), s(&mask), "--env".into(), s(&f.envs[1]), "--spp".into(), "16".into()]),
        ("texture", vec!["--gbuffer".into(), s(&f.gbuf), "--mask".into(), s(&mask), "--albedo".into(), "0.2,0.4,0.9".into(), "--env".into(), s(&f.envs[0]), "--spp".into(), "16".into()]),
        ("estimate-env", vec!["--gbuffer".into(), s(&f.gbuf), "--frame".into(), s(&frame0), "--res".into(), "16x8".into()]),
        ("refine", vec!["--gbuffer".into(), s(&f.gbuf), "--frame".into(), s(&frame0), "--env".into(), s(&f.envs[0]), "--iters".into(), "5".into(), "--spp-inner".into(), "8".into()]),
        ("propagate", vec!["--episode".into(), s(&f.episode), "--relit-first".into(), s(&frame0)]),
        ("augment", vec!["--episode".into(), s(&f.episode), "--gbuffer".into(), s(&f.gbuf), "--envs".into(), envs, "--refine".into(), "--iters".into(), "3".into(), "--spp-inner".into(), "8".into(), "--spp".into(), "16".into()]),
        ("degrade", vec!["--episode".into(), s(&f.episode)]),
    ];
    let max = std::thread::available_parallelism().map_or(8, |n| n.get()).to_string();
    for (name, args) in &commands {
        let mut trees = Vec::new();
        for threads in ["1", "4", max.as_str()] {
            let out_dir = d.join(format!("det/{name}/{threads}"));
            let out = match *name {
                "relight" | "background" | "texture" => out_dir.join("out.pfm"),
                "estimate-env" => out_dir.join("env.pfm"),
                _ => out_dir.clone(),
            };
            let mut full = vec![name.to_string()];
            full.extend(args.iter().cloned());
            full.extend(["--seed".into(), "11".into(), "--threads".into(), threads.into(), "--out".into(), s(&out)]);
            let o = common::relit(&full);
            check(o.status.code() == Some(0), format!("{name} --threads {threads}: {}", String::from_utf8_lossy(&o.stderr)))?;
            trees.push(tree(&out_dir));
        }
        check(!trees[0].is_empty(), format!("{name} wrote nothing"))?;
        check(trees.windows(2).all(|w| w[0] == w[1]), format!("{name} output depends on the thread count"))?;
    }
    Ok(format!("{} subcommands byte-identical at 1, 4 and {max} threads", commands.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("furnace", furnace),
        ("integrator vs brute-force oracle", oracle_agreement),
        ("estimator normalization", normalization),
        ("variance law", variance_law),
        ("environment-map recovery", env_recovery),
        ("refinement recovery", refinement),
        ("mesh exactness", mesh_exactness),
        ("temporal propagation", temporal_propagation),
        ("metric correctness", metric_correctness),
        ("episode integrity", episode_integrity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail} ({:.1?})", i + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {why} ({:.1?})", i + 1, t.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

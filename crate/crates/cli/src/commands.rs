use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Subcommand};

use relit::envmap::EnvironmentMap;
use relit::geometry::{depth_to_mesh, render_background, save_mesh_obj, DEFAULT_DISCONTINUITY_RATIO};
use relit::imagery::{load_gbuffer, load_image, load_label_png, save_image, GBuffer, RadianceImage};
use relit::metrics::{psnr, ssim, temporal_ssim, SsimParams};
use relit::optimize::{estimate_envmap, refine_properties, EnvEstimateConfig, RefineConfig};
use relit::pipeline::{
    augment_episode, degrade_episode, load_episode, save_episode, swap_albedo, AlbedoSource, AugmentOptions, JitterParams,
};
use relit::temporal::{propagate, quotient_map, DEFAULT_EPSILON, DEFAULT_GAIN_MAX};
use relit::{relight_frame, BrdfMode, RenderSettings, SamplerKind, Vec3};

use crate::{Failure, Run};

/// Environment resolution written `WxH`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Res(pub usize, pub usize);

impl FromStr for Res {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.split_once('x').ok_or_else(|| format!("{s:?} is not WxH"))?;
        let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        Ok(Res(p(w)?, p(h)?))
    }
}

impl fmt::Display for Res {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

/// Colour written `R,G,B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rgb3(pub Vec3);

impl FromStr for Rgb3 {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [r, g, b] => Ok(Rgb3(Vec3::new(r, g, b))),
            _ => Err(format!("{s:?} needs three comma-separated values")),
        }
    }
}

impl fmt::Display for Rgb3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0.x, self.0.y, self.0.z)
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Samples per pixel [default: 256].
    #[arg(long)]
    spp: Option<u32>,
    /// disney or lambert [default: disney].
    #[arg(long)]
    mode: Option<BrdfMode>,
    /// mis, env_only or cosine_only [default: mis].
    #[arg(long)]
    sampler: Option<SamplerKind>,
    /// Multiplier on environment radiance [default: 1].
    #[arg(long)]
    exposure: Option<f64>,
}

impl RenderArgs {
    fn resolve(&self, run: &mut Run) -> Result<RenderSettings, Failure> {
        let d = RenderSettings::default();
        let s = RenderSettings {
            spp: run.params.get("spp", self.spp, d.spp)?,
            mode: run.params.get("mode", self.mode, d.mode)?,
            sampler: run.params.get("sampler", self.sampler, d.sampler)?,
            exposure: run.params.get("exposure", self.exposure, d.exposure)?,
            seed: run.seed,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Weight of the consistency term [default: 0.1].
    #[arg(long)]
    delta: Option<f64>,
    /// Gradient steps [default: 200].
    #[arg(long)]
    iters: Option<usize>,
    /// Initial step size [default: 0.05].
    #[arg(long)]
    step: Option<f64>,
    /// Samples per pixel inside the loss [default: 64].
    #[arg(long)]
    spp_inner: Option<u32>,
}

impl RefineArgs {
    fn resolve(&self, run: &mut Run, mode: BrdfMode) -> Result<RefineConfig, Failure> {
        let d = RefineConfig::default();
        let c = RefineConfig {
            delta: run.params.get("delta", self.delta, d.delta)?,
            iterations: run.params.get("iters", self.iters, d.iterations)?,
            step_size: run.params.get("step", self.step, d.step_size)?,
            spp_inner: run.params.get("spp-inner", self.spp_inner, d.spp_inner)?,
            mode,
            seed: run.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a G-buffer under an environment map.
    Relight {
        #[arg(long)]
        gbuffer: PathBuf,
        #[arg(long)]
        env: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
        /// .pfm or .png
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a low-resolution environment map from a frame and its G-buffer.
    EstimateEnv {
        #[arg(long)]
        gbuffer: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        /// Environment resolution [default: 32x16].
        #[arg(long)]
        res: Option<Res>,
        /// Ridge weight [default: 1e-3].
        #[arg(long)]
        ridge: Option<f64>,
        /// Solver iterations [default: 500].
        #[arg(long)]
        iters: Option<usize>,
        /// disney or lambert [default: disney].
        #[arg(long)]
        mode: Option<BrdfMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine albedo and roughness against a frame under known lighting.
    Refine {
        #[arg(long)]
        gbuffer: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        env: PathBuf,
        #[command(flatten)]
        refine: RefineArgs,
        /// disney or lambert [default: disney].
        #[arg(long)]
        mode: Option<BrdfMode>,
        /// Directory for the refined G-buffer.
        #[arg(long)]
        out: PathBuf,
    },
    /// Triangulate the depth map into an OBJ mesh.
    Mesh {
        #[arg(long)]
        gbuffer: PathBuf,
        /// Largest depth ratio inside a triangle [default: 1.1].
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render the scene outside a keep mask from the triangulated depth.
    Background {
        #[arg(long)]
        gbuffer: PathBuf,
        /// 8-bit PNG; 255 keeps the relit foreground.
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        env: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Carry a relit first frame across an episode.
    Propagate {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        relit_first: PathBuf,
        /// Quotient stabilizer [default: 1e-3].
        #[arg(long)]
        epsilon: Option<f64>,
        /// Gain clamp [default: 8].
        #[arg(long)]
        gain_max: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relight an episode under several environment maps.
    Augment {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        gbuffer: PathBuf,
        /// Comma-separated environment maps.
        #[arg(long, value_delimiter = ',', required = true)]
        envs: Vec<PathBuf>,
        /// Refine the G-buffer against frame 0 first.
        #[arg(long)]
        refine: bool,
        /// Lighting of the original frames; estimated when refining without it.
        #[arg(long)]
        source_env: Option<PathBuf>,
        #[command(flatten)]
        refine_args: RefineArgs,
        /// Resolution of the estimated source lighting [default: 32x16].
        #[arg(long)]
        res: Option<Res>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        gain_max: Option<f64>,
        #[command(flatten)]
        render: RenderArgs,
        /// Receives one episode directory per environment.
        #[arg(long)]
        out: PathBuf,
    },
    /// Colour-jitter every frame of an episode with one random draw.
    Degrade {
        #[arg(long)]
        episode: PathBuf,
        /// Overrides of the drawn factors.
        #[arg(long)]
        brightness: Option<f64>,
        #[arg(long)]
        contrast: Option<f64>,
        #[arg(long)]
        saturation: Option<f64>,
        /// Hue shift in turns.
        #[arg(long)]
        hue: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Swap the albedo inside a mask and relight.
    Texture {
        #[arg(long)]
        gbuffer: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// New albedo as R,G,B in [0, 1].
        #[arg(long)]
        albedo: Rgb3,
        #[arg(long)]
        env: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a test sequence against a reference sequence.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// CSV report.
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Relight { .. } => "relight",
            Command::EstimateEnv { .. } => "estimate-env",
            Command::Refine { .. } => "refine",
            Command::Mesh { .. } => "mesh",
            Command::Background { .. } => "background",
            Command::Propagate { .. } => "propagate",
            Command::Augment { .. } => "augment",
            Command::Degrade { .. } => "degrade",
            Command::Texture { .. } => "texture",
            Command::Metrics { .. } => "metrics",
        }
    }
}

fn gbuffer(run: &mut Run, path: &Path) -> Result<GBuffer, Failure> {
    run.input("gbuffer", path);
    Ok(load_gbuffer(path)?)
}

fn envmap(run: &mut Run, name: &str, path: &Path) -> Result<EnvironmentMap, Failure> {
    run.input(name, path);
    Ok(EnvironmentMap::new(load_image(path)?)?)
}

fn image(run: &mut Run, name: &str, path: &Path) -> Result<RadianceImage, Failure> {
    run.input(name, path);
    Ok(load_image(path)?)
}

fn write_image(run: &mut Run, img: &RadianceImage, path: &Path) -> Result<(), Failure> {
    ensure_parent(path)?;
    save_image(img, path)?;
    run.log(format!("wrote {}", path.display()));
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

pub fn dispatch(cmd: &Command, run: &mut Run) -> Result<(), Failure> {
    match cmd {
        Command::Relight { gbuffer: g, env, render, out } => {
            run.output_file(out);
            let settings = render.resolve(run)?;
            let g = gbuffer(run, g)?;
            let env = envmap(run, "env", env)?;
            let img = relight_frame(&g, &env, &settings)?;
            write_image(run, &img, out)
        }
        Command::EstimateEnv { gbuffer: g, frame, res, ridge, iters, mode, out } => {
            run.output_file(out);
            let d = EnvEstimateConfig::default();
            let Res(env_width, env_height) = run.params.get("res", *res, Res(d.env_width, d.env_height))?;
            let cfg = EnvEstimateConfig {
                env_width,
                env_height,
                ridge: run.params.get("ridge", *ridge, d.ridge)?,
                max_iters: run.params.get("iters", *iters, d.max_iters)?,
                mode: run.params.get("mode", *mode, d.mode)?,
                ..d
            };
            let g = gbuffer(run, g)?;
            let frame = image(run, "frame", frame)?;
            let est = estimate_envmap(&g, &frame, &cfg)?;
            run.log(format!("relative residual {:.4e} after {} iterations", est.relative_residual, est.iterations));
            if !est.converged {
                run.warnings.push(format!("solver stopped at the iteration cap ({})", est.iterations));
            }
            write_image(run, est.env.radiance_image(), out)
        }
        Command::Refine { gbuffer: g, frame, env, refine, mode, out } => {
            run.output_dir(out);
            let mode = run.params.get("mode", *mode, BrdfMode::Disney)?;
            let cfg = refine.resolve(run, mode)?;
            let g = gbuffer(run, g)?;
            let frame = image(run, "frame", frame)?;
            let env = envmap(run, "env", env)?;
            let r = refine_properties(&g, &frame, &env, &cfg)?;
            if r.stalled {
                run.warnings.push(format!("step search stalled after {} iterations", r.iterations));
            }
            r.gbuf.save(out)?;
            let trace: String = std::iter::once("iteration,loss\n".to_string())
                .chain(r.loss_trace.iter().enumerate().map(|(i, l)| format!("{i},{l}\n")))
                .collect();
            let p = out.join("loss.csv");
            fs::write(&p, trace).map_err(|e| Failure::io(format!("{}: {e}", p.display())))
        }
        Command::Mesh { gbuffer: g, ratio, out } => {
            run.output_file(out);
            let ratio = run.params.get("ratio", *ratio, DEFAULT_DISCONTINUITY_RATIO)?;
            let g = gbuffer(run, g)?;
            let mesh = depth_to_mesh(g.depth(), &g.intrinsics(), ratio)?;
            run.log(format!("{} vertices, {} faces", mesh.vertices.len(), mesh.faces.len()));
            ensure_parent(out)?;
            Ok(save_mesh_obj(&mesh, out)?)
        }
        Command::Background { gbuffer: g, mask, env, render, out } => {
            run.output_file(out);
            let settings = render.resolve(run)?;
            let ratio = run.params.get("ratio", None, DEFAULT_DISCONTINUITY_RATIO)?;
            let g = gbuffer(run, g)?;
            run.input("mask", mask);
            let keep = load_label_png(mask)?;
            let env = envmap(run, "env", env)?;
            let mesh = depth_to_mesh(g.depth(), &g.intrinsics(), ratio)?;
            let img = render_background(&mesh, &g, &keep, &env, &settings)?;
            write_image(run, &img, out)
        }
        Command::Propagate { episode, relit_first, epsilon, gain_max, out } => {
            run.output_dir(out);
            let eps = run.params.get("epsilon", *epsilon, DEFAULT_EPSILON)?;
            let gmax = run.params.get("gain-max", *gain_max, DEFAULT_GAIN_MAX)?;
            run.input("episode", episode);
            let ep = load_episode(episode)?;
            let relit = image(run, "relit-first", relit_first)?;
            let q = quotient_map(&ep.frames[0], &relit, eps, gmax)?;
            let frames = propagate(&ep.frames, &q)?;
            Ok(save_episode(&ep.with_frames(frames)?, out)?)
        }
        Command::Augment {
            episode,
            gbuffer: g,
            envs,
            refine,
            source_env,
            refine_args,
            res,
            epsilon,
            gain_max,
            render,
            out,
        } => augment(run, episode, g, envs, *refine, source_env.as_deref(), refine_args, *res, *epsilon, *gain_max, render, out),
        Command::Degrade { episode, brightness, contrast, saturation, hue, out } => {
            run.output_dir(out);
            let drawn = JitterParams::sample(run.seed);
            let params = JitterParams {
                brightness: run.params.get("brightness", *brightness, drawn.brightness)?,
                contrast: run.params.get("contrast", *contrast, drawn.contrast)?,
                saturation: run.params.get("saturation", *saturation, drawn.saturation)?,
                hue: run.params.get("hue", *hue, drawn.hue)?,
                seed: Some(run.seed),
            };
            run.input("episode", episode);
            let ep = load_episode(episode)?;
            Ok(save_episode(&degrade_episode(&ep, &params)?, out)?)
        }
        Command::Texture { gbuffer: g, mask, albedo, env, render, out } => {
            run.output_file(out);
            let settings = render.resolve(run)?;
            let albedo = run.params.get("albedo", Some(*albedo), *albedo)?;
            let g = gbuffer(run, g)?;
            run.input("mask", mask);
            let m = load_label_png(mask)?;
            let env = envmap(run, "env", env)?;
            let swapped = swap_albedo(&g, &m, &AlbedoSource::Constant(albedo.0))?;
            let img = relight_frame(&swapped, &env, &settings)?;
            write_image(run, &img, out)
        }
        Command::Metrics { reference, test, out } => metrics(run, reference, test, out),
    }
}

#[allow(clippy::too_many_arguments)]
fn augment(
    run: &mut Run,
    episode: &Path,
    g: &Path,
    envs: &[PathBuf],
    refine: bool,
    source_env: Option<&Path>,
    refine_args: &RefineArgs,
    res: Option<Res>,
    epsilon: Option<f64>,
    gain_max: Option<f64>,
    render: &RenderArgs,
    out: &Path,
) -> Result<(), Failure> {
    run.output_dir(out);
    let settings = render.resolve(run)?;
    let refine = run.params.switch("refine", refine)?;
    let d = EnvEstimateConfig::default();
    let Res(env_width, env_height) = run.params.get("res", res, Res(d.env_width, d.env_height))?;
    let options = AugmentOptions {
        refine: if refine { Some(refine_args.resolve(run, settings.mode)?) } else { None },
        source_env: match source_env {
            Some(p) => Some(envmap(run, "source-env", p)?),
            None => None,
        },
        estimate: EnvEstimateConfig { env_width, env_height, mode: settings.mode, ..d },
        epsilon: run.params.get("epsilon", epsilon, DEFAULT_EPSILON)?,
        gain_max: run.params.get("gain-max", gain_max, DEFAULT_GAIN_MAX)?,
    };
    run.input("episode", episode);
    let ep = load_episode(episode)?;
    let g = gbuffer(run, g)?;

    // an unreadable map fails its own slot only
    let mut loaded = Vec::new();
    let mut slots = Vec::new();
    for (i, p) in envs.iter().enumerate() {
        match envmap(run, &format!("env[{i}]"), p) {
            Ok(e) => {
                slots.push(Ok(loaded.len()));
                loaded.push(e);
            }
            Err(f) => slots.push(Err(f)),
        }
    }
    if loaded.is_empty() {
        return Err(slots.into_iter().find_map(Result::err).unwrap_or_else(|| Failure::validation("no environments")));
    }
    let result = augment_episode(&ep, &g, &loaded, &settings, &options)?;
    run.log(format!("{} estimation(s), {} refinement(s)", result.estimations, result.refinements));
    let mut episodes: Vec<Option<relit::Result<relit::pipeline::Episode>>> = result.episodes.into_iter().map(Some).collect();
    let mut worst: Option<Failure> = None;
    for (i, slot) in slots.into_iter().enumerate() {
        let outcome = match slot {
            Ok(k) => episodes[k].take().expect("each loaded map is used once").map_err(Failure::from),
            Err(f) => Err(f),
        };
        let dir = out.join(format!("env_{i:03}"));
        match outcome.and_then(|e| save_episode(&e, &dir).map_err(Failure::from)) {
            Ok(()) => run.outputs.push(dir.display().to_string()),
            Err(f) => {
                run.warnings.push(format!("environment {} ({}): {}", i, envs[i].display(), f.message));
                run.partial = true;
                if worst.as_ref().is_none_or(|w| f.code > w.code) {
                    worst = Some(f);
                }
            }
        }
    }
    match worst {
        Some(f) if run.outputs.len() == 1 => Err(f),
        _ => Ok(()),
    }
}

fn sequence(run: &mut Run, name: &str, dir: &Path) -> Result<Vec<RadianceImage>, Failure> {
    run.input(name, dir);
    let frames_dir = if dir.join("frames").is_dir() { dir.join("frames") } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&frames_dir)
        .map_err(|e| Failure::io(format!("{}: {e}", frames_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("png" | "pfm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::io(format!("{}: no .png or .pfm frames", frames_dir.display())));
    }
    Ok(paths.iter().map(load_image).collect::<relit::Result<Vec<_>>>()?)
}

fn metrics(run: &mut Run, reference: &Path, test: &Path, out: &Path) -> Result<(), Failure> {
    run.output_file(out);
    let a = sequence(run, "ref", reference)?;
    let b = sequence(run, "test", test)?;
    if a.len() != b.len() {
        return Err(Failure::validation(format!("reference has {} frames but test has {}", a.len(), b.len())));
    }
    let p = SsimParams::default();
    let mut csv = String::from("frame,ssim,psnr\n");
    let mut total = 0.0;
    for (t, (x, y)) in a.iter().zip(&b).enumerate() {
        let s = ssim(x, y, &p)?;
        total += s;
        csv += &format!("{t},{s},{}\n", psnr(x, y, 1.0)?);
    }
    let mean = total / a.len() as f64;
    let temporal = |seq: &[RadianceImage]| -> Result<String, Failure> {
        Ok(if seq.len() < 2 { "n/a".into() } else { temporal_ssim(seq, &p)?.to_string() })
    };
    let (tr, tt) = (temporal(&a)?, temporal(&b)?);
    csv += &format!("mean_ssim,{mean},\ntemporal_ssim_ref,{tr},\ntemporal_ssim_test,{tt},\n");
    ensure_parent(out)?;
    fs::write(out, csv).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    println!("ssim {mean:.4}  temporal_ssim ref {tr}  test {tt}  lpips n/a  temporal_lpips n/a");
    Ok(())
}

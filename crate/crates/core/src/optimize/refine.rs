use rayon::prelude::*;

use super::loss::loss_lp;
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::imagery::{GBuffer, RadianceImage};
use crate::math::{Rgb, Vec3};
use crate::relight::{integrate, pixel_seed, SamplerKind};
use crate::shading::{brdf_split, BrdfMode, DIELECTRIC_F0};

/// Central-difference step for the roughness gradient.
pub const ROUGHNESS_FD_STEP: f64 = 1e-2;
/// Step halvings tried before an iteration gives up.
pub const MAX_HALVINGS: usize = 8;
const STEP_GROWTH: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Weight δ of the consistency term.
    pub delta: f64,
    pub iterations: usize,
    /// Initial step; it shrinks on rejected steps and grows on accepted ones.
    pub step_size: f64,
    /// Samples per pixel used to render inside the loss.
    pub spp_inner: u32,
    pub mode: BrdfMode,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            delta: 0.1,
            iterations: 200,
            step_size: 0.05,
            spp_inner: 64,
            mode: BrdfMode::Disney,
            seed: 0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::param("delta", format!("{} must be a nonnegative number", self.delta)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param("step_size", format!("{} must be positive", self.step_size)));
        }
        if self.spp_inner == 0 {
            return Err(Error::param("spp_inner", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub gbuf: GBuffer,
    /// `L_p` at the start and after every accepted step.
    pub loss_trace: Vec<f64>,
    /// Iterations attempted, accepted or not.
    pub iterations: usize,
    /// True when the run ended because no step length reduced the loss.
    pub stalled: bool,
}

/// Samples of one pixel: direction and `E·cos / Σ n_k p_k`.
struct PixelSamples {
    n: Vec3,
    v: Vec3,
    metallic: f64,
    /// Specular colour, frozen at the initial albedo.
    f0: Rgb,
    samples: Vec<(Vec3, Rgb)>,
}

/// The refinement objective with its sample set fixed, so the loss is a
/// deterministic function of albedo and roughness.
///
/// Rendering reuses the per-pixel streams of
/// [`relight_frame`](crate::relight::relight_frame) with `spp = spp_inner`,
/// so with the initial maps the model image matches that render.
pub struct RefineProblem {
    init: GBuffer,
    target: Vec<Rgb>,
    pixels: Vec<PixelSamples>,
    init_albedo: Vec<Rgb>,
    init_roughness: Vec<f64>,
    delta: f64,
    mode: BrdfMode,
}

/// Albedo and roughness, in full precision, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineState {
    pub albedo: Vec<Rgb>,
    pub roughness: Vec<f64>,
}

impl RefineProblem {
    pub fn new(gbuf_init: &GBuffer, frame: &RadianceImage, env: &EnvironmentMap, cfg: &RefineConfig) -> Result<Self> {
        cfg.validate()?;
        if frame.dims() != gbuf_init.dims() {
            return Err(Error::dims("frame", frame.dims(), "G-buffer", gbuf_init.dims()));
        }
        let (w, h) = gbuf_init.dims();
        let pixels: Vec<PixelSamples> = (0..w * h)
            .into_par_iter()
            .map(|p| {
                let (x, y) = (p % w, p / w);
                let n = gbuf_init.normal_at(x, y);
                let v = gbuf_init.view_at(x, y);
                let mat = gbuf_init.material(x, y);
                let mut samples = Vec::new();
                if n.dot(v) > 0.0 {
                    let seed = pixel_seed(cfg.seed, x, y, 0);
                    integrate(n, env, cfg.spp_inner, SamplerKind::Mis, seed, |dir, wt| samples.push((dir, wt)));
                }
                PixelSamples {
                    n,
                    v,
                    metallic: mat.metallic,
                    f0: Vec3::splat(DIELECTRIC_F0).lerp(mat.albedo, mat.metallic),
                    samples,
                }
            })
            .collect();
        let state = RefineState::from_gbuffer(gbuf_init);
        Ok(RefineProblem {
            init: gbuf_init.clone(),
            target: (0..w * h).map(|p| frame.rgb(p % w, p / w)).collect(),
            pixels,
            init_albedo: state.albedo,
            init_roughness: state.roughness,
            delta: cfg.delta,
            mode: cfg.mode,
        })
    }

    pub fn initial_state(&self) -> RefineState {
        RefineState {
            albedo: self.init_albedo.clone(),
            roughness: self.init_roughness.clone(),
        }
    }

    fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    /// `(D, S)` with `render = A ⊙ D + S`.
    fn shading_terms(&self, p: usize, roughness: f64) -> (Rgb, Rgb) {
        let px = &self.pixels[p];
        let mut d = Vec3::ZERO;
        let mut s = Vec3::ZERO;
        for &(dir, wt) in &px.samples {
            let split = brdf_split(roughness, px.metallic, px.f0, px.n, dir, px.v, self.mode);
            d += wt * split.diffuse;
            s += split.specular.mul_elem(wt);
        }
        (d, s)
    }

    /// Pixel `p`'s share of `L_p`, excluding the roughness consistency term.
    fn pixel_albedo_loss(&self, p: usize, a: Rgb, d: Rgb, s: Rgb) -> f64 {
        let n3 = 3.0 * self.pixel_count() as f64;
        let r = a.mul_elem(d) + s - self.target[p];
        let dev = a - self.init_albedo[p];
        (r.dot(r) + self.delta * dev.dot(dev)) / n3
    }

    fn pixel_roughness_loss(&self, p: usize, r: f64) -> f64 {
        let dev = r - self.init_roughness[p];
        self.delta * dev * dev / self.pixel_count() as f64
    }

    /// Model image of a state.
    pub fn render(&self, state: &RefineState) -> RadianceImage {
        let (w, h) = self.init.dims();
        let px: Vec<Rgb> = (0..w * h)
            .into_par_iter()
            .map(|p| {
                let (d, s) = self.shading_terms(p, state.roughness[p]);
                state.albedo[p].mul_elem(d) + s
            })
            .collect();
        RadianceImage::from_fn(w, h, 3, |x, y| px[y * w + x])
    }

    /// `L_p` of a state. Metallic, normal and depth never move, so their
    /// consistency terms are zero.
    pub fn loss(&self, state: &RefineState) -> f64 {
        (0..self.pixel_count())
            .into_par_iter()
            .map(|p| {
                let (d, s) = self.shading_terms(p, state.roughness[p]);
                self.pixel_albedo_loss(p, state.albedo[p], d, s) + self.pixel_roughness_loss(p, state.roughness[p])
            })
            .collect::<Vec<f64>>()
            // serial sum: a parallel reduction would depend on the thread count
            .iter()
            .sum()
    }

    /// Exact `∂L_p/∂A` per pixel and channel.
    pub fn albedo_gradient(&self, state: &RefineState) -> Vec<Rgb> {
        (0..self.pixel_count())
            .into_par_iter()
            .map(|p| {
                let (d, s) = self.shading_terms(p, state.roughness[p]);
                self.albedo_gradient_at(p, state.albedo[p], d, s)
            })
            .collect()
    }

    fn albedo_gradient_at(&self, p: usize, a: Rgb, d: Rgb, s: Rgb) -> Rgb {
        let n3 = 3.0 * self.pixel_count() as f64;
        let r = a.mul_elem(d) + s - self.target[p];
        (r.mul_elem(d) + (a - self.init_albedo[p]) * self.delta) * (2.0 / n3)
    }

    /// Central-difference `∂L_p/∂R` per pixel, one-sided at the bounds.
    pub fn roughness_gradient(&self, state: &RefineState) -> Vec<f64> {
        (0..self.pixel_count())
            .into_par_iter()
            .map(|p| {
                let a = state.albedo[p];
                let r = state.roughness[p];
                let (lo, hi) = ((r - ROUGHNESS_FD_STEP).max(0.0), (r + ROUGHNESS_FD_STEP).min(1.0));
                let at = |rr: f64| {
                    let (d, s) = self.shading_terms(p, rr);
                    self.pixel_albedo_loss(p, a, d, s) + self.pixel_roughness_loss(p, rr)
                };
                (at(hi) - at(lo)) / (hi - lo)
            })
            .collect()
    }

    /// Writes a state back into a copy of the initial G-buffer.
    pub fn to_gbuffer(&self, state: &RefineState) -> Result<GBuffer> {
        let (w, h) = self.init.dims();
        let albedo = RadianceImage::from_fn(w, h, 3, |x, y| state.albedo[y * w + x]);
        let rough = RadianceImage::from_fn(w, h, 1, |x, y| Vec3::splat(state.roughness[y * w + x]));
        self.init.with_albedo(albedo)?.with_roughness(rough)
    }
}

impl RefineState {
    pub fn from_gbuffer(g: &GBuffer) -> Self {
        let (w, h) = g.dims();
        RefineState {
            albedo: (0..w * h).map(|p| g.albedo().rgb(p % w, p / w)).collect(),
            roughness: (0..w * h).map(|p| g.roughness().scalar(p % w, p / w)).collect(),
        }
    }
}

/// Gradient descent on albedo and roughness, minimising
/// `L_p = L_re + δ·L_cons` against `frame` under `env`.
///
/// Both gradients are multiplied by their map's element count, so
/// `step_size` acts per value rather than being diluted by the mean in the
/// loss. Every step is projected to `[0, 1]`; a step that would increase the
/// loss is halved up to [`MAX_HALVINGS`] times.
pub fn refine_properties(
    gbuf_init: &GBuffer,
    frame: &RadianceImage,
    env: &EnvironmentMap,
    cfg: &RefineConfig,
) -> Result<Refinement> {
    cfg.validate()?;
    if frame.dims() != gbuf_init.dims() {
        return Err(Error::dims("frame", frame.dims(), "G-buffer", gbuf_init.dims()));
    }
    if cfg.iterations == 0 {
        return Ok(Refinement {
            gbuf: gbuf_init.clone(),
            loss_trace: Vec::new(),
            iterations: 0,
            stalled: false,
        });
    }
    let problem = RefineProblem::new(gbuf_init, frame, env, cfg)?;
    let n = problem.pixel_count() as f64;
    let mut state = problem.initial_state();
    let mut loss = checked(problem.loss(&state))?;
    let mut trace = vec![loss];
    let mut step = cfg.step_size;
    let mut stalled = false;
    let mut iterations = 0;

    while iterations < cfg.iterations {
        iterations += 1;
        let ga = problem.albedo_gradient(&state);
        let gr = problem.roughness_gradient(&state);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = RefineState {
                albedo: state
                    .albedo
                    .iter()
                    .zip(&ga)
                    .map(|(a, g)| (*a - *g * (step * 3.0 * n)).map(|v| v.clamp(0.0, 1.0)))
                    .collect(),
                roughness: state
                    .roughness
                    .iter()
                    .zip(&gr)
                    .map(|(r, g)| (r - g * step * n).clamp(0.0, 1.0))
                    .collect(),
            };
            let l = checked(problem.loss(&trial))?;
            if l <= loss {
                accepted = Some((trial, l));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((s, l)) => {
                state = s;
                loss = l;
                trace.push(l);
                step *= STEP_GROWTH;
            }
            None => {
                stalled = true;
                break;
            }
        }
    }

    Ok(Refinement {
        gbuf: problem.to_gbuffer(&state)?,
        loss_trace: trace,
        iterations,
        stalled,
    })
}

fn checked(loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite { what: "refinement loss".into() })
    }
}

/// `L_p` of a refinement result measured through the full loss definition.
pub fn refinement_loss(problem: &RefineProblem, state: &RefineState, target: &RadianceImage) -> Result<f64> {
    let g = problem.to_gbuffer(state)?;
    loss_lp(&problem.render(state), target, &g, &problem.init, problem.delta)
}

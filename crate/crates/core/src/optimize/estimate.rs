use rayon::prelude::*;

use super::basis::{transport_basis, TransportBasis};
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::imagery::{GBuffer, RadianceImage};
use crate::math::Vec3;
use crate::shading::BrdfMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvEstimateConfig {
    pub env_width: usize,
    pub env_height: usize,
    /// Tikhonov weight on `‖E‖²`.
    pub ridge: f64,
    pub max_iters: usize,
    /// Stop once the relative residual, or the relative projected gradient,
    /// falls below this.
    pub tol: f64,
    pub mode: BrdfMode,
    /// Quadrature sub-cells per texel side.
    pub subdivisions: usize,
}

impl Default for EnvEstimateConfig {
    fn default() -> Self {
        EnvEstimateConfig {
            env_width: 32,
            env_height: 16,
            ridge: 1e-3,
            max_iters: 500,
            tol: 1e-4,
            mode: BrdfMode::Disney,
            subdivisions: 2,
        }
    }
}

impl EnvEstimateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::param("ridge", format!("{} must be a nonnegative number", self.ridge)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", format!("{} must be positive", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnvEstimate {
    pub env: EnvironmentMap,
    /// `‖Σ_j E_j B_j − I‖ / ‖I‖` over all pixels and channels.
    pub relative_residual: f64,
    /// Largest iteration count over the three channel solves.
    pub iterations: usize,
    /// False when any channel hit `max_iters` first; `env` then holds the best
    /// iterate found.
    pub converged: bool,
}

/// Recovers a nonnegative environment map that reproduces `frame` on `gbuf`
/// under the quadrature light-transport model, one channel at a time.
pub fn estimate_envmap(gbuf: &GBuffer, frame: &RadianceImage, cfg: &EnvEstimateConfig) -> Result<EnvEstimate> {
    cfg.validate()?;
    if frame.dims() != gbuf.dims() {
        return Err(Error::dims("frame", frame.dims(), "G-buffer", gbuf.dims()));
    }
    let basis = transport_basis(gbuf, (cfg.env_width, cfg.env_height), cfg.mode, cfg.subdivisions)?;
    estimate_with_basis(&basis, frame, cfg)
}

/// [`estimate_envmap`] with a precomputed basis.
pub fn estimate_with_basis(basis: &TransportBasis, frame: &RadianceImage, cfg: &EnvEstimateConfig) -> Result<EnvEstimate> {
    cfg.validate()?;
    if frame.dims() != basis.dims() {
        return Err(Error::dims("frame", frame.dims(), "basis", basis.dims()));
    }
    if let Some(v) = frame.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid("frame", format!("value {v} is negative or not finite")));
    }
    let (ew, eh) = basis.env_dims();
    let (w, h) = basis.dims();
    let targets: [Vec<f64>; 3] =
        std::array::from_fn(|c| (0..w * h).map(|p| frame.rgb(p % w, p / w)[c]).collect());
    let data_norm2: f64 = targets.iter().flatten().map(|v| v * v).sum();
    if data_norm2 == 0.0 {
        return Ok(EnvEstimate {
            env: EnvironmentMap::constant(ew, eh, Vec3::ZERO)?,
            relative_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let j = basis.texel_count();
    let mut texels = vec![Vec3::ZERO; j];
    let mut residual2 = 0.0;
    let mut iterations = 0;
    let mut converged = true;
    for (c, target) in targets.iter().enumerate() {
        let gram = gram_matrix(basis, c, cfg.ridge);
        let rhs: Vec<f64> = (0..j).into_par_iter().map(|t| dot(basis.image(t, c), target)).collect();
        let target_norm2: f64 = target.iter().map(|v| v * v).sum();
        let sol = nnls(&gram, &rhs, target_norm2, cfg.ridge, data_norm2, cfg);
        residual2 += sol.residual2;
        iterations = iterations.max(sol.iterations);
        converged &= sol.converged;
        for (t, x) in sol.x.iter().enumerate() {
            texels[t][c] = *x;
        }
    }
    let img = RadianceImage::from_fn(ew, eh, 3, |col, row| texels[row * ew + col]);
    Ok(EnvEstimate {
        env: EnvironmentMap::new(img)?,
        relative_residual: (residual2 / data_norm2).sqrt(),
        iterations,
        converged,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `BᵀB + ridge·I` for one channel, dense row-major.
fn gram_matrix(basis: &TransportBasis, channel: usize, ridge: f64) -> Vec<f64> {
    let j = basis.texel_count();
    let mut g = vec![0.0; j * j];
    g.par_chunks_mut(j).enumerate().for_each(|(a, row)| {
        let ba = basis.image(a, channel);
        for (b, out) in row.iter_mut().enumerate().skip(a) {
            *out = dot(ba, basis.image(b, channel));
        }
    });
    for a in 0..j {
        for b in 0..a {
            g[a * j + b] = g[b * j + a];
        }
        g[a * j + a] += ridge;
    }
    g
}

struct NnlsSolution {
    x: Vec<f64>,
    /// Squared data residual `‖Bx − I‖²`, ridge term excluded.
    residual2: f64,
    iterations: usize,
    converged: bool,
}

fn mat_vec(g: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    g.par_chunks(n).map(|row| dot(row, x)).collect()
}

/// Projected gradient with Barzilai–Borwein steps and Armijo backtracking on
/// `f(x) = ½ xᵀGx − bᵀx` over `x ≥ 0`.
fn nnls(g: &[f64], b: &[f64], target_norm2: f64, ridge: f64, data_norm2: f64, cfg: &EnvEstimateConfig) -> NnlsSolution {
    let n = b.len();
    let objective = |x: &[f64], gx: &[f64]| 0.5 * dot(x, gx) - dot(b, x);
    // ‖Bx − I‖² = xᵀGx − ridge‖x‖² − 2bᵀx + ‖I‖²
    let residual2 = |x: &[f64], gx: &[f64]| (dot(x, gx) - ridge * dot(x, x) - 2.0 * dot(b, x) + target_norm2).max(0.0);
    let b_norm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut f = 0.0;
    let mut step: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        let grad: Vec<f64> = gx.iter().zip(b).map(|(a, bb)| a - bb).collect();
        let pg_norm = x
            .iter()
            .zip(&grad)
            .map(|(&xi, &gi)| if xi <= 0.0 && gi > 0.0 { 0.0 } else { gi * gi })
            .sum::<f64>()
            .sqrt();
        let rel_res = (residual2(&x, &gx) / data_norm2).sqrt();
        if pg_norm <= cfg.tol * b_norm || rel_res <= cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut alpha = match step {
            Some(a) => a,
            None => {
                // exact line minimiser along the projected gradient
                let d: Vec<f64> = x
                    .iter()
                    .zip(&grad)
                    .map(|(&xi, &gi)| if xi <= 0.0 && gi > 0.0 { 0.0 } else { gi })
                    .collect();
                let curv = dot(&d, &mat_vec(g, &d));
                if curv > 0.0 { dot(&d, &d) / curv } else { 1.0 }
            }
        };

        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| (xi - alpha * gi).max(0.0)).collect();
            let g_trial = mat_vec(g, &trial);
            let f_trial = objective(&trial, &g_trial);
            let decrease: f64 = grad.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
            if f_trial <= f + 1e-4 * decrease {
                accepted = Some((trial, g_trial, f_trial));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, gx_new, f_new)) = accepted else {
            // no descent possible in floating point: at the optimum
            converged = true;
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gx_new.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { Some(dot(&s, &s) / sy) } else { None };
        x = x_new;
        gx = gx_new;
        f = f_new;
    }

    NnlsSolution {
        residual2: residual2(&x, &gx),
        x,
        iterations,
        converged,
    }
}

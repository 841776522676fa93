//! Material response: Burley ("Disney") diffuse plus a Cook–Torrance GGX
//! specular lobe in the metallic workflow, with a pure Lambert mode for
//! analytic tests.
//!
//! All vectors are unit length in a common frame; `l` points toward the
//! light and `v` toward the viewer.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{Rgb, Vec3};

/// Roughness is clamped to at least this before squaring into `α`.
pub const MIN_ROUGHNESS: f64 = 0.03;

/// Specular reflectance of dielectrics at normal incidence.
pub const DIELECTRIC_F0: f64 = 0.04;

/// Per-pixel material parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample {
    pub albedo: Rgb,
    pub roughness: f64,
    pub metallic: f64,
}

impl MaterialSample {
    pub fn new(albedo: Rgb, roughness: f64, metallic: f64) -> Self {
        MaterialSample {
            albedo,
            roughness,
            metallic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.albedo.x) && unit(self.albedo.y) && unit(self.albedo.z)) {
            return Err(Error::invalid("albedo", format!("{:?} outside [0, 1]", self.albedo)));
        }
        if !unit(self.roughness) || !unit(self.metallic) {
            return Err(Error::invalid(
                "material",
                format!("roughness {} / metallic {} outside [0, 1]", self.roughness, self.metallic),
            ));
        }
        Ok(())
    }

    /// Specular colour at normal incidence, `lerp(0.04, albedo, metallic)`.
    pub fn f0(&self) -> Rgb {
        Vec3::splat(DIELECTRIC_F0).lerp(self.albedo, self.metallic)
    }

    /// GGX width `α = max(roughness, MIN_ROUGHNESS)²`.
    pub fn alpha(&self) -> f64 {
        let r = self.roughness.max(MIN_ROUGHNESS);
        r * r
    }
}

/// Surface normal and view direction for one shading point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingFrame {
    pub n: Vec3,
    pub v: Vec3,
}

impl ShadingFrame {
    pub fn new(n: Vec3, v: Vec3) -> Self {
        ShadingFrame { n, v }
    }

    /// `n · v`; nonpositive values mean the surface faces away from the viewer.
    pub fn cos_view(&self) -> f64 {
        self.n.dot(self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BrdfMode {
    #[default]
    Disney,
    /// `albedo / π`, used for analytic checks.
    Lambert,
}

impl std::str::FromStr for BrdfMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disney" => Ok(BrdfMode::Disney),
            "lambert" => Ok(BrdfMode::Lambert),
            other => Err(Error::param("mode", format!("unknown BRDF mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for BrdfMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BrdfMode::Disney => "disney",
            BrdfMode::Lambert => "lambert",
        })
    }
}

/// Schlick's Fresnel approximation.
pub fn fresnel_schlick(f0: Rgb, cos_theta: f64) -> Rgb {
    let m = 1.0 - cos_theta.clamp(0.0, 1.0);
    let m5 = m * m * m * m * m;
    f0 + (Vec3::ONE - f0) * m5
}

/// GGX (Trowbridge–Reitz) normal distribution. `alpha` must lie in `(0, 1]`.
pub fn ggx_ndf(alpha: f64, cos_theta_h: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("{alpha} outside (0, 1]")));
    }
    Ok(ggx_d(alpha, cos_theta_h.clamp(0.0, 1.0)))
}

fn ggx_d(alpha: f64, cos_h: f64) -> f64 {
    let a2 = alpha * alpha;
    let t = cos_h * cos_h * (a2 - 1.0) + 1.0;
    a2 / (PI * t * t)
}

/// Separable Schlick-GGX masking for one direction, `k = α / 2`.
fn schlick_g1(cos: f64, k: f64) -> f64 {
    cos / (cos * (1.0 - k) + k)
}

fn half_vector(l: Vec3, v: Vec3) -> Option<Vec3> {
    let h = l + v;
    let len = h.length();
    (len > 1e-12).then(|| h / len)
}

/// Burley diffuse with retro-reflection.
pub fn disney_diffuse(mat: &MaterialSample, n: Vec3, l: Vec3, v: Vec3) -> Rgb {
    mat.albedo * (disney_diffuse_factor(mat.roughness, n, l, v) / PI)
}

/// `F_d(θ_l) · F_d(θ_v)`, the albedo-independent part of the Burley lobe.
pub(crate) fn disney_diffuse_factor(roughness: f64, n: Vec3, l: Vec3, v: Vec3) -> f64 {
    let nl = n.dot(l);
    let nv = n.dot(v);
    if nl <= 0.0 || nv <= 0.0 {
        return 0.0;
    }
    let cos_d = match half_vector(l, v) {
        Some(h) => h.dot(l).clamp(0.0, 1.0),
        None => 0.0,
    };
    let fd90 = 0.5 + 2.0 * roughness * cos_d * cos_d;
    let fd = |c: f64| {
        let m = 1.0 - c;
        1.0 + (fd90 - 1.0) * m * m * m * m * m
    };
    fd(nl) * fd(nv)
}

/// Cook–Torrance GGX specular, `D·G·F / (4 (n·l)(n·v))`.
pub fn ggx_specular(mat: &MaterialSample, n: Vec3, l: Vec3, v: Vec3) -> Rgb {
    ggx_specular_with_f0(mat.roughness, mat.f0(), n, l, v)
}

pub(crate) fn ggx_specular_with_f0(roughness: f64, f0: Rgb, n: Vec3, l: Vec3, v: Vec3) -> Rgb {
    let nl = n.dot(l);
    let nv = n.dot(v);
    if nl <= 0.0 || nv <= 0.0 {
        return Vec3::ZERO;
    }
    let Some(h) = half_vector(l, v) else {
        return Vec3::ZERO;
    };
    let r = roughness.max(MIN_ROUGHNESS);
    let alpha = r * r;
    let d = ggx_d(alpha, n.dot(h).clamp(0.0, 1.0));
    let k = alpha / 2.0;
    let g = schlick_g1(nl, k) * schlick_g1(nv, k);
    let f = fresnel_schlick(f0, h.dot(v));
    f * (d * g / (4.0 * nl * nv))
}

/// Full material response `(1 - metallic)·f_diffuse + f_specular`, or
/// `albedo / π` in Lambert mode. Zero whenever `l` or `v` is below the surface.
pub fn brdf_eval(mat: &MaterialSample, n: Vec3, l: Vec3, v: Vec3, mode: BrdfMode) -> Rgb {
    match mode {
        BrdfMode::Lambert => {
            if n.dot(l) > 0.0 && n.dot(v) > 0.0 {
                mat.albedo / PI
            } else {
                Vec3::ZERO
            }
        }
        BrdfMode::Disney => {
            disney_diffuse(mat, n, l, v) * (1.0 - mat.metallic) + ggx_specular(mat, n, l, v)
        }
    }
}

/// BRDF split into a part linear in albedo and an albedo-independent part,
/// with the specular colour `f0` supplied by the caller:
/// `brdf = albedo ⊙ diffuse + specular`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BrdfSplit {
    pub diffuse: f64,
    pub specular: Rgb,
}

pub(crate) fn brdf_split(
    roughness: f64,
    metallic: f64,
    f0: Rgb,
    n: Vec3,
    l: Vec3,
    v: Vec3,
    mode: BrdfMode,
) -> BrdfSplit {
    match mode {
        BrdfMode::Lambert => BrdfSplit {
            diffuse: if n.dot(l) > 0.0 && n.dot(v) > 0.0 { 1.0 / PI } else { 0.0 },
            specular: Vec3::ZERO,
        },
        BrdfMode::Disney => BrdfSplit {
            diffuse: (1.0 - metallic) * disney_diffuse_factor(roughness, n, l, v) / PI,
            specular: ggx_specular_with_f0(roughness, f0, n, l, v),
        },
    }
}

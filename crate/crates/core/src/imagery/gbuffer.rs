//! Per-pixel geometry and material maps for one viewpoint.
//!
//! Two camera frames are in play:
//!
//! * the **pinhole frame** produced by `K⁻¹·[x y 1]ᵀ·depth`: x right, y down,
//!   z forward along the optical axis (mesh vertices live here);
//! * the **shading frame**: x right, y up, z toward the viewer. Normals, view
//!   vectors and environment-map directions live here.
//!
//! They differ by a flip of y and z, see [`pinhole_to_shading`].

use std::fs;
use std::path::{Path, PathBuf};

use super::{load_pfm, load_png, load_png_raw, RadianceImage};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::shading::MaterialSample;

/// Tolerance on `|n| - 1` for a constructed G-buffer.
pub const NORMAL_TOLERANCE: f64 = 1e-3;
/// Largest `|n| - 1` that loading will silently renormalise.
pub const NORMAL_REPAIR_TOLERANCE: f64 = 1e-2;

/// Zero-skew pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Intrinsics { fx, fy, cx, cy }
    }

    /// `K` as a row-major 3×3 matrix.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
    }

    pub fn is_invertible(&self) -> bool {
        self.fx != 0.0 && self.fy != 0.0 && self.fx.is_finite() && self.fy.is_finite()
    }

    pub fn check_invertible(&self) -> Result<()> {
        if self.is_invertible() && self.cx.is_finite() && self.cy.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("intrinsics", format!("singular or non-finite K: {self:?}")))
        }
    }

    /// `K⁻¹·[px py 1]ᵀ·depth` in the pinhole frame.
    pub fn backproject(&self, px: f64, py: f64, depth: f64) -> Vec3 {
        Vec3::new((px - self.cx) / self.fx * depth, (py - self.cy) / self.fy * depth, depth)
    }

    /// Pinhole-frame point to pixel coordinates.
    pub fn project(&self, p: Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Unit ray direction through pixel `(px, py)` in the pinhole frame.
    pub fn ray_direction(&self, px: f64, py: f64) -> Vec3 {
        self.backproject(px, py, 1.0).normalized()
    }

    /// Unit vector from the surface seen at pixel centre `(x, y)` toward the
    /// camera, in the shading frame.
    pub fn view_direction(&self, x: usize, y: usize) -> Vec3 {
        -pinhole_to_shading(self.ray_direction(x as f64 + 0.5, y as f64 + 0.5))
    }

    /// Parses `fx fy cx cy`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    reason: format!("{t:?} is not a number"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 4 {
            return Err(Error::Parse {
                path: path.into(),
                reason: format!("expected 4 values (fx fy cx cy), found {}", vals.len()),
            });
        }
        let k = Intrinsics::new(vals[0], vals[1], vals[2], vals[3]);
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.into(),
                reason: "non-finite intrinsics".into(),
            });
        }
        Ok(k)
    }

    pub fn to_text(&self) -> String {
        format!("{} {} {} {}\n", self.fx, self.fy, self.cx, self.cy)
    }
}

/// Flips y and z to move a vector from the pinhole frame to the shading frame
/// (the map is its own inverse).
pub fn pinhole_to_shading(v: Vec3) -> Vec3 {
    Vec3::new(v.x, -v.y, -v.z)
}

/// Validated geometry and material maps sharing one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    albedo: RadianceImage,
    roughness: RadianceImage,
    metallic: RadianceImage,
    normal: RadianceImage,
    depth: RadianceImage,
    intrinsics: Intrinsics,
}

impl GBuffer {
    /// Assembles and validates a G-buffer. Nothing is repaired here.
    pub fn new(
        albedo: RadianceImage,
        roughness: RadianceImage,
        metallic: RadianceImage,
        normal: RadianceImage,
        depth: RadianceImage,
        intrinsics: Intrinsics,
    ) -> Result<Self> {
        let g = GBuffer {
            albedo,
            roughness,
            metallic,
            normal,
            depth,
            intrinsics,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let maps = self.named_maps();
        for (name, img, channels) in maps {
            if img.channels() != channels {
                return Err(Error::ChannelMismatch {
                    what: name.into(),
                    expected: channels,
                    found: img.channels(),
                });
            }
            if img.dims() != self.albedo.dims() {
                return Err(Error::dims("albedo", self.albedo.dims(), name, img.dims()));
            }
        }
        for (name, img) in [("albedo", &self.albedo), ("roughness", &self.roughness), ("metallic", &self.metallic)] {
            if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(name, format!("value {v} outside [0, 1]")));
            }
        }
        if let Some(v) = self.depth.data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::invalid("depth", format!("non-positive depth {v}")));
        }
        let (w, h) = self.dims();
        for y in 0..h {
            for x in 0..w {
                let len = self.normal.rgb(x, y).length();
                if (len - 1.0).abs() > NORMAL_TOLERANCE {
                    return Err(Error::invalid(
                        "normal",
                        format!("length {len} at pixel ({x}, {y}) is not unit"),
                    ));
                }
            }
        }
        self.intrinsics.check_invertible()
    }

    fn named_maps(&self) -> [(&'static str, &RadianceImage, usize); 5] {
        [
            ("albedo", &self.albedo, 3),
            ("roughness", &self.roughness, 1),
            ("metallic", &self.metallic, 1),
            ("normal", &self.normal, 3),
            ("depth", &self.depth, 1),
        ]
    }

    /// Uniform-material scene with per-pixel normals; depth is constant.
    /// Convenient for synthetic tests and examples.
    pub fn uniform(
        width: usize,
        height: usize,
        material: MaterialSample,
        normal: impl Fn(usize, usize) -> Vec3,
        depth: f64,
        intrinsics: Intrinsics,
    ) -> Result<Self> {
        GBuffer::new(
            RadianceImage::filled(width, height, material.albedo),
            RadianceImage::from_fn(width, height, 1, |_, _| Vec3::splat(material.roughness)),
            RadianceImage::from_fn(width, height, 1, |_, _| Vec3::splat(material.metallic)),
            RadianceImage::from_fn(width, height, 3, |x, y| normal(x, y).normalized()),
            RadianceImage::from_fn(width, height, 1, |_, _| Vec3::splat(depth)),
            intrinsics,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        self.albedo.dims()
    }

    pub fn width(&self) -> usize {
        self.albedo.width()
    }

    pub fn height(&self) -> usize {
        self.albedo.height()
    }

    pub fn albedo(&self) -> &RadianceImage {
        &self.albedo
    }

    pub fn roughness(&self) -> &RadianceImage {
        &self.roughness
    }

    pub fn metallic(&self) -> &RadianceImage {
        &self.metallic
    }

    pub fn normal(&self) -> &RadianceImage {
        &self.normal
    }

    pub fn depth(&self) -> &RadianceImage {
        &self.depth
    }

    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }

    pub fn material(&self, x: usize, y: usize) -> MaterialSample {
        MaterialSample {
            albedo: self.albedo.rgb(x, y),
            roughness: self.roughness.scalar(x, y),
            metallic: self.metallic.scalar(x, y),
        }
    }

    pub fn normal_at(&self, x: usize, y: usize) -> Vec3 {
        self.normal.rgb(x, y)
    }

    pub fn view_at(&self, x: usize, y: usize) -> Vec3 {
        self.intrinsics.view_direction(x, y)
    }

    /// Replaces the albedo map, revalidating.
    pub fn with_albedo(&self, albedo: RadianceImage) -> Result<GBuffer> {
        GBuffer::new(
            albedo,
            self.roughness.clone(),
            self.metallic.clone(),
            self.normal.clone(),
            self.depth.clone(),
            self.intrinsics,
        )
    }

    /// Replaces the roughness map, revalidating.
    pub fn with_roughness(&self, roughness: RadianceImage) -> Result<GBuffer> {
        GBuffer::new(
            self.albedo.clone(),
            roughness,
            self.metallic.clone(),
            self.normal.clone(),
            self.depth.clone(),
            self.intrinsics,
        )
    }

    /// Writes the directory layout read by [`load_gbuffer`] (all maps as PFM).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, img, _) in self.named_maps() {
            super::save_pfm(img, dir.join(format!("{name}.pfm")))?;
        }
        let k = dir.join("intrinsics.txt");
        fs::write(&k, self.intrinsics.to_text()).map_err(|e| Error::io(&k, e))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum PngTransfer {
    Srgb,
    Raw,
    Normal,
}

fn load_map(dir: &Path, name: &str, png: Option<PngTransfer>) -> Result<RadianceImage> {
    let pfm = dir.join(format!("{name}.pfm"));
    if pfm.exists() {
        return load_pfm(&pfm);
    }
    let png_path = dir.join(format!("{name}.png"));
    match png {
        Some(transfer) if png_path.exists() => {
            let img = match transfer {
                PngTransfer::Srgb => load_png(&png_path)?,
                PngTransfer::Raw => load_png_raw(&png_path)?,
                PngTransfer::Normal => load_png_raw(&png_path)?.map_values(|v| 2.0 * v - 1.0),
            };
            Ok(img)
        }
        _ => Err(Error::MissingFile { path: pfm }),
    }
}

/// Loads a G-buffer directory:
///
/// ```text
/// albedo.{pfm,png}  roughness.{pfm,png}  metallic.{pfm,png}
/// normal.{pfm,png}  depth.pfm  intrinsics.txt
/// ```
///
/// PNG albedo is sRGB decoded; other PNG maps are raw data, and PNG normals
/// use the `(n + 1) / 2` encoding. Normals whose length is off by at most
/// [`NORMAL_REPAIR_TOLERANCE`] are renormalised; anything else that violates a
/// G-buffer invariant is an error.
pub fn load_gbuffer(dir: impl AsRef<Path>) -> Result<GBuffer> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::NotFound { path: dir.into() });
    }
    let albedo = load_map(dir, "albedo", Some(PngTransfer::Srgb))?;
    let roughness = load_map(dir, "roughness", Some(PngTransfer::Raw))?;
    let metallic = load_map(dir, "metallic", Some(PngTransfer::Raw))?;
    let normal = load_map(dir, "normal", Some(PngTransfer::Normal))?;
    let depth = load_map(dir, "depth", None)?;
    let k_path: PathBuf = dir.join("intrinsics.txt");
    let k_text = fs::read_to_string(&k_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile { path: k_path.clone() },
        _ => Error::io(&k_path, e),
    })?;
    let intrinsics = Intrinsics::parse(&k_text, &k_path)?;

    // dimension and channel checks come first so errors name the right maps
    if normal.channels() != 3 {
        return Err(Error::ChannelMismatch {
            what: "normal".into(),
            expected: 3,
            found: normal.channels(),
        });
    }
    if normal.dims() != albedo.dims() {
        return Err(Error::dims("albedo", albedo.dims(), "normal", normal.dims()));
    }
    let normal = renormalize(normal)?;
    GBuffer::new(albedo, roughness, metallic, normal, depth, intrinsics)
}

fn renormalize(normal: RadianceImage) -> Result<RadianceImage> {
    let mut out = normal.clone();
    for y in 0..normal.height() {
        for x in 0..normal.width() {
            let n = normal.rgb(x, y);
            let len = n.length();
            if (len - 1.0).abs() > NORMAL_REPAIR_TOLERANCE {
                return Err(Error::invalid(
                    "normal",
                    format!("length {len} at pixel ({x}, {y}) is beyond repair tolerance"),
                ));
            }
            out.set_rgb(x, y, n / len);
        }
    }
    Ok(out)
}

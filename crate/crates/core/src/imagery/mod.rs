//! Image containers, colour transfer, file I/O and G-buffer assembly.
//!
//! Everything downstream of this module works on linear-light floating-point
//! images. sRGB transfer happens only at the PNG boundary.

mod gbuffer;
mod pfm;
mod png_io;
mod srgb;

pub use gbuffer::{load_gbuffer, pinhole_to_shading, GBuffer, Intrinsics, NORMAL_REPAIR_TOLERANCE, NORMAL_TOLERANCE};
pub use pfm::{load_pfm, read_pfm, save_pfm, write_pfm};
pub use png_io::{load_label_png, load_png, load_png_raw, save_label_png, save_png, LabelImage, SaveReport};
pub use srgb::{srgb_decode, srgb_decode_flagged, srgb_encode, srgb_encode_flagged};

use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Loads a linear image from `.pfm`, or from an sRGB `.png`.
pub fn load_image(path: impl AsRef<Path>) -> Result<RadianceImage> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pfm" => load_pfm(path),
        "png" => load_png(path),
        other => Err(Error::param("path", format!("{}: unsupported image extension {other:?}", path.display()))),
    }
}

/// Saves to `.pfm` as is, or to `.png` as clamped 8-bit sRGB.
pub fn save_image(img: &RadianceImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pfm" => save_pfm(img, path),
        "png" => save_png(img, path).map(|_| ()),
        other => Err(Error::param("path", format!("{}: unsupported image extension {other:?}", path.display()))),
    }
}

/// Row-major floating-point image with 1 or 3 channels, origin at the top left.
///
/// Values are always finite. Radiance images are additionally nonnegative, but
/// the same container carries signed data such as normal maps, so the sign is
/// checked by the consumers that need it.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl RadianceImage {
    /// Zero-filled image.
    ///
    /// # Panics
    /// If `channels` is not 1 or 3.
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        RadianceImage {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("image", format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(
                "image",
                format!(
                    "buffer holds {} values, {width}x{height}x{channels} needs {}",
                    data.len(),
                    width * height * channels
                ),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "image data".into(),
            });
        }
        Ok(RadianceImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// 3-channel image with every pixel set to `rgb`.
    pub fn filled(width: usize, height: usize, rgb: Vec3) -> Self {
        Self::from_fn(width, height, 3, |_, _| rgb)
    }

    /// Builds an image by evaluating `f` at every pixel in row-major order. For single-channel
    /// images only the `x` component is stored.
    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize) -> Vec3) -> Self {
        let mut img = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                img.set_rgb(x, y, f(x, y));
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * self.channels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.offset(x, y) + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let o = self.offset(x, y);
        self.data[o + c] = v;
    }

    /// Pixel as an RGB triple; single-channel images are splatted.
    pub fn rgb(&self, x: usize, y: usize) -> Vec3 {
        let o = self.offset(x, y);
        if self.channels == 1 {
            Vec3::splat(self.data[o] as f64)
        } else {
            Vec3::new(self.data[o] as f64, self.data[o + 1] as f64, self.data[o + 2] as f64)
        }
    }

    /// Scalar pixel value; the first channel of multi-channel images.
    pub fn scalar(&self, x: usize, y: usize) -> f64 {
        self.data[self.offset(x, y)] as f64
    }

    /// Stores `v`. Single-channel images keep `v.x`.
    pub fn set_rgb(&mut self, x: usize, y: usize, v: Vec3) {
        let o = self.offset(x, y);
        if self.channels == 1 {
            self.data[o] = v.x as f32;
        } else {
            self.data[o] = v.x as f32;
            self.data[o + 1] = v.y as f32;
            self.data[o + 2] = v.z as f32;
        }
    }

    /// Row slice of interleaved values.
    pub fn row(&self, y: usize) -> &[f32] {
        let w = self.width * self.channels;
        &self.data[y * w..(y + 1) * w]
    }

    pub fn row_mut(&mut self, y: usize) -> &mut [f32] {
        let w = self.width * self.channels;
        &mut self.data[y * w..(y + 1) * w]
    }

    /// Applies `f` to every stored value.
    pub fn map_values(&self, mut f: impl FnMut(f32) -> f32) -> RadianceImage {
        RadianceImage {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Per-pixel Rec. 709 luma as a single-channel buffer in `f64`.
    pub fn luma(&self) -> Vec<f64> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.rgb(x, y).luminance())
            .collect()
    }

    /// Errors unless `other` has the same width and height.
    pub fn check_same_dims(&self, name: &str, other: &RadianceImage, other_name: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(name, self.dims(), other_name, other.dims()));
        }
        Ok(())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }
}

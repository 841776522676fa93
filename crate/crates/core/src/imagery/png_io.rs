use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType};

use super::{srgb_decode, srgb_encode_flagged, RadianceImage};
use crate::error::{Error, Result};

/// Outcome of an LDR export.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaveReport {
    /// Number of samples outside `[0, 1]` that were clamped.
    pub clamped: usize,
}

/// 8-bit single-channel label image (segmentation ids, keep masks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid(
                "label image",
                format!("{} labels for {width}x{height}", labels.len()),
            ));
        }
        Ok(LabelImage { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, v: u8) -> Self {
        LabelImage {
            width,
            height,
            labels: vec![v; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

struct Decoded {
    width: usize,
    height: usize,
    src_channels: usize,
    /// Normalised samples in `[0, 1]`, interleaved with `src_channels`.
    samples: Vec<f64>,
    raw8: Option<Vec<u8>>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |e: png::DecodingError| match e {
        png::DecodingError::IoError(source) => Error::MalformedPng {
            path: path.into(),
            reason: source.to_string(),
        },
        other => Error::MalformedPng {
            path: path.into(),
            reason: other.to_string(),
        },
    };
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(malformed)?;
    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    let src_channels = match color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => {
            return Err(Error::UnsupportedPng {
                path: path.into(),
                reason: "indexed colour".into(),
            })
        }
    };
    let bytes_per_sample = match depth {
        BitDepth::Eight => 1,
        BitDepth::Sixteen => 2,
        other => {
            return Err(Error::UnsupportedPng {
                path: path.into(),
                reason: format!("bit depth {other:?}"),
            })
        }
    };
    let size = reader.output_buffer_size().ok_or_else(|| Error::UnsupportedPng {
        path: path.into(),
        reason: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let out = reader.next_frame(&mut buf).map_err(malformed)?;
    let (width, height) = (out.width as usize, out.height as usize);
    let row_bytes = width * src_channels * bytes_per_sample;
    let mut samples = Vec::with_capacity(width * height * src_channels);
    let mut raw8 = (bytes_per_sample == 1).then(|| Vec::with_capacity(width * height * src_channels));
    for y in 0..height {
        let row = &buf[y * out.line_size..y * out.line_size + row_bytes];
        if bytes_per_sample == 1 {
            for &b in row {
                samples.push(b as f64 / 255.0);
            }
            raw8.as_mut().unwrap().extend_from_slice(row);
        } else {
            for pair in row.chunks_exact(2) {
                samples.push(u16::from_be_bytes([pair[0], pair[1]]) as f64 / 65535.0);
            }
        }
    }
    Ok(Decoded {
        width,
        height,
        src_channels,
        samples,
        raw8,
    })
}

fn to_image(d: Decoded, transfer: impl Fn(f64) -> f64) -> Result<RadianceImage> {
    let channels = if d.src_channels >= 3 { 3 } else { 1 };
    let mut data = Vec::with_capacity(d.width * d.height * channels);
    for px in d.samples.chunks_exact(d.src_channels) {
        for &s in &px[..channels] {
            data.push(transfer(s) as f32);
        }
    }
    RadianceImage::from_vec(d.width, d.height, channels, data)
}

/// Loads an 8- or 16-bit PNG as a linear image (sRGB decoded). Alpha is dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<RadianceImage> {
    to_image(decode(path.as_ref())?, srgb_decode)
}

/// Loads a PNG without colour transfer; samples are scaled to `[0, 1]`.
/// Used for data maps such as encoded normals or roughness.
pub fn load_png_raw(path: impl AsRef<Path>) -> Result<RadianceImage> {
    to_image(decode(path.as_ref())?, |v| v)
}

/// Loads the first channel of an 8-bit PNG as raw labels.
pub fn load_label_png(path: impl AsRef<Path>) -> Result<LabelImage> {
    let path = path.as_ref();
    let d = decode(path)?;
    let raw = d.raw8.ok_or_else(|| Error::UnsupportedPng {
        path: path.into(),
        reason: "label images must be 8-bit".into(),
    })?;
    let labels = raw.chunks_exact(d.src_channels).map(|px| px[0]).collect();
    LabelImage::new(d.width, d.height, labels)
}

/// Writes an 8-bit sRGB PNG, clamping to `[0, 1]` in linear light first.
pub fn save_png(img: &RadianceImage, path: impl AsRef<Path>) -> Result<SaveReport> {
    let path = path.as_ref();
    let mut report = SaveReport::default();
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| {
            let (e, clamped) = srgb_encode_flagged(v as f64);
            report.clamped += clamped as usize;
            (e * 255.0).round() as u8
        })
        .collect();
    let color = if img.channels() == 3 {
        ColorType::Rgb
    } else {
        ColorType::Grayscale
    };
    write_png_bytes(path, img.width(), img.height(), color, &bytes)?;
    Ok(report)
}

/// Writes raw 8-bit labels as a greyscale PNG.
pub fn save_label_png(labels: &LabelImage, path: impl AsRef<Path>) -> Result<()> {
    write_png_bytes(
        path.as_ref(),
        labels.width,
        labels.height,
        ColorType::Grayscale,
        &labels.labels,
    )
}

fn write_png_bytes(path: &Path, width: usize, height: usize, color: ColorType, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let to_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(source) => Error::io(path, source),
        other => Error::Io {
            path: path.into(),
            source: std::io::Error::other(other.to_string()),
        },
    };
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(BitDepth::Eight);
    let mut writer = enc.write_header().map_err(to_err)?;
    writer.write_image_data(bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

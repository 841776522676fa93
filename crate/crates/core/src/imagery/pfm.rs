//! Portable float map codec.
//!
//! Layout: `PF` (RGB) or `Pf` (grey), then `width height`, then a scale whose
//! sign selects the byte order (negative = little endian), then raw `f32`
//! samples with the bottom row first. The magnitude of the scale is not
//! applied to the samples.

use std::fs;
use std::path::Path;

use super::RadianceImage;
use crate::error::{Error, Result};

pub fn load_pfm(path: impl AsRef<Path>) -> Result<RadianceImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pfm(&bytes, path)
}

pub fn save_pfm(img: &RadianceImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pfm(img)).map_err(|e| Error::io(path, e))
}

/// Encodes `img` as little-endian PFM bytes.
pub fn write_pfm(img: &RadianceImage) -> Vec<u8> {
    let magic = if img.channels() == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 4);
    for y in (0..img.height()).rev() {
        for v in img.row(y) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decodes PFM bytes. `path` is only used in error messages.
pub fn read_pfm(bytes: &[u8], path: &Path) -> Result<RadianceImage> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor).unwrap_or_default();
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => {
            return Err(Error::PfmBadMagic {
                path: path.into(),
                magic,
            })
        }
    };
    let header_err = |reason: String| Error::PfmHeader {
        path: path.into(),
        reason,
    };
    let width = parse_dim(next_token(bytes, &mut cursor), "width").map_err(header_err)?;
    let height = parse_dim(next_token(bytes, &mut cursor), "height").map_err(header_err)?;
    let scale_tok = next_token(bytes, &mut cursor).ok_or_else(|| header_err("missing scale".into()))?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| header_err(format!("scale {scale_tok:?} is not a number")))?;
    if scale == 0.0 {
        return Err(Error::PfmZeroScale { path: path.into() });
    }
    if !scale.is_finite() {
        return Err(header_err(format!("scale {scale_tok:?} is not finite")));
    }
    // exactly one whitespace byte separates the header from the payload
    if cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
        cursor += 1;
    }
    let little_endian = scale < 0.0;

    let count = width * height * channels;
    let expected = count * 4;
    let payload = &bytes[cursor.min(bytes.len())..];
    if payload.len() < expected {
        return Err(Error::PfmTruncated {
            path: path.into(),
            expected,
            found: payload.len(),
        });
    }

    let row_len = width * channels;
    let mut data = vec![0f32; count];
    for (file_row, chunk) in payload[..expected].chunks_exact(row_len * 4).enumerate() {
        let y = height - 1 - file_row;
        let dst = &mut data[y * row_len..(y + 1) * row_len];
        for (d, b) in dst.iter_mut().zip(chunk.chunks_exact(4)) {
            let b = [b[0], b[1], b[2], b[3]];
            *d = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
        }
    }
    RadianceImage::from_vec(width, height, channels, data).map_err(|e| match e {
        Error::NonFinite { .. } => Error::NonFinite {
            what: format!("{} samples", path.display()),
        },
        other => other,
    })
}

fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if start == *cursor {
        return None;
    }
    std::str::from_utf8(&bytes[start..*cursor]).ok().map(str::to_owned)
}

fn parse_dim(tok: Option<String>, name: &str) -> std::result::Result<usize, String> {
    let tok = tok.ok_or_else(|| format!("missing {name}"))?;
    match tok.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{name} {tok:?} is not a positive integer")),
    }
}

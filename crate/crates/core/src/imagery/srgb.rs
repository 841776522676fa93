//! sRGB transfer functions. The pipeline runs in linear light; these are only
//! applied where 8-bit images enter or leave it.

/// sRGB EOTF: encoded value to linear. Inputs outside `[0, 1]` are clamped.
pub fn srgb_decode(v: f64) -> f64 {
    srgb_decode_flagged(v).0
}

/// Like [`srgb_decode`], but also reports whether the input had to be clamped.
pub fn srgb_decode_flagged(v: f64) -> (f64, bool) {
    let (c, clamped) = clamp_unit(v);
    let out = if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    };
    (out, clamped)
}

/// Inverse EOTF: linear value to sRGB-encoded. Inputs outside `[0, 1]` are clamped.
pub fn srgb_encode(v: f64) -> f64 {
    srgb_encode_flagged(v).0
}

pub fn srgb_encode_flagged(v: f64) -> (f64, bool) {
    let (c, clamped) = clamp_unit(v);
    let out = if c <= 0.0031308 {
        c * 12.92
    } else if c >= 1.0 {
        1.0
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    (out, clamped)
}

fn clamp_unit(v: f64) -> (f64, bool) {
    if v.is_nan() || v < 0.0 {
        (0.0, true)
    } else if v > 1.0 {
        (1.0, true)
    } else {
        (v, false)
    }
}

//! Image similarity scores: SSIM on luma, temporal SSIM over consecutive
//! frames, and PSNR.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagery::RadianceImage;

/// Returned by [`psnr`] for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Gaussian-window SSIM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    /// Window side in pixels; odd.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the luma signal.
    pub range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            range: 1.0,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::param("window", format!("{} must be odd", self.window)));
        }
        if !(self.sigma > 0.0) || !(self.k1 > 0.0) || !(self.k2 > 0.0) || !(self.range > 0.0) {
            return Err(Error::param("ssim", "sigma, k1, k2 and range must be positive"));
        }
        Ok(())
    }

    /// Normalized 1-D taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    }
}

fn clamped_luma(img: &RadianceImage) -> Vec<f64> {
    img.luma().into_iter().map(|l| l.clamp(0.0, 1.0)).collect()
}

/// Valid-region separable filtering of `w × h` data. Output is
/// `(w - n + 1) × (h - n + 1)`.
fn filter_valid(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let horiz: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let row = &data[y * w..(y + 1) * w];
            (0..ow).map(move |x| taps.iter().zip(&row[x..x + n]).map(|(t, v)| t * v).sum::<f64>())
        })
        .collect();
    (0..oh)
        .into_par_iter()
        .flat_map_iter(|y| {
            let horiz = &horiz;
            (0..ow).map(move |x| taps.iter().enumerate().map(|(k, t)| t * horiz[(y + k) * ow + x]).sum::<f64>())
        })
        .collect()
}

/// Mean SSIM index over every window position that lies fully inside the
/// image, computed on Rec. 709 luma clamped to `[0, 1]`.
pub fn ssim(a: &RadianceImage, b: &RadianceImage, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    a.check_same_dims("first image", b, "second image")?;
    let (w, h) = a.dims();
    if w < params.window || h < params.window {
        return Err(Error::invalid(
            "image",
            format!("{w}x{h} is smaller than the {0}x{0} SSIM window", params.window),
        ));
    }
    let la = clamped_luma(a);
    let lb = clamped_luma(b);
    let taps = params.taps();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
    let mu_a = filter_valid(&la, w, h, &taps);
    let mu_b = filter_valid(&lb, w, h, &taps);
    let e_aa = filter_valid(&prod(&la, &la), w, h, &taps);
    let e_bb = filter_valid(&prod(&lb, &lb), w, h, &taps);
    let e_ab = filter_valid(&prod(&la, &lb), w, h, &taps);
    let c1 = (params.k1 * params.range).powi(2);
    let c2 = (params.k2 * params.range).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

/// Mean SSIM between consecutive frames.
pub fn temporal_ssim(frames: &[RadianceImage], params: &SsimParams) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::invalid("sequence", format!("needs at least 2 frames, got {}", frames.len())));
    }
    let scores = frames.windows(2).map(|p| ssim(&p[0], &p[1], params)).collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Peak signal-to-noise ratio over all channels, in decibels. Identical
/// images give [`PSNR_CAP_DB`].
pub fn psnr(a: &RadianceImage, b: &RadianceImage, peak: f64) -> Result<f64> {
    a.check_same_dims("first image", b, "second image")?;
    if a.channels() != b.channels() {
        return Err(Error::ChannelMismatch {
            what: "second image".into(),
            expected: a.channels(),
            found: b.channels(),
        });
    }
    if !(peak > 0.0) {
        return Err(Error::param("peak", format!("{peak} must be positive")));
    }
    let n = a.data().len().max(1);
    let mse = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

//! Carries the relighting of the first frame across a static-camera sequence
//! by per-pixel quotient images.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagery::RadianceImage;
use crate::math::Vec3;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_GAIN_MAX: f64 = 8.0;

/// Per-pixel, per-channel ratio of the relit first frame to the original.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMap {
    /// Three-channel gains in `[0, gain_max]`.
    pub gain: RadianceImage,
    pub epsilon: f64,
    pub gain_max: f64,
}

/// `gain = clamp((I0* + ε) / (I0 + ε), 0, gain_max)`.
pub fn quotient_map(i0: &RadianceImage, i0_star: &RadianceImage, epsilon: f64, gain_max: f64) -> Result<QuotientMap> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", format!("{epsilon} must be positive")));
    }
    if !(gain_max > 0.0) || !gain_max.is_finite() {
        return Err(Error::param("gain_max", format!("{gain_max} must be positive")));
    }
    i0.check_same_dims("original frame", i0_star, "relit frame")?;
    let (w, h) = i0.dims();
    let gain = RadianceImage::from_fn(w, h, 3, |x, y| {
        let (a, b) = (i0.rgb(x, y), i0_star.rgb(x, y));
        Vec3::from_array(std::array::from_fn(|c| ((b[c] + epsilon) / (a[c] + epsilon)).clamp(0.0, gain_max)))
    });
    Ok(QuotientMap { gain, epsilon, gain_max })
}

impl QuotientMap {
    /// `gain ⊙ frame`.
    pub fn apply(&self, frame: &RadianceImage) -> Result<RadianceImage> {
        frame.check_same_dims("frame", &self.gain, "quotient map")?;
        let (w, h) = frame.dims();
        Ok(RadianceImage::from_fn(w, h, 3, |x, y| {
            self.gain.rgb(x, y).mul_elem(frame.rgb(x, y))
        }))
    }
}

/// Applies `qmap` to every frame, in parallel. The output has the input's
/// length and order.
pub fn propagate(frames: &[RadianceImage], qmap: &QuotientMap) -> Result<Vec<RadianceImage>> {
    frames
        .par_iter()
        .enumerate()
        .map(|(t, f)| {
            qmap.apply(f).map_err(|e| match e {
                Error::DimensionMismatch { left_dims, right, right_dims, .. } => Error::DimensionMismatch {
                    left: format!("frame {t}"),
                    left_dims,
                    right,
                    right_dims,
                },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{temporal_ssim, SsimParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(w: usize, h: usize, seed: u64) -> RadianceImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RadianceImage::from_fn(w, h, 3, |_, _| Vec3::new(rng.random(), rng.random(), rng.random()))
    }

    #[test]
    fn identity_map() {
        let a = random(8, 8, 1);
        let q = quotient_map(&a, &a, DEFAULT_EPSILON, DEFAULT_GAIN_MAX).unwrap();
        assert!(q.gain.data().iter().all(|&g| g == 1.0));
        let frames = vec![a.clone(), random(8, 8, 2)];
        let out = propagate(&frames, &q).unwrap();
        assert_eq!(out, frames);
    }

    #[test]
    fn doubling() {
        let a = random(8, 8, 3).map_values(|v| 0.5 + v);
        let b = a.map_values(|v| 2.0 * v);
        let q = quotient_map(&a, &b, DEFAULT_EPSILON, DEFAULT_GAIN_MAX).unwrap();
        assert!(q.gain.data().iter().all(|&g| (g - 2.0).abs() < 0.01 * 2.0));
    }

    #[test]
    fn black_pixel_hits_the_clamp() {
        let a = RadianceImage::filled(2, 2, Vec3::ZERO);
        let b = RadianceImage::filled(2, 2, Vec3::ONE);
        let q = quotient_map(&a, &b, 1e-3, 8.0).unwrap();
        // (1 + 1e-3) / 1e-3 = 1001 > 8
        assert!(q.gain.data().iter().all(|&g| g == 8.0));
    }

    #[test]
    fn static_sequence_reproduces_the_relit_frame() {
        let i0 = random(10, 10, 4);
        let star = random(10, 10, 5).map_values(|v| 0.3 * v + 0.05);
        let q = quotient_map(&i0, &star, DEFAULT_EPSILON, 1e6).unwrap();
        for f in propagate(&vec![i0.clone(); 5], &q).unwrap() {
            for ((got, want), a) in f.data().iter().zip(star.data()).zip(i0.data()) {
                let (got, want, a) = (*got as f64, *want as f64, *a as f64);
                // (b + ε) / (a + ε) · a − b = ε (a − b) / (a + ε)
                let bound = DEFAULT_EPSILON * (a - want).abs() / (a + DEFAULT_EPSILON);
                assert!((got - want).abs() <= bound + 1e-6, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn error_names_the_frame() {
        let q = quotient_map(&random(4, 4, 0), &random(4, 4, 1), DEFAULT_EPSILON, DEFAULT_GAIN_MAX).unwrap();
        let frames = vec![random(4, 4, 2), random(4, 4, 3), random(5, 4, 4)];
        let err = propagate(&frames, &q).unwrap_err().to_string();
        assert!(err.contains("frame 2"), "{err}");
    }

    #[test]
    fn bad_parameters() {
        let a = random(2, 2, 0);
        assert!(quotient_map(&a, &a, 0.0, 8.0).is_err());
        assert!(quotient_map(&a, &a, 1e-3, -1.0).is_err());
        assert!(quotient_map(&a, &random(3, 2, 0), 1e-3, 8.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn per_frame_and_batch_agree(seed in any::<u64>()) {
            let q = quotient_map(&random(6, 5, seed), &random(6, 5, seed ^ 1), DEFAULT_EPSILON, DEFAULT_GAIN_MAX).unwrap();
            let frames: Vec<_> = (0..4).map(|i| random(6, 5, seed.wrapping_add(i + 2))).collect();
            let batch = propagate(&frames, &q).unwrap();
            for (f, b) in frames.iter().zip(&batch) {
                prop_assert_eq!(&propagate(std::slice::from_ref(f), &q).unwrap()[0], b);
            }
        }

        #[test]
        fn gains_do_not_add_flicker(seed in any::<u64>(), scale in 0.2f64..3.0) {
            // a bright square drifting over a smooth background
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bg: Vec<Vec3> = (0..24 * 24).map(|_| Vec3::splat(rng.random_range(0.2..0.3))).collect();
            let frames: Vec<_> = (0..5)
                .map(|t| RadianceImage::from_fn(24, 24, 3, |x, y| {
                    if (4 + t..10 + t).contains(&x) && (6..12).contains(&y) { Vec3::new(0.9, 0.7, 0.5) } else { bg[y * 24 + x] }
                }))
                .collect();
            let star = frames[0].map_values(|v| (v as f64 * scale) as f32);
            let q = quotient_map(&frames[0], &star, DEFAULT_EPSILON, DEFAULT_GAIN_MAX).unwrap();
            let p = SsimParams::default();
            let before = temporal_ssim(&frames, &p).unwrap();
            let after = temporal_ssim(&propagate(&frames, &q).unwrap(), &p).unwrap();
            prop_assert!(after >= before - 0.01, "{after} < {before} - 0.01");
        }
    }
}

//! Physically based relighting of G-buffer frames under environment maps,
//! together with the inverse problems around it (lighting estimation and
//! material refinement), lighting propagation across demonstration episodes,
//! and the quality metrics used to score the results.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose

pub mod envmap;
pub mod error;
pub mod geometry;
pub mod imagery;
pub mod math;
pub mod metrics;
pub mod optimize;
pub mod pipeline;
pub mod relight;
pub mod shading;
pub mod temporal;

pub use envmap::EnvironmentMap;
pub use error::{Error, ErrorKind, Result};
pub use imagery::{GBuffer, Intrinsics, RadianceImage};
pub use math::{Rgb, Vec3};
pub use relight::{relight_frame, shade_pixel, RenderSettings, SamplerKind};
pub use shading::{BrdfMode, MaterialSample};

// The guide's snippets run as doctests so the book cannot drift from the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/rendering.md")]
    mod rendering {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/temporal.md")]
    mod temporal {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

use crate::error::{Error, Result};
use crate::imagery::{GBuffer, RadianceImage};

/// `L_p = L_re + δ·L_cons`.
///
/// `L_re` is the mean squared error between `rendered` and `target` over
/// pixels and channels. `L_cons` sums, over albedo, roughness, metallic,
/// normal and depth, the mean squared deviation of each map in `props` from
/// the same map in `props_init`.
pub fn loss_lp(
    rendered: &RadianceImage,
    target: &RadianceImage,
    props: &GBuffer,
    props_init: &GBuffer,
    delta: f64,
) -> Result<f64> {
    rendered.check_same_dims("rendered", target, "target")?;
    if rendered.channels() != target.channels() {
        return Err(Error::ChannelMismatch {
            what: "target".into(),
            expected: rendered.channels(),
            found: target.channels(),
        });
    }
    if props.dims() != props_init.dims() {
        return Err(Error::dims("properties", props.dims(), "initial properties", props_init.dims()));
    }
    if props.dims() != rendered.dims() {
        return Err(Error::dims("properties", props.dims(), "rendered", rendered.dims()));
    }
    let l_re = mean_sq_diff(rendered.data(), target.data());
    let l_cons = mean_sq_diff(props.albedo().data(), props_init.albedo().data())
        + mean_sq_diff(props.roughness().data(), props_init.roughness().data())
        + mean_sq_diff(props.metallic().data(), props_init.metallic().data())
        + mean_sq_diff(props.normal().data(), props_init.normal().data())
        + mean_sq_diff(props.depth().data(), props_init.depth().data());
    Ok(l_re + delta * l_cons)
}

fn mean_sq_diff(a: &[f32], b: &[f32]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64
}

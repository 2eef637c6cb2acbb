use super::lightmaps::{Channel, ColorSpace, SixWayLightmaps};
use crate::baker::EmissiveLut;
use crate::image::{RgbImage, ScalarMap};
use crate::math::Vec3;
use serde::{Deserialize, Serialize};

/// Directions within this distance of unit length are renormalized with a
/// warning; anything further off is rejected.
pub const DIRECTION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CompositeError {
    #[error("light direction has length {0}, expected 1")]
    NonUnit(f64),
    #[error("light radiance must be finite and non-negative")]
    Radiance,
    #[error("lightmaps must be linear for interpolation; linearize first")]
    ColorSpace,
    #[error("dimension mismatch: {0}")]
    Dims(String),
    #[error(transparent)]
    Lut(#[from] crate::baker::LutError),
}

/// Directional light; `direction` points from the light toward the scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    pub direction: Vec3,
    pub radiance: [f32; 3],
}

impl DirectionalLight {
    pub fn new(direction: Vec3, radiance: [f32; 3]) -> Result<Self, CompositeError> {
        let direction = checked_unit(direction)?;
        if radiance.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(CompositeError::Radiance);
        }
        Ok(Self { direction, radiance })
    }

    pub fn white(direction: Vec3) -> Result<Self, CompositeError> {
        Self::new(direction, [1.0; 3])
    }
}

/// Normalizes a nearly-unit direction, rejecting larger deviations.
pub fn checked_unit(dir: Vec3) -> Result<Vec3, CompositeError> {
    let len = dir.length();
    let dev = (len - 1.0).abs();
    if !(dev <= DIRECTION_TOLERANCE) {
        return Err(CompositeError::NonUnit(len));
    }
    if dev > 1e-12 {
        log::warn!("light direction length {len} renormalized");
        return Ok(dir / len);
    }
    Ok(dir)
}

/// Interpolation weights `|ω_p|` per axis; their L1 norm lies in `[1, √3]`.
pub fn axis_weights(dir: Vec3) -> [f32; 3] {
    [dir.x.abs() as f32, dir.y.abs() as f32, dir.z.abs() as f32]
}

/// `Σ_p |ω_p| · L_p^{sign(ω_p)}` per pixel, for light travelling along `dir`.
pub fn interpolate_scattering(maps: &SixWayLightmaps, dir: Vec3) -> Result<ScalarMap, CompositeError> {
    if maps.color_space != ColorSpace::Linear {
        return Err(CompositeError::ColorSpace);
    }
    let dir = checked_unit(dir)?;
    let w = axis_weights(dir);
    let pick = |axis: usize| maps.plane(Channel::for_axis(axis, dir[axis] >= 0.0));
    let (px, py, pz) = (pick(0), pick(1), pick(2));
    let data = (0..maps.width * maps.height)
        .map(|i| w[0] * px.data[i] + w[1] * py.data[i] + w[2] * pz.data[i])
        .collect();
    Ok(ScalarMap { width: maps.width, height: maps.height, data })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Constant([f32; 3]),
    Image(RgbImage),
}

impl Background {
    #[inline]
    fn at(&self, i: usize) -> [f32; 3] {
        match self {
            Background::Constant(c) => *c,
            Background::Image(img) => img.data[i],
        }
    }
}

/// Linear-light composite:
/// `Σ_l radiance_l · interp(ω_l) · vis_l + lut(E) + T · background`.
/// `visibility`, when given, holds one map per light.
pub fn composite(
    maps: &SixWayLightmaps,
    lights: &[DirectionalLight],
    background: &Background,
    lut: &EmissiveLut,
    visibility: Option<&[ScalarMap]>,
) -> Result<RgbImage, CompositeError> {
    lut.validate()?;
    let (w, h) = (maps.width, maps.height);
    if let Background::Image(img) = background {
        if img.width != w || img.height != h {
            return Err(CompositeError::Dims(format!("background {}x{} vs lightmaps {w}x{h}", img.width, img.height)));
        }
    }
    if let Some(vis) = visibility {
        if vis.len() != lights.len() {
            return Err(CompositeError::Dims(format!("{} visibility maps for {} lights", vis.len(), lights.len())));
        }
        if vis.iter().any(|v| !v.same_dims(w, h)) {
            return Err(CompositeError::Dims("visibility map size differs from lightmaps".into()));
        }
    }
    let linear = maps.to_linear();
    let scatter = lights
        .iter()
        .map(|l| interpolate_scattering(&linear, l.direction))
        .collect::<Result<Vec<_>, _>>()?;
    let t = linear.plane(Channel::Transparency);
    let e = linear.plane(Channel::Emissive);
    let data = (0..w * h)
        .map(|i| {
            let mut out = [0.0f32; 3];
            for (li, light) in lights.iter().enumerate() {
                let v = visibility.map_or(1.0, |vis| vis[li].data[i]);
                let s = scatter[li].data[i] * v;
                for (o, r) in out.iter_mut().zip(light.radiance) {
                    *o += r * s;
                }
            }
            let emis = lut.eval(e.data[i]);
            let bg = background.at(i);
            for c in 0..3 {
                out[c] += emis[c] + t.data[i] * bg[c];
            }
            out
        })
        .collect();
    Ok(RgbImage { width: w, height: h, data })
}

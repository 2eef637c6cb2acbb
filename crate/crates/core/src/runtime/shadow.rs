//! Screen-space shadows on the smoke shell from opaque occluders, via a
//! shadow map rendered from a directional light.

use crate::image::ScalarMap;
use crate::math::{orthonormal_basis, Aabb, Ray, Vec3};
use crate::volume::Camera;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DEPTH_BIAS: f64 = 2e-3;
pub const DEFAULT_SHADOW_RES: usize = 512;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ShadowError {
    #[error("depth bias must be positive, got {0}")]
    Bias(f64),
    #[error("shadow map resolution must be >= 1")]
    Resolution,
    #[error("light direction must be non-zero")]
    Direction,
    #[error("depth map is {0}x{1} but the camera renders {2}x{3}")]
    Dims(usize, usize, usize, usize),
}

/// Opaque parallelogram `origin + a·edge_u + b·edge_v`, `a, b ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub origin: Vec3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
}

impl Occluder {
    /// Ray parameter of the hit, if any, for `t > t_min`.
    pub fn intersect(&self, ray: &Ray, t_min: f64) -> Option<f64> {
        let n = self.edge_u.cross(self.edge_v);
        let denom = n.dot(ray.dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(self.origin - ray.origin) / denom;
        if !(t > t_min) {
            return None;
        }
        let rel = ray.at(t) - self.origin;
        // barycentric-style coordinates in the (edge_u, edge_v) frame
        let nn = n.dot(n);
        let a = rel.cross(self.edge_v).dot(n) / nn;
        let b = self.edge_u.cross(rel).dot(n) / nn;
        ((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)).then_some(t)
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let o = self.origin;
        [o, o + self.edge_u, o + self.edge_v, o + self.edge_u + self.edge_v]
    }
}

/// Orthographic light-space transform plus the occluder depth map.
/// Light clip space: `u, v ∈ [0, 1]` across the fitted bounds, depth in
/// `[0, 1]` increasing along the light's travel direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowContext {
    pub direction: Vec3,
    right: Vec3,
    up: Vec3,
    min: [f64; 3],
    extent: [f64; 3],
    pub depth_map: ScalarMap,
    pub bias: f64,
}

impl ShadowContext {
    /// Fits the light frustum to `scene` (which should contain both the
    /// smoke and the occluders) and renders the occluder depth map.
    pub fn new(
        direction: Vec3,
        scene: &Aabb,
        occluders: &[Occluder],
        resolution: usize,
        bias: f64,
    ) -> Result<Self, ShadowError> {
        if !(bias > 0.0) {
            return Err(ShadowError::Bias(bias));
        }
        if resolution == 0 {
            return Err(ShadowError::Resolution);
        }
        let direction = direction.try_normalize().ok_or(ShadowError::Direction)?;
        let (right, up) = orthonormal_basis(direction);
        let mut bounds = *scene;
        for o in occluders {
            for c in o.corners() {
                bounds = bounds.union(&Aabb::new(c, c));
            }
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for i in 0..8 {
            let c = Vec3::new(
                if i & 1 == 0 { bounds.min.x } else { bounds.max.x },
                if i & 2 == 0 { bounds.min.y } else { bounds.max.y },
                if i & 4 == 0 { bounds.min.z } else { bounds.max.z },
            );
            for (k, axis) in [right, up, direction].iter().enumerate() {
                let p = c.dot(*axis);
                min[k] = min[k].min(p);
                max[k] = max[k].max(p);
            }
        }
        let pad = 1e-3 * (0..3).map(|k| max[k] - min[k]).fold(0.0, f64::max).max(1e-9);
        for k in 0..3 {
            min[k] -= pad;
            max[k] += pad;
        }
        let extent = std::array::from_fn(|k| max[k] - min[k]);
        let mut ctx = Self {
            direction,
            right,
            up,
            min,
            extent,
            depth_map: ScalarMap::filled(resolution, resolution, 1.0),
            bias,
        };
        ctx.render(occluders);
        Ok(ctx)
    }

    /// Light clip coordinates `(u, v, depth)` of a world point.
    pub fn to_clip(&self, p: Vec3) -> [f64; 3] {
        let q = [p.dot(self.right), p.dot(self.up), p.dot(self.direction)];
        std::array::from_fn(|k| (q[k] - self.min[k]) / self.extent[k])
    }

    fn texel_ray(&self, tx: usize, ty: usize) -> Ray {
        let n = self.depth_map.width as f64;
        let u = self.min[0] + (tx as f64 + 0.5) / n * self.extent[0];
        let v = self.min[1] + (ty as f64 + 0.5) / self.depth_map.height as f64 * self.extent[1];
        Ray::new(self.right * u + self.up * v + self.direction * self.min[2], self.direction)
    }

    fn render(&mut self, occluders: &[Occluder]) {
        let (w, h) = (self.depth_map.width, self.depth_map.height);
        let data: Vec<f32> = (0..h)
            .into_par_iter()
            .flat_map_iter(|ty| {
                let ctx = &*self;
                (0..w).map(move |tx| {
                    let ray = ctx.texel_ray(tx, ty);
                    let t = occluders
                        .iter()
                        .filter_map(|o| o.intersect(&ray, 0.0))
                        .fold(f64::INFINITY, f64::min);
                    if t.is_finite() {
                        (t / ctx.extent[2]).clamp(0.0, 1.0) as f32
                    } else {
                        1.0
                    }
                })
            })
            .collect();
        self.depth_map.data = data;
    }

    /// Visibility of a world point: 0 iff an occluder lies nearer the light
    /// by more than the bias. Points outside the light frustum are lit.
    pub fn visibility_at(&self, p: Vec3) -> f32 {
        let [u, v, d] = self.to_clip(p);
        if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) || !(0.0..=1.0).contains(&d) {
            return 1.0;
        }
        let tx = ((u * self.depth_map.width as f64) as usize).min(self.depth_map.width - 1);
        let ty = ((v * self.depth_map.height as f64) as usize).min(self.depth_map.height - 1);
        let occ = self.depth_map.get(tx, ty) as f64;
        if occ + self.bias < d {
            0.0
        } else {
            1.0
        }
    }

    /// Light clip depth bias expressed in world units.
    pub fn bias_world(&self) -> f64 {
        self.bias * self.extent[2]
    }
}

/// Per-pixel visibility of the smoke shell reconstructed from the guiding
/// depth channel. Pixels with no hit (`D = 0`) are lit.
pub fn shadow_visibility(shadow: &ShadowContext, depth: &ScalarMap, camera: &Camera) -> Result<ScalarMap, ShadowError> {
    if !depth.same_dims(camera.width, camera.height) {
        return Err(ShadowError::Dims(depth.width, depth.height, camera.width, camera.height));
    }
    let data = (0..camera.height)
        .into_par_iter()
        .flat_map_iter(|py| {
            (0..camera.width).map(move |px| {
                let d = depth.get(px, py);
                if d <= 0.0 {
                    1.0
                } else {
                    shadow.visibility_at(camera.depth_point(px, py, d as f64))
                }
            })
        })
        .collect();
    Ok(ScalarMap { width: camera.width, height: camera.height, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_at_z(z: f64, half: f64) -> Occluder {
        Occluder {
            origin: Vec3::new(-half, -half, z),
            edge_u: Vec3::new(2.0 * half, 0.0, 0.0),
            edge_v: Vec3::new(0.0, 2.0 * half, 0.0),
        }
    }

    #[test]
    fn occluder_intersection() {
        let o = plane_at_z(1.0, 1.0);
        let down = Ray::new(Vec3::new(0.5, 0.5, 3.0), -Vec3::Z);
        assert!((o.intersect(&down, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(o.intersect(&Ray::new(Vec3::new(1.5, 0.0, 3.0), -Vec3::Z), 0.0).is_none());
        assert!(o.intersect(&Ray::new(Vec3::new(0.0, 0.0, 3.0), Vec3::Z), 0.0).is_none());
    }

    #[test]
    fn no_occluders_all_lit() {
        let scene = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        let ctx = ShadowContext::new(-Vec3::Z, &scene, &[], 64, DEFAULT_DEPTH_BIAS).unwrap();
        assert!(ctx.depth_map.data.iter().all(|&d| d == 1.0));
        for p in [Vec3::ZERO, Vec3::splat(0.9), Vec3::new(5.0, 0.0, 0.0)] {
            assert_eq!(ctx.visibility_at(p), 1.0);
        }
    }

    #[test]
    fn ordering_along_light() {
        let scene = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        // light travels along -z: the plane at z = 2 is between light and smoke
        let between = ShadowContext::new(-Vec3::Z, &scene, &[plane_at_z(2.0, 3.0)], 64, DEFAULT_DEPTH_BIAS).unwrap();
        assert_eq!(between.visibility_at(Vec3::new(0.1, 0.2, 0.0)), 0.0);
        // plane at z = -2 lies behind the smoke
        let behind = ShadowContext::new(-Vec3::Z, &scene, &[plane_at_z(-2.0, 3.0)], 64, DEFAULT_DEPTH_BIAS).unwrap();
        assert_eq!(behind.visibility_at(Vec3::new(0.1, 0.2, 0.0)), 1.0);
        assert!(between.bias_world() > 0.0);
    }

    #[test]
    fn invalid_inputs() {
        let scene = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        assert_eq!(ShadowContext::new(Vec3::Z, &scene, &[], 8, 0.0).unwrap_err(), ShadowError::Bias(0.0));
        assert_eq!(ShadowContext::new(Vec3::ZERO, &scene, &[], 8, 1e-3).unwrap_err(), ShadowError::Direction);
    }
}

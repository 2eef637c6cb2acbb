use crate::image::ScalarMap;
use crate::volume::{Camera, DensityGrid, MediumParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LutError {
    #[error("emissive LUT needs at least 2 entries, got {0}")]
    TooFew(usize),
    #[error("positions and colors differ in length")]
    Length,
    #[error("LUT positions must be strictly increasing within [0, 1]")]
    Positions,
    #[error("LUT colors must be finite and non-negative")]
    Colors,
    #[error("remap scale/offset must be finite")]
    Remap,
}

/// Piecewise-linear map from the baked emissive scalar to RGB radiance,
/// plus the remap applied to the line-integrated emission at bake time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissiveLut {
    pub positions: Vec<f32>,
    pub colors: Vec<[f32; 3]>,
    pub remap_scale: f32,
    pub remap_offset: f32,
}

impl Default for EmissiveLut {
    /// Black body style fire ramp: black, deep red, orange, yellow, white.
    fn default() -> Self {
        Self {
            positions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            colors: vec![
                [0.0, 0.0, 0.0],
                [0.6, 0.05, 0.0],
                [1.6, 0.45, 0.05],
                [3.0, 1.8, 0.4],
                [4.0, 3.8, 3.0],
            ],
            remap_scale: 1.0,
            remap_offset: 0.0,
        }
    }
}

impl EmissiveLut {
    pub fn validate(&self) -> Result<(), LutError> {
        if self.positions.len() != self.colors.len() {
            return Err(LutError::Length);
        }
        if self.positions.len() < 2 {
            return Err(LutError::TooFew(self.positions.len()));
        }
        let in_range = self.positions.iter().all(|p| (0.0..=1.0).contains(p));
        if !in_range || self.positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LutError::Positions);
        }
        if self.colors.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(LutError::Colors);
        }
        if !self.remap_scale.is_finite() || !self.remap_offset.is_finite() {
            return Err(LutError::Remap);
        }
        Ok(())
    }

    /// Baked scalar for a line-integrated emission `e`.
    pub fn remap(&self, e: f64) -> f32 {
        (self.remap_scale as f64 * e + self.remap_offset as f64).clamp(0.0, 1.0) as f32
    }

    /// RGB radiance for a baked scalar; clamps outside the table.
    pub fn eval(&self, v: f32) -> [f32; 3] {
        let p = &self.positions;
        if v <= p[0] {
            return self.colors[0];
        }
        let last = p.len() - 1;
        if v >= p[last] {
            return self.colors[last];
        }
        let i = p.partition_point(|&x| x <= v) - 1;
        let f = (v - p[i]) / (p[i + 1] - p[i]);
        let (a, b) = (self.colors[i], self.colors[i + 1]);
        [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f]
    }
}

/// Line-integrated absorption-weighted emission `∫ T σ_a dy` through the
/// pixel center, midpoint fixed-step quadrature.
pub fn integrated_emission(grid: &DensityGrid, medium: &MediumParams, camera: &Camera, px: usize, py: usize, step: f64) -> f64 {
    let ray = camera.pixel_ray(px, py);
    let Some((t0, t1)) = grid.bounds().intersect(&ray, camera.near, camera.far) else {
        return 0.0;
    };
    let len = t1 - t0;
    if !(len > 0.0) {
        return 0.0;
    }
    let n = ((len / step) - 1e-9).ceil().max(1.0) as usize;
    let ds = len / n as f64;
    let st = medium.sigma_t_scale();
    let (mut tau, mut e) = (0.0, 0.0);
    for k in 0..n {
        let d = grid.sample(ray.at(t0 + (k as f64 + 0.5) * ds));
        // transmittance to the sample point: prior segments plus half of this one
        let t_mid = (-(tau + 0.5 * st * d * ds)).exp();
        e += t_mid * medium.sigma_a(d) * ds;
        tau += st * d * ds;
    }
    e
}

/// Emissive channel: `clamp(remap(∫ T σ_a dy), 0, 1)` per pixel. Colors are
/// applied through the LUT at composite time.
pub fn bake_emissive(
    grid: &DensityGrid,
    medium: &MediumParams,
    camera: &Camera,
    lut: &EmissiveLut,
    step: f64,
) -> Result<ScalarMap, LutError> {
    lut.validate()?;
    assert!(step > 0.0, "emissive step must be positive");
    let (w, h) = (camera.width, camera.height);
    let data: Vec<f32> = (0..h)
        .into_par_iter()
        .flat_map_iter(|py| (0..w).map(move |px| lut.remap(integrated_emission(grid, medium, camera, px, py, step))))
        .collect();
    Ok(ScalarMap { width: w, height: h, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::volume::Projection;

    fn cam() -> Camera {
        Camera::look_at(
            Projection::Orthographic { height: 1.0 },
            Vec3::new(0.0, -10.0, 0.0),
            Vec3::ZERO,
            Vec3::Z,
            (8, 8),
            0.0,
            20.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_density_or_zero_absorption() {
        let lut = EmissiveLut::default();
        let empty = DensityGrid::constant([8, 8, 8], 0.25, [-1.0; 3], 0.0).unwrap();
        let m = MediumParams::new(1.0, 1.0).unwrap();
        assert!(bake_emissive(&empty, &m, &cam(), &lut, 0.1).unwrap().data.iter().all(|&v| v == 0.0));
        let full = DensityGrid::constant([8, 8, 8], 0.25, [-1.0; 3], 3.0).unwrap();
        let no_abs = MediumParams::new(2.0, 0.0).unwrap();
        assert!(bake_emissive(&full, &no_abs, &cam(), &lut, 0.1).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn homogeneous_slab_closed_form() {
        let g = DensityGrid::constant([8, 8, 8], 0.25, [-1.0; 3], 1.0).unwrap();
        let m = MediumParams::new(0.7, 0.6).unwrap();
        let (st, sa, z) = (1.3f64, 0.6f64, 2.0f64);
        let analytic = (1.0 - (-st * z).exp()) * sa / st;
        for step in [0.125, 0.05] {
            let e = integrated_emission(&g, &m, &cam(), 3, 4, step);
            assert!(((e - analytic) / analytic).abs() <= 0.01, "step {step}: {e} vs {analytic}");
        }
    }

    #[test]
    fn lut_interpolation_and_validation() {
        let lut = EmissiveLut {
            positions: vec![0.0, 1.0],
            colors: vec![[0.0, 0.0, 0.0], [2.0, 1.0, 0.0]],
            remap_scale: 2.0,
            remap_offset: -0.5,
        };
        lut.validate().unwrap();
        assert_eq!(lut.eval(0.5), [1.0, 0.5, 0.0]);
        assert_eq!(lut.eval(2.0), [2.0, 1.0, 0.0]);
        assert_eq!(lut.remap(0.1), 0.0);
        assert_eq!(lut.remap(0.5), 0.5);
        let bad = EmissiveLut { positions: vec![0.5, 0.5], ..lut.clone() };
        assert_eq!(bad.validate(), Err(LutError::Positions));
        let short = EmissiveLut { positions: vec![0.0], colors: vec![[0.0; 3]], ..lut };
        assert_eq!(short.validate(), Err(LutError::TooFew(1)));
    }
}

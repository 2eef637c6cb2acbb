//! Single-scattering reference renderer for six-way lightmaps.

use super::transmittance::{march_optical_depth, AxisDepthTables};
use crate::image::ScalarMap;
use crate::math::{Ray, Vec3};
use crate::rng::{CounterRng, Domain};
use crate::runtime::{Channel, ColorSpace, SixWayLightmaps};
use crate::volume::{Camera, CameraError, DensityGrid, MediumParams, PhaseFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Primary march stops once the view transmittance falls below this.
const TERMINATION_T: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum BakeError {
    #[error("invalid bake config: {0}")]
    Config(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("bake resolution must be at least 16x16, got {0}x{1}")]
    Resolution(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BakeConfig {
    pub spp: u32,
    /// Primary march step; defaults to half the voxel width.
    #[serde(default)]
    pub primary_step: Option<f64>,
    /// Step for marched (non-axis) light transmittance; defaults to the voxel width.
    #[serde(default)]
    pub light_step: Option<f64>,
    pub rng_seed: u64,
}

impl Default for BakeConfig {
    fn default() -> Self {
        Self { spp: 32, primary_step: None, light_step: None, rng_seed: 0 }
    }
}

impl BakeConfig {
    pub fn validate(&self) -> Result<(), BakeError> {
        if self.spp == 0 {
            return Err(BakeError::Config("spp must be >= 1".into()));
        }
        for (name, s) in [("primary_step", self.primary_step), ("light_step", self.light_step)] {
            if let Some(s) = s {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(BakeError::Config(format!("{name} must be positive, got {s}")));
                }
            }
        }
        Ok(())
    }
}

/// Directions the six axis lights travel along, in channel order.
pub const AXIS_LIGHTS: [Vec3; 6] = [
    Vec3::new(1.0, 0.0, 0.0),
    Vec3::new(-1.0, 0.0, 0.0),
    Vec3::new(0.0, 1.0, 0.0),
    Vec3::new(0.0, -1.0, 0.0),
    Vec3::new(0.0, 0.0, 1.0),
    Vec3::new(0.0, 0.0, -1.0),
];

/// One primary sample's contribution for the six axis lights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSample {
    pub scatter: [f64; 6],
    pub transmittance: f64,
}

/// Per-pixel renderer state shared by the bake and by single-light renders.
pub struct ScatterRenderer<'a> {
    grid: &'a DensityGrid,
    medium: MediumParams,
    phase: PhaseFunction,
    camera: Camera,
    spp: u32,
    primary_step: f64,
    light_step: f64,
    rng: CounterRng,
    tables: AxisDepthTables,
}

enum LightQuery {
    Axes,
    Direction { travel: Vec3, axis: Option<(usize, bool)> },
}

impl<'a> ScatterRenderer<'a> {
    pub fn new(
        grid: &'a DensityGrid,
        medium: MediumParams,
        phase: PhaseFunction,
        camera: &Camera,
        config: &BakeConfig,
    ) -> Result<Self, BakeError> {
        config.validate()?;
        camera.validate()?;
        medium.validate().map_err(|e| BakeError::Config(e.to_string()))?;
        Ok(Self {
            grid,
            medium,
            phase,
            camera: *camera,
            spp: config.spp,
            primary_step: config.primary_step.unwrap_or(grid.voxel_width() * 0.5),
            light_step: config.light_step.unwrap_or(grid.voxel_width()),
            rng: CounterRng::new(config.rng_seed),
            tables: AxisDepthTables::new(grid),
        })
    }

    pub fn spp(&self) -> u32 {
        self.spp
    }

    /// Sub-pixel position of sample `s`: stratified along x, jittered in both.
    fn sample_ray(&self, px: usize, py: usize, s: u32, stream: &mut crate::rng::SampleStream) -> Ray {
        let jx = (s as f64 + stream.next_f64()) / self.spp as f64;
        let jy = stream.next_f64();
        self.camera.ray(px, py, jx, jy)
    }

    fn pixel_index(&self, px: usize, py: usize) -> u64 {
        (py * self.camera.width + px) as u64
    }

    /// Light transmittance from `p` toward a light travelling along `travel`.
    fn light_transmittance(&self, p: Vec3, travel: Vec3, axis: Option<(usize, bool)>, offset: f64) -> f64 {
        let depth = match axis {
            // walk against the light's travel direction
            Some((a, positive)) => self.tables.depth_to_boundary(self.grid, p, a, !positive) * self.medium.sigma_t_scale(),
            None => {
                let ray = Ray::new(p, -travel);
                match self.grid.bounds().intersect(&ray, 0.0, f64::INFINITY) {
                    Some((t0, t1)) => march_optical_depth(self.grid, &self.medium, &ray, t0, t1, self.light_step, offset),
                    None => 0.0,
                }
            }
        };
        (-depth).exp()
    }

    fn march(&self, px: usize, py: usize, s: u32, query: &LightQuery, out: &mut [f64]) -> f64 {
        let mut stream = self.rng.at(Domain::BakePixel, self.pixel_index(px, py), s as u64);
        let ray = self.sample_ray(px, py, s, &mut stream);
        let u = stream.next_f64();
        let light_offset = stream.next_f64();
        let Some((t0, t1)) = self.grid.bounds().intersect(&ray, self.camera.near, self.camera.far) else {
            return 1.0;
        };
        let len = t1 - t0;
        if !(len > 0.0) {
            return 1.0;
        }
        let n = ((len / self.primary_step) - 1e-9).ceil().max(1.0) as usize;
        let ds = len / n as f64;
        let to_camera = -ray.dir;
        let mut phase_weights = [0.0f64; 6];
        match query {
            LightQuery::Axes => {
                for (w, d) in phase_weights.iter_mut().zip(AXIS_LIGHTS) {
                    *w = self.phase.eval(d.dot(to_camera));
                }
            }
            LightQuery::Direction { travel, .. } => phase_weights[0] = self.phase.eval(travel.dot(to_camera)),
        }
        let st = self.medium.sigma_t_scale();
        let albedo = if st > 0.0 { self.medium.sigma_s_scale / st } else { 0.0 };
        let mut t_view = 1.0f64;
        for k in 0..n {
            let p = ray.at(t0 + (k as f64 + u) * ds);
            let density = self.grid.sample(p);
            if density <= 0.0 {
                continue;
            }
            let att = (-st * density * ds).exp();
            // segment integral of T * sigma_s with sigma held at the sample
            let seg = t_view * (1.0 - att) * albedo;
            match query {
                LightQuery::Axes => {
                    for (l, d) in AXIS_LIGHTS.iter().enumerate() {
                        let axis = l / 2;
                        let positive = d[axis] > 0.0;
                        out[l] += seg * phase_weights[l] * self.light_transmittance(p, *d, Some((axis, positive)), 0.0);
                    }
                }
                LightQuery::Direction { travel, axis } => {
                    out[0] += seg * phase_weights[0] * self.light_transmittance(p, *travel, *axis, light_offset);
                }
            }
            t_view *= att;
            if t_view < TERMINATION_T {
                t_view = 0.0;
                break;
            }
        }
        t_view
    }

    /// Estimate of sample `s` at pixel `(px, py)` for all six axis lights.
    pub fn axis_sample(&self, px: usize, py: usize, s: u32) -> AxisSample {
        let mut scatter = [0.0; 6];
        let transmittance = self.march(px, py, s, &LightQuery::Axes, &mut scatter);
        AxisSample { scatter, transmittance }
    }

    /// Estimate of sample `s` for one unit-white directional light
    /// travelling along `travel`. Returns (scattering, transmittance).
    pub fn light_sample(&self, px: usize, py: usize, s: u32, travel: Vec3) -> (f64, f64) {
        let mut out = [0.0; 1];
        let query = LightQuery::Direction { travel, axis: axis_of(travel) };
        let t = self.march(px, py, s, &query, &mut out);
        (out[0], t)
    }

    pub fn bake(&self) -> SixWayLightmaps {
        let (w, h) = (self.camera.width, self.camera.height);
        let rows: Vec<Vec<AxisSample>> = (0..h)
            .into_par_iter()
            .map(|py| {
                (0..w)
                    .map(|px| {
                        let mut acc = AxisSample { scatter: [0.0; 6], transmittance: 0.0 };
                        for s in 0..self.spp {
                            let smp = self.axis_sample(px, py, s);
                            for l in 0..6 {
                                acc.scatter[l] += smp.scatter[l];
                            }
                            acc.transmittance += smp.transmittance;
                        }
                        let inv = 1.0 / self.spp as f64;
                        acc.scatter.iter_mut().for_each(|v| *v *= inv);
                        acc.transmittance *= inv;
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut maps = SixWayLightmaps::new(w, h, ColorSpace::Linear);
        for (py, row) in rows.iter().enumerate() {
            for (px, acc) in row.iter().enumerate() {
                for (l, c) in Channel::SCATTERING.iter().enumerate() {
                    maps.plane_mut(*c).set(px, py, acc.scatter[l] as f32);
                }
                maps.plane_mut(Channel::Transparency).set(px, py, acc.transmittance.clamp(0.0, 1.0) as f32);
            }
        }
        maps
    }

    /// Scattering under one unit-white light plus transparency, both linear.
    pub fn render_light(&self, travel: Vec3) -> (ScalarMap, ScalarMap) {
        let (w, h) = (self.camera.width, self.camera.height);
        let travel = travel.normalize();
        let rows: Vec<Vec<(f64, f64)>> = (0..h)
            .into_par_iter()
            .map(|py| {
                (0..w)
                    .map(|px| {
                        let (mut sc, mut tr) = (0.0, 0.0);
                        for s in 0..self.spp {
                            let (a, b) = self.light_sample(px, py, s, travel);
                            sc += a;
                            tr += b;
                        }
                        (sc / self.spp as f64, tr / self.spp as f64)
                    })
                    .collect()
            })
            .collect();
        let mut scatter = ScalarMap::new(w, h);
        let mut transparency = ScalarMap::new(w, h);
        for (py, row) in rows.iter().enumerate() {
            for (px, &(a, b)) in row.iter().enumerate() {
                scatter.set(px, py, a as f32);
                transparency.set(px, py, b as f32);
            }
        }
        (scatter, transparency)
    }
}

fn axis_of(d: Vec3) -> Option<(usize, bool)> {
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        if d[b] == 0.0 && d[c] == 0.0 && d[a] != 0.0 {
            return Some((a, d[a] > 0.0));
        }
    }
    None
}

/// Bakes the six axis-light scattering channels and transparency, in
/// linear space. The emissive channel is left at zero.
pub fn bake_sixway(
    grid: &DensityGrid,
    medium: &MediumParams,
    phase: &PhaseFunction,
    camera: &Camera,
    config: &BakeConfig,
) -> Result<SixWayLightmaps, BakeError> {
    if camera.width < 16 || camera.height < 16 {
        return Err(BakeError::Resolution(camera.width, camera.height));
    }
    Ok(ScatterRenderer::new(grid, *medium, *phase, camera, config)?.bake())
}

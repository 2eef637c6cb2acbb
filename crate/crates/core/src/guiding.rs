//! Coarse large-step ray march producing the three-channel guiding map:
//! approximate in-scattered radiance, transparency and first-hit depth.
//!
//! Each pixel ray starts at the camera's near distance, is offset by a
//! per-pixel jitter `δ ∈ [0, h)`, and visits `x_n = x_0 + (δ + n h) d` for
//! `n = 1..=N`. Three white surrogate lights (front, top, bottom) are
//! attenuated by coarse marches toward each light.

use crate::image::{ImageError, Pfm, ScalarMap};
use crate::math::{Ray, Vec3};
use crate::rng::{CounterRng, Domain};
use crate::volume::{Camera, DensityGrid, MediumParams, PhaseFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum GuidingError {
    #[error("invalid guiding config: {0}")]
    Config(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("guiding metadata {path}: {message}")]
    Meta { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidingConfig {
    /// March step `h` in voxel widths.
    pub step_multiplier: f64,
    /// Maximum number of primary steps `N`.
    pub max_steps: usize,
    /// Density threshold for the depth channel, in unscaled density units.
    pub tau: f64,
    pub jitter_seed: u64,
    /// Weights of the (front, top, bottom) surrogate lights.
    pub light_weights: [f64; 3],
    /// Step of the light marches in voxel widths; defaults to `step_multiplier`.
    pub light_step_multiplier: Option<f64>,
}

impl Default for GuidingConfig {
    fn default() -> Self {
        Self {
            step_multiplier: 10.0,
            max_steps: 64,
            tau: 0.01,
            jitter_seed: 0,
            light_weights: [1.0, 0.5, 0.5],
            light_step_multiplier: None,
        }
    }
}

impl GuidingConfig {
    pub fn validate(&self) -> Result<(), GuidingError> {
        let bad = |m: String| Err(GuidingError::Config(m));
        if !(self.step_multiplier > 0.0 && self.step_multiplier.is_finite()) {
            return bad(format!("step multiplier {} must be positive", self.step_multiplier));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        if !(self.tau >= 0.0) {
            return bad(format!("tau {} must be non-negative", self.tau));
        }
        if self.light_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("light weights must be non-negative".into());
        }
        if let Some(m) = self.light_step_multiplier {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("light step multiplier {m} must be positive"));
            }
        }
        Ok(())
    }
}

/// Directions toward the three surrogate lights for a view whose
/// scene-to-viewer direction is `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidingLightFrame {
    pub front: Vec3,
    pub top: Vec3,
    pub bottom: Vec3,
}

impl GuidingLightFrame {
    pub fn new(omega: Vec3) -> Self {
        let front = omega.normalize();
        let top = front
            .cross(Vec3::Z)
            .try_normalize()
            .filter(|_| front.cross(Vec3::Z).length() > 1e-6)
            // view along the z-axis: use the x-axis for the side-light cross product
            .unwrap_or_else(|| front.cross(Vec3::X).normalize());
        Self { front, top, bottom: -top }
    }

    pub fn directions(&self) -> [Vec3; 3] {
        [self.front, self.top, self.bottom]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidingMap {
    pub width: usize,
    pub height: usize,
    pub radiance: ScalarMap,
    pub transparency: ScalarMap,
    /// World-unit distance from the march start to the first sample above
    /// `tau`; 0 when nothing was hit.
    pub depth: ScalarMap,
    /// Divides depth when the map is fed to the network (camera far distance).
    pub depth_scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GuidingMeta {
    width: usize,
    height: usize,
    depth_scale: f64,
}

impl GuidingMap {
    pub fn to_pfm(&self) -> Pfm {
        Pfm::from_planes(&[&self.radiance, &self.transparency, &self.depth]).expect("guiding planes share dims")
    }

    pub fn meta_path(path: &Path) -> std::path::PathBuf {
        path.with_extension("json")
    }

    /// Writes the 3-channel PFM and a `.json` sidecar holding the depth scale.
    pub fn write(&self, path: &Path) -> Result<(), GuidingError> {
        self.to_pfm().write(path)?;
        let meta = GuidingMeta { width: self.width, height: self.height, depth_scale: self.depth_scale };
        let mp = Self::meta_path(path);
        std::fs::write(&mp, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| GuidingError::Meta { path: mp.display().to_string(), message: e.to_string() })
    }

    pub fn read(path: &Path) -> Result<Self, GuidingError> {
        let pfm = Pfm::read(path)?;
        if pfm.channels != 3 {
            return Err(ImageError::Channels(pfm.channels).into());
        }
        let mp = Self::meta_path(path);
        let meta: GuidingMeta = std::fs::read_to_string(&mp)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str(&s).map_err(|e| e.to_string()))
            .map_err(|message| GuidingError::Meta { path: mp.display().to_string(), message })?;
        Ok(Self {
            width: pfm.width,
            height: pfm.height,
            radiance: pfm.plane(0),
            transparency: pfm.plane(1),
            depth: pfm.plane(2),
            depth_scale: meta.depth_scale,
        })
    }
}

/// Per-pixel march output, including the accumulated per-step opacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMarch {
    pub radiance: f64,
    pub transparency: f64,
    pub depth: f64,
    /// Sum of per-step opacities `A_n`; equals `1 - transparency`.
    pub absorbed: f64,
}

/// Transmittance from `p` to the grid boundary along `dir` by a coarse
/// march visiting `p + (δ + k·step)·dir`, `k >= 0`, with `δ = jitter·step`.
pub fn coarse_light_transmittance(
    grid: &DensityGrid,
    medium: &MediumParams,
    p: Vec3,
    dir: Vec3,
    step: f64,
    jitter: f64,
) -> f64 {
    assert!(step > 0.0, "light step must be positive");
    let ray = Ray::new(p, dir);
    let Some((t0, t1)) = grid.bounds().intersect(&ray, 0.0, f64::INFINITY) else {
        return 1.0;
    };
    let delta = jitter * step;
    let first = (((t0 - delta) / step).ceil()).max(0.0) as usize;
    let mut sum = 0.0;
    let mut k = first;
    loop {
        let t = delta + k as f64 * step;
        if t >= t1 {
            break;
        }
        sum += grid.sample(ray.at(t));
        k += 1;
    }
    (-sum * step * medium.sigma_t_scale()).exp()
}

pub struct GuidingMarcher<'a> {
    grid: &'a DensityGrid,
    medium: MediumParams,
    phase: PhaseFunction,
    camera: Camera,
    config: GuidingConfig,
    step: f64,
    light_step: f64,
    lights: [(Vec3, f64, f64); 3],
    rng: CounterRng,
}

impl<'a> GuidingMarcher<'a> {
    pub fn new(
        grid: &'a DensityGrid,
        medium: MediumParams,
        phase: PhaseFunction,
        camera: &Camera,
        config: &GuidingConfig,
    ) -> Result<Self, GuidingError> {
        config.validate()?;
        let w = grid.voxel_width();
        let step = config.step_multiplier * w;
        let light_step = config.light_step_multiplier.unwrap_or(config.step_multiplier) * w;
        let omega = camera.omega();
        let frame = GuidingLightFrame::new(omega);
        // light travels along -dir; scattered light heads along omega
        let lights = std::array::from_fn(|i| {
            let dir = frame.directions()[i];
            (dir, config.light_weights[i], phase.eval((-dir).dot(omega)))
        });
        Ok(Self {
            grid,
            medium,
            phase,
            camera: *camera,
            config: *config,
            step,
            light_step,
            lights,
            rng: CounterRng::new(config.jitter_seed),
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn phase(&self) -> PhaseFunction {
        self.phase
    }

    pub fn march_pixel(&self, px: usize, py: usize) -> PixelMarch {
        let mut stream = self.rng.at(Domain::GuidingJitter, (py * self.camera.width + px) as u64, 0);
        let delta = stream.next_f64() * self.step;
        let light_jitter = stream.next_f64();
        let ray = self.camera.pixel_ray(px, py);
        let start = self.camera.near + delta;
        let h = self.step;
        let n_total = self.config.max_steps;
        let mut out = PixelMarch { radiance: 0.0, transparency: 1.0, depth: 0.0, absorbed: 0.0 };
        let Some((ta, tb)) = self.grid.bounds().intersect(&ray, start, f64::INFINITY) else {
            return out;
        };
        // steps outside the box see zero density and change nothing
        let n_lo = (((ta - start) / h).floor() as usize).max(1);
        let n_hi = ((((tb - start) / h).ceil()) as usize + 1).min(n_total);
        let tau = self.config.tau;
        let mut t_prev = 1.0f64;
        for n in n_lo..=n_hi {
            let dist = delta + n as f64 * h;
            let x = ray.at(self.camera.near + dist);
            let density = self.grid.sample(x);
            if density <= 0.0 {
                continue;
            }
            if out.depth == 0.0 && density > tau {
                out.depth = dist;
            }
            let att = (-self.medium.sigma_s(density) * h).exp();
            let a_n = t_prev * (1.0 - att);
            let mut l_n = 0.0;
            for &(dir, weight, phase) in &self.lights {
                if weight > 0.0 {
                    let tl = coarse_light_transmittance(self.grid, &self.medium, x, dir, self.light_step, light_jitter);
                    l_n += weight * tl * phase;
                }
            }
            out.radiance += a_n * l_n;
            out.absorbed += a_n;
            t_prev *= att;
        }
        out.transparency = t_prev;
        out
    }

    pub fn run(&self) -> GuidingMap {
        let (w, h) = (self.camera.width, self.camera.height);
        let pixels: Vec<PixelMarch> = (0..h)
            .into_par_iter()
            .flat_map_iter(|py| (0..w).map(move |px| self.march_pixel(px, py)))
            .collect();
        let plane = |f: &dyn Fn(&PixelMarch) -> f64| ScalarMap {
            width: w,
            height: h,
            data: pixels.iter().map(|p| f(p) as f32).collect(),
        };
        GuidingMap {
            width: w,
            height: h,
            radiance: plane(&|p| p.radiance),
            transparency: plane(&|p| p.transparency),
            depth: plane(&|p| p.depth),
            depth_scale: self.camera.far,
        }
    }
}

pub fn generate_guiding(
    grid: &DensityGrid,
    medium: &MediumParams,
    phase: &PhaseFunction,
    camera: &Camera,
    config: &GuidingConfig,
) -> Result<GuidingMap, GuidingError> {
    Ok(GuidingMarcher::new(grid, *medium, *phase, camera, config)?.run())
}

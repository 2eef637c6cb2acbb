//! Scene content held by the server and the per-state render pipeline.

use crate::protocol::StageTimes;
use crate::state::SessionState;
use serde::{Deserialize, Serialize};
use sixway_core::baker::EmissiveLut;
use sixway_core::guiding::{generate_guiding, GuidingConfig};
use sixway_core::image::{RgbImage, ScalarMap};
use sixway_core::nn::Generator;
use sixway_core::runtime::{
    composite, shadow_visibility, Background, Occluder, ShadowContext, SixWayLightmaps, DEFAULT_DEPTH_BIAS,
    DEFAULT_SHADOW_RES,
};
use sixway_core::volume::{Camera, DensityGrid, MediumParams, PhaseFunction};
use sixway_core::Vec3;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct RenderError {
    pub stage: &'static str,
    pub message: String,
}

fn stage_err(stage: &'static str) -> impl Fn(String) -> RenderError {
    move |message| RenderError { stage, message }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSettings {
    pub medium: MediumParams,
    pub phase_g: f64,
    pub guiding: GuidingConfig,
    pub near: f64,
    pub far: f64,
    pub background: [f32; 3],
    pub lut: EmissiveLut,
    pub occluders: Vec<Occluder>,
    pub shadow_resolution: usize,
    pub shadow_bias: f64,
}

impl Default for SceneSettings {
    fn default() -> Self {
        Self {
            medium: MediumParams::default(),
            phase_g: 0.0,
            guiding: GuidingConfig::default(),
            near: 0.05,
            far: 10.0,
            background: [0.0; 3],
            lut: EmissiveLut::default(),
            occluders: Vec::new(),
            shadow_resolution: DEFAULT_SHADOW_RES,
            shadow_bias: DEFAULT_DEPTH_BIAS,
        }
    }
}

pub enum SceneMode {
    /// Density frames rendered through guiding map and network.
    Neural { frames: Vec<DensityGrid>, generator: Generator },
    /// Precomputed lightmaps per frame; camera and density controls have
    /// no effect.
    Baked { frames: Vec<SixWayLightmaps> },
}

pub struct Scene {
    pub mode: SceneMode,
    pub settings: SceneSettings,
}

pub struct RenderOutput {
    /// Display-referred (sRGB-encoded) image.
    pub image: RgbImage,
    pub stages: StageTimes,
    pub render_ms: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

impl Scene {
    pub fn frame_count(&self) -> usize {
        match &self.mode {
            SceneMode::Neural { frames, .. } => frames.len(),
            SceneMode::Baked { frames } => frames.len(),
        }
    }

    pub fn camera(&self, state: &SessionState) -> Result<Camera, RenderError> {
        let t = state.target;
        Camera::orbit(
            Vec3::new(t[0], t[1], t[2]),
            state.yaw,
            state.pitch,
            state.distance,
            (state.resolution, state.resolution),
            self.settings.near,
            self.settings.far,
        )
        .map_err(|e| stage_err("camera")(e.to_string()))
    }

    /// Guiding map, inference, shadows and composite for one state.
    pub fn render_once(&self, state: &SessionState) -> Result<RenderOutput, RenderError> {
        let start = Instant::now();
        let mut stages = StageTimes::default();
        let s = &self.settings;
        if state.frame >= self.frame_count() {
            return Err(stage_err("scene")(format!("frame {} of {}", state.frame, self.frame_count())));
        }
        let lights: Vec<_> = state.lights.iter().map(|l| l.to_light()).collect();
        let background = Background::Constant(s.background);

        let (maps, visibility) = match &self.mode {
            SceneMode::Baked { frames } => (frames[state.frame].clone(), None),
            SceneMode::Neural { frames, generator } => {
                let grid = &frames[state.frame];
                let camera = self.camera(state)?;
                let medium = s.medium.scaled(crate::state::clamp_density_scale(state.density_scale));
                let phase = PhaseFunction::new(s.phase_g).map_err(|e| stage_err("guiding")(e.to_string()))?;

                let t = Instant::now();
                let guiding = generate_guiding(grid, &medium, &phase, &camera, &s.guiding)
                    .map_err(|e| stage_err("guiding")(e.to_string()))?;
                stages.guiding_ms = ms(t);

                let t = Instant::now();
                let maps = generator.forward(&guiding).map_err(|e| stage_err("inference")(e.to_string()))?;
                stages.inference_ms = ms(t);

                let visibility = if s.occluders.is_empty() {
                    None
                } else {
                    let t = Instant::now();
                    let vis = lights
                        .iter()
                        .map(|l| {
                            let ctx = ShadowContext::new(l.direction, &grid.bounds(), &s.occluders, s.shadow_resolution, s.shadow_bias)
                                .map_err(|e| e.to_string())?;
                            shadow_visibility(&ctx, &guiding.depth, &camera).map_err(|e| e.to_string())
                        })
                        .collect::<Result<Vec<ScalarMap>, String>>()
                        .map_err(stage_err("shadow"))?;
                    stages.shadow_ms = ms(t);
                    Some(vis)
                };
                (maps, visibility)
            }
        };

        let t = Instant::now();
        let image = composite(&maps, &lights, &background, &s.lut, visibility.as_deref())
            .map_err(|e| stage_err("composite")(e.to_string()))?
            .to_srgb();
        stages.composite_ms = ms(t);
        Ok(RenderOutput { image, stages, render_ms: ms(start) })
    }
}

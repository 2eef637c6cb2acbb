use crate::protocol::ControlMessage;
use serde::{Deserialize, Serialize};
use sixway_core::runtime::{checked_unit, DirectionalLight};
use sixway_core::Vec3;

pub const PITCH_LIMIT_DEG: f64 = 89.0;
pub const DENSITY_SCALE_RANGE: (f64, f64) = (0.1, 4.0);
pub const DEFAULT_RESOLUTION: usize = 256;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StateError {
    #[error("camera distance must be positive and finite, got {0}")]
    Distance(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("light index {index} out of range ({count} lights)")]
    LightIndex { index: usize, count: usize },
    #[error("invalid light: {0}")]
    Light(String),
    #[error("frame {k} out of range ({count} frames)")]
    Frame { k: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightState {
    pub dir: [f64; 3],
    pub rgb: [f32; 3],
}

impl LightState {
    fn checked(dir: [f64; 3], rgb: [f32; 3]) -> Result<Self, StateError> {
        let d = Vec3::new(dir[0], dir[1], dir[2])
            .try_normalize()
            .ok_or_else(|| StateError::Light("direction must be non-zero".into()))?;
        DirectionalLight::new(d, rgb).map_err(|e| StateError::Light(e.to_string()))?;
        Ok(Self { dir: [d.x, d.y, d.z], rgb })
    }

    pub fn to_light(&self) -> DirectionalLight {
        let d = checked_unit(Vec3::new(self.dir[0], self.dir[1], self.dir[2])).expect("stored directions are unit");
        DirectionalLight { direction: d, radiance: self.rgb }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub frame: usize,
    pub yaw: f64,
    pub pitch: f64,
    pub distance: f64,
    pub target: [f64; 3],
    pub lights: Vec<LightState>,
    pub density_scale: f64,
    pub resolution: usize,
    pub playing: bool,
    /// Number of control messages applied so far.
    pub seq: u64,
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            frame: 0,
            yaw: 0.0,
            pitch: 15.0,
            distance: 2.5,
            target: [0.0; 3],
            lights: vec![LightState { dir: [0.0, 0.0, -1.0], rgb: [1.0; 3] }],
            density_scale: 1.0,
            resolution: DEFAULT_RESOLUTION,
            playing: false,
            seq: 0,
        }
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, StateError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(StateError::NonFinite(what))
    }
}

pub fn clamp_pitch(p: f64) -> f64 {
    p.clamp(-PITCH_LIMIT_DEG, PITCH_LIMIT_DEG)
}

pub fn clamp_density_scale(s: f64) -> f64 {
    s.clamp(DENSITY_SCALE_RANGE.0, DENSITY_SCALE_RANGE.1)
}

impl SessionState {
    /// Applies one control message; on error the state is unchanged.
    /// `frame_count` bounds `set_frame`.
    pub fn apply(&mut self, msg: &ControlMessage, frame_count: usize) -> Result<(), StateError> {
        match *msg {
            ControlMessage::SetCamera { yaw, pitch, dist } => {
                let yaw = finite(yaw, "yaw")?;
                let pitch = finite(pitch, "pitch")?;
                if !(dist > 0.0 && dist.is_finite()) {
                    return Err(StateError::Distance(dist));
                }
                self.yaw = yaw.rem_euclid(360.0);
                self.pitch = clamp_pitch(pitch);
                self.distance = dist;
            }
            ControlMessage::SetLight { index, dir, rgb } => {
                let count = self.lights.len();
                let slot = self.lights.get_mut(index).ok_or(StateError::LightIndex { index, count })?;
                *slot = LightState::checked(dir, rgb)?;
            }
            ControlMessage::AddLight { dir, rgb } => self.lights.push(LightState::checked(dir, rgb)?),
            ControlMessage::RemoveLight { index } => {
                if index >= self.lights.len() {
                    return Err(StateError::LightIndex { index, count: self.lights.len() });
                }
                self.lights.remove(index);
            }
            ControlMessage::SetFrame { k } => {
                if k >= frame_count {
                    return Err(StateError::Frame { k, count: frame_count });
                }
                self.frame = k;
            }
            ControlMessage::SetDensityScale { s } => {
                // NaN clamps to the lower bound rather than poisoning the scene
                self.density_scale = if s.is_nan() { DENSITY_SCALE_RANGE.0 } else { clamp_density_scale(s) };
            }
            ControlMessage::SetPlay { playing } => self.playing = playing,
        }
        self.seq += 1;
        Ok(())
    }

    /// Next frame index while playing, wrapping at the end.
    pub fn advance(&mut self, frame_count: usize) {
        if frame_count > 0 {
            self.frame = (self.frame + 1) % frame_count;
        }
    }
}

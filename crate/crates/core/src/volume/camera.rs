use crate::math::{Ray, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CameraError {
    #[error("view direction and up vector must be unit length and not parallel")]
    Basis,
    #[error("near ({near}) must be non-negative and less than far ({far})")]
    Clip { near: f64, far: f64 },
    #[error("invalid projection: {0}")]
    Projection(String),
    #[error("resolution must be at least 1x1")]
    Resolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Projection {
    Perspective { vertical_fov_deg: f64 },
    Orthographic { height: f64 },
}

/// Pinhole or orthographic camera. `view_dir` is the direction the camera
/// looks (into the scene); the medium-to-viewer direction used by the
/// guiding march is its negation, see [`Camera::omega`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub projection: Projection,
    pub position: Vec3,
    pub view_dir: Vec3,
    pub up: Vec3,
    pub near: f64,
    pub far: f64,
    pub width: usize,
    pub height: usize,
}

pub const DEFAULT_FOV_DEG: f64 = 45.0;

impl Camera {
    pub fn look_at(
        projection: Projection,
        position: Vec3,
        target: Vec3,
        up: Vec3,
        resolution: (usize, usize),
        near: f64,
        far: f64,
    ) -> Result<Self, CameraError> {
        let view_dir = (target - position).try_normalize().ok_or(CameraError::Basis)?;
        let up = up.try_normalize().ok_or(CameraError::Basis)?;
        let cam = Self { projection, position, view_dir, up, near, far, width: resolution.0, height: resolution.1 };
        cam.validate()?;
        Ok(cam)
    }

    /// Orbit around `target` in a z-up world: yaw about +z measured from -y,
    /// pitch as elevation. Perspective projection.
    pub fn orbit(
        target: Vec3,
        yaw_deg: f64,
        pitch_deg: f64,
        distance: f64,
        resolution: (usize, usize),
        near: f64,
        far: f64,
    ) -> Result<Self, CameraError> {
        let (yaw, pitch) = (yaw_deg.to_radians(), pitch_deg.to_radians());
        let offset = Vec3::new(yaw.sin() * pitch.cos(), -yaw.cos() * pitch.cos(), pitch.sin()) * distance;
        Self::look_at(
            Projection::Perspective { vertical_fov_deg: DEFAULT_FOV_DEG },
            target + offset,
            target,
            Vec3::Z,
            resolution,
            near,
            far,
        )
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let unit = |v: Vec3| (v.length() - 1.0).abs() < 1e-6;
        if !unit(self.view_dir) || !unit(self.up) || self.view_dir.cross(self.up).length() < 1e-6 {
            return Err(CameraError::Basis);
        }
        if !(self.near >= 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(CameraError::Clip { near: self.near, far: self.far });
        }
        match self.projection {
            Projection::Perspective { vertical_fov_deg: f } if !(f > 0.0 && f < 180.0) => {
                return Err(CameraError::Projection(format!("vertical fov {f}")));
            }
            Projection::Orthographic { height: h } if !(h > 0.0 && h.is_finite()) => {
                return Err(CameraError::Projection(format!("ortho height {h}")));
            }
            _ => {}
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::Resolution);
        }
        Ok(())
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    /// Unit vector from the scene toward the viewer.
    pub fn omega(&self) -> Vec3 {
        -self.view_dir
    }

    /// (right, up) unit vectors of the image plane.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let right = self.view_dir.cross(self.up).normalize();
        let up = right.cross(self.view_dir);
        (right, up)
    }

    /// Ray through image position `(px + jx, py + jy)`, where `(px, py)` is the
    /// pixel (row 0 at the top) and `(jx, jy)` the sub-pixel offset in `[0, 1)`.
    /// Marching starts at parameter `near`.
    pub fn ray(&self, px: usize, py: usize, jx: f64, jy: f64) -> Ray {
        let (right, up) = self.basis();
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((px as f64 + jx) / self.width as f64) * 2.0 - 1.0;
        let sy = 1.0 - ((py as f64 + jy) / self.height as f64) * 2.0;
        match self.projection {
            Projection::Perspective { vertical_fov_deg } => {
                let t = (vertical_fov_deg.to_radians() * 0.5).tan();
                let dir = (self.view_dir + right * (sx * t * aspect) + up * (sy * t)).normalize();
                Ray::new(self.position, dir)
            }
            Projection::Orthographic { height } => {
                let half = height * 0.5;
                let origin = self.position + right * (sx * half * aspect) + up * (sy * half);
                Ray::new(origin, self.view_dir)
            }
        }
    }

    pub fn pixel_ray(&self, px: usize, py: usize) -> Ray {
        self.ray(px, py, 0.5, 0.5)
    }

    /// World position at distance `depth` past the start of the pixel's march.
    pub fn depth_point(&self, px: usize, py: usize, depth: f64) -> Vec3 {
        self.pixel_ray(px, py).at(self.near + depth)
    }
}

/// Cameras on a horizontal ring around `target`, `step_deg` apart, starting
/// at `start_yaw_deg`. Replicates the dataset view protocol (9 views, 10 deg).
pub fn camera_ring(
    template: &Camera,
    target: Vec3,
    count: usize,
    start_yaw_deg: f64,
    step_deg: f64,
) -> Result<Vec<Camera>, CameraError> {
    let offset = template.position - target;
    let (c, s) = (offset.x, offset.y);
    (0..count)
        .map(|i| {
            let a = (start_yaw_deg + step_deg * i as f64).to_radians();
            let rotated = Vec3::new(c * a.cos() - s * a.sin(), c * a.sin() + s * a.cos(), offset.z);
            Camera::look_at(
                template.projection,
                target + rotated,
                target,
                template.up,
                (template.width, template.height),
                template.near,
                template.far,
            )
        })
        .collect()
}

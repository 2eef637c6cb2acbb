//! Deterministic procedural smoke sequences standing in for a fluid solver.
//!
//! Fields are defined in normalized coordinates `q`, where the grid center
//! is the origin and the shortest grid side spans `[-0.5, 0.5]`. Grids are
//! emitted in lattice units (voxel width 1) centered on the world origin.

use super::grid::{DensityGrid, GridError};
use crate::math::Vec3;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProceduralKind {
    SpherePuff,
    Plume,
    NoiseTurbulence,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProceduralError {
    #[error("unknown procedural kind {0:?} (expected sphere_puff, plume or noise_turbulence)")]
    UnknownKind(String),
    #[error("procedural grids need every dimension >= 8, got {0:?}")]
    TooSmall([usize; 3]),
}

impl FromStr for ProceduralKind {
    type Err = ProceduralError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere_puff" => Ok(Self::SpherePuff),
            "plume" => Ok(Self::Plume),
            "noise_turbulence" => Ok(Self::NoiseTurbulence),
            other => Err(ProceduralError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for ProceduralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SpherePuff => "sphere_puff",
            Self::Plume => "plume",
            Self::NoiseTurbulence => "noise_turbulence",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProceduralSource {
    pub kind: ProceduralKind,
    pub seed: u64,
    pub dims: [usize; 3],
}

/// Puff radius at frame 0, as a fraction of the shortest grid side.
pub const PUFF_RADIUS: f64 = 0.4;

impl ProceduralSource {
    pub fn new(kind: ProceduralKind, seed: u64, dims: [usize; 3]) -> Result<Self, ProceduralError> {
        if dims.iter().any(|&d| d < 8) {
            return Err(ProceduralError::TooSmall(dims));
        }
        Ok(Self { kind, seed, dims })
    }

    /// Field value at normalized position `q` and frame `t`, in `[0, 1]`.
    pub fn density_at(&self, q: Vec3, t: f64) -> f64 {
        let v = match self.kind {
            ProceduralKind::SpherePuff => {
                let radius = PUFF_RADIUS * (1.0 - 0.05 * (1.0 - (0.2 * t).cos()));
                let r = q.length() / radius;
                if r >= 1.0 {
                    0.0
                } else {
                    let s = 1.0 - r * r;
                    s * s
                }
            }
            ProceduralKind::Plume => self.plume(q, t),
            ProceduralKind::NoiseTurbulence => self.turbulence(q, t),
        };
        v.clamp(0.0, 1.0)
    }

    fn plume(&self, q: Vec3, t: f64) -> f64 {
        let phase = hash3(self.seed, 17, 0, 0) * std::f64::consts::TAU;
        let height = q.z + 0.5;
        let sway = 0.04 * (3.0 * height + phase - 0.05 * t).sin();
        let radius = 0.07 + 0.16 * height.max(0.0);
        let rho = ((q.x - sway).powi(2) + q.y.powi(2)).sqrt() / radius;
        if rho >= 1.0 {
            return 0.0;
        }
        let profile = (1.0 - rho * rho).powi(2);
        // rising front, 0.01 per frame over a 0.2-wide band
        let front = 0.35 + 0.01 * t;
        let cap = 1.0 - smoothstep(front - 0.1, front + 0.1, height);
        let p = Vec3::new(q.x * 5.0, q.y * 5.0, q.z * 5.0 - 0.04 * t);
        let detail = 0.55 + 0.45 * fbm(self.seed, p, 2);
        profile * cap * detail * (1.0 - 0.3 * height)
    }

    fn turbulence(&self, q: Vec3, t: f64) -> f64 {
        let r = q.length() / 0.45;
        if r >= 1.0 {
            return 0.0;
        }
        let mask = (1.0 - r * r).powi(2);
        let drift = Vec3::new(0.02 * t, -0.015 * t, 0.01 * t);
        let n = fbm(self.seed, q * 4.0 + drift, 3);
        mask * smoothstep(0.3, 0.7, n)
    }

    pub fn frame(&self, t: usize) -> Result<DensityGrid, GridError> {
        let [nx, ny, nz] = self.dims;
        let m = nx.min(ny).min(nz) as f64;
        let mut values = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let q = Vec3::new(
                        (i as f64 + 0.5 - nx as f64 * 0.5) / m,
                        (j as f64 + 0.5 - ny as f64 * 0.5) / m,
                        (k as f64 + 0.5 - nz as f64 * 0.5) / m,
                    );
                    values.push(self.density_at(q, t as f64) as f32);
                }
            }
        }
        DensityGrid::centered(self.dims, 1.0, Vec3::ZERO, values)
    }

    pub fn frames(&self, count: usize) -> Result<Vec<DensityGrid>, GridError> {
        (0..count).map(|t| self.frame(t)).collect()
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Lattice hash in `[0, 1)`.
fn hash3(seed: u64, x: i64, y: i64, z: i64) -> f64 {
    let mut h = seed
        ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (z as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, p: Vec3) -> f64 {
    let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
    let (ix, iy, iz) = (fx as i64, fy as i64, fz as i64);
    let fade = |t: f64| t * t * (3.0 - 2.0 * t);
    let (u, v, w) = (fade(p.x - fx), fade(p.y - fy), fade(p.z - fz));
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c = |dx, dy, dz| hash3(seed, ix + dx, iy + dy, iz + dz);
    lerp(
        lerp(lerp(c(0, 0, 0), c(1, 0, 0), u), lerp(c(0, 1, 0), c(1, 1, 0), u), v),
        lerp(lerp(c(0, 0, 1), c(1, 0, 1), u), lerp(c(0, 1, 1), c(1, 1, 1), u), v),
        w,
    )
}

/// Fractal value noise normalized to `[0, 1]`.
fn fbm(seed: u64, p: Vec3, octaves: u32) -> f64 {
    let (mut sum, mut amp, mut norm, mut freq) = (0.0, 1.0, 0.0, 1.0);
    for o in 0..octaves {
        sum += amp * value_noise(seed.wrapping_add(o as u64 * 0x51ED), p * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

use crate::math::{Aabb, Vec3};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

pub const DGRID_MAGIC: &[u8; 4] = b"DGRD";
pub const DGRID_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 4 + 12;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad magic: expected \"DGRD\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported grid version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite density at voxel {0}")]
    NonFinite(usize),
    #[error("negative density {value} at voxel {index}")]
    Negative { index: usize, value: f32 },
    #[error("invalid grid shape: {0}")]
    Shape(String),
}

/// Voxelized scattering density, x-fastest layout. Voxel `(i, j, k)` covers
/// `origin + [i, i+1) * voxel_width` on each axis; its value sits at the
/// voxel center.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    dims: [usize; 3],
    voxel_width: f32,
    origin: [f32; 3],
    values: Vec<f32>,
}

impl DensityGrid {
    pub fn new(
        dims: [usize; 3],
        voxel_width: f32,
        origin: [f32; 3],
        values: Vec<f32>,
    ) -> Result<Self, GridError> {
        if dims.contains(&0) {
            return Err(GridError::Shape(format!("zero dimension in {dims:?}")));
        }
        if !(voxel_width > 0.0) || !voxel_width.is_finite() {
            return Err(GridError::Shape(format!("voxel width {voxel_width} must be positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(GridError::Shape("origin must be finite".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(GridError::Shape(format!("{} values for dims {dims:?}", values.len())));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(GridError::NonFinite(index));
            }
            if value < 0.0 {
                return Err(GridError::Negative { index, value });
            }
        }
        Ok(Self { dims, voxel_width, origin, values })
    }

    /// Grid whose bounding box is centered on `center`.
    pub fn centered(
        dims: [usize; 3],
        voxel_width: f32,
        center: Vec3,
        values: Vec<f32>,
    ) -> Result<Self, GridError> {
        let half = |i: usize| (center[i] - dims[i] as f64 * voxel_width as f64 * 0.5) as f32;
        Self::new(dims, voxel_width, [half(0), half(1), half(2)], values)
    }

    pub fn constant(dims: [usize; 3], voxel_width: f32, origin: [f32; 3], value: f32) -> Result<Self, GridError> {
        Self::new(dims, voxel_width, origin, vec![value; dims[0] * dims[1] * dims[2]])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_width(&self) -> f64 {
        self.voxel_width as f64
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::new(self.origin[0] as f64, self.origin[1] as f64, self.origin[2] as f64)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn max_value(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn voxel(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let w = self.voxel_width();
        self.origin() + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * w
    }

    pub fn bounds(&self) -> Aabb {
        let o = self.origin();
        let w = self.voxel_width();
        let ext = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * w;
        Aabb::new(o, o + ext)
    }

    /// Same placement, values multiplied by `s` (clamped at zero).
    pub fn scaled(&self, s: f32) -> DensityGrid {
        DensityGrid {
            values: self.values.iter().map(|v| (v * s).max(0.0)).collect(),
            ..self.clone()
        }
    }

    /// Trilinear reconstruction from the voxel centers. Points in the outer
    /// half-voxel shell use the edge voxels; points outside the bounding box
    /// are vacuum.
    #[inline]
    pub fn sample(&self, p: Vec3) -> f64 {
        let w = self.voxel_width as f64;
        let lx = (p.x - self.origin[0] as f64) / w;
        let ly = (p.y - self.origin[1] as f64) / w;
        let lz = (p.z - self.origin[2] as f64) / w;
        let [nx, ny, nz] = self.dims;
        if !(lx >= 0.0 && ly >= 0.0 && lz >= 0.0 && lx < nx as f64 && ly < ny as f64 && lz < nz as f64) {
            return 0.0;
        }
        let (x0, x1, fx) = axis_cell(lx - 0.5, nx);
        let (y0, y1, fy) = axis_cell(ly - 0.5, ny);
        let (z0, z1, fz) = axis_cell(lz - 0.5, nz);
        let v = |i, j, k| self.values[i + nx * (j + ny * k)] as f64;
        let c00 = lerp(v(x0, y0, z0), v(x1, y0, z0), fx);
        let c10 = lerp(v(x0, y1, z0), v(x1, y1, z0), fx);
        let c01 = lerp(v(x0, y0, z1), v(x1, y0, z1), fx);
        let c11 = lerp(v(x0, y1, z1), v(x1, y1, z1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(DGRID_MAGIC);
        out.extend_from_slice(&DGRID_VERSION.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.voxel_width.to_le_bytes());
        for o in self.origin {
            out.extend_from_slice(&o.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, GridError> {
        if bytes.len() < 4 {
            return Err(GridError::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != DGRID_MAGIC {
            return Err(GridError::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(GridError::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != DGRID_VERSION {
            return Err(GridError::UnsupportedVersion(version));
        }
        let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
        let voxel_width = f32_at(20);
        let origin = [f32_at(24), f32_at(28), f32_at(32)];
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| GridError::Shape(format!("dims {dims:?} overflow")))?;
        let expected = n * 4;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < expected {
            return Err(GridError::Truncated { expected, found: payload.len() });
        }
        let values = payload[..expected]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, voxel_width, origin, values)
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Continuous voxel-center coordinate -> (lower index, upper index, fraction),
/// clamped to the edge voxels.
#[inline]
fn axis_cell(c: f64, n: usize) -> (usize, usize, f64) {
    if c <= 0.0 {
        (0, 0, 0.0)
    } else if c >= (n - 1) as f64 {
        (n - 1, n - 1, 0.0)
    } else {
        let i = c.floor();
        let i0 = i as usize;
        (i0, i0 + 1, c - i)
    }
}

pub fn save_grid(grid: &DensityGrid, path: &Path) -> Result<(), GridError> {
    let io = |source| GridError::Io { path: path.display().to_string(), source };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&grid.encode()).map_err(io)
}

pub fn load_grid(path: &Path) -> Result<DensityGrid, GridError> {
    let bytes = fs::read(path).map_err(|source| GridError::Io { path: path.display().to_string(), source })?;
    DensityGrid::decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_grid(seed: u64, dims: [usize; 3]) -> DensityGrid {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let values = (0..dims.iter().product::<usize>())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 40) as f32 / (1u64 << 24) as f32
            })
            .collect();
        DensityGrid::new(dims, 0.25, [-1.0, -0.5, 0.25], values).unwrap()
    }

    #[test]
    fn outside_is_vacuum() {
        let g = DensityGrid::constant([4, 4, 4], 1.0, [0.0; 3], 0.5).unwrap();
        assert_eq!(g.sample(Vec3::new(-0.01, 1.0, 1.0)), 0.0);
        assert_eq!(g.sample(Vec3::new(1.0, 4.0, 1.0)), 0.0);
        assert_eq!(g.sample(Vec3::new(100.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn constant_grid_interior() {
        let g = DensityGrid::constant([3, 5, 2], 0.5, [0.0; 3], 0.5).unwrap();
        for p in [Vec3::new(0.01, 0.01, 0.01), Vec3::new(0.7, 1.3, 0.9), Vec3::new(1.49, 2.49, 0.99)] {
            assert_eq!(g.sample(p), 0.5);
        }
    }

    #[test]
    fn midpoint_between_two_voxels() {
        let g = DensityGrid::new([2, 1, 1], 1.0, [0.0; 3], vec![0.0, 1.0]).unwrap();
        assert!((g.sample(Vec3::new(1.0, 0.5, 0.5)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn voxel_centers_are_exact() {
        let g = random_grid(3, [5, 4, 3]);
        for k in 0..3 {
            for j in 0..4 {
                for i in 0..5 {
                    assert_eq!(g.sample(g.voxel_center(i, j, k)), g.voxel(i, j, k) as f64);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            DensityGrid::new([1, 1, 2], 1.0, [0.0; 3], vec![0.0, f32::NAN]),
            Err(GridError::NonFinite(1))
        ));
        assert!(matches!(
            DensityGrid::new([1, 1, 1], 1.0, [0.0; 3], vec![-1.0]),
            Err(GridError::Negative { .. })
        ));
        assert!(DensityGrid::new([0, 1, 1], 1.0, [0.0; 3], vec![]).is_err());
        assert!(DensityGrid::new([1, 1, 1], 0.0, [0.0; 3], vec![1.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.dgrid");
        let g = random_grid(11, [8, 8, 8]);
        save_grid(&g, &path).unwrap();
        let back = load_grid(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.encode(), g.encode());
    }

    #[test]
    fn decode_errors_are_distinct() {
        let g = random_grid(5, [2, 2, 2]);
        let mut bytes = g.encode();
        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(DensityGrid::decode(short), Err(GridError::Truncated { .. })));
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(DensityGrid::decode(&wrong), Err(GridError::BadMagic(_))));
        let last = bytes.len() - 4;
        bytes[last..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(DensityGrid::decode(&bytes), Err(GridError::NonFinite(7))));
    }

    proptest! {
        #[test]
        fn encode_decode_identity(seed in any::<u64>(), nx in 1usize..6, ny in 1usize..6, nz in 1usize..6) {
            let g = random_grid(seed, [nx, ny, nz]);
            prop_assert_eq!(DensityGrid::decode(&g.encode()).unwrap(), g);
        }

        #[test]
        fn trilinear_is_lipschitz(seed in any::<u64>(), px in 0.0f64..1.0, py in 0.0f64..1.0, pz in 0.0f64..1.0,
                                  dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
            let g = random_grid(seed, [4, 4, 4]);
            let b = g.bounds();
            let ext = b.max - b.min;
            let p = b.min + Vec3::new(px * ext.x, py * ext.y, pz * ext.z) * 0.999;
            let eps = 1e-4;
            let q = p + Vec3::new(dx, dy, dz) * eps;
            prop_assume!(b.contains(q));
            // per-axis slope is at most (max - min) / voxel_width
            let bound = g.max_value() as f64 / g.voxel_width() * (dx.abs() + dy.abs() + dz.abs()) * eps;
            prop_assert!((g.sample(p) - g.sample(q)).abs() <= bound + 1e-12);
        }
    }
}

use crate::math::{Ray, Vec3};
use crate::volume::{DensityGrid, MediumParams};

/// Optical depth `∫ sigma_t ds` over the ray parameter interval `[t0, t1]`,
/// split into `ceil((t1 - t0) / step)` equal sub-intervals, each sampled at
/// fraction `offset` in `[0, 1)` of its length (0.5 is the midpoint rule).
/// The caller clips the interval to the grid.
pub fn march_optical_depth(
    grid: &DensityGrid,
    medium: &MediumParams,
    ray: &Ray,
    t0: f64,
    t1: f64,
    step: f64,
    offset: f64,
) -> f64 {
    let len = t1 - t0;
    if !(len > 0.0) {
        return 0.0;
    }
    let n = ((len / step) - 1e-9).ceil().max(1.0) as usize;
    let ds = len / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        sum += grid.sample(ray.at(t0 + (k as f64 + offset) * ds));
    }
    sum * ds * medium.sigma_t_scale()
}

/// Transmittance `exp(-∫ sigma_t ds)` along the segment `a -> b` by
/// fixed-step midpoint quadrature over the part of the segment inside the
/// grid. Exactly 1 when the segment misses the grid.
pub fn transmittance(grid: &DensityGrid, medium: &MediumParams, a: Vec3, b: Vec3, step: f64) -> f64 {
    assert!(step > 0.0, "transmittance step must be positive");
    let len = (b - a).length();
    if len == 0.0 {
        return 1.0;
    }
    let ray = Ray::new(a, (b - a) / len);
    match grid.bounds().intersect(&ray, 0.0, len) {
        Some((t0, t1)) => (-march_optical_depth(grid, medium, &ray, t0, t1, step, 0.5)).exp(),
        None => 1.0,
    }
}

/// Exact optical depth from a point to the grid boundary along an axis.
///
/// Along any axis-aligned line the trilinear field is a bilinear blend of
/// four voxel columns, each piecewise linear in the axis coordinate, so the
/// line integral is the same blend of per-column integrals. Those come from
/// cumulative sums precomputed per axis.
#[derive(Debug, Clone)]
pub struct AxisDepthTables {
    /// `cumulative[a][idx]`: integral of the column through `idx` along axis
    /// `a` from the grid's min face up to that voxel's center (density units
    /// times length).
    cumulative: [Vec<f64>; 3],
    dims: [usize; 3],
    strides: [usize; 3],
    origin: Vec3,
    width: f64,
}

impl AxisDepthTables {
    pub fn new(grid: &DensityGrid) -> Self {
        let dims = grid.dims();
        let strides = [1, dims[0], dims[0] * dims[1]];
        let width = grid.voxel_width();
        let values = grid.values();
        let cumulative = std::array::from_fn(|a| {
            let mut c = vec![0.0f64; values.len()];
            let (b1, b2) = other_axes(a);
            for j in 0..dims[b1] {
                for k in 0..dims[b2] {
                    let base = j * strides[b1] + k * strides[b2];
                    let mut acc = 0.5 * width * values[base] as f64;
                    c[base] = acc;
                    for i in 1..dims[a] {
                        let prev = values[base + (i - 1) * strides[a]] as f64;
                        let cur = values[base + i * strides[a]] as f64;
                        acc += 0.5 * width * (prev + cur);
                        c[base + i * strides[a]] = acc;
                    }
                }
            }
            c
        });
        Self { cumulative, dims, strides, origin: grid.origin(), width }
    }

    /// Integral of the column `base` along `axis` from the min face to local
    /// coordinate `x` (in voxel units from the min face).
    #[inline]
    fn column_integral(&self, values: &[f32], axis: usize, base: usize, x: f64) -> f64 {
        let n = self.dims[axis];
        let s = self.strides[axis];
        let c = &self.cumulative[axis];
        let w = self.width;
        let l = x - 0.5;
        if l <= 0.0 {
            x * w * values[base] as f64
        } else if l >= (n - 1) as f64 {
            let last = base + (n - 1) * s;
            c[last] + (l - (n - 1) as f64) * w * values[last] as f64
        } else {
            let i = l.floor() as usize;
            let f = l - i as f64;
            let v0 = values[base + i * s] as f64;
            let v1 = values[base + (i + 1) * s] as f64;
            c[base + i * s] + w * (f * v0 + 0.5 * f * f * (v1 - v0))
        }
    }

    fn column_total(&self, values: &[f32], axis: usize, base: usize) -> f64 {
        let n = self.dims[axis];
        let last = base + (n - 1) * self.strides[axis];
        self.cumulative[axis][last] + 0.5 * self.width * values[last] as f64
    }

    /// Density integral from `p` to the boundary, walking along
    /// `+axis` if `positive`, else `-axis`. `p` must be inside the grid.
    pub fn depth_to_boundary(&self, grid: &DensityGrid, p: Vec3, axis: usize, positive: bool) -> f64 {
        let values = grid.values();
        let (b1, b2) = other_axes(axis);
        let local = |a: usize| ((p[a] - self.origin[a]) / self.width).clamp(0.0, self.dims[a] as f64);
        let x = local(axis);
        let (j0, j1, fj) = cell(local(b1) - 0.5, self.dims[b1]);
        let (k0, k1, fk) = cell(local(b2) - 0.5, self.dims[b2]);
        let s1 = self.strides[b1];
        let s2 = self.strides[b2];
        let column = |j: usize, k: usize| {
            let base = j * s1 + k * s2;
            let before = self.column_integral(values, axis, base, x);
            if positive {
                self.column_total(values, axis, base) - before
            } else {
                before
            }
        };
        let c00 = column(j0, k0);
        let c10 = if fj > 0.0 { column(j1, k0) } else { c00 };
        let c01 = if fk > 0.0 { column(j0, k1) } else { c00 };
        let c11 = if fj > 0.0 && fk > 0.0 { column(j1, k1) } else if fj > 0.0 { c10 } else { c01 };
        let a = c00 + (c10 - c00) * fj;
        let b = c01 + (c11 - c01) * fj;
        (a + (b - a) * fk).max(0.0)
    }
}

#[inline]
fn other_axes(a: usize) -> (usize, usize) {
    match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

#[inline]
fn cell(c: f64, n: usize) -> (usize, usize, f64) {
    if c <= 0.0 {
        (0, 0, 0.0)
    } else if c >= (n - 1) as f64 {
        (n - 1, n - 1, 0.0)
    } else {
        let i = c.floor();
        (i as usize, i as usize + 1, c - i)
    }
}

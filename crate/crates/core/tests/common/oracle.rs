//! Brute-force single-scattering estimator written without the crate's
//! renderer: own trilinear lookup, own ray setup, uniform distance sampling
//! along the ray and ratio tracking for both transmittances.

#![allow(dead_code)]

use rand::Rng;

pub type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub struct Field {
    pub dims: [usize; 3],
    pub width: f64,
    pub origin: V3,
    pub values: Vec<f32>,
}

impl Field {
    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0f32, |a, &b| a.max(b)) as f64
    }

    pub fn lookup(&self, p: V3) -> f64 {
        let mut idx = [[0usize; 2]; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let l = (p[a] - self.origin[a]) / self.width;
            if l < 0.0 || l >= self.dims[a] as f64 {
                return 0.0;
            }
            let c = (l - 0.5).clamp(0.0, (self.dims[a] - 1) as f64);
            let i0 = c.floor() as usize;
            let i1 = (i0 + 1).min(self.dims[a] - 1);
            idx[a] = [i0, i1];
            frac[a] = c - i0 as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut wgt = 1.0;
            let mut flat = 0;
            let mut stride = 1;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                wgt *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat += idx[a][bit] * stride;
                stride *= self.dims[a];
            }
            acc += wgt * self.values[flat] as f64;
        }
        acc
    }

    /// Parametric range of the ray inside the box.
    pub fn clip(&self, o: V3, d: V3) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            let lo = self.origin[a];
            let hi = lo + self.dims[a] as f64 * self.width;
            if d[a].abs() < 1e-300 {
                if o[a] < lo || o[a] > hi {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo - o[a]) / d[a], (hi - o[a]) / d[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// Orthographic view given by plain vectors.
pub struct OrthoView {
    pub center: V3,
    pub dir: V3,
    pub right: V3,
    pub up: V3,
    pub half_w: f64,
    pub half_h: f64,
    pub width: usize,
    pub height: usize,
}

impl OrthoView {
    pub fn origin(&self, x: f64, y: f64) -> V3 {
        let sx = x / self.width as f64 * 2.0 - 1.0;
        let sy = 1.0 - y / self.height as f64 * 2.0;
        add(add(self.center, scale(self.right, sx * self.half_w)), scale(self.up, sy * self.half_h))
    }
}

pub fn hg(g: f64, cos: f64) -> f64 {
    (1.0 - g * g) / (4.0 * std::f64::consts::PI * (1.0 + g * g - 2.0 * g * cos).powf(1.5))
}

/// Ratio-tracking transmittance over `[0, dist]` from `o` along `d`.
fn ratio_tracking(f: &Field, sigma_t: f64, o: V3, d: V3, dist: f64, rng: &mut impl Rng) -> f64 {
    let mu = sigma_t * f.max();
    if mu <= 0.0 {
        return 1.0;
    }
    let mut t = 1.0;
    let mut s = 0.0;
    loop {
        let xi: f64 = rng.random();
        s += -(1.0 - xi).ln() / mu;
        if s >= dist {
            return t;
        }
        t *= 1.0 - sigma_t * f.lookup(add(o, scale(d, s))) / mu;
    }
}

pub struct Medium {
    pub sigma_s: f64,
    pub sigma_a: f64,
    pub g: f64,
}

/// Mean and standard error of the pixel's single-scattering radiance for
/// a unit light travelling along `travel`.
#[allow(clippy::too_many_arguments)]
pub fn pixel_estimate(
    f: &Field,
    m: &Medium,
    view: &OrthoView,
    px: usize,
    py: usize,
    travel: V3,
    samples: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let st = m.sigma_s + m.sigma_a;
    let back = scale(view.dir, -1.0);
    let toward_light = scale(travel, -1.0);
    let phase = hg(m.g, dot(travel, back));
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let o = view.origin(px as f64 + rng.random::<f64>(), py as f64 + rng.random::<f64>());
        let mut v = 0.0;
        if let Some((t0, t1)) = f.clip(o, view.dir) {
            let t = t0 + rng.random::<f64>() * (t1 - t0);
            let p = add(o, scale(view.dir, t));
            let density = f.lookup(p);
            if density > 0.0 {
                let tv = ratio_tracking(f, st, p, back, t - t0, rng);
                let exit = f.clip(p, toward_light).map_or(0.0, |(_, e)| e);
                let tl = ratio_tracking(f, st, p, toward_light, exit, rng);
                v = (t1 - t0) * tv * m.sigma_s * density * phase * tl;
            }
        }
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

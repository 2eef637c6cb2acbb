use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MediumError {
    #[error("medium coefficient scales must be finite and non-negative (sigma_s {0}, sigma_a {1})")]
    Scales(f64, f64),
    #[error("Henyey-Greenstein g = {0} outside (-1, 1)")]
    Anisotropy(f64),
}

/// Global coefficient scales applied to the stored density.
/// `sigma_t = (sigma_s_scale + sigma_a_scale) * density`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    pub sigma_s_scale: f64,
    pub sigma_a_scale: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self { sigma_s_scale: 1.0, sigma_a_scale: 0.0 }
    }
}

impl MediumParams {
    pub fn new(sigma_s_scale: f64, sigma_a_scale: f64) -> Result<Self, MediumError> {
        let m = Self { sigma_s_scale, sigma_a_scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.sigma_s_scale) && ok(self.sigma_a_scale) {
            Ok(())
        } else {
            Err(MediumError::Scales(self.sigma_s_scale, self.sigma_a_scale))
        }
    }

    #[inline]
    pub fn sigma_t_scale(&self) -> f64 {
        self.sigma_s_scale + self.sigma_a_scale
    }

    #[inline]
    pub fn sigma_s(&self, density: f64) -> f64 {
        self.sigma_s_scale * density
    }

    #[inline]
    pub fn sigma_a(&self, density: f64) -> f64 {
        self.sigma_a_scale * density
    }

    #[inline]
    pub fn sigma_t(&self, density: f64) -> f64 {
        self.sigma_t_scale() * density
    }

    /// Both scales multiplied by `s`; used for interactive density scaling.
    pub fn scaled(&self, s: f64) -> MediumParams {
        Self { sigma_s_scale: self.sigma_s_scale * s, sigma_a_scale: self.sigma_a_scale * s }
    }
}

/// Henyey-Greenstein phase function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFunction {
    pub g: f64,
}

impl Default for PhaseFunction {
    fn default() -> Self {
        Self { g: 0.0 }
    }
}

impl PhaseFunction {
    pub fn new(g: f64) -> Result<Self, MediumError> {
        if g.is_finite() && g > -1.0 && g < 1.0 {
            Ok(Self { g })
        } else {
            Err(MediumError::Anisotropy(g))
        }
    }

    pub fn isotropic() -> Self {
        Self { g: 0.0 }
    }

    /// Density per steradian for the cosine between the light's travel
    /// direction and the scattered direction.
    #[inline]
    pub fn eval(&self, cos_theta: f64) -> f64 {
        hg_phase(self.g, cos_theta)
    }
}

#[inline]
pub fn hg_phase(g: f64, cos_theta: f64) -> f64 {
    let c = cos_theta.clamp(-1.0, 1.0);
    let g2 = g * g;
    let denom = 1.0 + g2 - 2.0 * g * c;
    (1.0 - g2) / (4.0 * PI * denom * denom.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Product Gauss-free midpoint quadrature over (cos_theta, phi); the phase
    /// function has no phi dependence so the phi integral is 2*pi.
    fn sphere_integral(g: f64, n: usize) -> f64 {
        let du = 2.0 / n as f64;
        (0..n).map(|i| hg_phase(g, -1.0 + (i as f64 + 0.5) * du) * du).sum::<f64>() * 2.0 * PI
    }

    #[test]
    fn isotropic_value() {
        for c in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert!((hg_phase(0.0, c) - 0.0795775).abs() < 1e-7);
        }
    }

    #[test]
    fn forward_peak_g_half() {
        assert!((hg_phase(0.5, 1.0) - 0.477465).abs() < 1e-6);
    }

    #[test]
    fn normalized_over_sphere() {
        for g in [-0.8, -0.5, -0.3, 0.0, 0.3, 0.5, 0.8] {
            let s = sphere_integral(g, 20_000);
            assert!((s - 1.0).abs() < 1e-3, "g={g}: {s}");
        }
    }

    #[test]
    fn validation() {
        assert!(PhaseFunction::new(1.0).is_err());
        assert!(PhaseFunction::new(-0.99).is_ok());
        assert!(MediumParams::new(-1.0, 0.0).is_err());
        let m = MediumParams::new(2.0, 0.5).unwrap();
        assert_eq!(m.sigma_t(2.0), m.sigma_s(2.0) + m.sigma_a(2.0));
    }
}

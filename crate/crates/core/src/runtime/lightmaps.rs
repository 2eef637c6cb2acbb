use crate::image::{linear_to_srgb, srgb_to_linear, ImageError, Pfm, ScalarMap};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Channel order used everywhere: in memory, in the network output and in
/// the plane-stacked PFM files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    XPos = 0,
    XNeg = 1,
    YPos = 2,
    YNeg = 3,
    ZPos = 4,
    ZNeg = 5,
    Transparency = 6,
    Emissive = 7,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::XPos,
        Channel::XNeg,
        Channel::YPos,
        Channel::YNeg,
        Channel::ZPos,
        Channel::ZNeg,
        Channel::Transparency,
        Channel::Emissive,
    ];

    pub const SCATTERING: [Channel; 6] =
        [Channel::XPos, Channel::XNeg, Channel::YPos, Channel::YNeg, Channel::ZPos, Channel::ZNeg];

    /// Scattering channel lit by a light travelling along `sign * axis`.
    pub fn for_axis(axis: usize, positive: bool) -> Channel {
        Channel::SCATTERING[axis * 2 + usize::from(!positive)]
    }

    pub fn name(self) -> &'static str {
        ["x+", "x-", "y+", "y-", "z+", "z-", "transparency", "emissive"][self as usize]
    }
}

/// Encoding of the six scattering channels. Transparency and emissive are
/// always stored linearly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpace {
    Srgb,
    Linear,
}

#[derive(Debug, thiserror::Error)]
pub enum LightmapError {
    #[error("channel {channel} has an invalid value {value} at pixel {index}")]
    Value { channel: &'static str, index: usize, value: f32 },
    #[error("channel planes differ in size")]
    Dims,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("lightmap PFM must be a single-channel stack of 8 planes, got {channels} channels and height {height}")]
    Layout { channels: usize, height: usize },
}

/// Six directional scattering maps plus transparency and emissive.
/// `L_x+` holds the scattering for a light travelling along +x.
#[derive(Debug, Clone, PartialEq)]
pub struct SixWayLightmaps {
    pub width: usize,
    pub height: usize,
    pub planes: [ScalarMap; 8],
    pub color_space: ColorSpace,
}

impl SixWayLightmaps {
    pub fn new(width: usize, height: usize, color_space: ColorSpace) -> Self {
        let mut maps = Self {
            width,
            height,
            planes: std::array::from_fn(|_| ScalarMap::new(width, height)),
            color_space,
        };
        maps.planes[Channel::Transparency as usize].data.fill(1.0);
        maps
    }

    pub fn from_planes(planes: [ScalarMap; 8], color_space: ColorSpace) -> Result<Self, LightmapError> {
        let (w, h) = (planes[0].width, planes[0].height);
        if planes.iter().any(|p| !p.same_dims(w, h)) {
            return Err(LightmapError::Dims);
        }
        let maps = Self { width: w, height: h, planes, color_space };
        maps.validate()?;
        Ok(maps)
    }

    #[inline]
    pub fn plane(&self, c: Channel) -> &ScalarMap {
        &self.planes[c as usize]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: Channel) -> &mut ScalarMap {
        &mut self.planes[c as usize]
    }

    pub fn validate(&self) -> Result<(), LightmapError> {
        for c in Channel::ALL {
            let upper = match c {
                Channel::Transparency | Channel::Emissive => 1.0,
                _ if self.color_space == ColorSpace::Srgb => 1.0,
                _ => f32::INFINITY,
            };
            for (index, &value) in self.plane(c).data.iter().enumerate() {
                if !value.is_finite() || !(0.0..=upper).contains(&value) {
                    return Err(LightmapError::Value { channel: c.name(), index, value });
                }
            }
        }
        Ok(())
    }

    fn convert_scattering(&self, space: ColorSpace, f: impl Fn(f32) -> f32) -> SixWayLightmaps {
        let mut out = self.clone();
        out.color_space = space;
        for c in Channel::SCATTERING {
            for v in &mut out.planes[c as usize].data {
                *v = f(*v);
            }
        }
        out
    }

    pub fn to_linear(&self) -> SixWayLightmaps {
        match self.color_space {
            ColorSpace::Linear => self.clone(),
            ColorSpace::Srgb => self.convert_scattering(ColorSpace::Linear, srgb_to_linear),
        }
    }

    /// Scattering values above 1 are clipped by the encoding.
    pub fn to_srgb(&self) -> SixWayLightmaps {
        match self.color_space {
            ColorSpace::Srgb => self.clone(),
            ColorSpace::Linear => {
                self.convert_scattering(ColorSpace::Srgb, |v| linear_to_srgb(v.clamp(0.0, 1.0)))
            }
        }
    }

    /// Single-channel PFM with the 8 planes stacked vertically in channel order.
    pub fn to_pfm(&self) -> Pfm {
        let mut data = Vec::with_capacity(self.width * self.height * 8);
        for p in &self.planes {
            data.extend_from_slice(&p.data);
        }
        Pfm { width: self.width, height: self.height * 8, channels: 1, data }
    }

    pub fn from_pfm(pfm: &Pfm, color_space: ColorSpace) -> Result<Self, LightmapError> {
        if pfm.channels != 1 || !pfm.height.is_multiple_of(8) || pfm.height == 0 {
            return Err(LightmapError::Layout { channels: pfm.channels, height: pfm.height });
        }
        let (w, h) = (pfm.width, pfm.height / 8);
        let planes = std::array::from_fn(|c| ScalarMap {
            width: w,
            height: h,
            data: pfm.data[c * w * h..(c + 1) * w * h].to_vec(),
        });
        Self::from_planes(planes, color_space)
    }

    pub fn write_pfm(&self, path: &Path) -> Result<(), LightmapError> {
        Ok(self.to_pfm().write(path)?)
    }

    pub fn read_pfm(path: &Path, color_space: ColorSpace) -> Result<Self, LightmapError> {
        Self::from_pfm(&Pfm::read(path)?, color_space)
    }
}

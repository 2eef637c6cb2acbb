use super::lightmaps::{Channel, ColorSpace, LightmapError, SixWayLightmaps};
use crate::image::{encode_png_rgba, ImageError, Pfm, RgbaImage, ScalarMap};
use std::path::Path;

/// Channel sources of the two packed textures, RGBA order:
/// texture 1 = right, top, back, transparency;
/// texture 2 = left, bottom, front, emissive.
pub const TEXTURE1: [Channel; 4] = [Channel::XPos, Channel::YPos, Channel::ZNeg, Channel::Transparency];
pub const TEXTURE2: [Channel; 4] = [Channel::XNeg, Channel::YNeg, Channel::ZPos, Channel::Emissive];

#[derive(Debug, Clone, PartialEq)]
pub struct PackedTextures {
    pub image1: RgbaImage,
    pub image2: RgbaImage,
}

fn pack_one(maps: &SixWayLightmaps, layout: &[Channel; 4]) -> RgbaImage {
    let planes = layout.map(|c| maps.plane(c));
    RgbaImage {
        width: maps.width,
        height: maps.height,
        data: (0..maps.width * maps.height)
            .map(|i| [planes[0].data[i], planes[1].data[i], planes[2].data[i], planes[3].data[i]])
            .collect(),
    }
}

pub fn pack_textures(maps: &SixWayLightmaps) -> PackedTextures {
    PackedTextures { image1: pack_one(maps, &TEXTURE1), image2: pack_one(maps, &TEXTURE2) }
}

pub fn unpack_textures(packed: &PackedTextures, color_space: ColorSpace) -> Result<SixWayLightmaps, LightmapError> {
    let (a, b) = (&packed.image1, &packed.image2);
    if a.width != b.width || a.height != b.height {
        return Err(LightmapError::Dims);
    }
    let mut planes: [ScalarMap; 8] = std::array::from_fn(|_| ScalarMap::new(a.width, a.height));
    for (img, layout) in [(a, &TEXTURE1), (b, &TEXTURE2)] {
        for (k, c) in layout.iter().enumerate() {
            planes[*c as usize].data = img.data.iter().map(|p| p[k]).collect();
        }
    }
    Ok(SixWayLightmaps { width: a.width, height: a.height, planes, color_space })
}

/// Single-channel PFM holding the R, G, B, A planes stacked vertically.
pub fn rgba_to_pfm(img: &RgbaImage) -> Pfm {
    let mut data = Vec::with_capacity(img.data.len() * 4);
    for k in 0..4 {
        data.extend(img.data.iter().map(|p| p[k]));
    }
    Pfm { width: img.width, height: img.height * 4, channels: 1, data }
}

pub fn pfm_to_rgba(pfm: &Pfm) -> Result<RgbaImage, ImageError> {
    if pfm.channels != 1 || !pfm.height.is_multiple_of(4) {
        return Err(ImageError::Dims(format!("expected 4 stacked planes, got {} channels, height {}", pfm.channels, pfm.height)));
    }
    let (w, h) = (pfm.width, pfm.height / 4);
    let n = w * h;
    Ok(RgbaImage {
        width: w,
        height: h,
        data: (0..n).map(|i| std::array::from_fn(|k| pfm.data[k * n + i])).collect(),
    })
}

/// Writes `<stem>_1.png`, `<stem>_2.png`, `<stem>_1.pfm`, `<stem>_2.pfm`
/// and returns the paths.
pub fn export_textures(packed: &PackedTextures, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>, ImageError> {
    let mut written = Vec::new();
    for (i, img) in [(1, &packed.image1), (2, &packed.image2)] {
        let png = dir.join(format!("{stem}_{i}.png"));
        std::fs::write(&png, encode_png_rgba(img)?).map_err(crate::image::io_err(&png))?;
        let pfm = dir.join(format!("{stem}_{i}.pfm"));
        rgba_to_pfm(img).write(&pfm)?;
        written.push(png);
        written.push(pfm);
    }
    Ok(written)
}

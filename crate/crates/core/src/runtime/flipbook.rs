use super::pack::PackedTextures;
use crate::image::RgbaImage;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlipbookError {
    #[error("flipbook needs at least one frame")]
    Empty,
    #[error("frame {0} differs in size from frame 0")]
    FrameDims(usize),
    #[error("frame index {k} out of range for {count} frames")]
    OutOfRange { k: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtlasLayout {
    #[serde(rename = "K")]
    pub frames: usize,
    pub columns: usize,
    pub rows: usize,
    pub frame_w: usize,
    pub frame_h: usize,
}

impl AtlasLayout {
    pub fn new(frames: usize, frame_w: usize, frame_h: usize) -> Self {
        let columns = (1..=frames).find(|c| c * c >= frames).unwrap_or(1);
        let rows = frames.div_ceil(columns).max(1);
        Self { frames, columns, rows, frame_w, frame_h }
    }

    pub fn atlas_size(&self) -> (usize, usize) {
        (self.columns * self.frame_w, self.rows * self.frame_h)
    }

    /// Top-left pixel of frame `k`, row-major.
    pub fn origin(&self, k: usize) -> (usize, usize) {
        ((k % self.columns) * self.frame_w, (k / self.columns) * self.frame_h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipbookAtlas {
    pub layout: AtlasLayout,
    pub textures: PackedTextures,
}

fn blit(dst: &mut RgbaImage, src: &RgbaImage, ox: usize, oy: usize) {
    for y in 0..src.height {
        let d = (oy + y) * dst.width + ox;
        dst.data[d..d + src.width].copy_from_slice(&src.data[y * src.width..(y + 1) * src.width]);
    }
}

fn crop(src: &RgbaImage, ox: usize, oy: usize, w: usize, h: usize) -> RgbaImage {
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let s = (oy + y) * src.width + ox;
        data.extend_from_slice(&src.data[s..s + w]);
    }
    RgbaImage { width: w, height: h, data }
}

pub fn pack_flipbook(frames: &[PackedTextures]) -> Result<FlipbookAtlas, FlipbookError> {
    let first = frames.first().ok_or(FlipbookError::Empty)?;
    let (fw, fh) = (first.image1.width, first.image1.height);
    for (i, f) in frames.iter().enumerate() {
        let ok = [&f.image1, &f.image2].iter().all(|im| im.width == fw && im.height == fh);
        if !ok {
            return Err(FlipbookError::FrameDims(i));
        }
    }
    let layout = AtlasLayout::new(frames.len(), fw, fh);
    let (aw, ah) = layout.atlas_size();
    let mut image1 = RgbaImage::new(aw, ah);
    let mut image2 = RgbaImage::new(aw, ah);
    for (k, f) in frames.iter().enumerate() {
        let (ox, oy) = layout.origin(k);
        blit(&mut image1, &f.image1, ox, oy);
        blit(&mut image2, &f.image2, ox, oy);
    }
    Ok(FlipbookAtlas { layout, textures: PackedTextures { image1, image2 } })
}

pub fn sample_flipbook(atlas: &FlipbookAtlas, k: usize) -> Result<PackedTextures, FlipbookError> {
    let l = &atlas.layout;
    if k >= l.frames {
        return Err(FlipbookError::OutOfRange { k, count: l.frames });
    }
    let (ox, oy) = l.origin(k);
    Ok(PackedTextures {
        image1: crop(&atlas.textures.image1, ox, oy, l.frame_w, l.frame_h),
        image2: crop(&atlas.textures.image2, ox, oy, l.frame_w, l.frame_h),
    })
}

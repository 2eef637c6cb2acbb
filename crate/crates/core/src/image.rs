//! Float image containers, sRGB transfer, and PFM/PNG codecs.
//!
//! All in-memory images are row-major with row 0 at the top. PFM files
//! store rows bottom-to-top; the codec flips on the way in and out.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed PFM header: {0}")]
    BadHeader(String),
    #[error("PFM payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported PFM channel count {0}")]
    Channels(usize),
    #[error("png codec: {0}")]
    Png(String),
    #[error("dimension mismatch: {0}")]
    Dims(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ImageError + '_ {
    move |source| ImageError::Io { path: path.display().to_string(), source }
}

/// Single-channel float map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, v: f32) -> Self {
        Self { width, height, data: vec![v; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_dims(&self, w: usize, h: usize) -> bool {
        self.width == w && self.height == h
    }
}

/// Three-channel float image (linear or sRGB encoded, by convention of the caller).
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, v: [f32; 3]) -> Self {
        Self { width, height, data: vec![v; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|p| [f(p[0]), f(p[1]), f(p[2])]).collect(),
        }
    }

    pub fn to_srgb(&self) -> RgbImage {
        self.map(|v| linear_to_srgb(v.clamp(0.0, 1.0)))
    }

    pub fn to_linear(&self) -> RgbImage {
        self.map(srgb_to_linear)
    }

    /// 8-bit RGB bytes; values are clamped and taken as already encoded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|p| p.iter().map(|&v| quantize(v)))
            .collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() != width * height * 3 {
            return Err(ImageError::Dims(format!(
                "{} bytes for {width}x{height} rgb",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(3)
            .map(|c| [c[0] as f32 / 255.0, c[1] as f32 / 255.0, c[2] as f32 / 255.0])
            .collect();
        Ok(Self { width, height, data })
    }

    pub fn flat(&self) -> Vec<f32> {
        self.data.iter().flatten().copied().collect()
    }
}

/// Four-channel float image, used for packed lightmap textures.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbaImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 4]>,
}

impl RgbaImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![[0.0; 4]; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 4] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f32; 4]) {
        self.data[y * self.width + x] = v;
    }
}

#[inline]
fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// IEC 61966-2-1 encode.
pub fn linear_to_srgb(v: f32) -> f32 {
    let v = v as f64;
    let e = if v <= 0.003_130_8 { 12.92 * v } else { 1.055 * v.powf(1.0 / 2.4) - 0.055 };
    e as f32
}

/// IEC 61966-2-1 decode.
pub fn srgb_to_linear(v: f32) -> f32 {
    let v = v as f64;
    let l = if v <= 0.040_45 { v / 12.92 } else { ((v + 0.055) / 1.055).powf(2.4) };
    l as f32
}

/// Decoded PFM contents, rows top-to-bottom, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Pfm {
    pub fn plane(&self, c: usize) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    pub fn from_planes(planes: &[&ScalarMap]) -> Result<Pfm, ImageError> {
        let channels = planes.len();
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let (w, h) = (planes[0].width, planes[0].height);
        if planes.iter().any(|p| !p.same_dims(w, h)) {
            return Err(ImageError::Dims("planes differ in size".into()));
        }
        let mut data = Vec::with_capacity(w * h * channels);
        for i in 0..w * h {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Ok(Pfm { width: w, height: h, channels, data })
    }

    /// Little-endian PFM bytes (scale -1.0).
    pub fn encode(&self) -> Vec<u8> {
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{tag}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        let row = self.width * self.channels;
        out.reserve(self.data.len() * 4);
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Pfm, ImageError> {
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(ImageError::BadHeader("header ended early".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // exactly one whitespace byte separates the header from the payload
        pos += 1;
        let channels = match fields[0].as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(ImageError::BadHeader(format!("unknown tag {other:?}"))),
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| ImageError::BadHeader(format!("bad size {s:?}")));
        let width = parse(&fields[1])?;
        let height = parse(&fields[2])?;
        let scale: f32 = fields[3]
            .parse()
            .map_err(|_| ImageError::BadHeader(format!("bad scale {:?}", fields[3])))?;
        let little = scale < 0.0;
        let expected = width * height * channels * 4;
        let payload = bytes.get(pos..).unwrap_or(&[]);
        if payload.len() < expected {
            return Err(ImageError::Truncated { expected, found: payload.len() });
        }
        let row = width * channels;
        let mut data = vec![0f32; width * height * channels];
        for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
            let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
            let (file_row, col) = (i / row, i % row);
            data[(height - 1 - file_row) * row + col] = v;
        }
        Ok(Pfm { width, height, channels, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), ImageError> {
        let mut f = fs::File::create(path).map_err(io_err(path))?;
        f.write_all(&self.encode()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Pfm, ImageError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        Pfm::decode(&bytes)
    }
}

pub fn rgb_to_pfm(img: &RgbImage) -> Pfm {
    Pfm { width: img.width, height: img.height, channels: 3, data: img.flat() }
}

pub fn pfm_to_rgb(p: &Pfm) -> Result<RgbImage, ImageError> {
    if p.channels != 3 {
        return Err(ImageError::Channels(p.channels));
    }
    Ok(RgbImage {
        width: p.width,
        height: p.height,
        data: p.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    })
}

/// Encode already-display-referred RGB values as an 8-bit PNG.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, ImageError> {
    encode_png_raw(img.width, img.height, &img.to_bytes(), image::ExtendedColorType::Rgb8)
}

pub fn encode_png_rgba(img: &RgbaImage) -> Result<Vec<u8>, ImageError> {
    let bytes: Vec<u8> = img.data.iter().flat_map(|p| p.iter().map(|&v| quantize(v))).collect();
    encode_png_raw(img.width, img.height, &bytes, image::ExtendedColorType::Rgba8)
}

fn encode_png_raw(
    w: usize,
    h: usize,
    bytes: &[u8],
    color: image::ExtendedColorType,
) -> Result<Vec<u8>, ImageError> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(bytes, w as u32, h as u32, color)
        .map_err(|e| ImageError::Png(e.to_string()))?;
    Ok(out)
}

/// Decode a PNG into 8-bit-quantized float RGB in `[0, 1]`.
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| ImageError::Png(e.to_string()))?
        .to_rgb8();
    RgbImage::from_bytes(img.width() as usize, img.height() as usize, img.as_raw())
}

//! Generator architecture descriptor and the `.nsw` weight file.
//!
//! Layout (little-endian): `"NSW1"`, u32 version, u32 descriptor length,
//! UTF-8 JSON descriptor, then records until end of file, each
//! `u16 name length, name, u8 rank, u32 dims[rank], f32 data[prod(dims)]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"NSW1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightError {
    #[error("bad magic {0:?}, expected \"NSW1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file truncated: {0}")]
    Truncated(String),
    #[error("bad architecture descriptor: {0}")]
    Descriptor(String),
    #[error("missing record {0:?}")]
    MissingRecord(String),
    #[error("record {name:?} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("duplicate record {0:?}")]
    DuplicateRecord(String),
    #[error("unexpected record {0:?} not used by the architecture")]
    ExtraRecord(String),
    #[error("record {name:?} holds a non-finite value")]
    NonFinite { name: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputGroup {
    pub name: String,
    /// Two lightmap channel names (`x+`, ..., `transparency`, `emissive`).
    pub channels: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetArchitecture {
    pub input_channels: usize,
    pub output_channels: usize,
    pub encoder_levels: usize,
    pub base_width: usize,
    pub max_width: usize,
    pub blocks_per_level: usize,
    pub middle_blocks: usize,
    pub adapter_blocks: usize,
    pub norm_eps: f32,
    pub groups: Vec<OutputGroup>,
}

fn group(name: &str, a: &str, b: &str) -> OutputGroup {
    OutputGroup { name: name.into(), channels: [a.into(), b.into()] }
}

impl Default for NetArchitecture {
    fn default() -> Self {
        Self {
            input_channels: 3,
            output_channels: 8,
            encoder_levels: 4,
            base_width: 32,
            max_width: 256,
            blocks_per_level: 2,
            middle_blocks: 2,
            adapter_blocks: 2,
            norm_eps: 1e-6,
            groups: vec![
                group("front_back", "z+", "z-"),
                group("left_right", "x-", "x+"),
                group("up_down", "y+", "y-"),
                group("transparency_emissive", "transparency", "emissive"),
            ],
        }
    }
}

impl NetArchitecture {
    /// A small variant for tests and quick experiments.
    pub fn tiny() -> Self {
        Self { encoder_levels: 2, base_width: 4, max_width: 16, blocks_per_level: 1, middle_blocks: 1, adapter_blocks: 1, ..Self::default() }
    }

    pub fn width(&self, level: usize) -> usize {
        (self.base_width << level.min(20)).min(self.max_width)
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        let bad = |m: String| Err(WeightError::Descriptor(m));
        if self.input_channels != 3 {
            return bad(format!("input_channels must be 3, got {}", self.input_channels));
        }
        if self.output_channels != 8 {
            return bad(format!("output_channels must be 8, got {}", self.output_channels));
        }
        if self.base_width == 0 || self.max_width < self.base_width {
            return bad("widths must satisfy 0 < base_width <= max_width".into());
        }
        if self.encoder_levels > 8 {
            return bad(format!("encoder_levels {} too deep", self.encoder_levels));
        }
        if !(self.norm_eps > 0.0) {
            return bad("norm_eps must be positive".into());
        }
        if self.groups.len() != 4 {
            return bad(format!("exactly four adapters required, got {}", self.groups.len()));
        }
        let mut seen = Vec::new();
        for g in &self.groups {
            for c in &g.channels {
                if channel_index(c).is_none() {
                    return bad(format!("unknown channel {c:?} in group {}", g.name));
                }
                if seen.contains(c) {
                    return bad(format!("channel {c:?} assigned twice"));
                }
                seen.push(c.clone());
            }
        }
        Ok(())
    }

    /// Every record the forward pass consumes, in canonical order.
    pub fn expected_records(&self) -> Vec<(String, Vec<usize>)> {
        let mut r = Vec::new();
        let conv = |r: &mut Vec<(String, Vec<usize>)>, name: String, o: usize, i: usize, k: usize| {
            r.push((format!("{name}.weight"), vec![o, i, k, k]));
            r.push((format!("{name}.bias"), vec![o]));
        };
        let block = |r: &mut Vec<(String, Vec<usize>)>, p: String, c: usize| {
            r.push((format!("{p}.norm1.weight"), vec![c]));
            r.push((format!("{p}.norm1.bias"), vec![c]));
            conv(r, format!("{p}.conv1"), 2 * c, c, 1);
            r.push((format!("{p}.conv2.weight"), vec![2 * c, 1, 3, 3]));
            r.push((format!("{p}.conv2.bias"), vec![2 * c]));
            conv(r, format!("{p}.sca"), c, c, 1);
            conv(r, format!("{p}.conv3"), c, c, 1);
            r.push((format!("{p}.beta"), vec![c]));
            r.push((format!("{p}.norm2.weight"), vec![c]));
            r.push((format!("{p}.norm2.bias"), vec![c]));
            conv(r, format!("{p}.conv4"), 2 * c, c, 1);
            conv(r, format!("{p}.conv5"), c, c, 1);
            r.push((format!("{p}.gamma"), vec![c]));
        };
        let w0 = self.width(0);
        conv(&mut r, "intro".into(), w0, self.input_channels, 3);
        for l in 0..self.encoder_levels {
            for b in 0..self.blocks_per_level {
                block(&mut r, format!("enc.{l}.blocks.{b}"), self.width(l));
            }
            // 2x2 stride-2 downsampling
            r.push((format!("enc.{l}.down.weight"), vec![self.width(l + 1), self.width(l), 2, 2]));
            r.push((format!("enc.{l}.down.bias"), vec![self.width(l + 1)]));
        }
        for b in 0..self.middle_blocks {
            block(&mut r, format!("mid.blocks.{b}"), self.width(self.encoder_levels));
        }
        for l in (0..self.encoder_levels).rev() {
            let c = self.width(l);
            conv(&mut r, format!("dec.{l}.up"), c, self.width(l + 1), 3);
            conv(&mut r, format!("dec.{l}.fuse"), c, 2 * c, 1);
            for b in 0..self.blocks_per_level {
                block(&mut r, format!("dec.{l}.blocks.{b}"), c);
            }
        }
        for g in 0..self.groups.len() {
            for b in 0..self.adapter_blocks {
                block(&mut r, format!("adapters.{g}.blocks.{b}"), w0);
            }
            conv(&mut r, format!("adapters.{g}.proj"), 2, w0, 1);
        }
        r
    }
}

/// Lightmap channel index for a descriptor channel name.
pub fn channel_index(name: &str) -> Option<usize> {
    ["x+", "x-", "y+", "y-", "z+", "z-", "transparency", "emissive"].iter().position(|n| *n == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    pub version: u32,
    pub architecture: NetArchitecture,
    pub records: Vec<WeightRecord>,
}

impl WeightStore {
    /// All records present with the expected shapes, filled with `f(name, len)`.
    fn build(arch: &NetArchitecture, mut fill: impl FnMut(&str, &[usize]) -> Vec<f32>) -> Self {
        let records = arch
            .expected_records()
            .into_iter()
            .map(|(name, shape)| {
                let data = fill(&name, &shape);
                WeightRecord { name, shape, data }
            })
            .collect();
        Self { version: VERSION, architecture: arch.clone(), records }
    }

    pub fn zeros(arch: &NetArchitecture) -> Self {
        Self::build(arch, |_, shape| vec![0.0; shape.iter().product()])
    }

    /// Deterministic random initialization: uniform fan-in scaled kernels,
    /// unit norm scales, and residual scales that keep activations bounded.
    pub fn random(arch: &NetArchitecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(arch, |name, shape| {
            let n: usize = shape.iter().product();
            if name.ends_with("norm1.weight") || name.ends_with("norm2.weight") {
                vec![1.0; n]
            } else if name.ends_with(".beta") || name.ends_with(".gamma") {
                vec![0.2; n]
            } else if name.contains("norm") || name.ends_with(".bias") {
                (0..n).map(|_| rng.random_range(-0.05f32..0.05)).collect()
            } else {
                let fan_in: usize = shape[1..].iter().product();
                let limit = (3.0 / fan_in.max(1) as f32).sqrt();
                (0..n).map(|_| rng.random_range(-limit..limit)).collect()
            }
        })
    }

    pub fn get(&self, name: &str) -> Option<&WeightRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut WeightRecord> {
        self.records.iter_mut().find(|r| r.name == name)
    }

    /// Checks the records against the architecture: every expected record
    /// present with its shape, no duplicates, nothing extra, finite values.
    pub fn validate(&self) -> Result<(), WeightError> {
        if self.version != VERSION {
            return Err(WeightError::UnsupportedVersion(self.version));
        }
        self.architecture.validate()?;
        let mut by_name: HashMap<&str, &WeightRecord> = HashMap::new();
        for r in &self.records {
            if by_name.insert(&r.name, r).is_some() {
                return Err(WeightError::DuplicateRecord(r.name.clone()));
            }
        }
        let expected = self.architecture.expected_records();
        for (name, shape) in &expected {
            let r = by_name.remove(name.as_str()).ok_or_else(|| WeightError::MissingRecord(name.clone()))?;
            if &r.shape != shape || r.data.len() != shape.iter().product::<usize>() {
                return Err(WeightError::ShapeMismatch { name: name.clone(), expected: shape.clone(), found: r.shape.clone() });
            }
            if r.data.iter().any(|v| !v.is_finite()) {
                return Err(WeightError::NonFinite { name: name.clone() });
            }
        }
        if let Some(extra) = self.records.iter().find(|r| by_name.contains_key(r.name.as_str())) {
            return Err(WeightError::ExtraRecord(extra.name.clone()));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.architecture).expect("descriptor serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for r in &self.records {
            out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.push(r.shape.len() as u8);
            for d in &r.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &r.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses without validating against the architecture.
    pub fn decode_unchecked(bytes: &[u8]) -> Result<Self, WeightError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(WeightError::BadMagic(magic));
        }
        let version = cur.u32("version")?;
        if version != VERSION {
            return Err(WeightError::UnsupportedVersion(version));
        }
        let json_len = cur.u32("descriptor length")? as usize;
        let json = cur.take(json_len, "descriptor")?;
        let architecture: NetArchitecture =
            serde_json::from_slice(json).map_err(|e| WeightError::Descriptor(e.to_string()))?;
        let mut records = Vec::new();
        while cur.pos < bytes.len() {
            let name_len = u16::from_le_bytes(cur.take(2, "name length")?.try_into().expect("2 bytes")) as usize;
            let name = String::from_utf8(cur.take(name_len, "name")?.to_vec())
                .map_err(|_| WeightError::Descriptor("record name is not UTF-8".into()))?;
            let rank = cur.take(1, "rank")?[0] as usize;
            let shape = (0..rank).map(|_| cur.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let data = cur
                .take(n * 4, &name)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            records.push(WeightRecord { name, shape, data });
        }
        Ok(Self { version, architecture, records })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WeightError> {
        let store = Self::decode_unchecked(bytes)?;
        store.validate()?;
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightError> {
        std::fs::write(path, self.encode())
            .map_err(|e| WeightError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, WeightError> {
        let bytes = std::fs::read(path)
            .map_err(|e| WeightError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::decode(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(WeightError::Truncated(format!("{what} at byte {}", self.pos)));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, WeightError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

//! Wire format shared with the viewer: JSON control messages in, binary
//! frames and JSON stats/errors out.

use serde::{Deserialize, Serialize};

pub const FRAME_HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("frame shorter than the {FRAME_HEADER_LEN}-byte header ({0} bytes)")]
    Short(usize),
    #[error("header announces {announced} payload bytes, frame carries {actual}")]
    PayloadLength { announced: u32, actual: usize },
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlMessage {
    SetCamera { yaw: f64, pitch: f64, dist: f64 },
    SetLight { index: usize, dir: [f64; 3], rgb: [f32; 3] },
    AddLight { dir: [f64; 3], rgb: [f32; 3] },
    RemoveLight { index: usize },
    SetFrame { k: usize },
    SetDensityScale { s: f64 },
    SetPlay { playing: bool },
}

impl ControlMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Per-stage render times in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub guiding_ms: f64,
    pub inference_ms: f64,
    pub shadow_ms: f64,
    pub composite_ms: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.guiding_ms + self.inference_ms + self.shadow_ms + self.composite_ms
    }
}

/// Server to client, JSON text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent right after the binary frame it describes. `state_seq` counts
    /// the control messages applied before the frame was rendered.
    Stats { frame_id: u64, state_seq: u64, frame: usize, render_ms: f64, stages: StageTimes },
    Error { message: String, frame_id: u64 },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameHeader {
    pub width: u32,
    pub height: u32,
    pub frame_id: u64,
    pub render_ms: f32,
    pub payload_len: u32,
}

impl FrameHeader {
    pub fn to_bytes(&self) -> [u8; FRAME_HEADER_LEN] {
        let mut b = [0u8; FRAME_HEADER_LEN];
        b[0..4].copy_from_slice(&self.width.to_le_bytes());
        b[4..8].copy_from_slice(&self.height.to_le_bytes());
        b[8..16].copy_from_slice(&self.frame_id.to_le_bytes());
        b[16..20].copy_from_slice(&self.render_ms.to_le_bytes());
        b[20..24].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, ProtocolError> {
        if b.len() < FRAME_HEADER_LEN {
            return Err(ProtocolError::Short(b.len()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        Ok(Self {
            width: u32_at(0),
            height: u32_at(4),
            frame_id: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            render_ms: f32::from_le_bytes(b[16..20].try_into().unwrap()),
            payload_len: u32_at(20),
        })
    }
}

pub fn encode_frame(width: u32, height: u32, frame_id: u64, render_ms: f32, png: &[u8]) -> Vec<u8> {
    let header = FrameHeader { width, height, frame_id, render_ms, payload_len: png.len() as u32 };
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + png.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(png);
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<(FrameHeader, &[u8]), ProtocolError> {
    let header = FrameHeader::from_bytes(bytes)?;
    let payload = &bytes[FRAME_HEADER_LEN..];
    if payload.len() != header.payload_len as usize {
        return Err(ProtocolError::PayloadLength { announced: header.payload_len, actual: payload.len() });
    }
    Ok((header, payload))
}

//! Paired training tuples: grid, guiding map and ground-truth lightmaps per
//! (frame, camera), plus a JSON index.

use super::emissive::{bake_emissive, EmissiveLut};
use super::sixway::{bake_sixway, BakeConfig};
use crate::guiding::{generate_guiding, GuidingConfig};
use crate::runtime::{Channel, ColorSpace};
use crate::volume::{Camera, MediumParams, PhaseFunction, Sequence};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const INDEX_NAME: &str = "index.json";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("no cameras given")]
    NoCameras,
    #[error("frame {frame}, camera {camera}: {message}")]
    Record { frame: usize, camera: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub frame: usize,
    pub camera_id: usize,
    /// Paths are relative to the directory holding the index.
    pub guiding_path: String,
    pub lightmaps_path: String,
    pub grid_path: String,
    /// Divides the guiding depth channel for network input.
    pub depth_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    /// Encoding of the scattering planes in the lightmap files.
    pub color_space: ColorSpace,
    pub width: usize,
    pub height: usize,
    pub records: Vec<DatasetRecord>,
}

impl DatasetIndex {
    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let io = |message: String| DatasetError::Io { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }
}

/// Everything `bake_tuple` wrote, for run manifests.
#[derive(Debug, Clone)]
pub struct DatasetOutput {
    pub index: DatasetIndex,
    pub files: Vec<PathBuf>,
}

/// `target` relative to the directory `base`, through `..` where needed;
/// unchanged when either cannot be resolved.
fn relative_path(base: &Path, target: &Path) -> PathBuf {
    let (Ok(b), Ok(t)) = (base.canonicalize(), target.canonicalize()) else {
        return target.to_path_buf();
    };
    let common = b.components().zip(t.components()).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.components().count() {
        rel.push("..");
    }
    rel.extend(t.components().skip(common));
    rel
}

#[allow(clippy::too_many_arguments)]
pub fn bake_tuple(
    sequence: &Sequence,
    medium: &MediumParams,
    phase: &PhaseFunction,
    cameras: &[Camera],
    bake_config: &BakeConfig,
    guiding_config: &GuidingConfig,
    lut: &EmissiveLut,
    out_dir: &Path,
) -> Result<DatasetOutput, DatasetError> {
    if sequence.is_empty() {
        return Err(DatasetError::EmptySequence);
    }
    if cameras.is_empty() {
        return Err(DatasetError::NoCameras);
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| DatasetError::Io { path: out_dir.display().to_string(), message: e.to_string() })?;
    let mut records = Vec::new();
    let mut files = Vec::new();
    for frame in 0..sequence.len() {
        let grid = sequence
            .load_frame(frame)
            .map_err(|e| DatasetError::Record { frame, camera: 0, message: e.to_string() })?;
        let grid_path = sequence.frame_path(frame);
        for (camera_id, camera) in cameras.iter().enumerate() {
            let fail = |message: String| DatasetError::Record { frame, camera: camera_id, message };
            let guiding = generate_guiding(&grid, medium, phase, camera, guiding_config).map_err(|e| fail(e.to_string()))?;
            let mut maps = bake_sixway(&grid, medium, phase, camera, bake_config).map_err(|e| fail(e.to_string()))?;
            let step = bake_config.primary_step.unwrap_or(grid.voxel_width() * 0.5);
            *maps.plane_mut(Channel::Emissive) =
                bake_emissive(&grid, medium, camera, lut, step).map_err(|e| fail(e.to_string()))?;
            let maps = maps.to_srgb();

            let stem = format!("f{frame:05}_c{camera_id:02}");
            let guiding_name = format!("{stem}_guiding.pfm");
            let lightmaps_name = format!("{stem}_lightmaps.pfm");
            let guiding_path = out_dir.join(&guiding_name);
            guiding.write(&guiding_path).map_err(|e| fail(e.to_string()))?;
            let lightmaps_path = out_dir.join(&lightmaps_name);
            maps.write_pfm(&lightmaps_path).map_err(|e| fail(e.to_string()))?;
            files.push(crate::guiding::GuidingMap::meta_path(&guiding_path));
            files.push(guiding_path);
            files.push(lightmaps_path);
            records.push(DatasetRecord {
                frame,
                camera_id,
                guiding_path: guiding_name,
                lightmaps_path: lightmaps_name,
                grid_path: relative_path(out_dir, &grid_path).display().to_string(),
                depth_scale: guiding.depth_scale,
            });
        }
    }
    let index = DatasetIndex {
        version: 1,
        color_space: ColorSpace::Srgb,
        width: cameras[0].width,
        height: cameras[0].height,
        records,
    };
    let index_path = out_dir.join(INDEX_NAME);
    std::fs::write(&index_path, serde_json::to_string_pretty(&index).expect("index serializes"))
        .map_err(|e| DatasetError::Io { path: index_path.display().to_string(), message: e.to_string() })?;
    files.push(index_path);
    Ok(DatasetOutput { index, files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guiding::GuidingMap;
    use crate::runtime::SixWayLightmaps;
    use crate::volume::{camera_ring, generate_procedural, ProceduralKind, Projection};
    use crate::Vec3;

    #[test]
    fn two_frames_three_cameras() {
        let dir = tempfile::tempdir().unwrap();
        let seq_dir = dir.path().join("seq");
        generate_procedural(ProceduralKind::Plume, 4, [12, 12, 12], 2, &seq_dir).unwrap();
        let seq = Sequence::open(&seq_dir.join(crate::volume::MANIFEST_NAME)).unwrap();
        let template = Camera::look_at(
            Projection::Orthographic { height: 14.0 },
            Vec3::new(0.0, -20.0, 0.0),
            Vec3::ZERO,
            Vec3::Z,
            (16, 16),
            0.0,
            40.0,
        )
        .unwrap();
        let cams = camera_ring(&template, Vec3::ZERO, 3, 0.0, 10.0).unwrap();
        let cfg = BakeConfig { spp: 2, ..Default::default() };
        let run = |out: &Path| {
            bake_tuple(&seq, &MediumParams::default(), &PhaseFunction::isotropic(), &cams, &cfg, &GuidingConfig::default(), &EmissiveLut::default(), out)
                .unwrap()
        };
        let a = dir.path().join("a");
        let out = run(&a);
        assert_eq!(out.index.records.len(), 6);
        assert_eq!(DatasetIndex::read(&a.join(INDEX_NAME)).unwrap(), out.index);
        for r in &out.index.records {
            let g = GuidingMap::read(&a.join(&r.guiding_path)).unwrap();
            assert_eq!((g.width, g.height), (16, 16));
            SixWayLightmaps::read_pfm(&a.join(&r.lightmaps_path), ColorSpace::Srgb).unwrap();
            assert!(r.grid_path.starts_with("../seq/"), "{}", r.grid_path);
            assert!(a.join(&r.grid_path).is_file());
        }
        let b = dir.path().join("b");
        run(&b);
        for r in &out.index.records {
            for name in [&r.guiding_path, &r.lightmaps_path] {
                assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
            }
        }
    }
}

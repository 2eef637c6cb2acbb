use super::grid::{load_grid, save_grid, DensityGrid, GridError};
use super::procedural::{ProceduralError, ProceduralKind, ProceduralSource};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum SequenceError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Procedural(#[from] ProceduralError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("sequence is empty")]
    Empty,
    #[error("frame indices must be strictly increasing ({prev} then {next})")]
    Order { prev: u64, next: u64 },
    #[error("frame {t} does not match the sequence dims/voxel width")]
    Mismatch { t: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFrame {
    pub t: u64,
    /// Relative to the manifest's directory unless absolute.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub dims: [usize; 3],
    pub voxel_width: f32,
    pub frames: Vec<SequenceFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SequenceManifest {
    pub fn validate(&self) -> Result<(), SequenceError> {
        if self.frames.is_empty() {
            return Err(SequenceError::Empty);
        }
        for w in self.frames.windows(2) {
            if w[1].t <= w[0].t {
                return Err(SequenceError::Order { prev: w[0].t, next: w[1].t });
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), SequenceError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json).map_err(|source| SequenceError::Io { path: path.display().to_string(), source })
    }

    pub fn read(path: &Path) -> Result<Self, SequenceError> {
        let text = fs::read_to_string(path)
            .map_err(|source| SequenceError::Io { path: path.display().to_string(), source })?;
        let m: SequenceManifest = serde_json::from_str(&text)
            .map_err(|e| SequenceError::Manifest { path: path.display().to_string(), message: e.to_string() })?;
        m.validate()?;
        Ok(m)
    }
}

pub fn frame_file_name(t: u64) -> String {
    format!("frame_{t:05}.dgrid")
}

/// A manifest together with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub manifest: SequenceManifest,
    pub base_dir: PathBuf,
}

impl Sequence {
    pub fn open(manifest_path: &Path) -> Result<Self, SequenceError> {
        let manifest = SequenceManifest::read(manifest_path)?;
        let base_dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { manifest, base_dir })
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn frame_path(&self, i: usize) -> PathBuf {
        let p = &self.manifest.frames[i].path;
        if p.is_absolute() {
            p.clone()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads frame `i` and checks it against the shared dims and voxel width.
    pub fn load_frame(&self, i: usize) -> Result<DensityGrid, SequenceError> {
        let grid = load_grid(&self.frame_path(i))?;
        if grid.dims() != self.manifest.dims || grid.voxel_width() as f32 != self.manifest.voxel_width {
            return Err(SequenceError::Mismatch { t: self.manifest.frames[i].t });
        }
        Ok(grid)
    }

    pub fn load_all(&self) -> Result<Vec<DensityGrid>, SequenceError> {
        (0..self.len()).map(|i| self.load_frame(i)).collect()
    }
}

/// Writes `grids` as `frame_%05d.dgrid` files plus `manifest.json` into `dir`.
pub fn write_sequence(
    dir: &Path,
    grids: &[DensityGrid],
    source: Option<String>,
    seed: Option<u64>,
) -> Result<SequenceManifest, SequenceError> {
    let first = grids.first().ok_or(SequenceError::Empty)?;
    fs::create_dir_all(dir).map_err(|source| SequenceError::Io { path: dir.display().to_string(), source })?;
    let mut frames = Vec::with_capacity(grids.len());
    for (t, g) in grids.iter().enumerate() {
        if g.dims() != first.dims() || g.voxel_width() != first.voxel_width() {
            return Err(SequenceError::Mismatch { t: t as u64 });
        }
        let name = frame_file_name(t as u64);
        save_grid(g, &dir.join(&name))?;
        frames.push(SequenceFrame { t: t as u64, path: PathBuf::from(name) });
    }
    let manifest = SequenceManifest {
        dims: first.dims(),
        voxel_width: first.voxel_width() as f32,
        frames,
        source,
        seed,
    };
    manifest.write(&dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

/// Generates a procedural sequence on disk and returns its manifest.
pub fn generate_procedural(
    kind: ProceduralKind,
    seed: u64,
    dims: [usize; 3],
    frames: usize,
    dir: &Path,
) -> Result<SequenceManifest, SequenceError> {
    let src = ProceduralSource::new(kind, seed, dims)?;
    let grids = src.frames(frames)?;
    write_sequence(dir, &grids, Some(kind.to_string()), Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_procedural(ProceduralKind::Plume, 3, [8, 8, 10], 3, dir.path()).unwrap();
        assert_eq!(m.frames.len(), 3);
        assert_eq!(m.frames[2].path, PathBuf::from("frame_00002.dgrid"));
        let seq = Sequence::open(&dir.path().join(MANIFEST_NAME)).unwrap();
        let grids = seq.load_all().unwrap();
        let direct = ProceduralSource::new(ProceduralKind::Plume, 3, [8, 8, 10]).unwrap().frames(3).unwrap();
        assert_eq!(grids, direct);
    }

    #[test]
    fn rejects_unordered_frames() {
        let m = SequenceManifest {
            dims: [8; 3],
            voxel_width: 1.0,
            frames: vec![
                SequenceFrame { t: 2, path: "a".into() },
                SequenceFrame { t: 2, path: "b".into() },
            ],
            source: None,
            seed: None,
        };
        assert!(matches!(m.validate(), Err(SequenceError::Order { .. })));
    }
}

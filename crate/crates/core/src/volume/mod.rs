//! Density grids, medium coefficients, phase function, cameras and smoke sources.

pub mod camera;
pub mod grid;
pub mod medium;
pub mod procedural;
pub mod sequence;

pub use camera::{camera_ring, Camera, CameraError, Projection};
pub use grid::{load_grid, save_grid, DensityGrid, GridError};
pub use medium::{hg_phase, MediumError, MediumParams, PhaseFunction};
pub use procedural::{ProceduralError, ProceduralKind, ProceduralSource};
pub use sequence::{frame_file_name, generate_procedural, write_sequence, MANIFEST_NAME, Sequence, SequenceError, SequenceFrame, SequenceManifest};

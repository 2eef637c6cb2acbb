//! CPU forward pass of the guiding-map-to-lightmaps generator.

pub mod model;
pub mod tensor;
pub mod weights;

pub use model::{receptive_radius, Generator, InferenceError};
pub use tensor::{conv2d, ConvShape, Padding, ShapeError, Tensor};
pub use weights::{NetArchitecture, OutputGroup, WeightError, WeightRecord, WeightStore};

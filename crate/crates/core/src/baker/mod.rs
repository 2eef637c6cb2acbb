pub mod dataset;
pub mod emissive;
pub mod sixway;
pub mod transmittance;

pub use dataset::{bake_tuple, DatasetError, DatasetIndex, DatasetOutput, DatasetRecord, INDEX_NAME};
pub use emissive::{bake_emissive, integrated_emission, EmissiveLut, LutError};
pub use sixway::{bake_sixway, AxisSample, BakeConfig, BakeError, ScatterRenderer, AXIS_LIGHTS};
pub use transmittance::{march_optical_depth, transmittance, AxisDepthTables};

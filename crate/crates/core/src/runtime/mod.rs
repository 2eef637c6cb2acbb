//! Runtime relighting: six-way interpolation, compositing, texture
//! packing, flipbook atlases and shadowing of the smoke shell.

pub mod flipbook;
pub mod light;
pub mod lightmaps;
pub mod pack;
pub mod shadow;

pub use flipbook::{pack_flipbook, sample_flipbook, AtlasLayout, FlipbookAtlas, FlipbookError};
pub use light::{axis_weights, checked_unit, composite, interpolate_scattering, Background, CompositeError, DirectionalLight};
pub use lightmaps::{Channel, ColorSpace, LightmapError, SixWayLightmaps};
pub use pack::{export_textures, pack_textures, pfm_to_rgba, rgba_to_pfm, unpack_textures, PackedTextures, TEXTURE1, TEXTURE2};
pub use shadow::{shadow_visibility, Occluder, ShadowContext, ShadowError, DEFAULT_DEPTH_BIAS, DEFAULT_SHADOW_RES};

//! Neural six-way lightmaps for real-time smoke.
//!
//! The crate covers every stage of the pipeline: a single-scattering
//! reference baker, the coarse guiding-map ray march, a CPU forward pass of
//! the guiding-map-to-lightmaps U-Net, and runtime relighting/compositing of
//! six-way lightmaps, plus image metrics and a stage benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baker;
pub mod bench;
pub mod guiding;
pub mod image;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod runtime;
pub mod volume;

pub use math::Vec3;

//! Geometry and inference kernels for camera-conditioned multi-view diffusion:
//! epipolar cross-view attention masks, Plücker ray embeddings, masked
//! multi-view attention and a pairwise joint DDIM sampler, together with a
//! synthetic point-cloud scene and PSNR/SSIM evaluation for checking them.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the double-precision instantiations used by the CLI.

pub mod attention;
pub mod camera;
pub mod cli;
pub mod config;
pub mod diffusion;
pub mod epipolar;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod plucker;
pub mod scalar;
pub mod scene;

pub use error::{Error, Result};
pub use grid::Grid;
pub use scalar::Real;

pub type Grid64 = grid::Grid<f64>;
pub type Grid32 = grid::Grid<f32>;
pub type Vec3d = linalg::Vec3<f64>;
pub type Mat3d = linalg::Mat3<f64>;
pub type Intrinsics64 = camera::Intrinsics<f64>;
pub type Intrinsics32 = camera::Intrinsics<f32>;
pub type CameraPose64 = camera::CameraPose<f64>;
pub type CameraPose32 = camera::CameraPose<f32>;
pub type RelativePose64 = camera::RelativePose<f64>;
pub type Ray64 = camera::Ray<f64>;
pub type PluckerGrid64 = plucker::PluckerGrid<f64>;
pub type PluckerProjection64 = plucker::PluckerProjection<f64>;
pub type AttentionWeights64 = attention::AttentionWeights<f64>;
pub type AttentionWeights32 = attention::AttentionWeights<f32>;
pub type DiffusionSchedule64 = diffusion::DiffusionSchedule<f64>;
pub type CfgScales64 = diffusion::CfgScales<f64>;

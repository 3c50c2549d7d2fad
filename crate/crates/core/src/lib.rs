//! Geometry and evaluation kernels for quadrilateral scene-text detection.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` and `*32` aliases below fix the precision.
//!
//! * [`quadgeom`]: canonical quads, areas, shrinking, clipping, IoU.
//! * [`qrc`]: quad-guided sampling grids and reference convolutions.
//! * [`targets`]: pyramid assignment, dense targets, decoding.
//! * [`losses`]: focal, smooth-L1 and the combined objective.
//! * [`postprocess`]: score filtering and polygonal NMS.
//! * [`evalkit`]: annotation I/O and precision/recall/F evaluation.

pub mod blob;
pub mod buffers;
mod cell;
mod error;
pub mod evalkit;
pub mod losses;
pub mod postprocess;
pub mod qrc;
pub mod quadgeom;
mod scalar;
pub mod targets;

pub use cell::Cell;
pub use error::{Error, Result};
pub use postprocess::Detection;
pub use quadgeom::{GroundTruth, Point, Quad};
pub use scalar::Scalar;

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type Quad64 = Quad<f64>;
pub type Quad32 = Quad<f32>;
pub type GroundTruth64 = GroundTruth<f64>;
pub type GroundTruth32 = GroundTruth<f32>;
pub type Detection64 = Detection<f64>;
pub type Detection32 = Detection<f32>;
pub type FeatureMap64 = qrc::FeatureMap<f64>;
pub type FeatureMap32 = qrc::FeatureMap<f32>;
pub type Kernel64 = qrc::Kernel<f64>;
pub type Kernel32 = qrc::Kernel<f32>;
pub type LevelTargets64 = targets::LevelTargets<f64>;
pub type LevelTargets32 = targets::LevelTargets<f32>;
pub type LossConfig64 = losses::LossConfig<f64>;
pub type LossConfig32 = losses::LossConfig<f32>;

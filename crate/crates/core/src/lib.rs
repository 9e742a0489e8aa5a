//! Plenoptic camera toolkit built on the linear fractional transformation
//! (LFT) model.
//!
//! The model keeps the main lens and the micro-lens array decoupled: the main
//! lens is a thin lens with radial-tangential distortion, and every micro-lens
//! acts on the resulting virtual image through a single blend factor `alpha`
//! that is a Möbius function of virtual depth.
//!
//! The numeric core in [`model`] and [`geometry`] is generic over the scalar
//! type; the aliases below fix it to `f64`, which everything downstream
//! (simulation, detection, calibration) uses.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod board;
pub mod calibrate;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod io;
pub mod model;
pub mod raw;
pub mod scalar;
pub mod simulate;

pub use scalar::Real;

pub type Point2 = geometry::Point2<f64>;
pub type Point3 = geometry::Point3<f64>;
pub type Pose = geometry::Pose<f64>;
pub type MainLensIntrinsics = model::MainLensIntrinsics<f64>;
pub type Distortion = model::Distortion<f64>;
pub type MlaGeometry = model::MlaGeometry<f64>;
pub type CameraModel = model::CameraModel<f64>;
pub type HAlpha = model::HAlpha<f64>;

pub use model::{LensIndex, ModelError};

//! The linear fractional transformation (LFT) camera model.
//!
//! A board point is carried into the camera frame, imaged by the thin main
//! lens into a virtual point, distorted on the normalized plane and then
//! re-imaged by one micro-lens. The micro-lens step is an affine blend of the
//! virtual pixel point and the lens center weighted by `alpha`, which is a
//! Möbius function of the virtual depth.

mod distortion;
mod mla;
mod projection;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use distortion::Distortion;
pub use mla::{LensIndex, MlaGeometry};
pub use projection::{
    alpha_of_depth, depth_of_alpha, main_lens_project, main_lens_project_eps, nousias_equivalence,
    project_full, project_through_lens, virtual_pixel, HAlpha, VirtualPixel,
};

/// Guard below which a depth denominator is treated as singular, in mm.
pub const EPS_DEPTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("point lies on the main-lens focal plane")]
    FocalPlaneDegenerate,
    #[error("virtual point lies on the micro-lens array plane")]
    MlaPlaneDegenerate,
    #[error("alpha is at unity, virtual depth is unbounded")]
    AlphaAtUnity,
    #[error("micro-lens index ({i}, {j}) outside {n_w}x{n_h} grid")]
    IndexOutOfRange { i: usize, j: usize, n_w: usize, n_h: usize },
    #[error("undistortion did not converge")]
    NoConvergence,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Thin main lens plus the sensor sampling and principal point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainLensIntrinsics<T> {
    /// Focal length `F`, mm.
    pub focal_length: T,
    /// Principal point, pixels.
    pub u0: T,
    pub v0: T,
    /// Pixel pitch, mm per pixel.
    pub sx: T,
    pub sy: T,
}

impl<T: Real> MainLensIntrinsics<T> {
    pub fn new(focal_length: T, u0: T, v0: T, sx: T, sy: T) -> Result<Self> {
        let lens = Self { focal_length, u0, v0, sx, sy };
        lens.validate()?;
        Ok(lens)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length > T::zero()) {
            return Err(ModelError::InvalidParameter("focal length must be positive".into()));
        }
        if !(self.sx > T::zero() && self.sy > T::zero()) {
            return Err(ModelError::InvalidParameter("pixel pitch must be positive".into()));
        }
        if !(self.u0.is_finite() && self.v0.is_finite()) {
            return Err(ModelError::InvalidParameter("principal point must be finite".into()));
        }
        Ok(())
    }

    /// Focal length in pixels along x (`k11` of the intrinsic matrix).
    pub fn fx(&self) -> T {
        self.focal_length / self.sx
    }

    pub fn fy(&self) -> T {
        self.focal_length / self.sy
    }
}

/// Complete intrinsic state of the plenoptic camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    pub lens: MainLensIntrinsics<T>,
    pub dist: Distortion<T>,
    pub mla: MlaGeometry<T>,
}

impl<T: Real> CameraModel<T> {
    pub fn new(lens: MainLensIntrinsics<T>, dist: Distortion<T>, mla: MlaGeometry<T>) -> Result<Self> {
        lens.validate()?;
        mla.validate()?;
        Ok(Self { lens, dist, mla })
    }
}

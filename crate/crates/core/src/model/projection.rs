use serde::{Deserialize, Serialize};

use super::{CameraModel, LensIndex, MlaGeometry, ModelError, Result, EPS_DEPTH};
use crate::geometry::{Point2, Point3, Pose};
use crate::scalar::Real;

/// Thin-lens image of a camera-frame point: `P' = F / (Z - F) * P`.
pub fn main_lens_project<T: Real>(p: Point3<T>, focal_length: T) -> Result<Point3<T>> {
    main_lens_project_eps(p, focal_length, T::lit(EPS_DEPTH))
}

pub fn main_lens_project_eps<T: Real>(p: Point3<T>, focal_length: T, eps: T) -> Result<Point3<T>> {
    let denom = p.z - focal_length;
    if !(denom.abs() >= eps) {
        return Err(ModelError::FocalPlaneDegenerate);
    }
    let s = focal_length / denom;
    Ok(Point3::new(s * p.x, s * p.y, s * p.z))
}

/// `alpha = (Z' - d_c) / (Z' - d_m)`.
pub fn alpha_of_depth<T: Real>(zc_prime: T, mla: &MlaGeometry<T>) -> Result<T> {
    let denom = zc_prime - mla.d_m;
    if !(denom.abs() >= T::lit(EPS_DEPTH)) {
        return Err(ModelError::MlaPlaneDegenerate);
    }
    Ok((zc_prime - mla.d_c) / denom)
}

/// Virtual depth recovered from alpha, `Z' = (d_c - alpha d_m) / (1 - alpha)`.
pub fn depth_of_alpha<T: Real>(alpha: T, mla: &MlaGeometry<T>) -> Result<T> {
    let denom = T::one() - alpha;
    if !(denom.abs() >= T::lit(1e-12)) {
        return Err(ModelError::AlphaAtUnity);
    }
    Ok((mla.d_c - alpha * mla.d_m) / denom)
}

/// MLA-side nuisance parameters `(K1, K2)` of the competing plenoptic model,
/// expressed through `F`, `d_c` and `d_m`.
pub fn nousias_equivalence<T: Real>(focal_length: T, mla: &MlaGeometry<T>) -> Result<(T, T)> {
    let gap = mla.d_m - mla.d_c;
    if gap == T::zero() {
        return Err(ModelError::DegenerateGeometry("d_m equals d_c"));
    }
    if focal_length == T::zero() {
        return Err(ModelError::DegenerateGeometry("zero focal length"));
    }
    let k1 = -(mla.d_m + focal_length) * mla.d_c / (gap * focal_length);
    let k2 = mla.d_m * mla.d_c / gap;
    Ok((k1, k2))
}

/// Per-lens projection: an `alpha`-weighted blend toward the lens center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HAlpha<T> {
    pub alpha: T,
    /// Micro-lens center in pixels.
    pub lens_center: Point2<T>,
}

impl<T: Real> HAlpha<T> {
    pub fn new(alpha: T, lens_center: Point2<T>) -> Self {
        Self { alpha, lens_center }
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        let a = self.alpha;
        let b = T::one() - a;
        let (z, o) = (T::zero(), T::one());
        [
            [b, z, a * self.lens_center.x],
            [z, b, a * self.lens_center.y],
            [z, z, o],
        ]
    }

    /// Applies the matrix to the homogeneous point `(p, 1)`.
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        let m = self.matrix();
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        Point2::new(
            (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
            (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w,
        )
    }
}

/// Distorted virtual point of a camera-frame point in sensor pixels,
/// together with its virtual depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirtualPixel<T> {
    pub pixel: Point2<T>,
    /// `Z'_c`, mm.
    pub depth: T,
}

/// Main-lens half of the model: thin-lens imaging, then distortion on the
/// normalized plane, then pixel sampling with the principal point.
pub fn virtual_pixel<T: Real>(p_cam: Point3<T>, cam: &CameraModel<T>) -> Result<VirtualPixel<T>> {
    if !(p_cam.z.abs() >= T::lit(EPS_DEPTH)) {
        return Err(ModelError::FocalPlaneDegenerate);
    }
    let virt = main_lens_project(p_cam, cam.lens.focal_length)?;
    let normalized = Point2::new(p_cam.x / p_cam.z, p_cam.y / p_cam.z);
    let d = cam.dist.distort(normalized);
    let pixel = Point2::new(
        d.x * virt.z / cam.lens.sx + cam.lens.u0,
        d.y * virt.z / cam.lens.sy + cam.lens.v0,
    );
    Ok(VirtualPixel { pixel, depth: virt.z })
}

/// Micro-lens half of the model for an already computed virtual pixel point.
pub fn project_through_lens<T: Real>(
    virt: VirtualPixel<T>,
    mla: &MlaGeometry<T>,
    lens_center: Point2<T>,
) -> Result<Point2<T>> {
    let alpha = alpha_of_depth(virt.depth, mla)?;
    let one_minus = T::one() - alpha;
    Ok(Point2::new(
        alpha * lens_center.x + one_minus * virt.pixel.x,
        alpha * lens_center.y + one_minus * virt.pixel.y,
    ))
}

/// Raw-image pixel at which micro-lens `lens` images the board point.
pub fn project_full<T: Real>(
    p_board: Point3<T>,
    pose: &Pose<T>,
    cam: &CameraModel<T>,
    lens: LensIndex,
) -> Result<Point2<T>> {
    let center = cam.mla.lens_center(lens.0, lens.1)?;
    let virt = virtual_pixel(pose.transform(p_board), cam)?;
    project_through_lens(virt, &cam.mla, center)
}

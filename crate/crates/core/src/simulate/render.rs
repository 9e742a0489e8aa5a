use rayon::prelude::*;

use super::{Result, SimConfig, SimError};
use crate::Distortion;
use crate::raw::RawImage;
use crate::{CameraModel, Point2, Point3, Pose};

/// Plane `n . p = n . t` of the target in camera coordinates.
struct Plane {
    n: [f64; 3],
    d: f64,
}

/// Board-side point imaged at sensor pixel `pixel` through the lens centered
/// at `lens_center` (pixels), if the chief ray meets the target plane in
/// front of the main lens.
///
/// The chief ray runs from the sensor point through the micro-lens center
/// into virtual space. A point at virtual depth `z` on that ray is taken
/// back through distortion and the thin lens, and `z` is chosen so that the
/// resulting object point lies on the plane.
pub fn trace_pixel(cam: &CameraModel, pose: &Pose, pixel: Point2, lens_center: Point2) -> Option<Point3> {
    let n = pose.plane_normal();
    let t = pose.translation;
    let plane = Plane { n, d: n[0] * t[0] + n[1] * t[1] + n[2] * t[2] };
    trace(cam, &plane, pixel, lens_center)
}

#[inline]
fn trace(cam: &CameraModel, plane: &Plane, pixel: Point2, lens_center: Point2) -> Option<Point3> {
    let l = &cam.lens;
    let (d_c, d_m) = (cam.mla.d_c, cam.mla.d_m);
    let f = l.focal_length;
    let s = [(pixel.x - l.u0) * l.sx, (pixel.y - l.v0) * l.sy];
    let m = [(lens_center.x - l.u0) * l.sx, (lens_center.y - l.v0) * l.sy];
    // Q(z) = m + (z - d_m) * dir, with dir = (m - s) / (d_m - d_c).
    let dir = [(m[0] - s[0]) / (d_m - d_c), (m[1] - s[1]) / (d_m - d_c)];
    let [nx, ny, nz] = plane.n;
    if plane.d == 0.0 {
        return None;
    }
    let a = [m[0] - d_m * dir[0], m[1] - d_m * dir[1]];
    let lhs = 1.0 / f - (nx * dir[0] + ny * dir[1] + nz) / plane.d;
    let rhs = 1.0 + (nx * a[0] + ny * a[1]) / plane.d;
    let mut z = rhs / lhs;
    if !z.is_finite() {
        return None;
    }
    let normalized = |z: f64, dist: &Distortion| -> Option<Point2> {
        let xd = Point2::new((a[0] + z * dir[0]) / z, (a[1] + z * dir[1]) / z);
        if dist.is_identity() {
            Some(xd)
        } else {
            dist.undistort(xd).ok()
        }
    };
    if !cam.dist.is_identity() {
        // Secant iteration on h(z) = 1/F - 1/z - n.(x_n(z), 1) / (n.t),
        // seeded by the distortion-free solution.
        let h = |z: f64| -> Option<f64> {
            let x = normalized(z, &cam.dist)?;
            Some(1.0 / f - 1.0 / z - (nx * x.x + ny * x.y + nz) / plane.d)
        };
        let mut z0 = z;
        let mut h0 = h(z0)?;
        let mut z1 = z0 * (1.0 + 1e-6);
        let mut h1 = h(z1)?;
        for _ in 0..50 {
            if h1 == h0 {
                break;
            }
            let z2 = z1 - h1 * (z1 - z0) / (h1 - h0);
            if !z2.is_finite() {
                return None;
            }
            z0 = z1;
            h0 = h1;
            z1 = z2;
            h1 = h(z1)?;
            if (z1 - z0).abs() <= 1e-14 * z1.abs() {
                break;
            }
        }
        z = z1;
    }
    if !(z > f) {
        return None;
    }
    let big_z = f * z / (z - f);
    let x = normalized(z, &cam.dist)?;
    Some(Point3::new(x.x * big_z, x.y * big_z, big_z))
}

fn check_in_front(cfg: &SimConfig, pose: &Pose) -> Result<()> {
    let (w, h) = cfg.target.extent_mm;
    for (x, y) in [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)] {
        let p = pose.transform(Point3::new(x * w, y * h, 0.0));
        if !(p.z > cfg.cam.lens.focal_length) {
            return Err(SimError::TargetBehindFocalPlane);
        }
    }
    Ok(())
}

/// Renders the raw image of the target at `pose`.
///
/// Each pixel is traced through its nearest micro-lens center along the
/// chief ray only; pixels whose ray misses the target get the background
/// value. Rows are rendered in parallel and every pixel is written exactly
/// once, so the output does not depend on the thread count.
pub fn render_raw(cfg: &SimConfig, pose: &Pose) -> Result<RawImage> {
    cfg.cam.mla.validate()?;
    cfg.cam.lens.validate()?;
    check_in_front(cfg, pose)?;
    let (w, h) = (cfg.cam.mla.sensor_w, cfg.cam.mla.sensor_h);
    let n = pose.plane_normal();
    let t = pose.translation;
    let plane = Plane { n, d: n[0] * t[0] + n[1] * t[1] + n[2] * t[2] };
    let mut data = vec![cfg.background; w * h];
    let hits: usize = data
        .par_chunks_mut(w.max(1))
        .enumerate()
        .map(|(y, row)| {
            let mut hits = 0;
            for (x, out) in row.iter_mut().enumerate() {
                let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let Some((i, j)) = cfg.cam.mla.nearest_lens(p) else { continue };
                let Ok(c) = cfg.cam.mla.lens_center(i, j) else { continue };
                let Some(q) = trace(&cfg.cam, &plane, p, c) else { continue };
                let b = pose.inverse_transform(q);
                if let Some(v) = cfg.target.sample(b.x, b.y) {
                    *out = v.round().clamp(0.0, 255.0) as u8;
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    if hits == 0 {
        return Err(SimError::EmptyFieldOfView);
    }
    Ok(RawImage { width: w, height: h, data })
}

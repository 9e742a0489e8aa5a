use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::bundle::{adjust, params_to_pose, pose_to_params, Layout};
use super::homography::fit_homography;
use super::lm::{levenberg_marquardt, LmOptions, LmReport};
use super::{CalibError, Result};
use crate::model::virtual_pixel;
use crate::{CameraModel, Distortion, MainLensIntrinsics, MlaGeometry, Point2, Point3, Pose};

/// A board corner and its estimated virtual point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualObservation {
    pub board: Point3,
    pub virtual_px: Point2,
}

/// Intrinsics from nominal values: focal length as given, principal point at
/// the sensor center. Distortion starts at zero (see [`Distortion::none`]).
pub fn init_main_lens(f_nominal_mm: f64, sx: f64, sy: f64, mla: &MlaGeometry) -> Result<MainLensIntrinsics> {
    if !(f_nominal_mm > 0.0) {
        return Err(CalibError::InvalidInput(format!("nominal focal length must be positive, got {f_nominal_mm}")));
    }
    let lens = MainLensIntrinsics {
        focal_length: f_nominal_mm,
        u0: mla.sensor_w as f64 / 2.0,
        v0: mla.sensor_h as f64 / 2.0,
        sx,
        sy,
    };
    lens.validate()?;
    Ok(lens)
}

fn main_lens_camera(lens: MainLensIntrinsics, dist: Distortion, mla: &MlaGeometry) -> CameraModel {
    CameraModel { lens, dist, mla: *mla }
}

fn view_residuals(cam: &CameraModel, pose: &Pose, obs: &[VirtualObservation]) -> Option<Vec<f64>> {
    let mut r = Vec::with_capacity(2 * obs.len());
    for o in obs {
        let p = pose.transform(o.board);
        if !(p.z > cam.lens.focal_length) {
            return None;
        }
        let v = virtual_pixel(p, cam).ok()?;
        r.push(v.pixel.x - o.virtual_px.x);
        r.push(v.pixel.y - o.virtual_px.y);
    }
    Some(r)
}

fn nearest_rotation(m: Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

/// Board pose from the virtual points of one view.
///
/// Without distortion the virtual image is a pinhole image with focal length
/// `F / s` taken from the front focal point, so a plane homography gives the
/// pose up to the `F` shift along the optical axis. The estimate is then
/// refined on the exact main-lens model.
pub fn estimate_pose_planar(
    obs: &[VirtualObservation],
    lens: &MainLensIntrinsics,
    dist: &Distortion,
    opts: &LmOptions,
) -> Result<Pose> {
    if obs.len() < 4 {
        return Err(CalibError::DegenerateConfiguration);
    }
    let f = lens.focal_length;
    let mut img = Vec::with_capacity(obs.len());
    for o in obs {
        let m = Point2::new((o.virtual_px.x - lens.u0) * lens.sx / f, (o.virtual_px.y - lens.v0) * lens.sy / f);
        img.push(dist.undistort(m).unwrap_or(m));
    }
    let board: Vec<Point2> = obs.iter().map(|o| Point2::new(o.board.x, o.board.y)).collect();
    let h = fit_homography(&board, &img).ok_or(CalibError::DegenerateConfiguration)?;
    let (h1, h2, h3) = (h.column(0).into_owned(), h.column(1).into_owned(), h.column(2).into_owned());
    let mut lambda = 2.0 / (h1.norm() + h2.norm());
    if h3.z * lambda < 0.0 {
        lambda = -lambda;
    }
    let r1: Vector3<f64> = h1 * lambda;
    let r2: Vector3<f64> = h2 * lambda;
    let r3 = r1.cross(&r2);
    let r = nearest_rotation(Matrix3::from_columns(&[r1, r2, r3]));
    let t = h3 * lambda;
    let rotation = [
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ];
    let pose = Pose::new(rotation, [t.x, t.y, t.z + f]);
    if obs.iter().any(|o| pose.transform(o.board).z <= f) {
        return Err(CalibError::BehindCamera);
    }
    let cam = CameraModel { lens: *lens, dist: *dist, mla: placeholder_mla() };
    let x0 = pose_to_params(&pose);
    let rep = levenberg_marquardt(
        |x| view_residuals(&cam, &params_to_pose(x), obs).unwrap_or_else(|| vec![f64::NAN; 2 * obs.len()]),
        &x0,
        opts,
    )?;
    Ok(params_to_pose(&rep.x))
}

/// The main-lens stage never reads MLA fields.
fn placeholder_mla() -> MlaGeometry {
    MlaGeometry {
        d_c: 2.0,
        d_m: 1.0,
        n_h: 1,
        n_w: 1,
        sensor_h: 1,
        sensor_w: 1,
        offset_x: 0.0,
        offset_y: 0.0,
        theta: 0.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MainLensFit {
    pub lens: MainLensIntrinsics,
    pub dist: Distortion,
    pub poses: Vec<Pose>,
    /// RMS virtual-point reprojection error, px.
    pub rmse_px: f64,
    pub report: LmReport,
}

/// Planar calibration of the main lens on virtual points: nominal
/// initialization, per-view homography poses, then a joint refinement of
/// focal length, principal point, all poses and, if `fit_distortion`,
/// distortion.
pub fn calibrate_main_lens(
    views: &[Vec<VirtualObservation>],
    f_nominal_mm: f64,
    sx: f64,
    sy: f64,
    mla: &MlaGeometry,
    fit_distortion: bool,
    opts: &LmOptions,
) -> Result<MainLensFit> {
    if views.len() < 3 {
        return Err(CalibError::TooFewViews(views.len()));
    }
    let lens0 = init_main_lens(f_nominal_mm, sx, sy, mla)?;
    let dist0 = Distortion::none();
    let poses0 = views
        .iter()
        .map(|v| estimate_pose_planar(v, &lens0, &dist0, opts))
        .collect::<Result<Vec<_>>>()?;
    let template = main_lens_camera(lens0, dist0, mla);
    let rows: Vec<usize> = views.iter().map(|v| 2 * v.len()).collect();
    let residuals = |cam: &CameraModel, pose: &Pose, v: usize| view_residuals(cam, pose, &views[v]);
    let (cam, poses, rep) =
        adjust(&template, &poses0, rows, Layout { lens: true, distortion: fit_distortion, mla: false }, opts, residuals)?;
    let n_obs: usize = views.iter().map(|v| v.len()).sum();
    Ok(MainLensFit {
        lens: cam.lens,
        dist: cam.dist,
        poses,
        rmse_px: (rep.cost / n_obs.max(1) as f64).sqrt(),
        report: rep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::BoardSpec;

    fn mla() -> MlaGeometry {
        MlaGeometry {
            d_c: 58.0,
            d_m: 57.0,
            n_h: 60,
            n_w: 80,
            sensor_h: 1200,
            sensor_w: 1600,
            offset_x: 0.0,
            offset_y: 0.0,
            theta: 0.0,
        }
    }

    fn lens() -> MainLensIntrinsics {
        MainLensIntrinsics { focal_length: 50.0, u0: 800.0, v0: 600.0, sx: 0.0144, sy: 0.0144 }
    }

    fn observe(pose: &Pose, lens: &MainLensIntrinsics, dist: &Distortion) -> Vec<VirtualObservation> {
        let cam = CameraModel { lens: *lens, dist: *dist, mla: mla() };
        BoardSpec::new(6, 9, 6.0)
            .corners()
            .into_iter()
            .map(|b| VirtualObservation { board: b, virtual_px: virtual_pixel(pose.transform(b), &cam).unwrap().pixel })
            .collect()
    }

    #[test]
    fn init_values() {
        let big = MlaGeometry { sensor_w: 6500, sensor_h: 4700, ..mla() };
        let l = init_main_lens(50.0, 0.0036, 0.0036, &big).unwrap();
        assert!((l.fx() - 13888.9).abs() < 0.05);
        assert_eq!((l.u0, l.v0), (3250.0, 2350.0));
        assert!(init_main_lens(0.0, 0.0036, 0.0036, &big).is_err());
    }

    #[test]
    fn frontal_pose_recovered() {
        let pose = Pose::from_translation([0.0, 0.0, 450.0]);
        let obs = observe(&pose, &lens(), &Distortion::none());
        let est = estimate_pose_planar(&obs, &lens(), &Distortion::none(), &LmOptions::default()).unwrap();
        for k in 0..3 {
            assert!((est.translation[k] - pose.translation[k]).abs() < 1e-6);
        }
        assert!(est.is_rotation(1e-9));
    }

    #[test]
    fn tilted_pose_with_distortion() {
        let pose = Pose::from_euler_xyz(0.3, -0.25, 0.4, [3.0, -5.0, 300.0]);
        let d = Distortion::new(0.05, -0.01, 0.001, -0.002);
        let obs = observe(&pose, &lens(), &d);
        let est = estimate_pose_planar(&obs, &lens(), &d, &LmOptions::default()).unwrap();
        for k in 0..3 {
            assert!((est.translation[k] - pose.translation[k]).abs() < 1e-6);
            for c in 0..3 {
                assert!((est.rotation[k][c] - pose.rotation[k][c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn three_points_are_degenerate() {
        let obs = observe(&Pose::from_translation([0.0, 0.0, 400.0]), &lens(), &Distortion::none());
        assert_eq!(
            estimate_pose_planar(&obs[..3], &lens(), &Distortion::none(), &LmOptions::default()),
            Err(CalibError::DegenerateConfiguration)
        );
    }

    #[test]
    fn main_lens_from_several_views() {
        let truth = MainLensIntrinsics { focal_length: 50.0, u0: 790.0, v0: 612.0, sx: 0.0144, sy: 0.0144 };
        let d = Distortion::new(0.02, 0.0, 0.0, 0.0);
        let poses = [
            Pose::from_euler_xyz(0.3, 0.1, 0.0, [0.0, 0.0, 290.0]),
            Pose::from_euler_xyz(-0.2, 0.35, 0.2, [5.0, 2.0, 300.0]),
            Pose::from_euler_xyz(0.1, -0.4, -0.3, [-4.0, -3.0, 280.0]),
            Pose::from_euler_xyz(-0.35, -0.2, 0.5, [2.0, 6.0, 310.0]),
        ];
        let views: Vec<_> = poses.iter().map(|p| observe(p, &truth, &d)).collect();
        let fit = calibrate_main_lens(&views, 48.0, 0.0144, 0.0144, &mla(), true, &LmOptions::default()).unwrap();
        assert!((fit.lens.focal_length - 50.0).abs() < 1e-6, "{}", fit.lens.focal_length);
        assert!((fit.lens.u0 - 790.0).abs() < 1e-4 && (fit.lens.v0 - 612.0).abs() < 1e-4);
        assert!((fit.dist.k1 - 0.02).abs() < 1e-6);
        assert!(fit.rmse_px < 1e-6);
        assert!(calibrate_main_lens(&views[..2], 50.0, 0.0144, 0.0144, &mla(), true, &LmOptions::default()).is_err());
    }

    #[test]
    fn zero_iterations_keep_initialization() {
        let poses = [
            Pose::from_euler_xyz(0.3, 0.1, 0.0, [0.0, 0.0, 290.0]),
            Pose::from_euler_xyz(-0.2, 0.35, 0.2, [5.0, 2.0, 300.0]),
            Pose::from_euler_xyz(0.1, -0.4, -0.3, [-4.0, -3.0, 280.0]),
        ];
        let views: Vec<_> = poses.iter().map(|p| observe(p, &lens(), &Distortion::none())).collect();
        let opts = LmOptions { max_iters: 0, ..Default::default() };
        let fit = calibrate_main_lens(&views, 47.0, 0.0144, 0.0144, &mla(), true, &opts).unwrap();
        assert_eq!(fit.lens, init_main_lens(47.0, 0.0144, 0.0144, &mla()).unwrap());
        assert!(fit.dist.is_identity());
    }
}

//! Least-squares problems with shared parameters and one pose per view.
//! The Jacobian only re-evaluates the affected view for pose columns.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::lm::{diff_step, solve, LeastSquares, LmOptions, LmReport};
use super::{CalibError, Result};
use crate::model::MainLensIntrinsics;
use crate::{CameraModel, Distortion, MlaGeometry, Pose};

pub(crate) const POSE_DIM: usize = 6;

pub(crate) fn pose_to_params(p: &Pose) -> [f64; 6] {
    let w = p.rotation_vector();
    let t = p.translation;
    [w[0], w[1], w[2], t[0], t[1], t[2]]
}

pub(crate) fn params_to_pose(x: &[f64]) -> Pose {
    Pose::from_rotation_vector([x[0], x[1], x[2]], [x[3], x[4], x[5]])
}

/// Which camera parameters a bundle problem adjusts: focal length and
/// principal point, distortion, and `d_c`/`d_m`, each optional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub lens: bool,
    pub distortion: bool,
    pub mla: bool,
}

pub(crate) fn camera_to_params(cam: &CameraModel, layout: Layout) -> Vec<f64> {
    let l = &cam.lens;
    let d = &cam.dist;
    let mut v = Vec::with_capacity(9);
    if layout.lens {
        v.extend([l.focal_length, l.u0, l.v0]);
    }
    if layout.distortion {
        v.extend([d.k1, d.k2, d.t1, d.t2]);
    }
    if layout.mla {
        // d_c and d_m are nearly collinear in their effect; their difference
        // is the well-conditioned quantity.
        v.extend([cam.mla.d_m, cam.mla.d_c - cam.mla.d_m]);
    }
    v
}

/// Inverse of [`camera_to_params`]; fixed parameters come from `template`.
pub(crate) fn params_to_camera(x: &[f64], template: &CameraModel, layout: Layout) -> Option<CameraModel> {
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut rest = x;
    let mut take = |n: usize| {
        let (head, tail) = rest.split_at(n);
        rest = tail;
        head
    };
    let lens = if layout.lens {
        let p = take(3);
        if p[0] <= 0.0 {
            return None;
        }
        MainLensIntrinsics { focal_length: p[0], u0: p[1], v0: p[2], ..template.lens }
    } else {
        template.lens
    };
    let dist = if layout.distortion {
        let p = take(4);
        Distortion::new(p[0], p[1], p[2], p[3])
    } else {
        template.dist
    };
    let mla = if layout.mla {
        let p = take(2);
        MlaGeometry { d_c: p[0] + p[1], d_m: p[0], ..template.mla }
    } else {
        template.mla
    };
    Some(CameraModel { lens, dist, mla })
}

/// Solves for the camera parameters selected by `layout` and one pose per
/// view, where `view_residuals(cam, pose, v)` gives view `v`'s residuals.
pub(crate) fn adjust<R>(
    template: &CameraModel,
    poses: &[Pose],
    rows: Vec<usize>,
    layout: Layout,
    opts: &LmOptions,
    view_residuals: R,
) -> Result<(CameraModel, Vec<Pose>, LmReport)>
where
    R: Fn(&CameraModel, &Pose, usize) -> Option<Vec<f64>> + Sync,
{
    let mut x0 = camera_to_params(template, layout);
    let n_global = x0.len();
    for p in poses {
        x0.extend(pose_to_params(p));
    }
    let problem = ViewBundle {
        n_global,
        rows,
        eval: |g: &[f64], p: &[f64], v: usize| view_residuals(&params_to_camera(g, template, layout)?, &params_to_pose(p), v),
    };
    let rep = solve(&problem, &x0, opts)?;
    if opts.max_iters == 0 {
        return Ok((*template, poses.to_vec(), rep));
    }
    let cam = params_to_camera(&rep.x[..n_global], template, layout).ok_or(CalibError::NonFiniteResidual)?;
    let out = (0..poses.len())
        .map(|v| params_to_pose(&rep.x[n_global + v * POSE_DIM..n_global + (v + 1) * POSE_DIM]))
        .collect();
    Ok((cam, out, rep))
}

pub(crate) struct ViewBundle<F> {
    pub n_global: usize,
    pub rows: Vec<usize>,
    /// `eval(global, pose, view)` returns that view's residuals.
    pub eval: F,
}

impl<F> ViewBundle<F>
where
    F: Fn(&[f64], &[f64], usize) -> Option<Vec<f64>> + Sync,
{
    fn n_views(&self) -> usize {
        self.rows.len()
    }

    fn split<'a>(&self, x: &'a [f64], v: usize) -> (&'a [f64], &'a [f64]) {
        let start = self.n_global + v * POSE_DIM;
        (&x[..self.n_global], &x[start..start + POSE_DIM])
    }

    fn view_residuals(&self, x: &[f64], v: usize) -> Option<Vec<f64>> {
        let (g, p) = self.split(x, v);
        (self.eval)(g, p, v).filter(|r| r.len() == self.rows[v])
    }
}

impl<F> LeastSquares for ViewBundle<F>
where
    F: Fn(&[f64], &[f64], usize) -> Option<Vec<f64>> + Sync,
{
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        let parts: Option<Vec<Vec<f64>>> = (0..self.n_views()).into_par_iter().map(|v| self.view_residuals(x, v)).collect();
        Some(parts?.concat())
    }

    fn jacobian(&self, x: &[f64], m: usize) -> Option<DMatrix<f64>> {
        let offsets: Vec<usize> = self
            .rows
            .iter()
            .scan(0, |acc, &r| {
                let o = *acc;
                *acc += r;
                Some(o)
            })
            .collect();
        let mut j = DMatrix::zeros(m, x.len());
        let global: Option<Vec<Vec<f64>>> = (0..self.n_global)
            .into_par_iter()
            .map(|k| {
                let h = diff_step(x[k]);
                let mut xp = x.to_vec();
                xp[k] = x[k] + h;
                let rp = self.residuals(&xp)?;
                xp[k] = x[k] - h;
                let rm = self.residuals(&xp)?;
                Some(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            })
            .collect();
        for (k, c) in global?.iter().enumerate() {
            j.column_mut(k).copy_from_slice(c);
        }
        let blocks: Option<Vec<Vec<Vec<f64>>>> = (0..self.n_views())
            .into_par_iter()
            .map(|v| {
                let base = self.n_global + v * POSE_DIM;
                (0..POSE_DIM)
                    .map(|d| {
                        let k = base + d;
                        let h = diff_step(x[k]);
                        let mut xp = x.to_vec();
                        xp[k] = x[k] + h;
                        let rp = self.view_residuals(&xp, v)?;
                        xp[k] = x[k] - h;
                        let rm = self.view_residuals(&xp, v)?;
                        Some(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                    })
                    .collect()
            })
            .collect();
        for (v, cols) in blocks?.iter().enumerate() {
            for (d, c) in cols.iter().enumerate() {
                let k = self.n_global + v * POSE_DIM + d;
                j.view_mut((offsets[v], k), (self.rows[v], 1)).copy_from_slice(c);
            }
        }
        Some(j)
    }
}

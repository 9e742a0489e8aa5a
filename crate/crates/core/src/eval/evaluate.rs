//! Evaluation of a calibrated camera on views with known displacement.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{epsilon_z, equivalence_params, mean_std, r_squared, reprojection_rmse, EquivalenceParams, EvalError, Result};
use crate::board::BoardSpec;
use crate::calibrate::{
    estimate_dc_dm, estimate_pose_planar, prepare_views, refine_pose_lightfield, LmOptions, SkippedView, ViewFeatures,
    VirtualObservation,
};
use crate::features::DetectorParams;
use crate::model::{alpha_of_depth, depth_of_alpha, project_full, virtual_pixel};
use crate::{CameraModel, MlaGeometry, Pose};

/// Per-frame result of a translation sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub view_id: usize,
    /// Board-origin depth from the light-field pose, mm.
    pub z_est_mm: f64,
    pub z_true_mm: Option<f64>,
    /// Relative displacement error against the first frame; absent for the
    /// first frame and when no reference is known.
    pub epsilon_z: Option<f64>,
    pub n_corners: usize,
    pub rmse_lightfield_px: f64,
    pub pose: Pose,
}

/// One corner: alpha, the depth it implies and the depth from PnP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub view_id: usize,
    pub row: usize,
    pub col: usize,
    pub alpha: f64,
    pub z_alpha_mm: f64,
    pub z_pnp_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub frames: Vec<FrameResult>,
    pub epsilon_z_mean: f64,
    pub epsilon_z_std: f64,
    pub rmse_mainlens_px: f64,
    pub rmse_lightfield_px: f64,
    /// Alpha against virtual depth, with `d_c`/`d_m` fitted on these views.
    pub r_squared_alpha: f64,
    /// Same, using the calibrated `d_c`/`d_m`.
    pub r_squared_alpha_calibrated: f64,
    pub dc_fit_mm: f64,
    pub dm_fit_mm: f64,
    pub depth_abs_err_mean_mm: f64,
    pub depth_abs_err_std_mm: f64,
    pub depth_rows: Vec<DepthRow>,
    pub equivalence: EquivalenceParams,
    pub skipped: Vec<SkippedView>,
}

/// Evaluates `cam` on `views`. `true_z_mm`, when not empty, holds the known
/// board depth of each view in the same order and enables the displacement
/// errors.
pub fn evaluate_views(
    cam: &CameraModel,
    views: &[ViewFeatures],
    true_z_mm: &[f64],
    board: &BoardSpec,
    detector: &DetectorParams,
    lm: &LmOptions,
) -> Result<EvaluationReport> {
    if views.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !true_z_mm.is_empty() && true_z_mm.len() != views.len() {
        return Err(EvalError::LengthMismatch);
    }
    let truth = |id: usize| views.iter().position(|v| v.view_id == id).and_then(|k| true_z_mm.get(k).copied());

    let (corrs, alphas, mut skipped) = prepare_views(views, board, &cam.mla, detector);
    let f = cam.lens.focal_length;
    let mut frames = Vec::new();
    let mut main_res = Vec::new();
    let mut raw_res = Vec::new();
    let mut depth_rows = Vec::new();
    for vc in &corrs {
        let mine: Vec<_> = alphas.iter().filter(|a| a.view_id == vc.view_id).collect();
        let obs: Vec<VirtualObservation> =
            mine.iter().map(|a| VirtualObservation { board: a.board_point, virtual_px: a.estimate.virtual_px }).collect();
        let pnp = match estimate_pose_planar(&obs, &cam.lens, &cam.dist, lm) {
            Ok(p) => p,
            Err(e) => {
                skipped.push(SkippedView { view_id: vc.view_id, reason: e.to_string() });
                continue;
            }
        };
        let (pose, _) = match refine_pose_lightfield(cam, &vc.correspondences, &pnp, lm) {
            Ok(r) => r,
            Err(e) => {
                skipped.push(SkippedView { view_id: vc.view_id, reason: e.to_string() });
                continue;
            }
        };
        for a in &mine {
            let Ok(v) = virtual_pixel(pnp.transform(a.board_point), cam) else { continue };
            main_res.push(v.pixel - a.estimate.virtual_px);
            let alpha = a.estimate.alpha();
            let z_alpha = depth_of_alpha(alpha, &cam.mla).unwrap_or(f64::NAN);
            let z = pnp.transform(a.board_point).z;
            depth_rows.push(DepthRow {
                view_id: vc.view_id,
                row: a.corner.0,
                col: a.corner.1,
                alpha,
                z_alpha_mm: z_alpha,
                z_pnp_mm: f * z / (z - f),
            });
        }
        let mut frame_res = Vec::new();
        for c in &vc.correspondences {
            for feat in &c.features {
                if let Ok(p) = project_full(c.board_point, &pose, cam, feat.lens_idx) {
                    frame_res.push(p - feat.position_px);
                }
            }
        }
        raw_res.extend_from_slice(&frame_res);
        frames.push(FrameResult {
            view_id: vc.view_id,
            z_est_mm: pose.translation[2],
            z_true_mm: truth(vc.view_id),
            epsilon_z: None,
            n_corners: mine.len(),
            rmse_lightfield_px: reprojection_rmse(&frame_res).unwrap_or(f64::NAN),
            pose,
        });
    }
    if frames.is_empty() {
        return Err(EvalError::EmptyInput);
    }

    if let Some((z0_est, Some(z0_true))) = frames.first().map(|f| (f.z_est_mm, f.z_true_mm)) {
        for fr in frames.iter_mut().skip(1) {
            if let Some(zt) = fr.z_true_mm {
                fr.epsilon_z = epsilon_z(fr.z_est_mm - z0_est, zt - z0_true).ok();
            }
        }
    }
    let eps: Vec<f64> = frames.iter().filter_map(|f| f.epsilon_z).collect();
    let (epsilon_z_mean, epsilon_z_std) = mean_std(&eps);

    let pairs: Vec<(f64, f64)> = depth_rows.iter().map(|d| (d.alpha, d.z_pnp_mm)).collect();
    let observed: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (dc_fit_mm, dm_fit_mm) = estimate_dc_dm(&pairs).unwrap_or((f64::NAN, f64::NAN));
    let r2_with = |mla: &MlaGeometry| -> f64 {
        let predicted: Option<Vec<f64>> = pairs.iter().map(|p| alpha_of_depth(p.1, mla).ok()).collect();
        predicted.and_then(|p| r_squared(&observed, &p).ok()).unwrap_or(f64::NAN)
    };
    let fitted = MlaGeometry { d_c: dc_fit_mm, d_m: dm_fit_mm, ..cam.mla };
    let abs_err: Vec<f64> = depth_rows.iter().map(|d| (d.z_alpha_mm - d.z_pnp_mm).abs()).collect();
    let (depth_abs_err_mean_mm, depth_abs_err_std_mm) = mean_std(&abs_err);

    Ok(EvaluationReport {
        frames,
        epsilon_z_mean,
        epsilon_z_std,
        rmse_mainlens_px: reprojection_rmse(&main_res).unwrap_or(f64::NAN),
        rmse_lightfield_px: reprojection_rmse(&raw_res).unwrap_or(f64::NAN),
        r_squared_alpha: r2_with(&fitted),
        r_squared_alpha_calibrated: r2_with(&cam.mla),
        dc_fit_mm,
        dm_fit_mm,
        depth_abs_err_mean_mm,
        depth_abs_err_std_mm,
        depth_rows,
        equivalence: equivalence_params(cam)?,
        skipped,
    })
}

impl EvaluationReport {
    /// Columns: `view_id,z_true_mm,z_est_mm,epsilon_z`. Missing values are empty.
    pub fn write_epsilon_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "view_id,z_true_mm,z_est_mm,epsilon_z")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for fr in &self.frames {
            writeln!(f, "{},{},{},{}", fr.view_id, opt(fr.z_true_mm), fr.z_est_mm, opt(fr.epsilon_z))?;
        }
        f.flush()
    }

    /// Columns: `view_id,row,col,alpha,z_pnp_mm,z_alpha_mm`, the alpha
    /// versus virtual depth scatter.
    pub fn write_depth_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "view_id,row,col,alpha,z_pnp_mm,z_alpha_mm")?;
        for d in &self.depth_rows {
            writeln!(f, "{},{},{},{},{},{}", d.view_id, d.row, d.col, d.alpha, d.z_pnp_mm, d.z_alpha_mm)?;
        }
        f.flush()
    }
}


use serde::{Deserialize, Serialize};

use super::CalibrationSolution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewReport {
    pub view_id: usize,
    /// Row-major rotation, board to camera.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t_mm: [f64; 3],
}

/// JSON calibration report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    #[serde(rename = "F_mm")]
    pub f_mm: f64,
    pub dc_mm: f64,
    pub dm_mm: f64,
    pub u0_px: f64,
    pub v0_px: f64,
    pub k1: f64,
    pub k2: f64,
    pub t1: f64,
    pub t2: f64,
    pub per_view: Vec<ViewReport>,
    pub rmse_mainlens_px: f64,
    pub rmse_lightfield_px: f64,
    pub r_squared_alpha_fit: f64,
}

impl From<&CalibrationSolution> for CalibrationReport {
    fn from(s: &CalibrationSolution) -> Self {
        let c = &s.cam;
        Self {
            f_mm: c.lens.focal_length,
            dc_mm: c.mla.d_c,
            dm_mm: c.mla.d_m,
            u0_px: c.lens.u0,
            v0_px: c.lens.v0,
            k1: c.dist.k1,
            k2: c.dist.k2,
            t1: c.dist.t1,
            t2: c.dist.t2,
            per_view: s
                .poses
                .iter()
                .map(|p| {
                    let r = p.pose.rotation;
                    ViewReport {
                        view_id: p.view_id,
                        r: [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]],
                        t_mm: p.pose.translation,
                    }
                })
                .collect(),
            rmse_mainlens_px: s.diagnostics.rmse_mainlens_px,
            rmse_lightfield_px: s.diagnostics.rmse_lightfield_px,
            r_squared_alpha_fit: s.diagnostics.r_squared_alpha,
        }
    }
}

impl ViewReport {
    pub fn pose(&self) -> crate::Pose {
        let r = &self.r;
        crate::Pose::new([[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]], self.t_mm)
    }
}

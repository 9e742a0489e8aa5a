//! Error metrics, cross-model equivalences and noise injection.

mod evaluate;
mod noise;

pub use evaluate::{evaluate_views, DepthRow, EvaluationReport, FrameResult};
pub use noise::{add_observation_noise, add_sensor_noise};

use serde::{Deserialize, Serialize};

use crate::model::{nousias_equivalence, ModelError};
use crate::{CameraModel, Point2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("reference displacement is zero")]
    ZeroDisplacement,
    #[error("observed values have zero variance")]
    DegenerateVariance,
    #[error("empty input")]
    EmptyInput,
    #[error("inputs differ in length or are too short")]
    LengthMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Relative translation error `|delta_hat - delta| / |delta|`.
pub fn epsilon_z(delta_hat: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(EvalError::ZeroDisplacement);
    }
    Ok((delta_hat - delta).abs() / delta.abs())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.len() < 2 {
        return Err(EvalError::LengthMismatch);
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(EvalError::DegenerateVariance);
    }
    let ss_res: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Root mean square of residual vector lengths.
pub fn reprojection_rmse(residuals: &[Point2]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let ss: f64 = residuals.iter().map(|r| r.x * r.x + r.y * r.y).sum();
    Ok((ss / residuals.len() as f64).sqrt())
}

/// Parameters of two other plenoptic camera models expressed through a
/// calibrated camera, for side-by-side comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceParams {
    /// Main-lens focal length from the pixel focal lengths, mm.
    #[serde(rename = "F_mm")]
    pub f_mm: f64,
    /// Main lens to sensor, mm.
    #[serde(rename = "D_mm")]
    pub big_d_mm: f64,
    /// MLA to sensor, mm.
    pub d_mm: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub u0_px: f64,
    pub v0_px: f64,
}

pub fn equivalence_params(cam: &CameraModel) -> Result<EquivalenceParams> {
    let l = &cam.lens;
    let f_mm = 0.5 * (l.fx() * l.sx + l.fy() * l.sy);
    let (k1, k2) = nousias_equivalence(l.focal_length, &cam.mla)?;
    Ok(EquivalenceParams {
        f_mm,
        big_d_mm: cam.mla.d_c,
        d_mm: cam.mla.d_c - cam.mla.d_m,
        k1,
        k2,
        u0_px: l.u0,
        v0_px: l.v0,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MainLensIntrinsics;
    use crate::{Distortion, MlaGeometry};

    #[test]
    fn epsilon_examples() {
        assert!((epsilon_z(10.2, 10.0).unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(epsilon_z(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(epsilon_z(3.0, 0.0), Err(EvalError::ZeroDisplacement));
    }

    #[test]
    fn r_squared_examples() {
        let o = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(r_squared(&o, &o).unwrap(), 1.0);
        assert!(r_squared(&o, &[3.5; 4]).unwrap().abs() < 1e-15);
        assert_eq!(r_squared(&[2.0; 3], &[1.0, 2.0, 3.0]), Err(EvalError::DegenerateVariance));
        assert_eq!(r_squared(&[1.0], &[1.0]), Err(EvalError::LengthMismatch));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(reprojection_rmse(&[Point2::new(0.0, 0.0); 4]).unwrap(), 0.0);
        assert_eq!(reprojection_rmse(&[Point2::new(3.0, 4.0)]).unwrap(), 5.0);
        assert_eq!(reprojection_rmse(&[]), Err(EvalError::EmptyInput));
    }

    fn cam(d_m: f64) -> CameraModel {
        CameraModel {
            lens: MainLensIntrinsics { focal_length: 50.0, u0: 3250.0, v0: 2350.0, sx: 0.0036, sy: 0.0036 },
            dist: Distortion::none(),
            mla: MlaGeometry {
                d_c: 58.0,
                d_m,
                n_h: 470,
                n_w: 650,
                sensor_h: 4700,
                sensor_w: 6500,
                offset_x: 0.0,
                offset_y: 0.0,
                theta: 0.0,
            },
        }
    }

    #[test]
    fn equivalences() {
        let e = equivalence_params(&cam(57.0)).unwrap();
        assert!((e.f_mm - 50.0).abs() < 1e-12);
        assert!((cam(57.0).lens.fx() - 13888.9).abs() < 0.05);
        assert_eq!((e.big_d_mm, e.d_mm), (58.0, 1.0));
        assert!((e.k1 - 124.12).abs() < 1e-9 && (e.k2 + 3306.0).abs() < 1e-9);
        assert!(matches!(equivalence_params(&cam(58.0)), Err(EvalError::Model(ModelError::DegenerateGeometry(_)))));
    }
}
